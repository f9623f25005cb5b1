"""Assemble a whole-body problem from a robot model, an upper-body reference
and a configuration mapping.

Configuration keys (all optional)::

    N: intervals (default: reference rows - 1)
    dt: seconds (default: reference time step)
    track_weight, input_weight
    bounds: {joint: {lower, upper, velocity, acceleration}}   # must lie within model limits
    base:   {base_coord: {lower, upper, velocity, acceleration}}
    contacts: [{leg, mu, normal}]
    q_init: {coordinate: value}                                # default: reference row 0
    terminal_rest: bool

The coordinate vector is the 38 joints followed by the six floating-base
coordinates; every coordinate is a double integrator.
"""

from __future__ import annotations

import numpy as np

from ..robot import BASE_COORDS, RobotModel
from .dynamics import DoubleIntegrator
from .problem import ContactSpec, OcpProblem, ProblemError
from .trajio import Trajectory

LEGS = ("leg_fl", "leg_fr", "leg_hl", "leg_hr")


def coordinate_names(model: RobotModel) -> list[str]:
    return model.joint_names + list(BASE_COORDS)


def limit_table(model: RobotModel, config: dict | None = None):
    """Per-coordinate (lower, upper, velocity, acceleration) after applying config.

    Joint entries in ``config['bounds']`` must lie within the model limits;
    the result is the intersection of model and configured sets.
    """
    config = config or {}
    n = model.n_joints
    names = coordinate_names(model)
    lo = np.concatenate([model.lower, np.full(6, -np.inf)])
    hi = np.concatenate([model.upper, np.full(6, np.inf)])
    vel = np.concatenate([model.velocity_limit, np.full(6, np.inf)])
    acc = np.concatenate([model.acceleration_limit, np.full(6, np.inf)])
    for key, section, allowed in (("bounds", config.get("bounds") or {}, names[:n]), ("base", config.get("base") or {}, names[n:])):
        for name, b in section.items():
            if name not in allowed:
                raise ProblemError(f"{key}: unknown coordinate {name!r}")
            i = names.index(name)
            new_lo = float(b.get("lower", lo[i]))
            new_hi = float(b.get("upper", hi[i]))
            new_v = float(b.get("velocity", vel[i]))
            new_a = float(b.get("acceleration", acc[i]))
            if new_lo < lo[i] or new_hi > hi[i] or new_v > vel[i] or new_a > acc[i]:
                raise ProblemError(f"bounds for {name!r} exceed model limits")
            if not new_lo <= new_hi or new_v <= 0 or new_a <= 0:
                raise ProblemError(f"bounds for {name!r} are empty")
            lo[i], hi[i], vel[i], acc[i] = new_lo, new_hi, new_v, new_a
    return lo, hi, vel, acc


def build_problem(model: RobotModel, reference: Trajectory, config: dict | None = None) -> OcpProblem:
    config = dict(config or {})
    names = coordinate_names(model)
    upper = set(model.joint_names[i] for i in model.upper_body())
    unknown = [c for c in reference.names if c not in names]
    if unknown:
        raise ProblemError(f"reference columns not in model: {unknown}")
    missing = sorted(upper - set(reference.names))
    if missing:
        raise ProblemError(f"reference lacks upper-body joints: {missing}")

    N = int(config.get("N", len(reference) - 1))
    if len(reference) < N + 1:
        raise ProblemError(f"reference has {len(reference)} rows, need N+1 = {N + 1}")
    if "dt" in config:
        dt = float(config["dt"])
    elif len(reference) >= 2:
        dt = float(reference.t[1] - reference.t[0])
    else:
        raise ProblemError("dt missing and reference too short to infer it")

    lo, hi, vel, acc = limit_table(model, config)
    track = np.array([names.index(c) for c in reference.names], dtype=np.int64)
    ref = reference.values[: N + 1]

    q_init = np.zeros(len(names))
    q_init[track] = ref[0]
    for name, value in (config.get("q_init") or {}).items():
        if name not in names:
            raise ProblemError(f"q_init: unknown coordinate {name!r}")
        q_init[names.index(name)] = float(value)

    contacts = []
    for c in config.get("contacts") or []:
        if c.get("leg") not in LEGS:
            raise ProblemError(f"contact leg must be one of {LEGS}")
        contacts.append(ContactSpec(c["leg"], float(c.get("mu", 0.5)), np.asarray(c.get("normal", (0.0, 0.0, 1.0)), dtype=float)))

    return OcpProblem(
        dynamics=DoubleIntegrator(names, n_contacts=len(contacts)),
        N=N,
        dt=dt,
        q_init=q_init,
        track=track,
        reference=ref,
        q_lower=lo,
        q_upper=hi,
        v_lower=-vel,
        v_upper=vel,
        a_lower=-acc,
        a_upper=acc,
        contacts=contacts,
        track_weight=float(config.get("track_weight", 1.0)),
        input_weight=config.get("input_weight", 1.0),
        terminal_rest=bool(config.get("terminal_rest", False)),
    )
