"""Compiled and numpy kernels must agree."""

import numpy as np
import pytest

from locomanip import _kernels

BACKENDS = _kernels.backends()


def test_backend_selected():
    assert _kernels.BACKEND in BACKENDS


@pytest.mark.skipif("cython" not in BACKENDS, reason="extension not built")
def test_backends_agree(rng, model):
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    n = 1000
    alpha = rng.normal(size=6)
    cols = [rng.uniform(0, 2, n), rng.uniform(0, 2, n), rng.uniform(-1, 1, n), rng.uniform(-1, 1, n),
            rng.uniform(0, .1, n), rng.uniform(0, .1, n), rng.normal(size=n), rng.uniform(0, 3, n)]
    assert np.allclose(py.total_reward_batch(alpha, 0.04, *cols), cy.total_reward_batch(alpha, 0.04, *cols), atol=1e-13)

    pts = rng.uniform(-3, 3, (n, 3))
    origin = np.array([0.1, -0.2, 0.0])
    assert np.array_equal(py.voxel_indices(pts, origin, 0.07), cy.voxel_indices(pts, origin, 0.07))

    ch = model.chains["right_ee"]
    q = rng.uniform(model.lower, model.upper, (20, 38))
    args = (ch.translations, ch.rotations, ch.joints, ch.types, ch.axes, ch.scales)
    assert np.allclose(py.chain_fk_batch(q, *args), cy.chain_fk_batch(q, *args), atol=1e-12)

    f = rng.normal(size=(n, 3))
    nrm = rng.normal(size=(n, 3))
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    mu = rng.uniform(0.1, 1, n)
    assert np.allclose(py.cone_margins(f, nrm, mu), cy.cone_margins(f, nrm, mu), atol=1e-13)

    X = rng.normal(size=(11, 4))
    Fa, Fb = rng.normal(size=(10, 4)), rng.normal(size=(10, 4))
    assert np.allclose(py.trapezoid_defects(X, Fa, Fb, 0.1), cy.trapezoid_defects(X, Fa, Fb, 0.1), atol=1e-14)


def test_cone_margin_examples():
    for impl in BACKENDS.values():
        f = np.array([[0.0, 0, 10], [3, 4, 10], [3, 4, 10]])
        n = np.tile([0.0, 0, 1], (3, 1))
        assert np.allclose(impl.cone_margins(f, n, np.array([0.5, 0.5, 0.4])), [5.0, 0.0, -1.0], atol=1e-12)
