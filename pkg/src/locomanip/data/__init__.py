"""Bundled data files (robot description, presets, library, prompts, worlds, scenarios)."""

from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent


def data_path(*parts: str) -> Path:
    return DATA_DIR.joinpath(*parts)
