"""Bundled IR programs and benchmark specs."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

PROGRAMS = ("fig1.ir", "hotloop.ir", "nest3.ir", "multiexit.ir", "irreducible.ir", "loopless.ir")


def path(name: str) -> Path:
    """Filesystem path of a bundled corpus file."""
    p = Path(str(resources.files(__name__).joinpath(name)))
    if not p.is_file():
        raise FileNotFoundError(name)
    return p


def read(name: str) -> str:
    return path(name).read_text(encoding="utf-8")


def load(name: str):
    from ..ir import parse_module
    return parse_module(read(name))
