"""Packaged demo configuration files.

A CLI ``--config`` value that names no file on disk but matches
``demo_<name>`` is resolved against the files shipped in
``nvlab/demo_configs/``. ``demo_physics`` is a bench parameter snapshot;
the rest are per-measurement configs.
"""

from __future__ import annotations

from importlib import resources


def _package_dir():
    return resources.files("nvlab") / "demo_configs"


def demo_names() -> list[str]:
    names = []
    for entry in _package_dir().iterdir():
        if entry.name.endswith(".cfg"):
            names.append(entry.name[: -len(".cfg")])
    return sorted(names)


def is_demo_name(name: str) -> bool:
    return normalize_demo_name(name) in demo_names()


def normalize_demo_name(name: str) -> str:
    return name.strip().lower().replace("-", "_")


def load_demo_text(name: str) -> str:
    """Return the raw config text for a packaged demo, by name."""
    normalized = normalize_demo_name(name)
    path = _package_dir() / f"{normalized}.cfg"
    if not path.is_file():
        known = ", ".join(demo_names())
        raise FileNotFoundError(f"no packaged demo {name!r}; known demos: {known}")
    return path.read_text(encoding="utf-8")
