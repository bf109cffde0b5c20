"""Flat ``key = value`` run configuration files and run manifests.

Lines are ``key = value``; ``#`` starts a comment.  Every command has a
fixed key schema and unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import math
from pathlib import Path

__all__ = ["ConfigError", "SCHEMAS", "parse_config", "load_config", "write_manifest", "sha256"]


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s: str) -> list:
    return [float(x) for x in s.replace(";", ",").split(",") if x.strip()]


def _modes(s: str) -> list:
    out = []
    for part in s.split(";"):
        if part.strip():
            m, n = part.split(",")
            out.append((int(m), int(n)))
    return out


def _strings(s: str) -> list:
    return [x.strip() for x in s.split(",") if x.strip()]


def _opt_float(s: str):
    return None if s.strip().lower() in ("", "none", "auto") else float(s)


# key -> (parser, default); a default of ... marks a required key
_GRID = {
    "Nx": (int, 32),
    "Ny": (int, 32),
    "Nz": (int, 24),
    "Lx": (float, 2 * math.pi),
    "Ly": (float, 2 * math.pi),
    "B": (float, 1.0),
    "Ro": (float, 0.0),
    "H": (float, 1.0),
}

SCHEMAS = {
    "simulate": {
        **_GRID,
        "seed_type": (str, "mode"),
        "mode_m": (int, 1),
        "mode_n": (int, 0),
        "branch": (str, "plus"),
        "structure": (str, "plane"),
        "amplitude": (float, 1e-6),
        "noise_k0": (float, 2.0),
        "noise_seed": (int, 0),
        "noise_interior": (_bool, True),
        "snapshot_path": (str, ""),
        "t_end": (float, 5.0),
        "dt": (_opt_float, None),
        "cfl": (float, 0.4),
        "output_every": (float, 0.1),
        "snapshot_every": (_opt_float, None),
        "track_modes": (_modes, []),
        "fit_window": (_floats, []),
        "filter_strength": (float, 0.0),
        "output_dir": (str, "out"),
        "figures": (_bool, False),
    },
    "expand": {
        "base_config": (str, ...),
        "ro_list": (_floats, [0.1, 0.05, 0.025]),
        "snapshot_times": (_floats, [1.0]),
        "forcing": (_bool, True),
        "amplitude_cap": (float, 1e3),
        "dt": (_opt_float, None),
        "output_dir": (str, "expand_out"),
    },
    "residual": {
        "snapshots": (_strings, ...),
        "output_dir": (str, "residual_out"),
        "order": (int, 1),
        "heatmaps": (_bool, False),
        "heatmap_level": (float, 0.5),
        "figures": (_bool, False),
    },
}


def parse_config(text: str, command: str, base_dir=None) -> dict:
    """Parse ``text`` against the schema of ``command``; path keys become absolute."""
    schema = SCHEMAS[command]
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in schema:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    out = {}
    for key, (parse, default) in schema.items():
        if key in raw:
            try:
                out[key] = parse(raw[key])
            except ValueError as err:
                raise ConfigError(f"bad value for {key!r}: {err}") from None
        elif default is ...:
            raise ConfigError(f"missing required key {key!r}")
        else:
            out[key] = default
    if base_dir is not None:
        base = Path(base_dir)
        for key in ("output_dir", "snapshot_path", "base_config"):
            if out.get(key):
                out[key] = str((base / out[key]).resolve())
        if "snapshots" in out:
            out["snapshots"] = [str((base / p).resolve()) for p in out["snapshots"]]
    return out


def load_config(path, command: str) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse_config(text, command, path.parent)


def format_value(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, (list, tuple)):
        return ";".join(format_value(x) for x in v)
    return str(v)


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, entries: dict, files) -> None:
    """One ``key = value`` per entry, then ``file <path> <sha256>`` per existing output."""
    lines = [f"{k} = {format_value(v)}" for k, v in entries.items()]
    for f in files:
        if Path(f).exists():
            lines.append(f"file {f} {sha256(f)}")
    Path(path).write_text("\n".join(lines) + "\n")
