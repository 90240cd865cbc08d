"""File formats: trajectory CSV, parameter/config/domain JSON and dataset manifests."""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .objective import Trajectory
from .optimizer import SearchDomain
from .params import CONFIG_KEYS, PARAM_NAMES, FixedModelConfig, params_from_dict, params_to_dict

TRAJECTORY_COLUMNS = ("t", "x0", "y0", "psi", "u", "vm", "r", "delta", "np", "UT", "gammaT")
ROLES = ("train", "test")
FRACTION_TOL = 0.02


class ParseError(ValueError):
    """Malformed input file; ``line`` is 1-based and counts the header."""

    def __init__(self, path, message: str, line: int | None = None, column: str | None = None):
        self.path = str(path)
        self.line = line
        self.column = column
        where = self.path
        if line is not None:
            where += f", line {line}"
        if column is not None:
            where += f", column {column!r}"
        super().__init__(f"{where}: {message}")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_trajectory(path, traj: Trajectory) -> None:
    data = np.column_stack([traj.t, traj.states, traj.controls, traj.winds])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for row in data:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_trajectory(path, label: str | None = None) -> Trajectory:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(path, "empty file")
        header = [h.strip() for h in header]
        if tuple(header) != TRAJECTORY_COLUMNS:
            raise ParseError(path, f"expected header {','.join(TRAJECTORY_COLUMNS)}, "
                                   f"got {','.join(header)}", line=1)
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(TRAJECTORY_COLUMNS):
                raise ParseError(path, f"expected {len(TRAJECTORY_COLUMNS)} fields, got {len(rec)}",
                                 line=lineno)
            values = []
            for name, cell in zip(TRAJECTORY_COLUMNS, rec):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(path, f"not a number: {cell!r}", lineno, name) from None
                if not math.isfinite(v):
                    raise ParseError(path, f"non-finite value {cell!r}", lineno, name)
                values.append(v)
            if rows and values[0] <= rows[-1][1][0]:
                raise ParseError(path, "time is not strictly increasing", lineno, "t")
            rows.append((lineno, values))
    if not rows:
        raise ParseError(path, "no data rows")
    data = np.array([v for _, v in rows])
    try:
        return Trajectory(label or path.stem, data[:, 0], data[:, 1:7], data[:, 7:9], data[:, 9:11])
    except ValueError as exc:
        raise ParseError(path, str(exc)) from None


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(path, f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(obj, dict):
        raise ParseError(path, "expected a JSON object")
    return obj


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def write_parameters(path, theta, cfg: FixedModelConfig | None = None) -> None:
    obj = params_to_dict(theta)
    if cfg is not None:
        obj.update(cfg.to_dict())
    _write_json(path, obj)


def read_parameters(path) -> tuple[np.ndarray, FixedModelConfig | None]:
    """Parameter vector plus the config if any config key is present.

    Config keys that are absent keep their defaults.
    """
    obj = _read_json(path)
    params = {k: v for k, v in obj.items() if k not in CONFIG_KEYS}
    config = {k: v for k, v in obj.items() if k in CONFIG_KEYS}
    try:
        theta = params_from_dict(params)
    except KeyError as exc:
        raise ParseError(path, exc.args[0]) from None
    except (TypeError, ValueError) as exc:
        raise ParseError(path, f"parameter values must be numbers ({exc})") from None
    if not np.all(np.isfinite(theta)):
        bad = [n for n, v in zip(PARAM_NAMES, theta) if not np.isfinite(v)]
        raise ParseError(path, f"non-finite parameters: {', '.join(bad)}")
    cfg = None
    if config:
        try:
            cfg = FixedModelConfig(**config)
        except (TypeError, ValueError) as exc:
            raise ParseError(path, f"invalid config: {exc}") from None
    return theta, cfg


def write_config(path, cfg: FixedModelConfig) -> None:
    _write_json(path, cfg.to_dict())


def read_config(path) -> FixedModelConfig:
    obj = _read_json(path)
    unknown = sorted(set(obj) - set(CONFIG_KEYS))
    if unknown:
        raise ParseError(path, f"unknown config keys: {', '.join(unknown)}")
    try:
        return FixedModelConfig(**obj)
    except (TypeError, ValueError) as exc:
        raise ParseError(path, f"invalid config: {exc}") from None


def write_domain(path, domain: SearchDomain) -> None:
    _write_json(path, {n: [float(a), float(b)] for n, a, b in zip(domain.names, domain.lo, domain.hi)})


def read_domain(path) -> SearchDomain:
    obj = _read_json(path)
    missing = [n for n in PARAM_NAMES if n not in obj]
    unknown = sorted(set(obj) - set(PARAM_NAMES))
    if missing or unknown:
        parts = []
        if missing:
            parts.append(f"missing parameters: {', '.join(missing)}")
        if unknown:
            parts.append(f"unknown parameters: {', '.join(unknown)}")
        raise ParseError(path, "; ".join(parts))
    try:
        lo = [float(obj[n][0]) for n in PARAM_NAMES]
        hi = [float(obj[n][1]) for n in PARAM_NAMES]
        return SearchDomain(np.array(lo), np.array(hi))
    except (TypeError, ValueError, IndexError) as exc:
        raise ParseError(path, f"each entry must be [lo, hi] with lo < hi ({exc})") from None


@dataclass
class ManifestEntry:
    file: str
    role: str
    subset: str
    fraction: float
    controls: str | None = None


@dataclass
class DatasetManifest:
    name: str
    entries: list[ManifestEntry] = field(default_factory=list)
    root: Path = field(default_factory=Path)

    def validate(self) -> None:
        if not self.entries:
            raise ValueError(f"manifest {self.name!r} has no entries")
        for e in self.entries:
            if e.role not in ROLES:
                raise ValueError(f"manifest {self.name!r}: role must be train or test, got {e.role!r}")
            if not 0 <= e.fraction <= 1:
                raise ValueError(f"manifest {self.name!r}: fraction of {e.file} outside [0, 1]")
        total = sum(e.fraction for e in self.entries)
        if abs(total - 1.0) > FRACTION_TOL:
            raise ValueError(f"manifest {self.name!r}: fractions sum to {total:.4f}, expected 1")

    @property
    def subsets(self) -> list[str]:
        return list(dict.fromkeys(e.subset for e in self.entries))

    def path_of(self, entry: ManifestEntry) -> Path:
        return (self.root / entry.file).resolve()

    def load(self) -> list[Trajectory]:
        """Trajectories in manifest order, labelled by their subset."""
        return [read_trajectory(self.path_of(e), label=e.subset) for e in self.entries]


def write_manifest(path, manifest: DatasetManifest) -> None:
    manifest.validate()
    _write_json(path, {"name": manifest.name, "entries": [
        {k: v for k, v in e.__dict__.items() if v is not None} for e in manifest.entries]})


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    obj = _read_json(path)
    try:
        entries = [ManifestEntry(file=str(e["file"]), role=str(e["role"]), subset=str(e["subset"]),
                                 fraction=float(e["fraction"]), controls=e.get("controls"))
                   for e in obj["entries"]]
        manifest = DatasetManifest(str(obj.get("name", path.stem)), entries, path.parent)
        manifest.validate()
    except (KeyError, TypeError) as exc:
        raise ParseError(path, f"malformed manifest entry ({exc})") from None
    except ValueError as exc:
        raise ParseError(path, str(exc)) from None
    return manifest


def check_overlap(train: DatasetManifest, test: DatasetManifest) -> set[str]:
    """Control-input declarations shared by training and test; warns if any."""
    declared = lambda m: {e.controls for e in m.entries if e.controls}
    shared = declared(train) & declared(test)
    if shared:
        warnings.warn(f"training manifest {train.name!r} and test manifest {test.name!r} "
                      f"share control inputs: {', '.join(sorted(shared))}", stacklevel=2)
    return shared
