"""Command-line front end: generate, identify, evaluate, simulate."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from collections import defaultdict
from pathlib import Path

import numba
import numpy as np

from . import __version__
from .datagen import GroundTruth, NoiseSpec, add_noise, build_datasets
from .dataio import (DatasetManifest, ManifestEntry, ParseError, check_overlap, read_config,
                     read_manifest, read_parameters, read_trajectory, write_manifest,
                     write_parameters, write_trajectory)
from .dynamics import STATE_FIELDS, simulate
from .objective import Objective, ObjectiveSpec, segment
from .optimizer import CmaesSettings, build_domain, seed_trials
from .params import FixedModelConfig, ground_truth
from .report import build_report

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_REJECTED = 3
WORKERS_ENV = "MMGIDENT_WORKERS"
DESK_BUDGET = 20_000
PAPER_ITERATIONS = 100_000


class InputError(Exception):
    pass


def _set_workers(n: int | None) -> int:
    if n is None:
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                n = int(env)
            except ValueError:
                raise InputError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    if n is None:
        return numba.get_num_threads()
    if n < 1:
        raise InputError("--workers must be >= 1")
    n = min(n, numba.config.NUMBA_NUM_THREADS)
    numba.set_num_threads(n)
    return n


def parse_budget(text: str) -> tuple[int | None, float | None]:
    """``"20000"`` -> evaluation cap, ``"600s"`` -> wall-clock seconds."""
    t = text.strip().lower()
    try:
        if t.endswith("s"):
            sec = float(t[:-1])
            if not sec > 0:
                raise ValueError
            return None, sec
        evals = int(t)
        if evals < 1:
            raise ValueError
        return evals, None
    except ValueError:
        raise InputError(f"--budget must be an evaluation count or seconds like '600s', got {text!r}") from None


def _load_params(path, cfg_override: FixedModelConfig | None = None):
    theta, cfg = read_parameters(path)
    return theta, cfg_override or cfg or FixedModelConfig()


def _declared_controls(label: str, traj) -> str | None:
    if label.startswith("T"):
        d, n = traj.controls[-1]
        return f"turning delta={math.degrees(d):.0f} np={n:g}"
    if label.startswith("Z"):
        amp = math.degrees(np.max(np.abs(traj.controls[:, 0])))
        return f"zigzag {amp:.0f}/{amp:.0f} np={traj.controls[-1, 1]:g}"
    return None


# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    if args.truth:
        theta, cfg = _load_params(args.truth)
    else:
        theta, cfg = ground_truth(), FixedModelConfig()
    truth = GroundTruth(theta, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    datasets = build_datasets(truth, seed=args.seed)
    write_parameters(out / "truth.json", theta, cfg)
    for name, trajs in datasets.items():
        folder = out / name
        folder.mkdir(exist_ok=True)
        total = sum(t.duration for t in trajs)
        counts = defaultdict(int)
        entries = []
        for k, traj in enumerate(trajs):
            counts[traj.label] += 1
            stem = traj.label if counts[traj.label] == 1 else f"{traj.label}_{counts[traj.label]}"
            if args.noise:
                traj = add_noise(traj, NoiseSpec(*args.noise, seed=args.seed * 1000 + k))
            write_trajectory(folder / f"{stem}.csv", traj)
            role = "test" if name == "Test" else "train"
            entries.append(ManifestEntry(f"{name}/{stem}.csv", role, traj.label,
                                         round(traj.duration / total, 6),
                                         _declared_controls(traj.label, traj)))
        write_manifest(out / f"{name}.json", DatasetManifest(name, entries))
        print(f"{name}: {len(trajs)} trajectories, {total:g} s")
    with open(out / "generate.json", "w") as fh:
        json.dump({"seed": args.seed, "noise": list(args.noise) if args.noise else None,
                   "version": __version__}, fh, indent=2)
        fh.write("\n")
    return EXIT_OK


def _spec(args, variant: str | None = None) -> ObjectiveSpec:
    return ObjectiveSpec(variant or args.objective, args.tf, args.sigma_floor,
                         args.standardize_by_input)


def cmd_identify(args) -> int:
    workers = _set_workers(args.workers)
    manifest = read_manifest(args.train)
    train = manifest.load()
    cfg = read_config(args.config) if args.config else None
    theta_ref, cfg = _load_params(args.ref, cfg)
    domain = build_domain(theta_ref)
    objective = Objective(train, _spec(args), cfg)
    evals, seconds = parse_budget(args.budget) if args.budget else (None, None)
    if not args.paper_scale and evals is None and seconds is None:
        evals = DESK_BUDGET
    settings = CmaesSettings(max_iterations=PAPER_ITERATIONS, max_evaluations=evals, wall_clock=seconds,
                             seed=args.seed, box_handling=args.box_handling,
                             initial_population=args.population,
                             max_population=args.max_population)
    seeds = [args.seed + k for k in range(args.trials)]
    summary = seed_trials(objective.batch, domain, settings, args.trials, seeds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trials = []
    for k, run in enumerate(summary.runs):
        folder = out / f"trial_{k}"
        folder.mkdir(exist_ok=True)
        write_parameters(folder / "params.json", run.estimate, cfg)
        write_parameters(folder / "best.json", run.best_theta, cfg)
        run.write_log(folder / "log.csv")
        J_est = float(objective(run.estimate))
        trials.append({"trial": k, "seed": seeds[k], "status": run.trial_status,
                       "J_estimate": J_est, "J_best": run.best_J, "evaluations": run.evaluations,
                       "restarts": run.restarts, "populations": run.populations,
                       "stop_reasons": run.stop_reasons, "elapsed_s": run.elapsed})
        print(f"trial {k} (seed {seeds[k]}): {run.trial_status}, J(estimate)={J_est:.6g}, "
              f"best J={run.best_J:.6g}, {run.evaluations} evaluations, {run.restarts} restarts")
    accepted = [t for t in trials if t["status"] == "accepted"]
    if accepted:
        best = min(accepted, key=lambda t: t["J_estimate"])
        write_parameters(out / "best_params.json", summary.runs[best["trial"]].estimate, cfg)
    with open(out / "summary.json", "w") as fh:
        json.dump({"objective": args.objective, "train": str(args.train), "ref": str(args.ref),
                   "seeds": seeds, "workers": workers, "budget": args.budget,
                   "paper_scale": args.paper_scale, "status": summary.status,
                   "metrics": {k: {"mean": m, "std": s} for k, (m, s) in summary.metrics.items()},
                   "trials": trials}, fh, indent=2)
        fh.write("\n")
    if not accepted:
        print("all trials rejected", file=sys.stderr)
        return EXIT_REJECTED
    return EXIT_OK


def _expand_case(path: Path) -> list[Path]:
    """A params file, or an identify output folder (its accepted trials)."""
    if path.is_dir():
        summary = path / "summary.json"
        if not summary.exists():
            raise InputError(f"{path} is a folder without summary.json")
        with open(summary) as fh:
            trials = json.load(fh)["trials"]
        files = [path / f"trial_{t['trial']}" / "params.json" for t in trials
                 if t["status"] == "accepted"]
        if not files:
            raise InputError(f"{path}: no accepted trials")
        return files
    return [path]


def cmd_evaluate(args) -> int:
    _set_workers(args.workers)
    manifest = read_manifest(args.test)
    test = manifest.load()
    if args.train:
        for train_path in args.train:
            check_overlap(read_manifest(train_path), manifest)
    cfg = read_config(args.config) if args.config else None
    cases: dict[str, list[np.ndarray]] = {}
    for item in args.params:
        if "=" not in item:
            raise InputError(f"--params expects NAME=PATH, got {item!r}")
        name, p = item.split("=", 1)
        for f in _expand_case(Path(p)):
            theta, c = _load_params(f, cfg)
            cfg = cfg or c
            cases.setdefault(name, []).append(theta)
    base_name, _, base_path = args.baseline.rpartition("=")
    theta_base, c = _load_params(base_path, cfg)
    cfg = cfg or c
    subsets = args.subsets.split(",") if args.subsets else None
    report = build_report(cases, (base_name or "baseline", theta_base), test, cfg,
                          _spec(args, "J2"), subsets)
    md = report.markdown()
    out = Path(args.out)
    if out.suffix in (".md", ".csv"):
        out = out.with_suffix("")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.with_suffix(".md").write_text(md)
    report.write_csv(out.with_suffix(".csv"))
    print(md, end="")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = read_config(args.config) if args.config else None
    theta, cfg = _load_params(args.params, cfg)
    traj = read_trajectory(args.replay)
    if len(traj) > 1 and abs(traj.interval - cfg.dt) > 1e-9:
        raise InputError(f"trajectory is sampled every {traj.interval} s, model step is {cfg.dt} s")
    cols = ["t", "subsequence"]
    for name in STATE_FIELDS:
        cols += [f"{name}_input", f"{name}_sim"]
    rows = []
    for sub in segment(traj, args.tf):
        s = sub.traj
        sim = simulate(s.states[0], s.controls, s.winds, theta, cfg, tf=args.tf).states
        for k in range(len(s)):
            row = [s.t[k], sub.index]
            for j in range(6):
                row += [s.states[k, j], sim[k, j]]
            rows.append(row)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(str(v) if isinstance(v, int) else format(v, ".17g") for v in row) + "\n")
    print(f"wrote {len(rows)} rows in {len(segment(traj, args.tf))} subsequence(s) to {out}")
    return EXIT_OK


def _objective_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tf", type=float, default=100.0, help="subsequence duration [s]")
    p.add_argument("--sigma-floor", type=float, default=1e-6)
    p.add_argument("--standardize-by-input", action="store_true",
                   help="standardize simulated series with the input mean/std")
    p.add_argument("--config", help="fixed model config JSON (overrides config keys in params)")
    p.add_argument("--workers", type=int, default=None,
                   help=f"parallel evaluation threads (default: ${WORKERS_ENV} or all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmgident", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write synthetic training/test sets and manifests")
    g.add_argument("--truth", help="ground-truth parameter JSON (default: built-in)")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--noise", type=float, nargs=6, metavar=("X0", "Y0", "PSI", "U", "VM", "R"),
                   help="Gaussian noise std per state channel")
    g.set_defaults(func=cmd_generate)

    i = sub.add_parser("identify", help="run CMA-ES seed trials on a training manifest")
    i.add_argument("--train", required=True)
    i.add_argument("--objective", choices=("J1", "J2", "J3"), default="J2")
    i.add_argument("--ref", required=True, help="reference parameters defining the search box")
    i.add_argument("--trials", type=int, default=3)
    i.add_argument("--budget", help=f"evaluations (default {DESK_BUDGET}) or seconds, e.g. 600s")
    i.add_argument("--paper-scale", action="store_true",
                   help=f"{PAPER_ITERATIONS} iterations, no evaluation cap")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--population", type=int, default=20)
    i.add_argument("--max-population", type=int, default=720)
    i.add_argument("--box-handling", choices=("penalty", "resample"), default="penalty")
    i.add_argument("--out", required=True)
    _objective_flags(i)
    i.set_defaults(func=cmd_identify)

    e = sub.add_parser("evaluate", help="J1/J2/J3 tables per test subset")
    e.add_argument("--params", nargs="+", required=True, metavar="NAME=PATH",
                   help="repeat a NAME to group trials; PATH may be an identify output folder")
    e.add_argument("--baseline", required=True, metavar="[NAME=]PATH")
    e.add_argument("--test", required=True)
    e.add_argument("--train", nargs="*", help="training manifests to check for input overlap")
    e.add_argument("--subsets", help="comma-separated subsets that must be present")
    e.add_argument("--out", required=True, help="report path prefix (.md and .csv written)")
    _objective_flags(e)
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("simulate", help="replay recorded inputs per subsequence")
    s.add_argument("--params", required=True)
    s.add_argument("--replay", required=True)
    s.add_argument("--tf", type=float, default=100.0)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "trials", 1) < 1:
        print("error: --trials must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, ParseError, FileNotFoundError, IsADirectoryError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
