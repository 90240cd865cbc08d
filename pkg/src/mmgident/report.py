"""J tables: per case and test subset, mean(std) over seed trials."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .objective import Objective, ObjectiveSpec, Trajectory
from .params import FixedModelConfig

VARIANTS = ("J1", "J2", "J3")
TOTAL = "Total"


@dataclass
class RunReport:
    """``values[variant][case]`` is an ``(n_trials, n_subsets)`` array."""

    subsets: list[str]
    cases: list[str]
    baseline: str
    values: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)

    @property
    def columns(self) -> list[str]:
        return self.subsets + [TOTAL]

    def trials(self, variant: str, case: str) -> np.ndarray:
        """Per-trial rows with the total appended as the last column."""
        v = self.values[variant][case]
        return np.column_stack([v, v.sum(axis=1)])

    def mean(self, variant: str, case: str) -> np.ndarray:
        return self.trials(variant, case).mean(axis=0)

    def std(self, variant: str, case: str) -> np.ndarray:
        return self.trials(variant, case).std(axis=0)

    def ranks(self, variant: str) -> dict[str, list[int]]:
        """1 for the best (lowest) mean in a column, 2 for the runner-up, else 0."""
        rows = self.cases + [self.baseline]
        means = np.array([self.mean(variant, c) for c in rows])
        out = {c: [0] * means.shape[1] for c in rows}
        for j in range(means.shape[1]):
            order = np.argsort(means[:, j], kind="stable")
            for rank, i in enumerate(order[:2], start=1):
                out[rows[i]][j] = rank
        return out

    def markdown(self) -> str:
        lines = []
        for variant in VARIANTS:
            ranks = self.ranks(variant)
            lines.append(f"### {variant}")
            lines.append("")
            lines.append("| case | " + " | ".join(self.columns) + " |")
            lines.append("|---" * (len(self.columns) + 1) + "|")
            for case in self.cases + [self.baseline]:
                cells = []
                for m, s, rk in zip(self.mean(variant, case), self.std(variant, case), ranks[case]):
                    cell = f"{m:.4g} ({s:.2g})"
                    cells.append(f"**{cell}**" if rk == 1 else f"*{cell}*" if rk == 2 else cell)
                n = self.values[variant][case].shape[0]
                lines.append(f"| {case} (n={n}) | " + " | ".join(cells) + " |")
            lines.append("")
        lines.append("Bold: best per column; italic: second best. Values are mean (std) over trials.")
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["objective", "case", "subset", "mean", "std", "n_trials", "rank"])
            for variant in VARIANTS:
                ranks = self.ranks(variant)
                for case in self.cases + [self.baseline]:
                    n = self.values[variant][case].shape[0]
                    for col, m, s, rk in zip(self.columns, self.mean(variant, case),
                                             self.std(variant, case), ranks[case]):
                        w.writerow([variant, case, col, repr(float(m)), repr(float(s)), n, rk])


def subset_costs(theta, by_subset: dict[str, list[Trajectory]], variant: str,
                 cfg: FixedModelConfig, spec: ObjectiveSpec) -> np.ndarray:
    spec = ObjectiveSpec(variant, spec.tf, spec.sigma_floor, spec.standardize_sim_by_input)
    return np.array([Objective(trajs, spec, cfg)(theta) for trajs in by_subset.values()])


def build_report(cases: dict[str, list[np.ndarray]], baseline: tuple[str, np.ndarray],
                 test: list[Trajectory], cfg: FixedModelConfig,
                 spec: ObjectiveSpec = ObjectiveSpec(), subsets: list[str] | None = None) -> RunReport:
    """Evaluate every case's trials and the baseline on each test subset.

    Trajectory labels are the subset names.
    """
    present = list(dict.fromkeys(t.label for t in test))
    subsets = subsets or present
    missing = [s for s in subsets if s not in present]
    if missing:
        raise ValueError(f"test data has no subset(s): {', '.join(missing)}")
    by_subset = {s: [t for t in test if t.label == s] for s in subsets}
    name, theta_base = baseline
    if name in cases:
        raise ValueError(f"baseline name {name!r} clashes with a case name")
    report = RunReport(list(subsets), list(cases), name)
    all_rows = {**cases, name: [theta_base]}
    for variant in VARIANTS:
        report.values[variant] = {
            case: np.array([subset_costs(th, by_subset, variant, cfg, spec) for th in thetas])
            for case, thetas in all_rows.items()}
    return report
