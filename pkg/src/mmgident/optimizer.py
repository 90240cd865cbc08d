"""Box-constrained CMA-ES with IPOP restarts, search domain and seed trials.

Search happens in normalized coordinates: every parameter interval
``[lo_j, hi_j]`` is mapped affinely onto ``[0, 1]``. The objective is any
callable that maps a ``(lambda, n)`` array of physical vectors to ``lambda``
fitness values.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .params import N_PARAMS, PARAM_NAMES

BatchObjective = Callable[[np.ndarray], np.ndarray]

INERTIA_BAND = ("mx", "my", "IzzJzz")
NEGATIVE_DECADE = ("Yv_p", "Nr_p")
POSITIVE_DECADE = ("tP", "wP0")
ZERO_HALFWIDTH = 1e-3
FALLBACK_PENALTY = 1e6
REJECT_FACTOR = 10.0


@dataclass(frozen=True)
class SearchDomain:
    lo: np.ndarray
    hi: np.ndarray
    names: tuple[str, ...] = PARAM_NAMES

    def __post_init__(self) -> None:
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lo and hi must be 1-D arrays of equal length")
        if len(self.names) != lo.shape[0]:
            raise ValueError("one name per interval is required")
        bad = [n for n, a, b in zip(self.names, lo, hi)
               if not (np.isfinite(a) and np.isfinite(b) and a < b)]
        if bad:
            raise ValueError(f"empty or non-finite interval for: {', '.join(bad)}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def to_unit(self, theta) -> np.ndarray:
        return (np.asarray(theta, dtype=float) - self.lo) / self.width

    def from_unit(self, x) -> np.ndarray:
        return self.lo + np.asarray(x, dtype=float) * self.width

    def contains(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.all((theta >= self.lo) & (theta <= self.hi)))

    def boundary_magnitude(self) -> np.ndarray:
        return np.maximum(np.abs(self.lo), np.abs(self.hi))


def build_domain(theta_ref, names: Sequence[str] = PARAM_NAMES) -> SearchDomain:
    """Search box around a reference vector.

    Generic parameters get ``[-10|ref|, 10|ref|]`` (or ``±1e-3`` when the
    reference is zero). Added inertia gets a ±30 % band, ``Yv_p``/``Nr_p``
    the decade band ``[10 ref, 0.1 ref]`` and ``tP``/``wP0`` ``[0.1 ref, 10 ref]``.
    """
    ref = np.asarray(theta_ref, dtype=float)
    names = tuple(names)
    if ref.shape != (len(names),):
        raise ValueError(f"reference vector must have {len(names)} entries")
    if not np.all(np.isfinite(ref)):
        raise ValueError("reference vector must be finite")
    lo = np.empty_like(ref)
    hi = np.empty_like(ref)
    for j, (name, v) in enumerate(zip(names, ref)):
        if name in INERTIA_BAND + NEGATIVE_DECADE + POSITIVE_DECADE:
            if v == 0.0:
                raise ValueError(f"reference value of {name} must be nonzero")
            if name in INERTIA_BAND:
                a, b = 0.7 * v, 1.3 * v
            elif name in NEGATIVE_DECADE:
                a, b = 10.0 * v, 0.1 * v
            else:
                a, b = 0.1 * v, 10.0 * v
            lo[j], hi[j] = min(a, b), max(a, b)
        elif v == 0.0:
            lo[j], hi[j] = -ZERO_HALFWIDTH, ZERO_HALFWIDTH
        else:
            lo[j], hi[j] = -10.0 * abs(v), 10.0 * abs(v)
    return SearchDomain(lo, hi, names)


@dataclass
class CmaesSettings:
    initial_population: int = 20
    max_population: int = 720
    population_growth: int = 2
    max_iterations: int = 100_000
    max_evaluations: int | None = None
    wall_clock: float | None = None
    seed: int = 0
    sigma0: float = 0.3
    box_handling: str = "penalty"
    tol_fun: float = 1e-12
    tol_x: float = 1e-11
    max_condition: float = 1e14
    restarts: bool = True
    target: float | None = None

    def __post_init__(self) -> None:
        if self.initial_population < 2:
            raise ValueError("population must hold at least 2 candidates")
        if self.max_population < self.initial_population:
            raise ValueError("max_population must be >= initial_population")
        if self.population_growth < 1:
            raise ValueError("population_growth must be >= 1")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.box_handling not in ("penalty", "resample"):
            raise ValueError("box_handling must be 'penalty' or 'resample'")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")


class CMAES:
    """Canonical (mu/mu_w, lambda)-CMA-ES with positive recombination weights."""

    def __init__(self, mean, sigma: float, popsize: int, rng: np.random.Generator):
        self.mean = np.array(mean, dtype=float)
        n = self.dim = self.mean.shape[0]
        self.sigma = float(sigma)
        self.lam = lam = int(popsize)
        self.rng = rng
        self.mu = mu = lam // 2
        w = math.log((lam + 1) / 2) - np.log(np.arange(1, mu + 1))
        self.weights = w / w.sum()
        self.mueff = 1.0 / np.sum(self.weights ** 2)
        me = self.mueff
        self.cc = (4 + me / n) / (n + 4 + 2 * me / n)
        self.cs = (me + 2) / (n + me + 5)
        self.c1 = 2 / ((n + 1.3) ** 2 + me)
        self.cmu = min(1 - self.c1, 2 * (me - 2 + 1 / me) / ((n + 2) ** 2 + me))
        self.damps = 1 + 2 * max(0.0, math.sqrt((me - 1) / (n + 1)) - 1) + self.cs
        self.chiN = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))
        self.pc = np.zeros(n)
        self.ps = np.zeros(n)
        self.C = np.eye(n)
        self.B = np.eye(n)
        self.D = np.ones(n)
        self.invsqrtC = np.eye(n)
        self.iteration = 0
        self._eigen_iter = 0
        self._eigen_gap = max(1, int(1 / ((self.c1 + self.cmu) * n * 10)))

    def sample(self, k: int) -> np.ndarray:
        z = self.rng.standard_normal((k, self.dim))
        return self.mean + self.sigma * (z * self.D) @ self.B.T

    def ask(self) -> np.ndarray:
        return self.sample(self.lam)

    def _update_eigen(self) -> None:
        if self.iteration - self._eigen_iter < self._eigen_gap:
            return
        self._eigen_iter = self.iteration
        self.C = np.triu(self.C) + np.triu(self.C, 1).T
        evals, self.B = np.linalg.eigh(self.C)
        self.D = np.sqrt(np.maximum(evals, 1e-300))
        self.invsqrtC = (self.B / self.D) @ self.B.T

    def tell(self, X: np.ndarray, fitness: np.ndarray) -> None:
        X = np.asarray(X, dtype=float)
        f = np.where(np.isfinite(fitness), fitness, np.inf)
        if X.shape[0] != self.lam or f.shape[0] != self.lam:
            raise ValueError("tell needs exactly one fitness per sampled candidate")
        self.iteration += 1
        n = self.dim
        if np.all(f == f[0]):
            # plateau: no ranking information, keep mean and C, let CSA act on a zero step
            self.ps *= 1 - self.cs
            self.sigma *= math.exp(min(1.0, (self.cs / self.damps) * (np.linalg.norm(self.ps) / self.chiN - 1)))
            return
        order = np.argsort(f, kind="stable")
        sel = X[order[: self.mu]]
        old = self.mean
        self.mean = self.weights @ sel
        y = (self.mean - old) / self.sigma
        self.ps = (1 - self.cs) * self.ps + math.sqrt(self.cs * (2 - self.cs) * self.mueff) * (self.invsqrtC @ y)
        ps_norm = np.linalg.norm(self.ps)
        hsig = ps_norm / math.sqrt(1 - (1 - self.cs) ** (2 * self.iteration)) / self.chiN < 1.4 + 2 / (n + 1)
        self.pc = (1 - self.cc) * self.pc + hsig * math.sqrt(self.cc * (2 - self.cc) * self.mueff) * y
        artmp = (sel - old) / self.sigma
        self.C = ((1 - self.c1 - self.cmu) * self.C
                  + self.c1 * (np.outer(self.pc, self.pc) + (1 - hsig) * self.cc * (2 - self.cc) * self.C)
                  + self.cmu * (artmp.T * self.weights) @ artmp)
        self.sigma *= math.exp(min(1.0, (self.cs / self.damps) * (ps_norm / self.chiN - 1)))
        self._update_eigen()

    @property
    def condition(self) -> float:
        return float((self.D.max() / self.D.min()) ** 2)

    def axis_lengths(self) -> np.ndarray:
        return self.sigma * np.sqrt(np.diag(self.C))


class BoxPenalty:
    """Adaptive quadratic penalty for repaired candidates in the unit box.

    Weights start from the interquartile range of recent fitness values and
    grow on coordinates where the mean sits outside the box.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self.gamma = np.full(dim, FALLBACK_PENALTY)
        self.initialized = False
        self.hist: list[float] = []

    @staticmethod
    def repair(X: np.ndarray) -> np.ndarray:
        return np.clip(X, 0.0, 1.0)

    def _xi(self, es: CMAES) -> np.ndarray:
        logc = np.log(np.maximum(np.diag(es.C), 1e-300))
        return np.exp(0.9 * (logc - logc.mean()))

    def penalty(self, X: np.ndarray, repaired: np.ndarray, es: CMAES) -> np.ndarray:
        d2 = (X - repaired) ** 2
        return (d2 * (self.gamma / self._xi(es))).sum(axis=1) / self.dim

    def update(self, fvals: np.ndarray, es: CMAES) -> None:
        fvals = np.sort(fvals[np.isfinite(fvals)])
        varis = es.sigma ** 2 * np.diag(es.C)
        if fvals.size >= 2:
            k = fvals.size + 1
            iqr = (fvals[min(3 * k // 4, fvals.size - 1)] - fvals[k // 4]) / np.mean(varis)
            if np.isfinite(iqr) and iqr > 0:
                self.hist.insert(0, float(iqr))
        while len(self.hist) > 20 + (3 * self.dim) / es.lam:
            self.hist.pop()
        if not self.hist:
            self.gamma = np.full(self.dim, FALLBACK_PENALTY)
            self.initialized = False
            return
        dfit = float(np.median(self.hist))
        dmean = (es.mean - self.repair(es.mean)) / np.sqrt(varis)
        if not self.initialized:
            self.gamma = np.full(self.dim, 2 * dfit)
            self.initialized = True
        damp = min(1.0, es.mueff / 10 / self.dim)
        edist = np.abs(dmean) - 3 * max(1.0, math.sqrt(self.dim) / es.mueff)
        self.gamma *= np.exp((edist > 0) * np.tanh(edist / 3) / 2) ** damp
        self.gamma[self.gamma > 5 * dfit] *= math.exp(-1 / 3) ** damp
        if not np.all(np.isfinite(self.gamma)) or np.any(self.gamma <= 0):
            self.gamma = np.full(self.dim, FALLBACK_PENALTY)


@dataclass
class LogRow:
    iteration: int
    J_best: float
    J_min_so_far: float
    popsize: int
    restarts: int


LOG_COLUMNS = ("iteration", "J_best", "J_min_so_far", "popsize", "restarts")


@dataclass
class OptimizationRun:
    settings: CmaesSettings
    domain: SearchDomain
    log: list[LogRow]
    best_theta: np.ndarray
    best_J: float
    final_mean: np.ndarray
    evaluations: int
    restarts: int
    populations: list[int]
    stop_reasons: list[str]
    trial_status: str = "accepted"
    elapsed: float = 0.0

    @property
    def estimate(self) -> np.ndarray:
        """Parameter estimate of the trial: the final search mean, uncorrected."""
        return self.final_mean

    def write_log(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(LOG_COLUMNS)
            for row in self.log:
                w.writerow([row.iteration, repr(row.J_best), repr(row.J_min_so_far),
                            row.popsize, row.restarts])


def _restart_reason(es: CMAES, best_hist: list[float], settings: CmaesSettings,
                    f: np.ndarray) -> str | None:
    stagnation = int(100 * (1 + es.lam / 10))
    if len(best_hist) > stagnation and min(best_hist[-stagnation:]) >= min(best_hist[:-stagnation]):
        return "stagnation"
    finite = f[np.isfinite(f)]
    recent = best_hist[-int(10 + 30 * es.dim / es.lam):]
    if finite.size and max(np.ptp(finite), max(recent) - min(recent)) < settings.tol_fun:
        return "tolfun"
    if np.all(es.axis_lengths() < settings.tol_x):
        return "tolx"
    if es.condition > settings.max_condition:
        return "condition"
    return None


def run_with_restarts(objective: BatchObjective, domain: SearchDomain,
                      settings: CmaesSettings | None = None) -> OptimizationRun:
    """IPOP-CMA-ES over ``domain``; returns the best-ever repaired candidate.

    The box center is evaluated first. Each restart draws a uniform random
    mean and multiplies the population by ``population_growth`` up to
    ``max_population``.
    """
    settings = settings or CmaesSettings()
    rng = np.random.default_rng(settings.seed)
    t0 = time.perf_counter()
    n = domain.dim

    def evaluate(U: np.ndarray) -> np.ndarray:
        return np.asarray(objective(domain.from_unit(np.atleast_2d(U))), dtype=float)

    center = np.full(n, 0.5)
    f0 = evaluate(center)[0]
    evaluations = 1
    best_x = center.copy()
    best_J = f0 if np.isfinite(f0) else np.inf
    log = [LogRow(0, float(f0), float(best_J), 0, 0)]
    populations: list[int] = []
    reasons: list[str] = []
    restarts = 0
    lam = settings.initial_population
    mean = center
    iteration = 0
    incumbent_mean = center.copy()
    incumbent_best = np.inf

    def out_of_budget() -> str | None:
        if iteration >= settings.max_iterations:
            return "max_iterations"
        if settings.max_evaluations is not None and evaluations + lam > settings.max_evaluations:
            return "max_evaluations"
        if settings.wall_clock is not None and time.perf_counter() - t0 >= settings.wall_clock:
            return "wall_clock"
        if settings.target is not None and best_J <= settings.target:
            return "target"
        return None

    stop = out_of_budget()
    while stop is None:
        es = CMAES(mean, settings.sigma0, lam, rng)
        box = BoxPenalty(n)
        populations.append(lam)
        run_best = np.inf
        best_hist: list[float] = []
        reason = None
        while reason is None:
            stop = out_of_budget()
            if stop is not None:
                break
            X = es.ask()
            if settings.box_handling == "resample":
                for _ in range(100):
                    bad = np.any((X < 0) | (X > 1), axis=1)
                    if not bad.any():
                        break
                    X[bad] = es.sample(int(bad.sum()))
            R = BoxPenalty.repair(X)
            J = evaluate(R)
            evaluations += lam
            iteration += 1
            J = np.where(np.isfinite(J), J, np.inf)
            fit = J + box.penalty(X, R, es) if settings.box_handling == "penalty" else J
            es.tell(X, fit)
            box.update(J, es)
            k = int(np.argmin(J))
            if J[k] < best_J:
                best_J = float(J[k])
                best_x = R[k].copy()
            run_best = min(run_best, float(J[k]))
            best_hist.append(float(fit.min()))
            log.append(LogRow(iteration, float(J[k]), float(best_J), lam, restarts))
            reason = _restart_reason(es, best_hist, settings, fit)
        if run_best <= incumbent_best:
            incumbent_best = run_best
            incumbent_mean = es.mean.copy()
        if stop is not None:
            reasons.append(stop)
            break
        reasons.append(reason)
        if not settings.restarts:
            stop = "no_restart"
            break
        lam = min(lam * settings.population_growth, settings.max_population)
        mean = rng.uniform(0.0, 1.0, n)
        stop = out_of_budget()
        if stop is not None:
            reasons.append(stop)
        else:
            restarts += 1

    return OptimizationRun(
        settings=settings, domain=domain, log=log,
        best_theta=domain.from_unit(best_x), best_J=float(best_J),
        final_mean=domain.from_unit(incumbent_mean), evaluations=evaluations,
        restarts=restarts, populations=populations, stop_reasons=reasons,
        elapsed=time.perf_counter() - t0)


def is_rejected(theta, domain: SearchDomain, factor: float = REJECT_FACTOR) -> bool:
    """True if any coordinate exceeds ``factor`` times the box boundary magnitude."""
    theta = np.asarray(theta, dtype=float)
    return bool(np.any(~np.isfinite(theta)) or np.any(np.abs(theta) > factor * domain.boundary_magnitude()))


@dataclass
class TrialSummary:
    runs: list[OptimizationRun]
    accepted: list[int]
    rejected: list[int]
    metrics: dict[str, tuple[float, float]] = field(default_factory=dict)

    @property
    def status(self) -> str:
        return "ok" if self.accepted else "all_rejected"


def seed_trials(objective: BatchObjective, domain: SearchDomain,
                settings: CmaesSettings | None = None, n_trials: int = 3,
                seeds: Sequence[int] | None = None,
                metrics: Callable[[np.ndarray], dict[str, float]] | None = None) -> TrialSummary:
    """Independent seeded runs with the rejection rule applied to each final mean.

    ``metrics`` maps an accepted estimate to named numbers; the summary holds
    their mean and (population) standard deviation across accepted trials.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    settings = settings or CmaesSettings()
    if seeds is None:
        seeds = [settings.seed + k for k in range(n_trials)]
    if len(seeds) != n_trials:
        raise ValueError("one seed per trial is required")
    if metrics is None:
        def metrics(theta):
            return {"J_train": float(objective(np.atleast_2d(theta))[0])}
    runs, accepted, rejected = [], [], []
    for k, seed in enumerate(seeds):
        s = CmaesSettings(**{**settings.__dict__, "seed": int(seed)})
        run = run_with_restarts(objective, domain, s)
        run.trial_status = "rejected" if is_rejected(run.estimate, domain) else "accepted"
        (rejected if run.trial_status == "rejected" else accepted).append(k)
        runs.append(run)
    summary = TrialSummary(runs, accepted, rejected)
    if accepted:
        values = [metrics(runs[k].estimate) for k in accepted]
        for key in values[0]:
            arr = np.array([v[key] for v in values])
            summary.metrics[key] = (float(arr.mean()), float(arr.std()))
    return summary


def vectorize(f: Callable[[np.ndarray], float]) -> BatchObjective:
    """Lift a scalar function of one vector to the batch objective interface."""
    def batch(X: np.ndarray) -> np.ndarray:
        return np.array([f(x) for x in np.atleast_2d(X)], dtype=float)
    return batch
