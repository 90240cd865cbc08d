"""Trajectory-fitting objective: subsequence segmentation, standardization, J1/J2/J3."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .dynamics import _simulate_into, cfg_array, check_mass_matrix
from .params import N_PARAMS, FixedModelConfig

CHANNELS: tuple[str, ...] = ("x0", "u", "y0", "vm", "sin_psi", "cos_psi", "r")
VARIANT_CHANNELS: dict[str, tuple[int, ...]] = {
    "J1": (1, 3, 6),
    "J2": (0, 1, 2, 3, 4, 5, 6),
    "J3": (0, 2, 4, 5),
}
GRID_TOL = 1e-9


@dataclass
class Trajectory:
    """Uniformly sampled record of state, control and wind.

    ``states`` columns are ``(x0, y0, psi, u, vm, r)``, ``controls`` are
    ``(delta, np)`` and ``winds`` are ``(UT, gammaT)``.
    """

    label: str
    t: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    winds: np.ndarray

    def __post_init__(self) -> None:
        self.t = np.asarray(self.t, dtype=float)
        self.states = np.asarray(self.states, dtype=float).reshape(-1, 6)
        self.controls = np.asarray(self.controls, dtype=float).reshape(-1, 2)
        self.winds = np.asarray(self.winds, dtype=float).reshape(-1, 2)
        n = self.t.shape[0]
        if n == 0:
            raise ValueError(f"trajectory {self.label!r} is empty")
        for name in ("states", "controls", "winds"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"trajectory {self.label!r}: {name} has "
                                 f"{getattr(self, name).shape[0]} rows, expected {n}")
        if n > 1:
            steps = np.diff(self.t)
            if np.any(steps <= 0):
                row = int(np.argmax(steps <= 0)) + 1
                raise ValueError(f"trajectory {self.label!r}: time not increasing at row {row}")
            if np.max(np.abs(steps - steps[0])) > GRID_TOL + 1e-12 * abs(self.t[-1]):
                raise ValueError(f"trajectory {self.label!r}: non-uniform sampling")

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def interval(self) -> float:
        if len(self) < 2:
            return 0.0
        return float((self.t[-1] - self.t[0]) / (len(self) - 1))

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def slice(self, start: int, stop: int, label: str | None = None) -> "Trajectory":
        return Trajectory(label or self.label, self.t[start:stop], self.states[start:stop],
                          self.controls[start:stop], self.winds[start:stop])


@dataclass
class Subsequence:
    parent: str
    index: int
    start: int
    stop: int
    traj: Trajectory

    @property
    def duration(self) -> float:
        return self.traj.duration


@dataclass(frozen=True)
class ObjectiveSpec:
    variant: str = "J2"
    tf: float = 100.0
    sigma_floor: float = 1e-6
    standardize_sim_by_input: bool = False

    def __post_init__(self) -> None:
        if self.variant not in VARIANT_CHANNELS:
            raise ValueError(f"unknown objective variant {self.variant!r}")
        if not self.tf > 0:
            raise ValueError("tf must be positive")

    @property
    def channels(self) -> tuple[int, ...]:
        return VARIANT_CHANNELS[self.variant]


def slice_bounds(n: int, per_slice: int) -> list[tuple[int, int]]:
    """Split ``n`` samples into consecutive runs of ``per_slice`` samples.

    A trailing run of a single sample has zero duration, so it is merged into
    the previous slice.
    """
    bounds = [(a, min(a + per_slice, n)) for a in range(0, n, per_slice)]
    if len(bounds) > 1 and bounds[-1][1] - bounds[-1][0] == 1:
        bounds[-2] = (bounds[-2][0], n)
        bounds.pop()
    return bounds


def segment(traj: Trajectory, tf: float) -> list[Subsequence]:
    """Cut a trajectory into contiguous, non-overlapping slices of ``tf`` seconds."""
    if len(traj) == 1:
        return [Subsequence(traj.label, 0, 0, 1, traj)]
    per_slice = max(int(round(tf / traj.interval)), 1)
    return [Subsequence(traj.label, i, a, b, traj.slice(a, b))
            for i, (a, b) in enumerate(slice_bounds(len(traj), per_slice))]


def extract_z(states: np.ndarray, variant: str) -> np.ndarray:
    """State selection used by the objective; heading enters only through sin/cos."""
    states = np.asarray(states, dtype=float).reshape(-1, 6)
    full = np.column_stack([states[:, 0], states[:, 3], states[:, 1], states[:, 4],
                            np.sin(states[:, 2]), np.cos(states[:, 2]), states[:, 5]])
    return full[:, list(VARIANT_CHANNELS[variant])]


def standardize(series: np.ndarray, sigma_floor: float = 1e-6, mu=None, sigma=None):
    """Standardize each column by its own mean/std unless ``mu``/``sigma`` are given.

    Returns ``(z_hat, mu, sigma)`` with ``sigma`` floored at ``sigma_floor``.
    """
    series = np.asarray(series, dtype=float)
    if series.shape[0] == 0:
        raise ValueError("cannot standardize an empty series")
    if mu is None:
        mu = series.mean(axis=0)
    if sigma is None:
        sigma = np.maximum(series.std(axis=0), sigma_floor)
    return (series - mu) / sigma, mu, sigma


# ---------------------------------------------------------------------------
# compiled evaluation


@njit(cache=True)
def _zval(states, t, j):
    if j == 0:
        return states[t, 0]
    if j == 1:
        return states[t, 3]
    if j == 2:
        return states[t, 1]
    if j == 3:
        return states[t, 4]
    if j == 4:
        return np.sin(states[t, 2])
    if j == 5:
        return np.cos(states[t, 2])
    return states[t, 5]


@njit(cache=True)
def _candidate_cost(theta, cfg, states, controls, winds, starts, zin_hat, mu_in, sig_in,
                    chans, sigma_floor, tf, by_input, dt, buf, zs, per_slice):
    total = 0.0
    for i in range(starts.shape[0] - 1):
        a = starts[i]
        b = starts[i + 1]
        n = b - a
        sim = buf[:n]
        _simulate_into(states[a], controls[a:b], winds[a:b], theta, cfg, tf, True, sim)
        slice_sum = 0.0
        for jj in range(chans.shape[0]):
            j = chans[jj]
            for t in range(n):
                zs[t] = _zval(sim, t, j)
            if by_input:
                mu = mu_in[i, j]
                sg = sig_in[i, j]
            else:
                mu = 0.0
                for t in range(n):
                    mu += zs[t]
                mu /= n
                var = 0.0
                for t in range(n):
                    var += (zs[t] - mu) ** 2
                sg = np.sqrt(var / n)
                if sg < sigma_floor:
                    sg = sigma_floor
            ch = 0.0
            for t in range(n):
                d = zin_hat[a + t, j] - (zs[t] - mu) / sg
                ch += d * d
            slice_sum += ch
        per_slice[i] = slice_sum * dt
        total += slice_sum * dt
    return total


@njit(cache=True, parallel=True)
def _population_cost(thetas, cfg, states, controls, winds, starts, zin_hat, mu_in, sig_in,
                     chans, sigma_floor, tf, by_input, dt, maxlen, out):
    nslices = starts.shape[0] - 1
    for c in prange(thetas.shape[0]):
        buf = np.empty((maxlen, 6))
        zs = np.empty(maxlen)
        per_slice = np.empty(nslices)
        out[c] = _candidate_cost(thetas[c], cfg, states, controls, winds, starts, zin_hat,
                                 mu_in, sig_in, chans, sigma_floor, tf, by_input, dt, buf,
                                 zs, per_slice)


@dataclass
class Objective:
    """J(theta; D) for a fixed data set, prepared once and evaluated many times.

    Calling the instance evaluates one parameter vector; :meth:`batch`
    evaluates a whole population (rows of a 2-D array) in parallel.
    """

    dataset: list[Trajectory]
    spec: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    cfg: FixedModelConfig = field(default_factory=FixedModelConfig)

    def __post_init__(self) -> None:
        if isinstance(self.dataset, Trajectory):
            self.dataset = [self.dataset]
        if not self.dataset:
            raise ValueError("objective needs at least one trajectory")
        subs: list[Subsequence] = []
        for traj in self.dataset:
            if len(traj) > 1 and abs(traj.interval - self.cfg.dt) > GRID_TOL:
                raise ValueError(f"trajectory {traj.label!r} is sampled every "
                                 f"{traj.interval} s but the simulation step is {self.cfg.dt} s")
            subs.extend(segment(traj, self.spec.tf))
        self.subsequences = subs

        states = np.concatenate([s.traj.states for s in subs])
        self._states = np.ascontiguousarray(states)
        self._controls = np.ascontiguousarray(np.concatenate([s.traj.controls for s in subs]))
        self._winds = np.ascontiguousarray(np.concatenate([s.traj.winds for s in subs]))
        lengths = np.array([len(s.traj) for s in subs])
        self._starts = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
        self._maxlen = int(lengths.max())

        zin_hat = np.empty((states.shape[0], len(CHANNELS)))
        mu_in = np.empty((len(subs), len(CHANNELS)))
        sig_in = np.empty((len(subs), len(CHANNELS)))
        for i, s in enumerate(subs):
            a, b = self._starts[i], self._starts[i + 1]
            zhat, mu, sg = standardize(extract_z(s.traj.states, "J2"), self.spec.sigma_floor)
            zin_hat[a:b] = zhat
            mu_in[i] = mu
            sig_in[i] = sg
        self._zin_hat = zin_hat
        self._mu_in = mu_in
        self._sig_in = sig_in
        self._chans = np.array(self.spec.channels, dtype=np.int64)
        self._cfg = cfg_array(self.cfg)

    @property
    def n_subsequences(self) -> int:
        return len(self.subsequences)

    def batch(self, thetas) -> np.ndarray:
        thetas = np.ascontiguousarray(np.atleast_2d(thetas), dtype=float)
        if thetas.shape[1] != N_PARAMS:
            raise ValueError(f"parameter vectors must have {N_PARAMS} entries")
        check_mass_matrix(thetas, self.cfg)
        out = np.empty(thetas.shape[0])
        _population_cost(thetas, self._cfg, self._states, self._controls, self._winds,
                         self._starts, self._zin_hat, self._mu_in, self._sig_in, self._chans,
                         self.spec.sigma_floor, self.spec.tf,
                         self.spec.standardize_sim_by_input, self.cfg.dt, self._maxlen, out)
        return out

    def per_subsequence(self, theta) -> np.ndarray:
        """Contribution of every subsequence, in segmentation order."""
        theta = np.ascontiguousarray(theta, dtype=float)
        check_mass_matrix(theta, self.cfg)
        per = np.empty(self.n_subsequences)
        _candidate_cost(theta, self._cfg, self._states, self._controls, self._winds,
                        self._starts, self._zin_hat, self._mu_in, self._sig_in, self._chans,
                        self.spec.sigma_floor, self.spec.tf, self.spec.standardize_sim_by_input,
                        self.cfg.dt, np.empty((self._maxlen, 6)), np.empty(self._maxlen), per)
        return per

    def __call__(self, theta) -> float:
        return float(self.batch(theta)[0])


def evaluate_J(params, dataset, spec: ObjectiveSpec | None = None,
               cfg: FixedModelConfig | None = None) -> float:
    """Objective value of one parameter vector on a list of trajectories."""
    return Objective(list(dataset) if not isinstance(dataset, Trajectory) else [dataset],
                     spec or ObjectiveSpec(), cfg or FixedModelConfig())(params)
