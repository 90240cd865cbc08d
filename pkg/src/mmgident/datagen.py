"""Synthetic free-running data: random, turning, zig-zag and berthing maneuvers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import _rk4_step, _wrap, cfg_array, check_mass_matrix, simulate
from .objective import Trajectory
from .params import FixedModelConfig, ground_truth

DELTA_MAX = math.radians(35.0)
NP_MAX_RANDOM = 10.0
NP_MAX_BERTHING = 20.0
KINDS = ("random", "turning", "zigzag", "berthing")


@dataclass(frozen=True)
class GroundTruth:
    theta: np.ndarray
    cfg: FixedModelConfig = field(default_factory=FixedModelConfig)
    note: str = "synthetic VLCC-like coefficients, validated by behaviour gates"

    @classmethod
    def default(cls) -> "GroundTruth":
        return cls(ground_truth())


@dataclass(frozen=True)
class WindScript:
    """Mean wind plus Ornstein-Uhlenbeck fluctuations of speed and direction."""

    mean_direction: float = math.radians(90.0)
    mean_speed: float = 1.0
    speed_amplitude: float = 0.2
    direction_amplitude: float = math.radians(10.0)
    correlation_time: float = 20.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mean_speed < 0 or self.speed_amplitude < 0 or self.direction_amplitude < 0:
            raise ValueError("wind speed and fluctuation amplitudes must be >= 0")
        if not self.correlation_time > 0:
            raise ValueError("correlation_time must be positive")

    def with_(self, **changes) -> "WindScript":
        return WindScript(**{**self.__dict__, **changes})


CALM = WindScript(mean_speed=0.0, speed_amplitude=0.0, direction_amplitude=0.0)


@dataclass(frozen=True)
class PDGains:
    kp: float = 3.0
    kd: float = 10.0


@dataclass(frozen=True)
class ManeuverScript:
    """What to do and for how long.

    Angles are radians and revolutions are rps. ``delta`` is the rudder
    angle of a turn or the zig-zag amplitude; ``switch_angle`` is the heading
    deviation that flips the zig-zag rudder (defaults to ``delta``).
    Berthing ``side`` is ``"S"`` or ``"P"``.
    """

    kind: str
    duration: float
    init: tuple[float, ...] = (0.0, 0.0, 0.0, 0.1, 0.0, 0.0)
    delta: float = 0.0
    np_rps: float = 10.0
    switch_angle: float | None = None
    course_keeping: float = 60.0
    target_psi: float = 0.0
    delta_max: float = DELTA_MAX
    np_max: float = NP_MAX_RANDOM
    dwell: tuple[float, float] = (5.0, 30.0)
    side: str = "S"
    approach_time: float = 40.0
    turn_time: float = 25.0
    turn_delta: float = math.radians(25.0)
    reverse_np: float = 15.0
    gains: PDGains = field(default_factory=PDGains)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown maneuver kind {self.kind!r}")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if len(self.init) != 6:
            raise ValueError("init must hold 6 state values")
        limit = NP_MAX_RANDOM if self.kind == "random" else NP_MAX_BERTHING
        if abs(self.delta) > DELTA_MAX or self.delta_max > DELTA_MAX:
            raise ValueError("rudder angle limit is 35 deg")
        revs = [abs(self.np_rps), self.np_max if self.kind == "random" else 0.0,
                abs(self.reverse_np) if self.kind == "berthing" else 0.0]
        if max(revs) > limit:
            raise ValueError(f"propeller revolution limit for {self.kind} is {limit} rps")
        if self.kind == "berthing" and self.side not in ("S", "P"):
            raise ValueError("berthing side must be 'S' or 'P'")
        lo, hi = self.dwell
        if not 0 < lo <= hi:
            raise ValueError("dwell range must satisfy 0 < lo <= hi")


def pd_heading_controller(state, target_psi: float, gains: PDGains = PDGains(),
                          limit: float = DELTA_MAX) -> float:
    """Rudder command holding ``target_psi``; ``state`` is a State or a 6-array."""
    psi, r = (state[2], state[5]) if not hasattr(state, "psi") else (state.psi, state.r)
    err = _wrap(float(psi) - target_psi)
    delta = -gains.kp * err - gains.kd * float(r)
    return min(max(delta, -limit), limit)


def generate_wind(script: WindScript, duration: float, dt: float = 0.1) -> np.ndarray:
    """``(n, 2)`` array of ``(UT, gammaT)`` on the sample grid of ``duration``."""
    if not duration > 0:
        raise ValueError("duration must be positive")
    n = int(round(duration / dt)) + 1
    rng = np.random.default_rng(script.seed)
    a = math.exp(-dt / script.correlation_time)
    b = math.sqrt(1.0 - a * a)
    xi = rng.standard_normal((n, 2))
    s = np.empty((n, 2))
    s[0] = xi[0]
    for k in range(1, n):
        s[k] = a * s[k - 1] + b * xi[k]
    speed = np.maximum(script.mean_speed + script.speed_amplitude * s[:, 0], 0.0)
    direction = np.mod(script.mean_direction + script.direction_amplitude * s[:, 1], 2 * math.pi)
    return np.column_stack([speed, direction])


@dataclass(frozen=True)
class NoiseSpec:
    """Standard deviation of additive Gaussian noise per state channel."""

    x0: float = 0.0
    y0: float = 0.0
    psi: float = 0.0
    u: float = 0.0
    vm: float = 0.0
    r: float = 0.0
    seed: int = 0

    def sigmas(self) -> np.ndarray:
        s = np.array([self.x0, self.y0, self.psi, self.u, self.vm, self.r])
        if np.any(s < 0):
            raise ValueError("noise standard deviations must be >= 0")
        return s


def add_noise(traj: Trajectory, spec: NoiseSpec) -> Trajectory:
    sig = spec.sigmas()
    rng = np.random.default_rng(spec.seed)
    states = traj.states.copy()
    for j in np.flatnonzero(sig):
        states[:, j] += sig[j] * rng.standard_normal(len(traj))
    if sig[2] > 0:
        states[:, 2] = np.vectorize(_wrap)(states[:, 2])
    return Trajectory(traj.label, traj.t.copy(), states, traj.controls.copy(), traj.winds.copy())


Policy = Callable[[int, np.ndarray], tuple[float, float]]


def _closed_loop(init, n: int, policy: Policy, winds: np.ndarray, truth: GroundTruth):
    """Step the model with a state-feedback policy; returns (states, controls)."""
    theta = np.ascontiguousarray(truth.theta, dtype=float)
    cfg = cfg_array(truth.cfg)
    tf = max((n - 1) * truth.cfg.dt, truth.cfg.dt)
    states = np.empty((n, 6))
    controls = np.empty((n, 2))
    states[0] = init
    for k in range(n):
        controls[k] = policy(k, states[k])
        if k == n - 1:
            break
        x = states[k]
        out = _rk4_step(x[0], x[1], x[2], x[3], x[4], x[5], controls[k, 0], controls[k, 1],
                        winds[k, 0], winds[k, 1], theta, cfg, k * truth.cfg.dt, tf, True)
        states[k + 1] = out[:6]
    return states, controls


def _random_controls(script: ManeuverScript, n: int, dt: float) -> np.ndarray:
    rng = np.random.default_rng(script.seed)
    controls = np.empty((n, 2))
    k = 0
    lo, hi = script.dwell
    while k < n:
        m = max(int(round(rng.uniform(lo, hi) / dt)), 1)
        controls[k:k + m] = (rng.uniform(-script.delta_max, script.delta_max),
                             rng.uniform(-script.np_max, script.np_max))
        k += m
    return controls


def _turning_policy(script: ManeuverScript, dt: float) -> Policy:
    k0 = int(round(script.course_keeping / dt))

    def policy(k, x):
        if k < k0:
            return pd_heading_controller(x, script.target_psi, script.gains), script.np_rps
        return script.delta, script.np_rps
    return policy


def _zigzag_policy(script: ManeuverScript, dt: float) -> Policy:
    k0 = int(round(script.course_keeping / dt))
    amp = abs(script.delta)
    switch = abs(script.switch_angle if script.switch_angle is not None else script.delta)
    current = [amp]

    def policy(k, x):
        if k < k0:
            return pd_heading_controller(x, script.target_psi, script.gains), script.np_rps
        dev = _wrap(x[2] - script.target_psi)
        if current[0] > 0 and dev >= switch:
            current[0] = -amp
        elif current[0] < 0 and dev <= -switch:
            current[0] = amp
        return current[0], script.np_rps
    return policy


def _berthing_policy(script: ManeuverScript, dt: float) -> Policy:
    """Approach on a PD-held course, swing towards the berth, reverse, then hold still."""
    k_turn = int(round(script.approach_time / dt))
    k_rev = k_turn + int(round(script.turn_time / dt))
    swing = script.turn_delta if script.side == "S" else -script.turn_delta
    phase = ["approach"]

    def policy(k, x):
        u = x[3]
        if k < k_turn:
            return pd_heading_controller(x, script.target_psi, script.gains), script.np_rps
        if k < k_rev:
            return swing, 0.5 * script.np_rps
        if phase[0] != "hold" and u <= 0.01:
            phase[0] = "hold"
        if phase[0] == "approach":
            phase[0] = "reverse"
        if phase[0] == "reverse":
            return 0.0, -script.reverse_np
        # proportional speed keeping around zero with a small deadband
        n = 0.0 if abs(u) < 0.002 else -200.0 * u
        return 0.0, min(max(n, -script.reverse_np), script.reverse_np)
    return policy


def generate_maneuver(script: ManeuverScript, wind: WindScript = CALM,
                      truth: GroundTruth | None = None, label: str | None = None) -> Trajectory:
    truth = truth or GroundTruth.default()
    check_mass_matrix(truth.theta, truth.cfg)
    dt = truth.cfg.dt
    n = int(round(script.duration / dt)) + 1
    winds = generate_wind(wind, (n - 1) * dt, dt) if n > 1 else np.array([[wind.mean_speed, wind.mean_direction]])
    init = np.asarray(script.init, dtype=float)
    if script.kind == "random":
        controls = _random_controls(script, n, dt)
        states = simulate(init, controls, winds, truth.theta, truth.cfg).states
    else:
        policy = {"turning": _turning_policy, "zigzag": _zigzag_policy,
                  "berthing": _berthing_policy}[script.kind](script, dt)
        states, controls = _closed_loop(init, n, policy, winds, truth)
    return Trajectory(label or script.kind, np.arange(n) * dt, states, controls, winds)


# ---------------------------------------------------------------------------
# behaviour gates


@dataclass
class GateReport:
    turning_diameter: float
    zigzag_overshoot: float
    equilibrium_speed: float

    @property
    def checks(self) -> dict[str, bool]:
        return {"turning_diameter": 2.5 <= self.turning_diameter <= 6.0,
                "zigzag_overshoot": 5.0 <= self.zigzag_overshoot <= 25.0,
                "equilibrium_speed": 0.2 <= self.equilibrium_speed <= 0.45}

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def check_behavior_gates(truth: GroundTruth | None = None) -> GateReport:
    """Turning diameter [Lpp] at 35 deg, first 20/20 overshoot [deg], speed at 10 rps [m/s]."""
    truth = truth or GroundTruth.default()
    dt = truth.cfg.dt
    straight = generate_maneuver(ManeuverScript("turning", 600.0, init=(0, 0, 0, 0, 0, 0),
                                                delta=0.0, course_keeping=600.0), CALM, truth)
    u_eq = float(straight.states[-1, 3])
    start = (0.0, 0.0, 0.0, u_eq, 0.0, 0.0)
    turn = generate_maneuver(ManeuverScript("turning", 600.0, init=start, delta=DELTA_MAX,
                                            course_keeping=0.0), CALM, truth)
    tail = turn.states[-int(round(300.0 / dt)):]
    diameter = max(np.ptp(tail[:, 0]), np.ptp(tail[:, 1])) / truth.cfg.Lpp
    a = math.radians(20.0)
    zz = generate_maneuver(ManeuverScript("zigzag", 300.0, init=start, delta=a,
                                          course_keeping=0.0), CALM, truth)
    flips = np.flatnonzero(np.diff(np.sign(zz.controls[:, 0])) != 0)
    psi = zz.states[:, 2]
    if len(flips) >= 2:
        overshoot = math.degrees(np.max(psi[flips[0] + 1:flips[1] + 1])) - 20.0
    else:
        overshoot = float("nan")
    return GateReport(float(diameter), float(overshoot), u_eq)


# ---------------------------------------------------------------------------
# data sets

TRAIN_R1_MAX = 2038.0
SUBSETS_TEST = ("R", "Z", "T", "B-S", "B-P")


def _prefix(traj: Trajectory, duration: float, label: str) -> Trajectory:
    n = int(round(duration / traj.interval)) + 1
    if n > len(traj):
        raise ValueError(f"{traj.label} is shorter than {duration} s")
    return traj.slice(0, n, label)


def build_datasets(truth: GroundTruth | None = None, seed: int = 0,
                   wind: WindScript | None = None) -> dict[str, list[Trajectory]]:
    """Training and test sets with the composition of the reference study.

    Trajectory labels double as subset names. Test turning (35 deg, 8 rps)
    and zig-zag (20/20, 12 rps) inputs do not occur in any training script.
    """
    truth = truth or GroundTruth.default()
    wind = wind or WindScript()
    rng = np.random.default_rng(seed)
    seeds = iter(int(s) for s in rng.integers(0, 2**31 - 1, size=32))
    d20, d15, d30, d35 = (math.radians(a) for a in (20, 15, 30, 35))
    cruise = (0.0, 0.0, 0.0, 0.3, 0.0, 0.0)

    def windy(direction_deg: float) -> WindScript:
        return wind.with_(mean_direction=math.radians(direction_deg), seed=next(seeds))

    def rand(duration, label):
        return generate_maneuver(ManeuverScript("random", duration, init=cruise, seed=next(seeds)),
                                 windy(90.0), truth, label)

    r1 = rand(TRAIN_R1_MAX, "R1")
    r2 = rand(674.0, "R2")
    t1 = generate_maneuver(ManeuverScript("turning", 266.0, delta=-d20, np_rps=10.0),
                           windy(45.0), truth, "T1")
    t2 = generate_maneuver(ManeuverScript("turning", 284.0, delta=d20, np_rps=10.0),
                           windy(135.0), truth, "T2")
    z1 = generate_maneuver(ManeuverScript("zigzag", 186.0, delta=d15, np_rps=10.0),
                           windy(60.0), truth, "Z")
    z2 = generate_maneuver(ManeuverScript("zigzag", 186.0, delta=d30, np_rps=10.0),
                           windy(120.0), truth, "Z")
    test_r = rand(714.0, "R")
    test_z = generate_maneuver(ManeuverScript("zigzag", 146.0, delta=d20, np_rps=12.0),
                               windy(90.0), truth, "Z")
    test_t = generate_maneuver(ManeuverScript("turning", 520.0, delta=d35, np_rps=8.0),
                               windy(90.0), truth, "T")
    calm_berth = wind.with_(mean_speed=0.3 * wind.mean_speed,
                            speed_amplitude=0.3 * wind.speed_amplitude)
    berth = {}
    for side, duration in (("S", 130.0), ("P", 114.0)):
        script = ManeuverScript("berthing", duration, init=(0, 0, 0, 0.25, 0, 0), side=side,
                                np_rps=6.0, reverse_np=NP_MAX_BERTHING, seed=next(seeds))
        berth[side] = generate_maneuver(script, calm_berth.with_(seed=next(seeds)),
                                        truth, f"B-{side}")
    return {
        "Train-R": [_prefix(r1, 2021.0, "R1"), r2],
        "Train-TR": [_prefix(r1, 2038.0, "R1"), _prefix(t1, 258.0, "T1"), t2],
        "Train-TZR": [_prefix(r1, 2022.0, "R1"), z1, z2, t1],
        "Test": [test_r, test_z, test_t, berth["S"], berth["P"]],
    }
