"""3-DoF MMG maneuvering model with low-speed and berthing sub-models.

The numerical work happens in ``numba`` kernels (leading underscore) that
take scalars plus two packed arrays: ``theta`` (the 57 searched parameters,
see :mod:`mmgident.params`) and ``cfg`` (``FixedModelConfig.as_array()``).
The public functions wrap those kernels with small dataclasses.

State arrays are ordered ``(x0, y0, psi, u, vm, r)``, the column order of
trajectory files.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .params import C, P, FixedModelConfig

LIMIT_A = 1e10
U_EPS = 1e-8
SIMPSON_INTERVALS = 40


Q1, Q2, Q3, Q4 = 1, 2, 3, 4

STATE_FIELDS = ("x0", "y0", "psi", "u", "vm", "r")


@dataclass(frozen=True)
class State:
    x0: float = 0.0
    y0: float = 0.0
    psi: float = 0.0
    u: float = 0.0
    vm: float = 0.0
    r: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x0, self.y0, self.psi, self.u, self.vm, self.r])

    @classmethod
    def from_array(cls, a) -> "State":
        return cls(*(float(v) for v in a))


@dataclass(frozen=True)
class Control:
    delta: float = 0.0
    np: float = 0.0


@dataclass(frozen=True)
class Wind:
    gammaT: float = 0.0
    UT: float = 0.0


@dataclass(frozen=True)
class DerivedKinematics:
    U: float
    beta: float
    vmp: float
    rp: float


@dataclass(frozen=True)
class PropellerState:
    Jp: float
    Js: float
    KT: float
    wp: float
    quadrant: int


@dataclass(frozen=True)
class RudderFlow:
    uR: float
    vR: float
    UR: float
    alphaR: float
    FN: float
    eta: float
    fAlpha: float
    clamped: bool


@dataclass(frozen=True)
class ApparentWind:
    UA: float
    gammaA: float


@dataclass(frozen=True)
class ForceBreakdown:
    XH: float
    YH: float
    NH: float
    XP: float
    YP: float
    NP: float
    XR: float
    YR: float
    NR: float
    XA: float
    YA: float
    NA: float

    @property
    def X(self) -> float:
        return self.XH + self.XP + self.XR + self.XA

    @property
    def Y(self) -> float:
        return self.YH + self.YP + self.YR + self.YA

    @property
    def N(self) -> float:
        return self.NH + self.NP + self.NR + self.NA


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True, error_model="numpy")
def _kinematics(u, vm, r, L):
    U = math.sqrt(u * u + vm * vm)
    if U < U_EPS:
        return U, 0.0, 0.0, 0.0
    return U, math.atan2(-vm, u), vm / U, r * L / U


@njit(cache=True, error_model="numpy")
def _simpson(vm, c, a, b, m, moment):
    """Composite Simpson rule of |w| w xi^moment, w = vm + c xi, on [a, b]."""
    h = (b - a) / m
    total = 0.0
    for k in range(m + 1):
        xi = a + k * h
        w = vm + c * xi
        f = abs(w) * w * (xi if moment else 1.0)
        if k == 0 or k == m:
            total += f
        elif k % 2:
            total += 4.0 * f
        else:
            total += 2.0 * f
    return total * h / 3.0


@njit(cache=True, error_model="numpy")
def _cross_flow(vm, c, moment):
    """Integral over xi in [-1/2, 1/2] of |vm + c xi| (vm + c xi) xi^moment.

    The integrand is a cubic on each side of the sign change of w, so the
    interval is split there and Simpson is exact on both pieces.
    """
    if c != 0.0:
        kink = -vm / c
        if -0.5 < kink < 0.5:
            half = SIMPSON_INTERVALS // 2
            return (_simpson(vm, c, -0.5, kink, half, moment)
                    + _simpson(vm, c, kink, 0.5, half, moment))
    return _simpson(vm, c, -0.5, 0.5, SIMPSON_INTERVALS, moment)


@njit(cache=True, error_model="numpy")
def _hull_force(u, vm, r, theta, cfg):
    L = cfg[C.Lpp]
    d = cfg[C.d]
    U, beta, _, _ = _kinematics(u, vm, r, L)
    q = 0.5 * cfg[C.rho] * L * d
    x0f = cfg[C.X0F_p]
    resist = x0f + (theta[P.X0A_p] - x0f) * (abs(beta) / math.pi)
    XH = q * (resist * u * U + theta[P.Xvr_p] * L * vm * r)

    # dx = L dxi, and x = L xi in the moment integrand
    iy = L * _cross_flow(vm, theta[P.CrY] * r * L, 0)
    i_n = L * L * _cross_flow(vm, theta[P.CrN] * r * L, 1)

    cd = theta[P.CD]
    YH = q * (theta[P.Yv_p] * vm * abs(u) + theta[P.Yr_p] * L * r * u - cd / L * iy)
    NH = q * L * (theta[P.Nv_p] * vm * u + theta[P.Nr_p] * L * r * abs(u)
                  - cd / (L * L) * i_n)
    return XH, YH, NH


@njit(cache=True, error_model="numpy")
def _quadrant(u, n):
    if n >= 0.0:
        return Q1 if u >= 0.0 else Q2
    return Q3 if u >= 0.0 else Q4


@njit(cache=True, error_model="numpy")
def _propeller_force(u, vm, r, n, theta, cfg):
    """Return (XP, YP, NP, Jp, Js, KT, wp)."""
    L = cfg[C.Lpp]
    d = cfg[C.d]
    Dp = cfg[C.Dp]
    rho = cfg[C.rho]
    _, _, vmp, rp = _kinematics(u, vm, r, L)

    if u < 0.0:
        wp = 0.0
    else:
        s = vmp + theta[P.xP_p] * rp
        wp = theta[P.wP0] - theta[P.tau] * abs(s) - theta[P.CP_p] * s * s

    if n == 0.0:
        return 0.0, 0.0, 0.0, 0.0, 0.0, cfg[C.kt0], wp

    nd = n * Dp
    Js = u / nd
    Jp = (1.0 - wp) * u / nd
    KT = cfg[C.kt0] + cfg[C.kt1] * Jp + cfg[C.kt2] * Jp * Jp
    thrust_scale = rho * n * n * Dp ** 4

    if n > 0.0:
        XP = thrust_scale * (1.0 - theta[P.tP]) * KT
        if u >= 0.0:
            return XP, 0.0, 0.0, Jp, Js, KT, wp
        npitch = n * cfg[C.pitch]
        lat = 0.5 * rho * L * L * d * npitch * npitch
        YP = lat * (theta[P.A6] * Js * Js + theta[P.A7] * Js + theta[P.A8])
        NP = lat * (theta[P.B6] * Js * Js + theta[P.B7] * Js + theta[P.B8])
        return XP, YP, NP, Jp, Js, KT, wp

    # reversed propeller; thrust deduction is zero here by construction
    if Js >= theta[P.C10]:
        XP = thrust_scale * (theta[P.C6] + theta[P.C7] * Js)
    else:
        XP = thrust_scale * theta[P.C3]
    if Js < -0.35:
        ay = theta[P.A3] + theta[P.A4] * Js
        bn = theta[P.B3] + theta[P.B4] * Js
    elif Js <= -0.06:
        ay = theta[P.A1] + theta[P.A2] * Js
        bn = theta[P.B1] + theta[P.B2] * Js
    else:
        ay = theta[P.A5]
        bn = theta[P.B5]
    lat = 0.5 * rho * L * d * nd * nd
    return XP, lat * ay, lat * L * bn, Jp, Js, KT, wp


@njit(cache=True, error_model="numpy")
def _fujii(lam):
    return 6.13 * lam / (2.25 + lam)


@njit(cache=True, error_model="numpy")
def _rudder_force(u, vm, r, delta, n, wp, KT, theta, cfg):
    """Return (XR, YR, NR, uR, vR, alphaR, FN, clamped)."""
    Dp = cfg[C.Dp]
    xR = cfg[C.xR]
    eta = Dp / cfg[C.HR]
    eps = theta[P.eps]
    clamped = False

    if vm + xR * r >= 0.0:
        vR = -theta[P.gammaP] * (vm + theta[P.lR] * r)
    else:
        vR = -theta[P.gammaN] * (vm + theta[P.lR] * r)

    if n >= 0.0:
        uP = (1.0 - wp) * u
        nd = n * Dp
        jet = uP * uP + 8.0 * KT * nd * nd / math.pi
        if jet < 0.0:
            jet = 0.0
            clamped = True
        inc = uP + theta[P.kx] / eps * (math.sqrt(jet) - uP)
        radicand = eta * inc * inc + (1.0 - eta) * uP * uP
        if radicand < 0.0:
            radicand = 0.0
            clamped = True
        uR = eps * math.sqrt(radicand)
    elif u >= 0.0:
        base = u * eps * (1.0 - wp)
        upr1 = base + n * Dp * theta[P.kxPR] * math.sqrt(8.0 * abs(KT) / math.pi)
        upr2 = base
        usq = (eta * math.copysign(upr1 * upr1, upr1)
               + (1.0 - eta) * math.copysign(upr2 * upr2, upr2)
               + theta[P.CPR] * u)
        uR = math.copysign(math.sqrt(abs(usq)), usq)
    else:
        uR = u

    if uR == 0.0 and vR == 0.0:
        alphaR = delta
    else:
        alphaR = delta - math.atan2(vR, uR)
    UR2 = uR * uR + vR * vR
    FN = 0.5 * cfg[C.rho] * cfg[C.AR] * UR2 * _fujii(cfg[C.lambdaR]) * math.sin(alphaR)

    aH = theta[P.aH]
    cosd = math.cos(delta)
    XR = -(1.0 - theta[P.tR]) * FN * math.sin(delta)
    if cfg[C.yr_standard] != 0.0:
        YR = -(1.0 + aH) * FN * cosd
    else:
        YR = -(1.0 - aH) * FN * cosd
    NR = -(xR + aH * theta[P.xH]) * FN * cosd
    return XR, YR, NR, uR, vR, alphaR, FN, clamped


@njit(cache=True, error_model="numpy")
def _apparent_wind(psi, u, vm, UT, gammaT):
    # air velocity over ground; gammaT = 0 blows from +x0 toward -x0
    wx = -UT * math.cos(gammaT)
    wy = -UT * math.sin(gammaT)
    cp = math.cos(psi)
    sp = math.sin(psi)
    ax = wx * cp + wy * sp - u
    ay = -wx * sp + wy * cp - vm
    UA = math.sqrt(ax * ax + ay * ay)
    if UA == 0.0:
        return 0.0, 0.0
    # direction the relative flow comes from, measured from the bow
    gA = math.atan2(-ay, -ax)
    if gA < 0.0:
        gA += 2.0 * math.pi
    if gA >= 2.0 * math.pi:
        gA -= 2.0 * math.pi
    return UA, gA


@njit(cache=True, error_model="numpy")
def _wind_force(UA, gammaA, theta, cfg):
    g = 2.0 * math.pi - gammaA
    cx = (theta[P.X0w] + theta[P.X1w] * math.cos(g) + theta[P.X3w] * math.cos(3.0 * g)
          + theta[P.X5w] * math.cos(5.0 * g))
    cy = (theta[P.Y1w] * math.sin(g) + theta[P.Y3w] * math.sin(3.0 * g)
          + theta[P.Y5w] * math.sin(5.0 * g))
    cn = (theta[P.N1w] * math.sin(g) + theta[P.N2w] * math.sin(2.0 * g)
          + theta[P.N3w] * math.sin(3.0 * g))
    q = 0.5 * cfg[C.rhoA] * UA * UA
    return q * cfg[C.AT] * cx, q * cfg[C.AL] * cy, q * cfg[C.AL] * cfg[C.LOA] * cn


@njit(cache=True, error_model="numpy")
def _solve_accelerations(u, vm, r, X, Y, N, theta, cfg):
    m = cfg[C.m]
    xG = cfg[C.xG]
    mxx = m + theta[P.mx]
    myy = m + theta[P.my]
    izz = theta[P.IzzJzz] + xG * xG * m
    mxg = xG * m
    udot = (X + myy * vm * r + mxg * r * r) / mxx
    rhs_v = Y - mxx * u * r
    rhs_r = N - mxg * u * r
    det = myy * izz - mxg * mxg
    vdot = (izz * rhs_v - mxg * rhs_r) / det
    rdot = (myy * rhs_r - mxg * rhs_v) / det
    return udot, vdot, rdot


@njit(cache=True, error_model="numpy")
def _forces(psi, u, vm, r, delta, n, UT, gammaT, theta, cfg):
    XH, YH, NH = _hull_force(u, vm, r, theta, cfg)
    XP, YP, NP, _, _, KT, wp = _propeller_force(u, vm, r, n, theta, cfg)
    XR, YR, NR, _, _, _, _, clamped = _rudder_force(u, vm, r, delta, n, wp, KT, theta, cfg)
    UA, gA = _apparent_wind(psi, u, vm, UT, gammaT)
    XA, YA, NA = _wind_force(UA, gA, theta, cfg)
    return XH, YH, NH, XP, YP, NP, XR, YR, NR, XA, YA, NA, clamped


@njit(cache=True, error_model="numpy")
def _derivative(psi, u, vm, r, delta, n, UT, gammaT, theta, cfg):
    """Unlimited state derivative plus the radicand-clamp flag."""
    XH, YH, NH, XP, YP, NP, XR, YR, NR, XA, YA, NA, clamped = _forces(
        psi, u, vm, r, delta, n, UT, gammaT, theta, cfg)
    X = XH + XP + XR + XA
    Y = YH + YP + YR + YA
    N = NH + NP + NR + NA
    udot, vdot, rdot = _solve_accelerations(u, vm, r, X, Y, N, theta, cfg)
    cp = math.cos(psi)
    sp = math.sin(psi)
    return u * cp - vm * sp, u * sp + vm * cp, r, udot, vdot, rdot, clamped


@njit(cache=True, error_model="numpy")
def _clip(v, lim, scale):
    if v != v:
        return 0.0
    if abs(v) > lim:
        return math.copysign(scale * lim, v)
    return v


@njit(cache=True, error_model="numpy")
def _limited_derivative(psi, u, vm, r, delta, n, UT, gammaT, theta, cfg, t, tf, limit):
    dx, dy, dpsi, du, dv, dr, clamped = _derivative(psi, u, vm, r, delta, n, UT, gammaT,
                                                    theta, cfg)
    if limit:
        lin = LIMIT_A
        ang = LIMIT_A / (0.5 * cfg[C.Lpp])
        decay = 2.0 - t / tf
        dx = _clip(dx, lin, decay)
        dy = _clip(dy, lin, decay)
        dpsi = _clip(dpsi, ang, decay)
        du = _clip(du, lin, 1.0)
        dv = _clip(dv, lin, 1.0)
        dr = _clip(dr, ang, 1.0)
    return dx, dy, dpsi, du, dv, dr, clamped


@njit(cache=True, error_model="numpy")
def _wrap(a):
    w = a - 2.0 * math.pi * math.floor((a + math.pi) / (2.0 * math.pi))
    if w <= -math.pi:
        w += 2.0 * math.pi
    elif w > math.pi:
        w -= 2.0 * math.pi
    return w


@njit(cache=True, error_model="numpy")
def _rk4_step(x0, y0, psi, u, vm, r, delta, n, UT, gammaT, theta, cfg, t, tf, limit):
    """One RK4 step of size cfg.dt with controls and wind held constant."""
    h = cfg[C.dt]
    hh = 0.5 * h
    a1, b1, c1, d1, e1, f1, k1 = _limited_derivative(
        psi, u, vm, r, delta, n, UT, gammaT, theta, cfg, t, tf, limit)
    a2, b2, c2, d2, e2, f2, k2 = _limited_derivative(
        psi + hh * c1, u + hh * d1, vm + hh * e1, r + hh * f1,
        delta, n, UT, gammaT, theta, cfg, t + hh, tf, limit)
    a3, b3, c3, d3, e3, f3, k3 = _limited_derivative(
        psi + hh * c2, u + hh * d2, vm + hh * e2, r + hh * f2,
        delta, n, UT, gammaT, theta, cfg, t + hh, tf, limit)
    a4, b4, c4, d4, e4, f4, k4 = _limited_derivative(
        psi + h * c3, u + h * d3, vm + h * e3, r + h * f3,
        delta, n, UT, gammaT, theta, cfg, t + h, tf, limit)
    s = h / 6.0
    nx0 = x0 + s * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    ny0 = y0 + s * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
    npsi = _wrap(psi + s * (c1 + 2.0 * c2 + 2.0 * c3 + c4))
    nu = u + s * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
    nvm = vm + s * (e1 + 2.0 * e2 + 2.0 * e3 + e4)
    nr = r + s * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
    nclamp = int(k1) + int(k2) + int(k3) + int(k4)
    return nx0, ny0, npsi, nu, nvm, nr, nclamp


@njit(cache=True, error_model="numpy")
def _simulate_into(init, controls, winds, theta, cfg, tf, limit, out):
    """Integrate from ``init`` over len(out) samples; returns the clamp count.

    ``controls[k] = (delta, np)`` and ``winds[k] = (UT, gammaT)`` are held
    over [t_k, t_k + dt).
    """
    n = out.shape[0]
    h = cfg[C.dt]
    for j in range(6):
        out[0, j] = init[j]
    count = 0
    for k in range(n - 1):
        x0, y0, psi, u, vm, r, c = _rk4_step(
            out[k, 0], out[k, 1], out[k, 2], out[k, 3], out[k, 4], out[k, 5],
            controls[k, 0], controls[k, 1], winds[k, 0], winds[k, 1],
            theta, cfg, k * h, tf, limit)
        out[k + 1, 0] = x0
        out[k + 1, 1] = y0
        out[k + 1, 2] = psi
        out[k + 1, 3] = u
        out[k + 1, 4] = vm
        out[k + 1, 5] = r
        count += c
    return count


# ---------------------------------------------------------------------------
# public wrappers


@lru_cache(maxsize=32)
def _cfg_array_cached(cfg: FixedModelConfig) -> np.ndarray:
    a = cfg.as_array()
    a.flags.writeable = False
    return a


def cfg_array(cfg: FixedModelConfig | np.ndarray) -> np.ndarray:
    if isinstance(cfg, FixedModelConfig):
        return _cfg_array_cached(cfg)
    return np.asarray(cfg, dtype=float)


def _theta(params) -> np.ndarray:
    theta = np.ascontiguousarray(params, dtype=float)
    if theta.shape != (len(P),):
        raise ValueError(f"parameter vector must have {len(P)} entries, got {theta.shape}")
    return theta


def check_mass_matrix(params, cfg: FixedModelConfig) -> None:
    """Raise ``ValueError`` if the inertia terms make the mass matrix singular."""
    theta = np.atleast_2d(np.asarray(params, dtype=float))
    m, xG = cfg.m, cfg.xG
    mxx = m + theta[:, P.mx]
    det = (m + theta[:, P.my]) * (theta[:, P.IzzJzz] + xG * xG * m) - (xG * m) ** 2
    if np.any(mxx == 0.0) or np.any(det == 0.0) or not np.all(np.isfinite(det)):
        raise ValueError("singular mass matrix for the given inertia parameters")


def kinematics(state: State, cfg: FixedModelConfig) -> DerivedKinematics:
    U, beta, vmp, rp = _kinematics(state.u, state.vm, state.r, cfg.Lpp)
    return DerivedKinematics(U, beta, vmp, rp)


def quadrant(u: float, n: float) -> int:
    """Propeller operating quadrant; ``np == 0`` is grouped with forward revolution."""
    return int(_quadrant(float(u), float(n)))


def hull_force(state: State, params, cfg: FixedModelConfig) -> tuple[float, float, float]:
    return _hull_force(state.u, state.vm, state.r, _theta(params), cfg_array(cfg))


def propeller_force(state: State, control: Control, params, cfg: FixedModelConfig
                    ) -> tuple[float, float, float, PropellerState]:
    XP, YP, NP, Jp, Js, KT, wp = _propeller_force(state.u, state.vm, state.r, control.np,
                                                  _theta(params), cfg_array(cfg))
    return XP, YP, NP, PropellerState(Jp, Js, KT, wp, quadrant(state.u, control.np))


def rudder_force(state: State, control: Control, prop: PropellerState, params,
                 cfg: FixedModelConfig) -> tuple[float, float, float, RudderFlow]:
    XR, YR, NR, uR, vR, alphaR, FN, clamped = _rudder_force(
        state.u, state.vm, state.r, control.delta, control.np, prop.wp, prop.KT,
        _theta(params), cfg_array(cfg))
    flow = RudderFlow(uR=uR, vR=vR, UR=math.hypot(uR, vR), alphaR=alphaR, FN=FN,
                      eta=cfg.Dp / cfg.HR, fAlpha=float(_fujii(cfg.lambdaR)),
                      clamped=bool(clamped))
    return XR, YR, NR, flow


def fujii_gradient(aspect_ratio: float) -> float:
    """Rudder normal-force gradient from Fujii's formula."""
    return float(_fujii(aspect_ratio))


def apparent_wind(state: State, wind: Wind) -> ApparentWind:
    if not wind.UT >= 0.0:
        raise ValueError("true wind speed must be non-negative")
    return ApparentWind(*_apparent_wind(state.psi, state.u, state.vm, wind.UT, wind.gammaT))


def wind_force(aw: ApparentWind, params, cfg: FixedModelConfig) -> tuple[float, float, float]:
    return _wind_force(aw.UA, aw.gammaA, _theta(params), cfg_array(cfg))


def force_breakdown(state: State, control: Control, wind: Wind, params,
                    cfg: FixedModelConfig) -> ForceBreakdown:
    out = _forces(state.psi, state.u, state.vm, state.r, control.delta, control.np,
                  wind.UT, wind.gammaT, _theta(params), cfg_array(cfg))
    return ForceBreakdown(*out[:12])


def solve_accelerations(state: State, forces: ForceBreakdown, params,
                        cfg: FixedModelConfig) -> tuple[float, float, float]:
    check_mass_matrix(params, cfg)
    return _solve_accelerations(state.u, state.vm, state.r, forces.X, forces.Y, forces.N,
                                _theta(params), cfg_array(cfg))


def derivative(state: State, control: Control, wind: Wind, params,
               cfg: FixedModelConfig) -> np.ndarray:
    """Unlimited time derivative of the state, ordered like :class:`State`."""
    check_mass_matrix(params, cfg)
    out = _derivative(state.psi, state.u, state.vm, state.r, control.delta, control.np,
                      wind.UT, wind.gammaT, _theta(params), cfg_array(cfg))
    return np.array(out[:6])


def limited_derivative(state: State, control: Control, wind: Wind, params,
                       cfg: FixedModelConfig, t: float, tf: float) -> np.ndarray:
    out = _limited_derivative(state.psi, state.u, state.vm, state.r, control.delta,
                              control.np, wind.UT, wind.gammaT, _theta(params),
                              cfg_array(cfg), t, tf, True)
    return np.array(out[:6])


def limited_step(state: State, control: Control, wind: Wind, params, cfg: FixedModelConfig,
                 t: float, tf: float, limit: bool = True) -> State:
    """Advance one RK4 step of ``cfg.dt``; every stage derivative is clamped."""
    if not 0.0 <= t <= tf:
        raise ValueError(f"need 0 <= t <= tf, got t={t}, tf={tf}")
    out = _rk4_step(state.x0, state.y0, state.psi, state.u, state.vm, state.r,
                    control.delta, control.np, wind.UT, wind.gammaT,
                    _theta(params), cfg_array(cfg), t, tf, limit)
    return State(*out[:6])


@dataclass
class Simulation:
    states: np.ndarray
    clamp_events: int


def simulate(init, controls, winds, params, cfg: FixedModelConfig, tf: float | None = None,
             limit: bool = True) -> Simulation:
    """Simulate an initial-value problem over the sample grid of ``controls``.

    ``controls`` is ``(n, 2)`` of ``(delta, np)``, ``winds`` is ``(n, 2)`` of
    ``(UT, gammaT)``. Returns ``n`` states starting exactly at ``init``.
    ``tf`` is the horizon used by the decaying limiter (default: the run length).
    """
    controls = np.ascontiguousarray(controls, dtype=float).reshape(-1, 2)
    winds = np.ascontiguousarray(winds, dtype=float).reshape(-1, 2)
    if controls.shape[0] != winds.shape[0]:
        raise ValueError(f"control and wind series differ in length: "
                         f"{controls.shape[0]} != {winds.shape[0]}")
    init = init.as_array() if isinstance(init, State) else np.asarray(init, dtype=float)
    theta = _theta(params)
    check_mass_matrix(theta, cfg)
    n = max(controls.shape[0], 1)
    if tf is None:
        tf = max((n - 1) * cfg.dt, cfg.dt)
    out = np.empty((n, 6))
    count = _simulate_into(init, controls, winds, theta, cfg_array(cfg), float(tf), limit, out)
    return Simulation(out, int(count))
