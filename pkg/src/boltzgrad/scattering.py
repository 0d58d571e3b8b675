"""Classical two-body scattering for radial potentials supported in the unit ball.

Conventions: both particles have unit mass, so the relative motion has reduced
mass 1/2 and energy ``V^2/4`` at relative speed ``V``.  Lengths are microscopic
(support radius 1); ``scattering_time`` rescales by ``eps`` on request.
With ``g(r) = 1 - rho^2/r^2 - 4 Phi(r)/V^2`` the turning radius ``r_min`` is the
largest zero of ``g`` and

    chi = pi - 2 arcsin(rho) - 2 int_{r_min}^1 rho / (r^2 sqrt(g)) dr,
    tau = 2 int_{r_min}^1 dr / (V sqrt(g)).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import brentq

from .errors import (
    AmbiguousInverseError,
    NumericalFailure,
    OutgoingConfigurationError,
    TrappedOrbitError,
)
from .potentials import RadialPotential

QUAD_TOL = 1e-10
_SCAN = None


def _scan_grid():
    # dense near the edge of the support (steep walls) and near the origin (soft cores)
    global _SCAN
    if _SCAN is None:
        s = 1.0 - np.geomspace(1e-15, 1.0, 700)[:-1]
        r = np.geomspace(1e-10, 1.0, 500)[:-1]
        _SCAN = np.unique(np.concatenate([s, r]))[::-1]
    return _SCAN


@dataclass(frozen=True)
class ScatteringOutcome:
    chi: float
    rho: float
    V: float
    r_min: float
    t_star: float | None = None
    scattered: bool = True


def _g(pot, rho, V, r):
    r = np.asarray(r, dtype=float)
    return 1.0 - rho * rho / (r * r) - 4.0 * pot.value(r) / (V * V)


def _dg(pot, rho, V, r):
    return 2.0 * rho * rho / r ** 3 - 4.0 * pot.derivative(r) / (V * V)


def turning_radius(pot: RadialPotential, rho: float, V: float) -> float:
    """Largest root of ``g`` in ``(0, 1]``; 0 when a head-on orbit passes through the centre."""
    if pot.is_hard_sphere:
        return 1.0
    if rho >= 1.0:
        return 1.0
    grid = _scan_grid()
    grid = grid[grid >= pot.r_domain]
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        g = _g(pot, rho, V, grid)
    bad = np.flatnonzero(~(g > 0))
    if bad.size == 0:
        if rho == 0.0 and pot.r_domain == 0.0:
            return 0.0
        raise TrappedOrbitError(f"no turning point for rho={rho}, V={V} (capture)")
    m = bad[0]
    hi = grid[m - 1] if m > 0 else 1.0
    lo = grid[m]
    return brentq(lambda r: float(_g(pot, rho, V, r)), lo, hi, xtol=1e-15, rtol=1e-15,
                  maxiter=200)


def _orbit_integral(pot, rho, V, r_min, weight):
    """``int_{r_min}^1 weight(r) / sqrt(g(r)) dr`` with ``r = r_min + u^2``."""
    if r_min >= 1.0:
        return 0.0
    umax = math.sqrt(1.0 - r_min)
    if r_min > 0:
        slope = float(_dg(pot, rho, V, r_min))
        if slope <= 0:
            raise TrappedOrbitError("degenerate turning point (orbiting)")
    else:
        slope = None

    def integrand(u):
        r = r_min + u * u
        if slope is not None:
            gv = float(_g(pot, rho, V, r)) if u > 1e-7 else slope * u * u
            if gv <= 0:
                gv = slope * u * u
            if u == 0.0:
                return 2.0 * weight(r) / math.sqrt(slope)
            return 2.0 * u * weight(r) / math.sqrt(gv)
        # head-on pass through the origin: g > 0 down to r = 0
        gv = float(_g(pot, rho, V, max(r, 1e-300)))
        return 2.0 * u * weight(r) / math.sqrt(gv)

    val, err = quad(integrand, 0.0, umax, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=400)
    if not np.isfinite(val):
        raise NumericalFailure("orbit quadrature diverged")
    return val


def deflection_angle(pot: RadialPotential, rho: float, V: float, *, outcome: bool = False):
    """Deflection angle ``chi in [0, pi]`` for impact parameter ``rho`` and relative speed ``V``."""
    if V <= 0:
        raise ValueError("V must be positive")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if rho > 1.0:
        res = ScatteringOutcome(0.0, rho, V, 1.0, 0.0, scattered=False)
        return res if outcome else 0.0
    if pot.is_hard_sphere:
        res = ScatteringOutcome(2.0 * math.acos(rho), rho, V, 1.0, 0.0)
        return res if outcome else res.chi
    if rho == 0.0:
        # central collision: reflection if the core is never overcome
        reflect = pot.value_at_origin() > V * V / 4.0
        chi = math.pi if reflect else 0.0
        r_min = turning_radius(pot, 0.0, V) if reflect else 0.0
        res = ScatteringOutcome(chi, rho, V, r_min)
        return res if outcome else chi
    r_min = turning_radius(pot, rho, V)
    integral = _orbit_integral(pot, rho, V, r_min, lambda r: rho / (r * r))
    chi = math.pi - 2.0 * math.asin(rho) - 2.0 * integral
    chi = min(max(chi, 0.0), math.pi)
    res = ScatteringOutcome(chi, rho, V, r_min)
    return res if outcome else chi


def scattering_time(pot: RadialPotential, rho: float, V: float, eps: float = 1.0) -> float:
    """Macroscopic time the pair spends closer than ``eps`` (``eps=1``: microscopic units)."""
    if V <= 0 or eps <= 0:
        raise ValueError("V and eps must be positive")
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    if pot.is_hard_sphere or rho == 1.0:
        return 0.0
    r_min = turning_radius(pot, rho, V)
    tau = 2.0 * _orbit_integral(pot, rho, V, r_min, lambda r: 1.0) / V
    if tau > 1e3 / V:
        raise TrappedOrbitError(f"residence time {tau:.3g} exceeds 1e3/V")
    return eps * tau


@dataclass(frozen=True)
class MonotonicityReport:
    passed: bool
    s_min: float
    r_at_min: float
    indeterminate: int


def check_monotonicity(pot: RadialPotential, grid_size: int = 400, r_lo: float = 1e-3,
                       rtol: float = 1e-12) -> MonotonicityReport:
    """Sign test of ``s(r) = r Phi''(r) + 2 Phi'(r)`` on a log grid in ``(0, 1)``.

    ``s >= 0`` throughout is the structural condition under which the deflection
    angle is a monotone function of the impact parameter.
    """
    if pot.is_hard_sphere:
        return MonotonicityReport(True, 0.0, 1.0, 0)
    r = np.geomspace(max(r_lo, pot.r_domain), 1.0, grid_size + 1)[:-1]
    with np.errstate(all="ignore"):
        a = r * pot.second_derivative(r)
        b = 2.0 * pot.derivative(r)
    s = a + b
    finite = np.isfinite(s)
    if not finite.any():
        return MonotonicityReport(False, math.nan, math.nan, int(s.size))
    # roundoff allowance relative to the size of the two cancelling terms
    slack = rtol * (np.abs(a) + np.abs(b))[finite]
    sf, rf = s[finite], r[finite]
    m = int(np.argmin(sf))
    return MonotonicityReport(bool(np.all(sf >= -slack)), float(sf[m]), float(rf[m]),
                              int((~finite).sum()))


def scattering_map(v_i, v_k, nu, pot: RadialPotential, *, chi_fn=None):
    """Outgoing velocities of an encounter entering the interaction range along ``nu``.

    ``nu`` points from particle i to particle k.  The relative velocity
    ``g = v_k - v_i`` is rotated by the deflection angle in the plane of ``g`` and
    ``nu``.  ``chi_fn(rho, V)`` may replace the quadrature (e.g. a table).
    """
    v_i = np.asarray(v_i, dtype=float)
    v_k = np.asarray(v_k, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if abs(np.linalg.norm(nu) - 1.0) > 1e-12:
        raise ValueError("impact vector must have unit length")
    g = v_k - v_i
    gn = float(np.dot(nu, g))
    if gn > 0:
        raise OutgoingConfigurationError("pair is separating along nu")
    V = float(np.linalg.norm(g))
    if V == 0.0:
        return v_i.copy(), v_k.copy()
    if pot.is_hard_sphere:
        return v_i + gn * nu, v_k - gn * nu
    ghat = g / V
    perp = nu - np.dot(nu, ghat) * ghat
    rho = float(np.linalg.norm(perp))
    e = perp / rho if rho > 0 else np.zeros(3)
    rho = min(rho, 1.0)
    chi = chi_fn(rho, V) if chi_fn is not None else deflection_angle(pot, rho, V)
    g_out = V * (math.cos(chi) * ghat + math.sin(chi) * e)
    vcm = 0.5 * (v_i + v_k)
    return vcm - 0.5 * g_out, vcm + 0.5 * g_out


def _dchi_drho(pot, rho, V, h=1e-5):
    lo, hi = max(rho - h, 0.0), min(rho + h, 1.0)
    return (deflection_angle(pot, hi, V) - deflection_angle(pot, lo, V)) / (hi - lo)


def kernel_from_rho(pot: RadialPotential, rho: float, V: float) -> float:
    """``B = V rho / (sin chi |d chi / d rho|)`` evaluated at impact parameter ``rho``."""
    if pot.is_hard_sphere:
        return V / 4.0
    chi = deflection_angle(pot, rho, V)
    d = abs(_dchi_drho(pot, rho, V))
    s = math.sin(chi)
    if d == 0 or s == 0:
        return math.inf if rho > 0 else 0.0
    return V * rho / (s * d)


def cross_section_kernel(pot: RadialPotential, V: float, chi: float) -> float:
    """Collision kernel ``B(V, chi) = V rho |d rho / d chi| / sin chi``.

    Needs the inverse ``rho(chi)``, which exists only for monotone deflection; a
    non-monotone potential raises ``AmbiguousInverseError``.  Deflections larger
    than the head-on value are never produced and give ``B = 0``.
    """
    if V <= 0:
        raise ValueError("V must be positive")
    if not 0.0 < chi < math.pi:
        if pot.is_hard_sphere and 0.0 <= chi <= math.pi:
            return V / 4.0
        raise ValueError("chi must lie in (0, pi)")
    if pot.is_hard_sphere:
        return V / 4.0
    if not check_monotonicity(pot).passed:
        raise AmbiguousInverseError(f"{pot.name}: deflection is not monotone in rho")
    chi0 = deflection_angle(pot, 1e-9, V)
    if chi >= chi0:
        return 0.0
    rho = brentq(lambda p: deflection_angle(pot, p, V) - chi, 1e-9, 1.0, xtol=1e-13)
    return kernel_from_rho(pot, rho, V)


# ------------------------------------------------------------------------------------
# cut-offs


@dataclass(frozen=True)
class Cutoffs:
    """Optional exclusions of small relative speed, central encounters and fast particles."""

    V_min: float = 0.0
    rho_min: float = 0.0
    v_max: float = math.inf

    def excluded(self, rho, V, speeds=None):
        rho = np.asarray(rho, dtype=float)
        V = np.asarray(V, dtype=float)
        out = (V < self.V_min) | (rho < self.rho_min)
        if speeds is not None:
            out = out | np.any(np.asarray(speeds) > self.v_max, axis=-1)
        return out

    def excluded_measure(self, rho, V, weights=None, speeds=None) -> float:
        """Weighted fraction of the sampled points removed by the cut-offs."""
        ex = self.excluded(rho, V, speeds)
        w = np.ones(ex.shape) if weights is None else np.asarray(weights, dtype=float)
        tot = float(np.sum(w))
        return float(np.sum(w[ex])) / tot if tot > 0 else 0.0


# ------------------------------------------------------------------------------------
# tables


class DeflectionTable:
    """``chi(rho, V)`` tabulated on a grid, bilinear in ``(rho, log V)``.

    Speeds outside the tabulated range are clamped to it.
    """

    def __init__(self, pot: RadialPotential, rho_grid=None, V_grid=None):
        self.potential = pot
        self.rho = np.linspace(0.0, 1.0, 65) if rho_grid is None else np.asarray(rho_grid, float)
        self.V = np.geomspace(0.05, 20.0, 49) if V_grid is None else np.asarray(V_grid, float)
        chi = np.array([[deflection_angle(pot, r, V) for V in self.V] for r in self.rho])
        self.chi = chi
        self._interp = RegularGridInterpolator((self.rho, np.log(self.V)), chi)

    def __call__(self, rho, V):
        rho = np.clip(np.asarray(rho, dtype=float), self.rho[0], self.rho[-1])
        lv = np.clip(np.log(np.asarray(V, dtype=float)), math.log(self.V[0]), math.log(self.V[-1]))
        out = self._interp(np.stack(np.broadcast_arrays(rho, lv), axis=-1))
        return float(out) if out.ndim == 0 else out


def scattering_table(pot: RadialPotential, rhos, Vs, eps: float = 1.0,
                     cutoffs: Cutoffs | None = None):
    """Rows ``(rho, V, chi, t_star, B)`` over the product grid and the excluded measure."""
    rows = []
    for V in Vs:
        for rho in rhos:
            chi = deflection_angle(pot, rho, V)
            try:
                t_star = scattering_time(pot, rho, V, eps) if rho > 0 else math.nan
            except TrappedOrbitError:
                t_star = math.inf
            B = kernel_from_rho(pot, rho, V) if 0 < rho < 1 else math.nan
            rows.append((float(rho), float(V), chi, t_star, B))
    rows = np.array(rows)
    measure = (cutoffs or Cutoffs()).excluded_measure(rows[:, 0], rows[:, 1])
    return rows, measure


def write_scattering_csv(rows, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rho", "V", "chi", "t_star", "B"])
        for row in rows:
            w.writerow(["%.17g" % c for c in row])
    return path


def residence_constant(pot: RadialPotential, rhos, Vs) -> float:
    """``max t* rho V / eps`` over a grid: the empirical constant of the residence-time bound."""
    best = 0.0
    for V in Vs:
        for rho in rhos:
            best = max(best, scattering_time(pot, rho, V) * rho * V)
    return best
