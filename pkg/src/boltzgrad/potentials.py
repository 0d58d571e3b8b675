"""Radial two-body potentials supported in the unit ball.

Potentials are functions of the dimensionless separation ``r = |x_i - x_k| / eps``
and vanish identically for ``r >= 1``.  Hard spheres are a distinguished kind:
their value is infinite inside the unit ball and zero outside.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import PotentialDomainError

_Fn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class RadialPotential:
    kind: str  # "hard_sphere" | "analytic" | "tabulated"
    name: str
    phi: _Fn | None = field(default=None, repr=False)
    dphi: _Fn | None = field(default=None, repr=False)
    d2phi: _Fn | None = field(default=None, repr=False)
    r_domain: float = 0.0  # smallest r where the potential may be evaluated
    params: dict = field(default_factory=dict, compare=False)

    @property
    def is_hard_sphere(self) -> bool:
        return self.kind == "hard_sphere"

    def _prep(self, r):
        r = np.asarray(r, dtype=float)
        inside = r < 1.0
        if np.any(inside & (r < self.r_domain)) or np.any(r < 0):
            raise PotentialDomainError(
                f"{self.name}: r={float(np.min(r)):.3g} below domain {self.r_domain:.3g}")
        return r, inside

    def _eval(self, fn, r):
        r, inside = self._prep(r)
        out = np.zeros_like(r)
        if np.any(inside):
            out[inside] = fn(r[inside])
        return out if out.ndim else float(out)

    def value(self, r):
        if self.is_hard_sphere:
            r = np.asarray(r, dtype=float)
            out = np.where(r < 1.0, np.inf, 0.0)
            return out if out.ndim else float(out)
        return self._eval(self.phi, r)

    __call__ = value

    def derivative(self, r):
        if self.is_hard_sphere:
            raise PotentialDomainError("hard-sphere potential has no derivative")
        return self._eval(self.dphi, r)

    def second_derivative(self, r):
        if self.is_hard_sphere:
            raise PotentialDomainError("hard-sphere potential has no derivative")
        if self.d2phi is None:
            raise PotentialDomainError(f"{self.name}: second derivative not available")
        return self._eval(self.d2phi, r)

    def value_at_origin(self) -> float:
        """Limit of the potential as r -> 0+ (``inf`` when unbounded)."""
        if self.is_hard_sphere:
            return np.inf
        r0 = max(self.r_domain, 1e-300)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            val = float(self.phi(np.array([r0]))[0])
        if not np.isfinite(val) or val > 1e250:
            return np.inf
        return val


def _check_nonincreasing(pot: RadialPotential, n: int = 2001) -> None:
    r = np.geomspace(max(pot.r_domain, 1e-4), 1.0, n)[:-1]
    d = pot.derivative(r)
    scale = max(1.0, float(np.max(np.abs(d))))
    if np.any(d > 1e-10 * scale):
        raise ValueError(f"{pot.name}: potential is not non-increasing on (0, 1)")


def hard_sphere() -> RadialPotential:
    return RadialPotential(kind="hard_sphere", name="hard_sphere")


def analytic(phi: _Fn, dphi: _Fn, d2phi: _Fn | None = None, *, name: str = "analytic",
             r_domain: float = 0.0, params: dict | None = None,
             require_nonincreasing: bool = True) -> RadialPotential:
    pot = RadialPotential(kind="analytic", name=name, phi=phi, dphi=dphi, d2phi=d2phi,
                          r_domain=r_domain, params=dict(params or {}))
    if require_nonincreasing:
        _check_nonincreasing(pot)
    return pot


def inverse_power(alpha: float, strength: float = 1.0) -> RadialPotential:
    """``strength * (r**-alpha - 1)``: shifted so it vanishes at the edge of the support."""
    a, c = float(alpha), float(strength)
    return analytic(
        lambda r: c * (r ** -a - 1.0),
        lambda r: -c * a * r ** (-a - 1.0),
        lambda r: c * a * (a + 1.0) * r ** (-a - 2.0),
        name=f"inverse_power(alpha={a:g})", params={"alpha": a, "strength": c})


def polynomial_wall(strength: float = 1.0, power: int = 2) -> RadialPotential:
    """``strength * (1 - r)**power``; bounded at the origin by ``strength``."""
    c, p = float(strength), int(power)
    d2 = (lambda r: c * p * (p - 1) * (1.0 - r) ** (p - 2)) if p >= 2 else (lambda r: np.zeros_like(r))
    return analytic(
        lambda r: c * (1.0 - r) ** p,
        lambda r: -c * p * (1.0 - r) ** (p - 1),
        d2,
        name=f"wall(strength={c:g}, power={p})", params={"strength": c, "power": p})


def quadratic(strength: float = 1.0) -> RadialPotential:
    return polynomial_wall(strength, 2)


def steep_wall(n: float) -> RadialPotential:
    """Member of the family ``n * (1 - r)**4`` that tends to hard spheres as n grows."""
    return polynomial_wall(n, 4)


def linear(strength: float = 1.0) -> RadialPotential:
    return polynomial_wall(strength, 1)


def zero() -> RadialPotential:
    """The free potential; useful as a sanity reference."""
    return analytic(np.zeros_like, np.zeros_like, np.zeros_like, name="zero")


def tabulated(r, phi) -> RadialPotential:
    """Cubic-spline potential through ``(r, phi)`` samples; ``r`` must end at 1."""
    r = np.asarray(r, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if r.ndim != 1 or r.shape != phi.shape or r.size < 4:
        raise ValueError("table needs matching 1-D arrays with at least 4 rows")
    if np.any(np.diff(r) <= 0):
        raise ValueError("table radii must be strictly increasing")
    if abs(r[-1] - 1.0) > 1e-12 or abs(phi[-1]) > 1e-12:
        raise ValueError("table must end at r=1 with phi=0")
    spline = CubicSpline(r, phi)
    d1, d2 = spline.derivative(1), spline.derivative(2)
    return analytic(spline, d1, d2, name="tabulated", r_domain=float(r[0]),
                    params={"rows": int(r.size)}, require_nonincreasing=False)


def load_table(path: str | Path) -> RadialPotential:
    data = np.loadtxt(path, delimiter=None if not str(path).endswith(".csv") else ",",
                      comments="#")
    return tabulated(data[:, 0], data[:, 1])


def from_name(name: str, **params) -> RadialPotential:
    """Build a potential from the names used in lab configuration files."""
    builders = {
        "hard_sphere": hard_sphere,
        "inverse_power": inverse_power,
        "quadratic": quadratic,
        "steep_wall": steep_wall,
        "linear": linear,
        "wall": polynomial_wall,
        "zero": zero,
    }
    if name == "table":
        return load_table(params["path"])
    if name not in builders:
        raise ValueError(f"unknown potential {name!r}")
    return builders[name](**params)
