"""Particle configurations, the Hamiltonian, micro/macro scaling and chaotic initial data.

Everything lives in a periodic box of side ``L`` (default 1) with the
minimum-image convention.  Particles have unit mass.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidConfigurationError, PackingTooDenseError
from .potentials import RadialPotential

CONTACT_TOL = 1e-12


def wrap(x, L=1.0):
    """Map positions into ``[0, L)``; guards against ``x mod L == L`` for tiny negatives."""
    y = np.mod(x, L)
    y[y >= L] = 0.0
    return y


def minimum_image(d, L=1.0):
    return d - L * np.round(d / L)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ParticleConfiguration:
    positions: np.ndarray
    velocities: np.ndarray
    eps: float
    L: float = 1.0

    def __post_init__(self):
        x = _frozen(self.positions).reshape(-1, 3)
        v = _frozen(self.velocities).reshape(-1, 3)
        if x.shape != v.shape:
            raise InvalidConfigurationError("positions and velocities differ in length")
        if not (0.0 <= self.eps < self.L / 4):
            raise InvalidConfigurationError(f"need 0 <= eps < L/4, got eps={self.eps}")
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)

    @property
    def N(self) -> int:
        return self.positions.shape[0]

    def replace(self, positions=None, velocities=None) -> "ParticleConfiguration":
        return ParticleConfiguration(
            self.positions if positions is None else positions,
            self.velocities if velocities is None else velocities,
            self.eps, self.L)

    def min_distance(self) -> float:
        """Smallest minimum-image pair distance (``inf`` for fewer than two particles)."""
        if self.N < 2:
            return np.inf
        tree = cKDTree(wrap(self.positions, self.L), boxsize=self.L)
        d, _ = tree.query(wrap(self.positions, self.L), k=2)
        return float(d[:, 1].min())

    def check_exclusion(self, tol: float = CONTACT_TOL) -> None:
        if self.eps > 0 and self.min_distance() < self.eps - tol:
            raise InvalidConfigurationError(
                f"overlap: min distance {self.min_distance():.6g} < eps={self.eps:.6g}")

    def kinetic_energy(self) -> float:
        return 0.5 * float(np.sum(self.velocities ** 2))

    def momentum(self) -> np.ndarray:
        return self.velocities.sum(axis=0)

    def close_pairs(self, r: float):
        """Index pairs ``(i, k)``, ``i < k``, at minimum-image distance below ``r``, plus distances."""
        if self.N < 2 or r <= 0:
            return np.empty((0, 2), dtype=int), np.empty(0)
        tree = cKDTree(wrap(self.positions, self.L), boxsize=self.L)
        pairs = tree.query_pairs(r, output_type="ndarray")
        if pairs.size == 0:
            return pairs.reshape(0, 2), np.empty(0)
        d = minimum_image(self.positions[pairs[:, 1]] - self.positions[pairs[:, 0]], self.L)
        dist = np.linalg.norm(d, axis=1)
        keep = dist < r
        return pairs[keep], dist[keep]


@dataclass(frozen=True)
class ScalingRegime:
    N: int
    eps: float
    L: float = 1.0
    bg: bool = False

    @classmethod
    def boltzmann_grad(cls, N: int, L: float = 1.0) -> "ScalingRegime":
        """The regime with ``N eps^2 = 1`` (box of side 1)."""
        eps = float(N) ** -0.5
        regime = cls(int(N), eps, L, bg=True)
        if abs(regime.product - 1.0) >= 1e-12:
            raise ArithmeticError("N eps^2 differs from 1")
        return regime

    @property
    def product(self) -> float:
        return self.N * self.eps ** 2

    @property
    def packing_fraction(self) -> float:
        return self.N * (np.pi / 6) * self.eps ** 3 / self.L ** 3


@dataclass(frozen=True, eq=False)
class DensitySpec:
    """Initial one-particle density ``f0(x, v) = rho(x) g(v)``.

    The velocity part ``g`` is a mixture of Maxwellians
    ``sum_c w_c (beta_c/2pi)^{3/2} exp(-beta_c |v - u_c|^2 / 2)`` or, when
    ``grid`` is given, a tabulated density on a uniform cube (trilinear between
    nodes).  The spatial part is uniform, or ``1 + a cos(2 pi m x_1)`` when
    ``amplitude`` is nonzero.
    """

    weights: tuple = (1.0,)
    betas: tuple = (1.0,)
    means: tuple = ((0.0, 0.0, 0.0),)
    beta: float | None = None
    amplitude: float = 0.0
    mode: int = 1
    grid: tuple | None = field(default=None, repr=False)  # (axis, values)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if self.grid is None:
            if not (len(self.weights) == len(self.betas) == len(self.means)):
                raise ValueError("mixture fields must have equal length")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-8:
                raise ValueError("mixture weights must be nonnegative and sum to 1")
            if np.any(np.asarray(self.betas) <= 0):
                raise ValueError("betas must be positive")
        else:
            axis, values = self.grid
            values = np.asarray(values, dtype=float)
            if np.any(values < 0):
                raise ValueError("tabulated density must be nonnegative")
            h = axis[1] - axis[0]
            mass = _trapz3(values, h)
            if abs(mass - 1.0) > 1e-8:
                raise ValueError(f"tabulated density integrates to {mass:.10g}, not 1")
        if abs(self.amplitude) >= 1:
            raise ValueError("spatial modulation amplitude must be below 1")
        if self.beta is None:
            object.__setattr__(self, "beta", float(min(self.betas)) if self.grid is None else 1.0)

    @classmethod
    def maxwellian(cls, beta: float = 1.0, mean=(0.0, 0.0, 0.0), **kw) -> "DensitySpec":
        return cls((1.0,), (float(beta),), (tuple(map(float, mean)),), **kw)

    @classmethod
    def two_temperature(cls, beta1: float = 1.0, beta2: float = 4.0, w1: float = 0.5) -> "DensitySpec":
        return cls((w1, 1.0 - w1), (beta1, beta2), ((0.0, 0.0, 0.0),) * 2)

    @property
    def is_mixture(self) -> bool:
        return self.grid is None

    @property
    def is_homogeneous(self) -> bool:
        return self.amplitude == 0.0

    def velocity_pdf(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if not self.is_mixture:
            return _trilinear(self.grid[0], np.asarray(self.grid[1]), v)
        out = np.zeros(v.shape[:-1])
        for w, b, u in zip(self.weights, self.betas, self.means):
            d2 = np.sum((v - np.asarray(u)) ** 2, axis=-1)
            out += w * (b / (2 * np.pi)) ** 1.5 * np.exp(-0.5 * b * d2)
        return out

    def spatial_pdf(self, x, L: float = 1.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (1.0 + self.amplitude * np.cos(2 * np.pi * self.mode * x[..., 0] / L)) / L ** 3

    def pdf(self, x, v, L: float = 1.0) -> np.ndarray:
        return self.spatial_pdf(x, L) * self.velocity_pdf(v)

    def mean_velocity(self) -> np.ndarray:
        if self.is_mixture:
            return np.sum(np.asarray(self.weights)[:, None] * np.asarray(self.means), axis=0)
        axis, vals = self.grid
        V = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1)
        h = axis[1] - axis[0]
        return np.array([_trapz3(vals * V[..., a], h) for a in range(3)])

    def second_moment(self) -> float:
        """``E|v|^2``."""
        if self.is_mixture:
            return float(sum(w * (3.0 / b + np.dot(u, u))
                             for w, b, u in zip(self.weights, self.betas, self.means)))
        axis, vals = self.grid
        V = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1)
        return _trapz3(vals * np.sum(V ** 2, axis=-1), axis[1] - axis[0])

    def effective_beta(self) -> float:
        """Inverse temperature of the Maxwellian with the same energy in the rest frame."""
        u = self.mean_velocity()
        return 3.0 / (self.second_moment() - float(np.dot(u, u)))

    def sample_velocities(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.is_mixture:
            comp = rng.choice(len(self.weights), size=n, p=np.asarray(self.weights))
            betas = np.asarray(self.betas)[comp]
            means = np.asarray(self.means, dtype=float)[comp]
            return means + rng.standard_normal((n, 3)) / np.sqrt(betas)[:, None]
        return _sample_grid(self.grid[0], np.asarray(self.grid[1]), n, rng)

    def sample_positions(self, n: int, rng: np.random.Generator, L: float = 1.0) -> np.ndarray:
        x = rng.random((n, 3)) * L
        a = self.amplitude
        if a == 0.0:
            return x
        # rejection against the (1 + |a|) envelope along x_1
        out = np.empty((0, 3))
        while out.shape[0] < n:
            m = 2 * (n - out.shape[0]) + 8
            cand = rng.random((m, 3)) * L
            accept = rng.random(m) * (1 + abs(a)) < 1 + a * np.cos(2 * np.pi * self.mode * cand[:, 0] / L)
            out = np.vstack([out, cand[accept]])
        return out[:n]


def _trapz3(values, h) -> float:
    w = np.ones(values.shape[0])
    w[[0, -1]] = 0.5
    return float(np.einsum("ijk,i,j,k->", values, w, w, w) * h ** 3)


def _trilinear(axis, values, v):
    """Trilinear interpolation on a uniform cube, zero outside."""
    axis = np.asarray(axis)
    n = axis.size
    h = axis[1] - axis[0]
    s = (np.asarray(v) - axis[0]) / h
    inside = np.all((s >= 0) & (s <= n - 1), axis=-1)
    s = np.clip(s, 0, n - 1 - 1e-12)
    i0 = np.floor(s).astype(int)
    t = s - i0
    out = np.zeros(s.shape[:-1])
    for dx in (0, 1):
        wx = t[..., 0] if dx else 1 - t[..., 0]
        for dy in (0, 1):
            wy = t[..., 1] if dy else 1 - t[..., 1]
            for dz in (0, 1):
                wz = t[..., 2] if dz else 1 - t[..., 2]
                out += wx * wy * wz * values[i0[..., 0] + dx, i0[..., 1] + dy, i0[..., 2] + dz]
    return np.where(inside, out, 0.0)


def _sample_grid(axis, values, n, rng):
    # piecewise-constant approximation on cells: cell mass from the mean of its 8 corners
    c = 0.125 * sum(values[dx:values.shape[0] - 1 + dx, dy:values.shape[1] - 1 + dy,
                           dz:values.shape[2] - 1 + dz]
                    for dx in (0, 1) for dy in (0, 1) for dz in (0, 1))
    p = c.ravel() / c.sum()
    idx = rng.choice(p.size, size=n, p=p)
    ijk = np.stack(np.unravel_index(idx, c.shape), axis=-1)
    h = axis[1] - axis[0]
    return axis[0] + (ijk + rng.random((n, 3))) * h


def hamiltonian(config: ParticleConfiguration, potential: RadialPotential,
                pairs: str = "ordered") -> float:
    """Total energy: kinetic part plus the pair potential at ``r = |x_i - x_k| / eps``.

    ``pairs="ordered"`` sums over ``i != k`` (each pair twice), the convention of
    the Hamiltonian as usually written for this problem; ``"unordered"`` counts
    each pair once, which is the energy conserved by the Newton flow.
    For hard spheres only the kinetic part is returned, after checking exclusion.
    """
    if pairs not in ("ordered", "unordered"):
        raise ValueError("pairs must be 'ordered' or 'unordered'")
    kinetic = config.kinetic_energy()
    if potential.is_hard_sphere:
        config.check_exclusion()
        return kinetic
    if config.eps == 0:
        return kinetic
    _, dist = config.close_pairs(config.eps)
    pot = float(np.sum(potential.value(dist / config.eps)))
    return kinetic + (2.0 if pairs == "ordered" else 1.0) * pot


def to_macroscopic(tau, q, eps):
    """``(tau, q) -> (eps tau, eps q)``; velocities are unchanged."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return eps * np.asarray(tau, dtype=float), eps * np.asarray(q, dtype=float)


def to_microscopic(t, x, eps):
    if eps <= 0:
        raise ValueError("eps must be positive")
    return np.asarray(t, dtype=float) / eps, np.asarray(x, dtype=float) / eps


def sample_initial(spec: DensitySpec, regime: ScalingRegime, seed=None, *,
                   max_packing: float = 0.1, budget: int = 10 ** 6) -> ParticleConfiguration:
    """Draw ``N`` particles i.i.d. from ``spec`` subject to hard-core exclusion.

    Positions are generated by sequential random addition: proposals from the
    spatial law are accepted in order whenever they keep distance ``>= eps`` from
    every particle accepted so far.  Labels are randomly permuted at the end so
    the result is exchangeable.  Velocities are i.i.d. and independent of positions.
    """
    N, eps, L = regime.N, regime.eps, regime.L
    if regime.packing_fraction >= max_packing:
        raise PackingTooDenseError(
            f"packing fraction {regime.packing_fraction:.4g} >= {max_packing}")
    rng = np.random.default_rng(seed)
    accepted = np.empty((0, 3))
    proposals = 0
    while accepted.shape[0] < N:
        need = N - accepted.shape[0]
        m = min(budget - proposals, need + need // 4 + 4)
        if m <= 0:
            raise PackingTooDenseError(f"rejection budget of {budget} proposals exhausted")
        cand = wrap(spec.sample_positions(m, rng, L), L)
        proposals += m
        if eps > 0 and accepted.shape[0] > 0:
            tree = cKDTree(accepted, boxsize=L)
            near = tree.query_ball_point(cand, eps * (1 - 1e-12), return_length=True)
            ok = near == 0
        else:
            ok = np.ones(m, dtype=bool)
        if eps > 0:
            pairs = cKDTree(cand, boxsize=L).query_pairs(eps * (1 - 1e-12), output_type="ndarray")
            if pairs.size:
                order = np.argsort(pairs[:, 0] * m + pairs[:, 1], kind="stable")
                for a, b in pairs[order]:
                    # earlier proposal wins, as in one-at-a-time addition
                    if ok[a] and ok[b]:
                        ok[b] = False
        kept = cand[ok][:need]
        accepted = np.vstack([accepted, kept])
    perm = rng.permutation(N)
    x = accepted[perm]
    v = spec.sample_velocities(N, rng)
    return ParticleConfiguration(x, v, eps, L)


_CONFIG_HEADER = ["particle_id", "x1", "x2", "x3", "v1", "v2", "v3"]


def write_configuration_csv(config: ParticleConfiguration, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_CONFIG_HEADER)
        for i, (x, v) in enumerate(zip(config.positions, config.velocities)):
            w.writerow([i] + ["%.17g" % c for c in (*x, *v)])
    return path


def read_configuration_csv(path, eps: float, L: float = 1.0) -> ParticleConfiguration:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    order = np.argsort(data[:, 0])
    data = data[order]
    return ParticleConfiguration(data[:, 1:4], data[:, 4:7], eps, L)
