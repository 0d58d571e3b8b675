"""Empirical marginals of particle ensembles, weighted norms and chaos diagnostics.

Histograms live on tensor grids.  Each observed particle contributes a feature
vector built from its coordinates ``(x1, x2, x3, v1, v2, v3)``; an order-``j``
sample concatenates the features of ``j`` distinct particles of one realization.
Samples are stored as flat cell codes together with the realization they came
from, so bootstrap resampling over realizations is cheap.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .phase import ParticleConfiguration

_COORDS = {"x": (0, 1, 2), "v": (3, 4, 5), "xv": (0, 1, 2, 3, 4, 5)}
_NAMES = ("x1", "x2", "x3", "v1", "v2", "v3")
MAX_CELLS = 20_000_000


class IncompatibleGridError(ValueError):
    pass


def _coords(coords) -> tuple:
    if isinstance(coords, str):
        if coords in _COORDS:
            return _COORDS[coords]
        return tuple(_NAMES.index(c) for c in coords.split(","))
    return tuple(int(c) for c in coords)


@dataclass(frozen=True, eq=False)
class HistogramGrid:
    """Per-axis bin edges of one particle's feature vector."""

    edges: tuple

    @classmethod
    def uniform(cls, dim: int, bins: int, lo: float, hi: float) -> "HistogramGrid":
        e = np.linspace(lo, hi, bins + 1)
        return cls(tuple(e.copy() for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.edges)

    @property
    def shape(self) -> tuple:
        return tuple(len(e) - 1 for e in self.edges)

    def power(self, j: int) -> "HistogramGrid":
        return HistogramGrid(tuple(self.edges) * j)

    def same_as(self, other: "HistogramGrid") -> bool:
        return self.dim == other.dim and all(
            a.shape == b.shape and np.array_equal(a, b) for a, b in zip(self.edges, other.edges))

    def cell_volumes(self) -> np.ndarray:
        widths = [np.diff(e) for e in self.edges]
        out = widths[0]
        for w in widths[1:]:
            out = np.multiply.outer(out, w)
        return out

    def centers(self):
        return [0.5 * (e[1:] + e[:-1]) for e in self.edges]

    def codes(self, samples) -> np.ndarray:
        """Flat cell index of each row of ``samples``; -1 outside the grid."""
        samples = np.atleast_2d(samples)
        idx = np.empty(samples.shape, dtype=np.int64)
        ok = np.ones(samples.shape[0], dtype=bool)
        for a, e in enumerate(self.edges):
            k = np.searchsorted(e, samples[:, a], side="right") - 1
            k[samples[:, a] == e[-1]] = len(e) - 2
            ok &= (k >= 0) & (k < len(e) - 1)
            idx[:, a] = np.clip(k, 0, len(e) - 2)
        out = np.ravel_multi_index(idx.T, self.shape) if samples.shape[0] else np.zeros(0, np.int64)
        return np.where(ok, out, -1)


@dataclass(eq=False)
class EmpiricalMarginal:
    """Histogram estimate of the order-``j`` marginal (density per unit cell volume).

    ``codes``, ``groups`` and ``weights`` keep one entry per sample so that the
    estimate can be recomputed under bootstrap reweighting of realizations.
    """

    j: int
    grid: HistogramGrid  # full grid over the j-particle features
    coords: tuple
    R: int
    reduced: bool
    codes: np.ndarray = field(repr=False)
    groups: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    per_group: np.ndarray = field(repr=False)  # samples drawn from each realization
    meta: dict = field(default_factory=dict)
    _density: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_samples(self) -> int:
        return int(self.codes.size)

    def counts(self, multiplicity=None) -> np.ndarray:
        w = self.weights if multiplicity is None else self.weights * multiplicity[self.groups]
        ok = self.codes >= 0
        c = np.bincount(self.codes[ok], weights=w[ok], minlength=int(np.prod(self.grid.shape)))
        return c.reshape(self.grid.shape)

    def density(self, multiplicity=None) -> np.ndarray:
        if multiplicity is None and self._density is not None:
            return self._density
        per = self.per_group if multiplicity is None else self.per_group * multiplicity
        total = float(np.sum(per))
        d = self.counts(multiplicity) / (total * self.grid.cell_volumes()) if total else \
            np.zeros(self.grid.shape)
        if multiplicity is None:
            self._density = d
        return d

    def mass(self) -> float:
        return float(np.sum(self.density() * self.grid.cell_volumes()))

    def binomial_stderr(self) -> np.ndarray:
        n = float(np.sum(self.per_group))
        p = self.counts() / n
        return np.sqrt(p * (1 - p) / n) / self.grid.cell_volumes()

    def marginal_axes(self, keep) -> np.ndarray:
        """Density integrated over every axis not in ``keep``."""
        vol = [np.diff(e) for e in self.grid.edges]
        d = self.density()
        for a in sorted(set(range(self.grid.dim)) - set(keep), reverse=True):
            d = np.tensordot(d, vol[a], axes=([a], [0]))
        return d


def _features(ensemble, cols):
    """(R, N, d) array of selected coordinates plus the positions for exclusion tests."""
    feats, pos, eps, L = [], [], 0.0, 1.0
    for item in ensemble:
        if isinstance(item, ParticleConfiguration):
            full = np.hstack([item.positions, item.velocities])
            eps, L = item.eps, item.L
        else:
            a = np.asarray(item, dtype=float)
            if a.ndim != 2 or a.shape[1] not in (3, 6):
                raise ValueError("raw samples must be (N, 6) phase points or (N, 3) velocities")
            full = a if a.shape[1] == 6 else np.hstack([np.full_like(a, np.nan), a])
        feats.append(full[:, cols])
        pos.append(full[:, :3])
    return feats, pos, eps, L


def _subsets(N, j, mode, rng):
    if mode == "first":
        return np.arange(j)[None, :]
    if mode == "all":
        if j == 1:
            return np.arange(N)[:, None]
        perm = rng.permutation(N)
        return perm[: (N // 2) * 2].reshape(-1, 2)
    k = int(mode)
    return np.array([rng.choice(N, size=j, replace=False) for _ in range(k)])


def _clear_of_others(x, subsets, eps, L):
    """1 where no unobserved particle lies within ``eps`` of an observed one."""
    tree = cKDTree(np.mod(x, L), boxsize=L)
    nbrs = tree.query_ball_point(np.mod(x, L), eps * (1 - 1e-12))
    out = np.ones(len(subsets))
    for s, sub in enumerate(subsets):
        members = set(int(a) for a in sub)
        for a in sub:
            if any(b not in members for b in nbrs[a]):
                out[s] = 0.0
                break
    return out


def estimate_marginal(ensemble, j: int, grid: HistogramGrid, *, reduced: bool = False,
                      coords="v", subsets="first", eps: float | None = None, seed=0,
                      meta: dict | None = None) -> EmpiricalMarginal:
    """Histogram of the order-``j`` marginal over an ensemble of realizations.

    ``ensemble`` holds ``ParticleConfiguration`` objects or raw ``(N, 6)`` /
    ``(N, 3)`` arrays.  ``grid`` bins one particle's features (``coords`` picks
    them: ``"v"``, ``"x"``, ``"xv"``, ``"v1"`` or a tuple of indices) and is
    repeated ``j`` times.  ``subsets`` chooses the observed particles per
    realization: ``"first"`` (particles ``0..j-1``), ``"all"`` (every particle for
    ``j = 1``; a random perfect matching for ``j = 2``) or an integer number of
    random ``j``-subsets.  ``reduced`` weights each sample by the indicator that
    every unobserved particle stays outside the ``eps``-balls of the observed ones.
    """
    if j not in (1, 2):
        raise ValueError("only j = 1 and j = 2 are estimated")
    cols = _coords(coords)
    if grid.dim != len(cols):
        raise IncompatibleGridError("grid dimension does not match the selected coordinates")
    full = grid.power(j)
    if int(np.prod(full.shape)) > MAX_CELLS:
        raise ValueError("histogram too large")
    feats, pos, eps0, L = _features(ensemble, cols)
    if not feats:
        raise ValueError("empty ensemble")
    eps = eps0 if eps is None else eps
    rng = np.random.default_rng(seed)
    codes, groups, weights, per = [], [], [], []
    for r, (f, x) in enumerate(zip(feats, pos)):
        if f.shape[0] < j:
            raise ValueError("realization has fewer than j particles")
        sub = _subsets(f.shape[0], j, subsets, rng)
        rows = f[sub].reshape(len(sub), -1)
        w = np.ones(len(sub))
        if reduced and eps > 0:
            if np.isnan(x).any():
                raise ValueError("reduced marginals need positions")
            w = _clear_of_others(x, sub, eps, L)
        codes.append(full.codes(rows))
        groups.append(np.full(len(sub), r))
        weights.append(w)
        per.append(len(sub))
    info = {"R": len(feats), "eps": eps}
    info.update(meta or {})
    return EmpiricalMarginal(j, full, cols, len(feats), bool(reduced), np.concatenate(codes),
                             np.concatenate(groups), np.concatenate(weights),
                             np.asarray(per, dtype=float), info)


def product_marginal(f1: EmpiricalMarginal) -> np.ndarray:
    """Density of ``f1 (x) f1`` on the order-2 grid."""
    if f1.j != 1:
        raise ValueError("need an order-1 marginal")
    d = f1.density()
    return np.multiply.outer(d, d)


def total_variation(a: EmpiricalMarginal, b: EmpiricalMarginal) -> float:
    if not a.grid.same_as(b.grid):
        raise IncompatibleGridError("different grids")
    return 0.5 * float(np.sum(np.abs(a.density() - b.density()) * a.grid.cell_volumes()))


# ------------------------------------------------------------------------------------
# weighted norms


@dataclass(frozen=True)
class WeightedNormReport:
    j: int
    beta: float
    value: float
    argmax: np.ndarray
    on_boundary: bool

    @property
    def member(self) -> bool:
        """False when the supremum sits on the outer shell of the grid (norm likely infinite)."""
        return self.value == 0.0 or not self.on_boundary


def weighted_norm(f, beta: float, nodes=None) -> WeightedNormReport:
    """``sup |f| (beta/2 pi)^{-3j/2} exp(beta sum |v_i|^2 / 2)`` over grid nodes.

    ``f`` is a ``VelocityGridFunction`` (``j = 1``) or an array of values with
    ``nodes`` of shape ``values.shape + (j, 3)``.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    if nodes is None:
        values = np.asarray(f.values, dtype=float).ravel()
        nodes = f.nodes()[:, None, :]
    else:
        values = np.asarray(f, dtype=float)
        nodes = np.asarray(nodes, dtype=float)
    j = nodes.shape[-2]
    if nodes.shape[:-2] != values.shape:
        raise ValueError("nodes must have shape values.shape + (j, 3)")
    e = 0.5 * np.sum(nodes ** 2, axis=(-2, -1))
    log_w = -1.5 * j * math.log(beta / (2 * math.pi)) + beta * e
    with np.errstate(over="ignore", invalid="ignore"):
        scaled = np.where(values != 0, np.abs(values) * np.exp(log_w), 0.0)
    k = int(np.argmax(scaled))
    val = float(scaled.flat[k])
    speed = np.max(np.abs(nodes), axis=(-2, -1))
    where = np.unravel_index(k, values.shape)
    # the supremum "sits on the boundary" when the outer shell beats the interior
    shell = speed >= np.max(speed) * (1 - 1e-12)
    inner = float(np.max(scaled[~shell])) if np.any(~shell) else 0.0
    boundary = bool(shell[where] and val > inner * (1 + 1e-9))
    return WeightedNormReport(j, float(beta), val, nodes[where].copy(), boundary)


def seq_norm(family, b: float, beta: float) -> float:
    """``max_j b^{-j} ||f_j||_{j, beta}``; ``family`` maps ``j`` to ``(values, nodes)``
    or to a ``VelocityGridFunction`` for ``j = 1``."""
    if b <= 0:
        raise ValueError("b must be positive")
    best = 0.0
    for j, fj in dict(family).items():
        rep = weighted_norm(fj[0], beta, fj[1]) if isinstance(fj, tuple) else weighted_norm(fj, beta)
        if rep.j != j:
            raise ValueError(f"entry {j} has order {rep.j}")
        best = max(best, b ** (-j) * rep.value)
    return best


# ------------------------------------------------------------------------------------
# chaos


@dataclass(frozen=True)
class ChaosDefect:
    value: float
    stderr: float
    floor: float  # expected value of the estimator for an exactly chaotic law

    @property
    def excess(self) -> float:
        return self.value - self.floor


def _l1(d2, d1, vol2):
    return float(np.sum(np.abs(d2 - np.multiply.outer(d1, d1)) * vol2))


def chaos_defect(f2: EmpiricalMarginal, f1: EmpiricalMarginal, *, bootstrap: int = 100,
                 seed=0, floor_samples: int = 20) -> ChaosDefect:
    """L1 distance between ``f2`` and ``f1 (x) f1`` on the common grid.

    The standard error comes from resampling realizations (jointly when both
    marginals come from the same ensemble).  ``floor`` is the mean defect of
    multinomial histograms drawn from the product law with the same number of
    samples as ``f2``; it is the value an exactly chaotic ensemble would show.
    """
    if f2.j != 2 or f1.j != 1:
        raise ValueError("need an order-2 and an order-1 marginal")
    if not f2.grid.same_as(f1.grid.power(2)) or f2.coords != f1.coords:
        raise IncompatibleGridError("f2 must live on the square of f1's grid")
    vol2 = f2.grid.cell_volumes()
    value = _l1(f2.density(), f1.density(), vol2)
    rng = np.random.default_rng(seed)
    reps = []
    joint = f1.R == f2.R
    for _ in range(bootstrap):
        m2 = rng.multinomial(f2.R, np.full(f2.R, 1 / f2.R)).astype(float)
        m1 = m2 if joint else rng.multinomial(f1.R, np.full(f1.R, 1 / f1.R)).astype(float)
        reps.append(_l1(f2.density(m2), f1.density(m1), vol2))
    se = float(np.std(reps, ddof=1)) if bootstrap > 1 else math.nan
    p = np.multiply.outer(f1.density(), f1.density()) * vol2
    inside = float(p.sum())
    floor = 0.0
    if inside > 0 and floor_samples:
        n = int(round(float(np.sum(f2.per_group)) * inside))
        q = (p / inside).ravel()
        draws = [np.sum(np.abs(rng.multinomial(n, q) / n - q)) * inside for _ in range(floor_samples)]
        floor = float(np.mean(draws))
    return ChaosDefect(value, se, floor)


# ------------------------------------------------------------------------------------
# observables


def bump(radius: float = 1.5, center=(0.0, 0.0, 0.0)):
    """Smooth compactly supported ``exp(1 - 1/(1 - |v - c|^2/r^2))`` (value 1 at the centre)."""
    c = np.asarray(center, dtype=float)

    def phi(v):
        s = np.sum((np.asarray(v, dtype=float) - c) ** 2, axis=-1) / radius ** 2
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(s < 1, np.exp(1 - 1 / np.maximum(1 - s, 1e-300)), 0.0)

    phi.support = (c, float(radius))
    return phi


def truncated_polynomial(coeffs, radius: float):
    """``sum_k c_k |v|^{2k}`` restricted to ``|v| <= radius``."""
    coeffs = np.asarray(coeffs, dtype=float)

    def phi(v):
        s = np.sum(np.asarray(v, dtype=float) ** 2, axis=-1)
        return np.where(s <= radius ** 2, np.polyval(coeffs[::-1], s), 0.0)

    phi.support = (np.zeros(3), float(radius))
    return phi


@dataclass(frozen=True)
class Pairing:
    value: float
    stderr: float
    excluded_mass_bound: float = 0.0


def observable_pairing(f, phi) -> Pairing:
    """``int phi f dv`` for an ``EmpiricalMarginal`` (midpoint rule on its cells; for
    ``j = 2`` the tensor product ``phi(v1) phi(v2)``), a
    ``VelocityGridFunction`` or raw velocity samples ``(M, 3)`` (sample mean).

    For a marginal the error is the spread over realizations; if ``phi`` reaches
    beyond the grid a warning reports ``sup|phi|`` times the mass outside it.
    """
    if isinstance(f, EmpiricalMarginal):
        if f.coords != _COORDS["v"]:
            raise ValueError("pairing needs a velocity-only marginal")
        centers = np.stack(np.meshgrid(*f.grid.centers(), indexing="ij"), axis=-1)
        cells = phi(centers[..., :3])
        if f.j == 2:  # tensor product phi(v1) phi(v2)
            cells = cells * phi(centers[..., 3:])
        v = float(np.sum(cells * f.density() * f.grid.cell_volumes()))
        # per-realization means for the error bar
        ok = f.codes >= 0
        contrib = np.zeros(f.codes.size)
        contrib[ok] = cells.ravel()[f.codes[ok]] * f.weights[ok]
        per = np.bincount(f.groups, weights=contrib, minlength=f.R)
        means = per / np.maximum(f.per_group, 1)
        if f.R > 1:
            se = float(np.std(means, ddof=1) / math.sqrt(f.R))
        else:
            se = float(np.std(contrib, ddof=1) / math.sqrt(contrib.size))
        excluded = max(0.0, 1.0 - f.mass())
        bound = 0.0
        support = getattr(phi, "support", None)
        if support is not None:
            c, rad = support
            lo = np.array([e[0] for e in f.grid.edges[:3]])
            hi = np.array([e[-1] for e in f.grid.edges[:3]])
            if np.any(c - rad < lo) or np.any(c + rad > hi):
                bound = excluded * float(np.max(np.abs(phi(c))))
                warnings.warn(f"test function reaches outside the grid; excluded mass bound {bound:.3g}",
                              RuntimeWarning, stacklevel=2)
        return Pairing(v, se, bound)
    if hasattr(f, "integrate"):
        return Pairing(f.integrate(phi), 0.0)
    v = np.asarray(f, dtype=float)
    vals = phi(v)
    return Pairing(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size)))


# ------------------------------------------------------------------------------------
# export


def write_histogram_csv(marg: EmpiricalMarginal, path, meta: dict | None = None) -> tuple[Path, Path]:
    """Write non-empty cells (bin centres, count, density) and a ``key = value`` sidecar."""
    path = Path(path)
    names = [f"{_NAMES[c]}_{p + 1}" for p in range(marg.j) for c in marg.coords]
    counts = marg.counts()
    dens = marg.density()
    centers = marg.grid.centers()
    with path.open("w") as fh:
        fh.write(",".join(names + ["count", "density"]) + "\n")
        for idx in zip(*np.nonzero(counts)):
            row = ["%.17g" % centers[a][k] for a, k in enumerate(idx)]
            row += ["%.17g" % counts[idx], "%.17g" % dens[idx]]
            fh.write(",".join(row) + "\n")
    side = path.with_name(path.name + ".meta")
    info = dict(marg.meta)
    info.update(meta or {})
    info.setdefault("j", marg.j)
    info.setdefault("reduced", marg.reduced)
    info.setdefault("samples", marg.n_samples)
    with side.open("w") as fh:
        for k in sorted(info):
            v = info[k]
            if isinstance(v, (list, tuple, np.ndarray)):
                v = " ".join(str(x) for x in v)
            fh.write(f"{k} = {v}\n")
    return path, side
