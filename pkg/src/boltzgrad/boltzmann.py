"""The Boltzmann equation: deterministic collision-integral quadrature, DSMC and the H functional.

Normalisation: ``f(x, v)`` is a probability density on box x velocities, the box
has unit volume, and the hard-sphere collision operator is

    Q(f, f)(v) = int_{S^2_+} dnu int dv* nu.(v - v*) [f(v') f(v*') - f(v) f(v*)],
    v' = v - [nu.(v - v*)] nu,   v*' = v* + [nu.(v - v*)] nu,

so a particle with relative speed ``u`` to its partners collides at rate ``pi u``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numba as nb
import numpy as np
from scipy.integrate import lebedev_rule

from .phase import DensitySpec, wrap

# ------------------------------------------------------------------------------------
# velocity grids


@dataclass(frozen=True, eq=False)
class VelocityGridFunction:
    """Values of ``f(v)`` at the nodes of a uniform cube ``[-v_max, v_max]^3``.

    ``spec`` optionally records the closed-form density the values were sampled
    from; the collision quadrature then evaluates ``f`` exactly off the grid.
    """

    axis: np.ndarray
    values: np.ndarray
    spec: DensitySpec | None = None
    cell: int | None = None

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        values = np.asarray(self.values, dtype=float)
        n = axis.size
        if values.shape != (n, n, n):
            raise ValueError("values must be an n x n x n array matching the axis")
        if np.any(values < 0):
            raise ValueError("grid function must be nonnegative")
        if not np.allclose(np.diff(axis), axis[1] - axis[0], rtol=1e-10, atol=0):
            raise ValueError("axis must be uniform")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_spec(cls, spec: DensitySpec, n: int, v_max: float) -> "VelocityGridFunction":
        axis = np.linspace(-v_max, v_max, n)
        return cls(axis, spec.velocity_pdf(_mesh(axis)), spec if spec.is_mixture else None)

    @classmethod
    def maxwellian(cls, beta: float, n: int, v_max: float, mean=(0.0, 0.0, 0.0)):
        return cls.from_spec(DensitySpec.maxwellian(beta, mean), n, v_max)

    @property
    def n(self) -> int:
        return self.axis.size

    @property
    def h(self) -> float:
        return float(self.axis[1] - self.axis[0])

    @property
    def v_max(self) -> float:
        return float(self.axis[-1])

    def nodes(self) -> np.ndarray:
        return _mesh(self.axis).reshape(-1, 3)

    def weights(self) -> np.ndarray:
        w = np.full(self.n, self.h)
        w[[0, -1]] *= 0.5
        return (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()

    def integrate(self, phi=None) -> float:
        vals = self.values.ravel()
        if phi is not None:
            vals = vals * phi(self.nodes())
        return float(np.dot(self.weights(), vals))

    def mass(self) -> float:
        return self.integrate()

    def mean(self) -> np.ndarray:
        m = self.mass()
        return np.array([self.integrate(lambda v, a=a: v[:, a]) for a in range(3)]) / m

    def temperature(self) -> float:
        """``<|v - u|^2> / 3``."""
        u = self.mean()
        return self.integrate(lambda v: np.sum((v - u) ** 2, axis=1)) / (3 * self.mass())

    def with_values(self, values) -> "VelocityGridFunction":
        return VelocityGridFunction(self.axis, values, None, self.cell)


def _mesh(axis):
    return np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1)


# ------------------------------------------------------------------------------------
# sphere rule


def sphere_rule(order: int = 7):
    """Lebedev nodes folded into ``nu / -nu`` pairs: one representative per pair.

    The integrand of the collision operator is even in ``nu``, so integrating
    ``nu.u`` over the half sphere is half the full-sphere integral of ``|nu.u|``;
    each pair therefore carries the weight of one of its members.
    """
    x, w = lebedev_rule(order)
    x = x.T
    used = np.zeros(len(w), dtype=bool)
    nus, wts = [], []
    for i in range(len(w)):
        if used[i]:
            continue
        j = int(np.argmin(np.sum((x + x[i]) ** 2, axis=1)))
        if np.linalg.norm(x[j] + x[i]) > 1e-12 or abs(w[i] - w[j]) > 1e-14:
            raise ValueError("sphere rule is not antipodally symmetric")
        used[i] = used[j] = True
        nus.append(x[i])
        wts.append(w[i])
    return np.array(nus), np.array(wts)


# ------------------------------------------------------------------------------------
# collision integral kernels


@nb.njit(cache=True)
def _q_mixture(targets, vs, wv, nus, wnu, pref, betas, means, ecut):
    """Gain minus loss for a Maxwellian mixture, evaluated in closed form.

    Each component alone is annihilated exactly, so only pairs of distinct
    components contribute; every such pair needs a single exponential.
    """
    T = targets.shape[0]
    M = vs.shape[0]
    K = nus.shape[0]
    C = pref.shape[0]
    out = np.zeros(T)
    es = np.empty((M, C))
    for m in range(M):
        for c in range(C):
            d2 = 0.0
            for a in range(3):
                d2 += (vs[m, a] - means[c, a]) ** 2
            es[m, c] = -0.5 * betas[c] * d2
    et = np.empty(C)
    ep = np.empty(C)
    eq = np.empty(C)
    for t in range(T):
        v0, v1, v2 = targets[t, 0], targets[t, 1], targets[t, 2]
        e0 = v0 * v0 + v1 * v1 + v2 * v2
        for c in range(C):
            et[c] = -0.5 * betas[c] * ((v0 - means[c, 0]) ** 2 + (v1 - means[c, 1]) ** 2
                                       + (v2 - means[c, 2]) ** 2)
        acc = 0.0
        for m in range(M):
            w0, w1, w2 = vs[m, 0], vs[m, 1], vs[m, 2]
            if e0 + w0 * w0 + w1 * w1 + w2 * w2 > ecut:
                break
            u0, u1, u2 = v0 - w0, v1 - w1, v2 - w2
            loss = 0.0
            for c in range(C):
                for d in range(C):
                    if c != d:
                        loss += pref[c] * pref[d] * math.exp(et[c] + es[m, d])
            inner = 0.0
            for k in range(K):
                n0, n1, n2 = nus[k, 0], nus[k, 1], nus[k, 2]
                dd = n0 * u0 + n1 * u1 + n2 * u2
                a0, a1, a2 = v0 - dd * n0, v1 - dd * n1, v2 - dd * n2
                b0, b1, b2 = w0 + dd * n0, w1 + dd * n1, w2 + dd * n2
                for c in range(C):
                    ep[c] = -0.5 * betas[c] * ((a0 - means[c, 0]) ** 2 + (a1 - means[c, 1]) ** 2
                                               + (a2 - means[c, 2]) ** 2)
                    eq[c] = -0.5 * betas[c] * ((b0 - means[c, 0]) ** 2 + (b1 - means[c, 1]) ** 2
                                               + (b2 - means[c, 2]) ** 2)
                gain = 0.0
                for c in range(C):
                    for d in range(C):
                        if c != d:
                            gain += pref[c] * pref[d] * math.exp(ep[c] + eq[d])
                inner += wnu[k] * abs(dd) * (gain - loss)
            acc += wv[m] * inner
        out[t] = acc
    return out


@nb.njit(cache=True, inline="always")
def _interp(gv, lo, h, n, x0, x1, x2):
    """Trilinear interpolation, clamped to the cube; second value flags clamping."""
    out_of = False
    s0 = (x0 - lo) / h
    s1 = (x1 - lo) / h
    s2 = (x2 - lo) / h
    top = n - 1.0
    if s0 < 0.0 or s0 > top:
        s0 = min(max(s0, 0.0), top)
        out_of = True
    if s1 < 0.0 or s1 > top:
        s1 = min(max(s1, 0.0), top)
        out_of = True
    if s2 < 0.0 or s2 > top:
        s2 = min(max(s2, 0.0), top)
        out_of = True
    i = min(int(s0), n - 2)
    j = min(int(s1), n - 2)
    k = min(int(s2), n - 2)
    tx, ty, tz = s0 - i, s1 - j, s2 - k
    c00 = gv[i, j, k] * (1 - tx) + gv[i + 1, j, k] * tx
    c10 = gv[i, j + 1, k] * (1 - tx) + gv[i + 1, j + 1, k] * tx
    c01 = gv[i, j, k + 1] * (1 - tx) + gv[i + 1, j, k + 1] * tx
    c11 = gv[i, j + 1, k + 1] * (1 - tx) + gv[i + 1, j + 1, k + 1] * tx
    c0 = c00 * (1 - ty) + c10 * ty
    c1 = c01 * (1 - ty) + c11 * ty
    return c0 * (1 - tz) + c1 * tz, out_of


@nb.njit(cache=True)
def _q_grid(targets, ft, vs, fs, wv, nus, wnu, gv, lo, h, pref, beta, mean, ecut):
    """Gain minus loss with ``f = M_ref * interp(f / M_ref)`` off the grid."""
    T = targets.shape[0]
    M = vs.shape[0]
    K = nus.shape[0]
    n = gv.shape[0]
    out = np.zeros(T)
    escaped = np.zeros(T)
    total = np.zeros(T)
    for t in range(T):
        v0, v1, v2 = targets[t, 0], targets[t, 1], targets[t, 2]
        e0 = v0 * v0 + v1 * v1 + v2 * v2
        acc = 0.0
        esc = 0.0
        tot = 0.0
        for m in range(M):
            w0, w1, w2 = vs[m, 0], vs[m, 1], vs[m, 2]
            if e0 + w0 * w0 + w1 * w1 + w2 * w2 > ecut:
                break
            u0, u1, u2 = v0 - w0, v1 - w1, v2 - w2
            loss = ft[t] * fs[m]
            inner = 0.0
            lost = 0.0
            rate = 0.0
            for k in range(K):
                n0, n1, n2 = nus[k, 0], nus[k, 1], nus[k, 2]
                dd = n0 * u0 + n1 * u1 + n2 * u2
                a0, a1, a2 = v0 - dd * n0, v1 - dd * n1, v2 - dd * n2
                b0, b1, b2 = w0 + dd * n0, w1 + dd * n1, w2 + dd * n2
                ga, oa = _interp(gv, lo, h, n, a0, a1, a2)
                gb, ob = _interp(gv, lo, h, n, b0, b1, b2)
                ex = -0.5 * beta * ((a0 - mean[0]) ** 2 + (a1 - mean[1]) ** 2 + (a2 - mean[2]) ** 2
                                    + (b0 - mean[0]) ** 2 + (b1 - mean[1]) ** 2 + (b2 - mean[2]) ** 2)
                gain = pref * pref * math.exp(ex) * ga * gb
                inner += wnu[k] * abs(dd) * (gain - loss)
                rate += wnu[k] * abs(dd) * loss
                if oa or ob:
                    lost += wnu[k] * abs(dd) * loss
            acc += wv[m] * inner
            esc += wv[m] * lost
            tot += wv[m] * rate
        out[t] = acc
        escaped[t] = esc
        total[t] = tot
    return out, escaped, total


def _ball(f: VelocityGridFunction, radius):
    nodes, w = f.nodes(), f.weights()
    vals = f.values.ravel()
    r2 = np.sum(nodes ** 2, axis=1)
    sel = r2 <= radius * radius * (1 + 1e-12)
    nodes, w, vals, r2 = nodes[sel], w[sel], vals[sel], r2[sel]
    order = np.argsort(r2, kind="stable")
    return nodes[order], w[order], vals[order]


def moment_matched_maxwellian(f: VelocityGridFunction):
    """``(beta, mean)`` of the Maxwellian with the grid function's momentum and energy."""
    return 1.0 / f.temperature(), f.mean()


def q_hardsphere(f: VelocityGridFunction, v_node, *, sphere_order: int = 7,
                 radius: float | None = None, energy_cut: float | None = None,
                 method: str = "auto", escape_tol: float = 1e-8, return_escape: bool = False):
    """Hard-sphere collision integral ``Q(f, f)`` at the velocities ``v_node``.

    ``v*`` runs over grid nodes inside the ball of ``radius`` (default ``v_max``)
    with trapezoid weights; ``nu`` over a Lebedev rule.  Pairs with
    ``|v|^2 + |v*|^2 > energy_cut`` are skipped.  Post-collision values come
    from the closed-form density when the grid carries one (``method="analytic"``)
    or by trilinear interpolation of ``f / M_ref`` times the moment-matched
    Maxwellian ``M_ref`` (``method="grid"``), which makes ``Q(M, M)`` vanish to
    roundoff.  When interpolation leaves the cube the escaped loss rate is
    estimated and a ``RuntimeWarning`` is issued above ``escape_tol``.
    """
    v_node = np.asarray(v_node, dtype=float)
    single = v_node.ndim == 1
    targets = np.ascontiguousarray(v_node.reshape(-1, 3))
    radius = f.v_max if radius is None else float(radius)
    ecut = np.inf if energy_cut is None else float(energy_cut)
    nus, wnu = sphere_rule(sphere_order)
    vs, wv, fs = _ball(f, radius)
    if method == "auto":
        method = "analytic" if f.spec is not None and f.spec.is_mixture else "grid"
    escaped = np.zeros(targets.shape[0])
    if method == "analytic":
        spec = f.spec
        betas = np.asarray(spec.betas, dtype=float)
        pref = np.asarray(spec.weights, dtype=float) * (betas / (2 * np.pi)) ** 1.5
        means = np.asarray(spec.means, dtype=float).reshape(-1, 3)
        q = _q_mixture(targets, vs, wv, nus, wnu, pref, betas, means, ecut)
    elif method == "grid":
        beta, mean = moment_matched_maxwellian(f)
        pref = (beta / (2 * np.pi)) ** 1.5
        mref = pref * np.exp(-0.5 * beta * np.sum((_mesh(f.axis) - mean) ** 2, axis=-1))
        gv = f.values / mref
        # the loss term uses the same representation as the gain term
        ft = pref * np.exp(-0.5 * beta * np.sum((targets - mean) ** 2, axis=1)) * \
            _interp_many(f, targets, gv)
        q, escaped, total = _q_grid(targets, ft, vs, fs, wv, nus, wnu, gv, f.axis[0], f.h,
                                    pref, beta, mean, ecut)
        # escaped share of the loss rate (the part whose gain was clamped)
        escaped = np.divide(escaped, total, out=np.zeros_like(escaped), where=total > 0)
        worst = float(np.max(escaped)) if escaped.size else 0.0
        if worst > escape_tol:
            warnings.warn(f"post-collision velocities leave the grid: escaped loss-rate "
                          f"fraction up to {worst:.3g}; enlarge v_max", RuntimeWarning,
                          stacklevel=2)
    else:
        raise ValueError("method must be 'auto', 'analytic' or 'grid'")
    if single:
        q = float(q[0])
        escaped = float(escaped[0])
    return (q, escaped) if return_escape else q


def _interp_many(f: VelocityGridFunction, pts, values=None):
    vals = f.values if values is None else values
    out = np.empty(len(pts))
    for i, p in enumerate(pts):
        out[i] = _interp(vals, f.axis[0], f.h, f.n, p[0], p[1], p[2])[0]
    return out


@dataclass(frozen=True)
class CollisionMoments:
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    Q: np.ndarray = field(repr=False)
    mass: float
    momentum: np.ndarray
    energy: float
    fourth: float

    @property
    def invariants_max(self) -> float:
        return float(max(abs(self.mass), np.max(np.abs(self.momentum)), abs(self.energy)))


def collision_moments(f: VelocityGridFunction, *, radius: float | None = None,
                      energy_cut: float | None = None, **kw) -> CollisionMoments:
    """``int phi Q dv`` for ``phi = 1, v, |v|^2, |v|^4`` over the nodes in the ball."""
    radius = f.v_max if radius is None else float(radius)
    nodes, w, _ = _ball(f, radius)
    q = q_hardsphere(f, nodes, radius=radius, energy_cut=energy_cut, **kw)
    r2 = np.sum(nodes ** 2, axis=1)
    return CollisionMoments(nodes, w, q, float(w @ q), (w * q) @ nodes,
                            float(w @ (r2 * q)), float(w @ (r2 * r2 * q)))


def weighted_sup(values, nodes, beta: float) -> float:
    """``sup |g(v)| (beta/2pi)^{-3/2} exp(beta |v|^2 / 2)`` over the given nodes."""
    nodes = np.asarray(nodes, dtype=float)
    w = (beta / (2 * np.pi)) ** -1.5 * np.exp(0.5 * beta * np.sum(nodes ** 2, axis=-1))
    return float(np.max(np.abs(values) * w))


# ------------------------------------------------------------------------------------
# DSMC


@dataclass(frozen=True, eq=False)
class DsmcState:
    """``M`` simulation particles of weight ``1/M`` in a periodic unit box.

    ``n_cells`` is the number of collision cells per side (1 = spatially
    homogeneous collisions).  ``kernel`` is ``None`` for hard spheres or a
    callable ``chi(rho, V)`` (e.g. a ``DeflectionTable``).
    """

    x: np.ndarray
    v: np.ndarray
    t: float = 0.0
    step: int = 0
    seed: int = 0
    n_cells: int = 1
    L: float = 1.0
    kernel: object = None
    collide: bool = True
    majorant: float | None = None

    @property
    def M(self) -> int:
        return self.v.shape[0]

    def cell_index(self) -> np.ndarray:
        c = np.minimum((self.x / (self.L / self.n_cells)).astype(np.int64), self.n_cells - 1)
        return (c[:, 0] * self.n_cells + c[:, 1]) * self.n_cells + c[:, 2]

    def occupancy(self) -> np.ndarray:
        return np.bincount(self.cell_index(), minlength=self.n_cells ** 3)


def dsmc_init(spec: DensitySpec, M: int, seed: int = 0, *, n_cells: int = 1, L: float = 1.0,
              kernel=None, collide: bool = True) -> DsmcState:
    rng = np.random.default_rng([seed, 2 ** 31])
    x = wrap(spec.sample_positions(M, rng, L), L)
    v = spec.sample_velocities(M, rng)
    return DsmcState(x, v, 0.0, 0, seed, n_cells, L, kernel, collide)


def transport_step(state: DsmcState, dt: float) -> DsmcState:
    """Free streaming ``x <- x + v dt`` with periodic wrap."""
    if dt == 0:
        return state
    return replace(state, x=wrap(state.x + state.v * dt, state.L), t=state.t + dt)


def _orthonormal(ghat):
    """Two unit vectors completing ``ghat`` to an orthonormal basis (row-wise)."""
    a = np.where(np.abs(ghat[:, :1]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
    e1 = a - np.sum(a * ghat, axis=1, keepdims=True) * ghat
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(ghat, e1)
    return e1, e2


def _collide_cell(v, idx, vol, M, dt, rng, kernel, majorant):
    """Null-collision (majorant) scheme in one cell; updates ``v`` in place.

    Returns the number of accepted collisions and the largest sampled relative
    speed (to detect a violated majorant).
    """
    m = idx.size
    if m < 2:
        return 0, 0.0
    vc = v[idx]
    if majorant is None:
        umax = 2.0 * float(np.max(np.linalg.norm(vc - vc.mean(axis=0), axis=1)))
    else:
        umax = majorant
    if umax <= 0:
        return 0, 0.0
    npairs = 0.5 * m * (m - 1)
    expected = npairs * math.pi * umax / (M * vol) * dt
    n_cand = rng.poisson(expected)
    accepted = 0
    seen = 0.0
    while n_cand > 0:
        batch = min(n_cand, m // 2)
        n_cand -= batch
        perm = rng.permutation(m)[:2 * batch]
        a, b = idx[perm[0::2]], idx[perm[1::2]]
        g = v[b] - v[a]
        u = np.linalg.norm(g, axis=1)
        seen = max(seen, float(u.max()))
        acc = rng.random(batch) * umax < u
        a, b, g, u = a[acc], b[acc], g[acc], u[acc]
        k = a.size
        if k == 0:
            continue
        # impact parameter uniform on the unit disc <=> nu on S^2_+ with density ~ nu.u
        rho = np.sqrt(rng.random(k))
        phi = 2 * np.pi * rng.random(k)
        ghat = g / u[:, None]
        e1, e2 = _orthonormal(ghat)
        e = np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2
        if kernel is None:
            chi = 2.0 * np.arccos(np.minimum(rho, 1.0))
        else:
            chi = np.asarray(kernel(rho, u), dtype=float)
        g_out = u[:, None] * (np.cos(chi)[:, None] * ghat + np.sin(chi)[:, None] * e)
        vcm = 0.5 * (v[a] + v[b])
        v[a] = vcm - 0.5 * g_out
        v[b] = vcm + 0.5 * g_out
        accepted += k
    return accepted, seen


def dsmc_step(state: DsmcState, dt: float) -> DsmcState:
    """One collision step of length ``dt`` (no transport).

    Each cell draws its candidates from its own generator seeded by
    ``(seed, step, cell)``, so the result does not depend on the cell order.
    """
    if not state.collide or state.M < 2:
        return replace(state, step=state.step + 1)
    v = state.v.copy()
    cells = state.cell_index()
    order = np.argsort(cells, kind="stable")
    counts = np.bincount(cells, minlength=state.n_cells ** 3)
    starts = np.concatenate([[0], np.cumsum(counts)])
    vol = (state.L / state.n_cells) ** 3
    majorant = state.majorant
    for c in np.flatnonzero(counts >= 2):
        rng = np.random.default_rng([state.seed, state.step, int(c)])
        idx = order[starts[c]:starts[c + 1]]
        _, seen = _collide_cell(v, idx, vol, state.M, dt, rng, state.kernel, majorant)
        if majorant is not None and seen > majorant:
            warnings.warn(f"relative speed {seen:.3g} exceeded the majorant {majorant:.3g}; "
                          f"doubling it", RuntimeWarning, stacklevel=2)
            majorant = 2.0 * majorant
            while majorant < seen:
                majorant *= 2.0
    return replace(state, v=v, step=state.step + 1, majorant=majorant)


def strang_step(state: DsmcState, dt: float) -> DsmcState:
    """Transport half step, collision step, transport half step."""
    s = transport_step(state, 0.5 * dt)
    s = dsmc_step(s, dt)
    return transport_step(s, 0.5 * dt)


def mean_free_time(beta: float) -> float:
    """Mean time between collisions for a Maxwellian at unit density: ``1 / (pi <|v - v*|>)``."""
    return 1.0 / (math.pi * 4.0 / math.sqrt(math.pi * beta))


# ------------------------------------------------------------------------------------
# H functional


def h_functional_grid(f: VelocityGridFunction) -> float:
    """``int f (log f - 1) dv`` by the trapezoid rule, with ``0 log 0 = 0``."""
    vals = f.values.ravel()
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = np.where(vals > 0, vals * (np.log(np.where(vals > 0, vals, 1.0)) - 1.0), 0.0)
    return float(np.dot(f.weights(), dens))


def maxwellian_h(beta: float) -> float:
    """Closed form of ``H(M_beta)``."""
    return 1.5 * math.log(beta / (2 * math.pi)) - 1.5 - 1.0


@dataclass(frozen=True)
class HistogramBins:
    """Fixed velocity bins: per-axis width ``3.5 sigma_a M^{-1/5}`` (Scott), reused for a whole run."""

    lo: np.ndarray
    width: np.ndarray
    counts: tuple

    @classmethod
    def scott(cls, v: np.ndarray, span: float = 7.0) -> "HistogramBins":
        v = np.asarray(v, dtype=float)
        M = v.shape[0]
        mu, sd = v.mean(axis=0), v.std(axis=0)
        width = 3.5 * sd * M ** -0.2
        half = span * sd
        nb_ = np.ceil(2 * half / width).astype(int)
        lo = mu - 0.5 * nb_ * width
        return cls(lo, width, tuple(int(k) for k in nb_))

    @property
    def volume(self) -> float:
        return float(np.prod(self.width))

    def counts_of(self, v) -> tuple[np.ndarray, int]:
        idx = np.floor((np.asarray(v) - self.lo) / self.width).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < np.array(self.counts)), axis=1)
        idx = idx[inside]
        flat = np.ravel_multi_index(idx.T, self.counts)
        return np.bincount(flat), int((~inside).sum())


def h_functional_sample(v, bins: HistogramBins | None = None) -> tuple[float, float]:
    """Histogram estimate of ``H`` from a velocity sample, and its standard error.

    The plug-in value is corrected by the Miller-Madow term ``-(K-1)/(2M)`` with
    ``K`` the number of occupied bins.  Particles outside the bins are ignored
    (their count is available from ``HistogramBins.counts_of``).
    """
    v = np.asarray(v, dtype=float)
    M = v.shape[0]
    bins = HistogramBins.scott(v) if bins is None else bins
    counts, _ = bins.counts_of(v)
    c = counts[counts > 0].astype(float)
    p = c / M
    logf = np.log(p / bins.volume)
    H = float(np.sum(p * (logf - 1.0))) - (c.size - 1) / (2.0 * M)
    var = (float(np.sum(p * logf ** 2)) - float(np.sum(p * logf)) ** 2) / M
    return H, math.sqrt(max(var, 0.0))


def h_functional(f, bins: HistogramBins | None = None) -> float:
    """``H`` of a grid function (quadrature) or of a velocity sample (histogram estimate)."""
    if isinstance(f, VelocityGridFunction):
        return h_functional_grid(f)
    if isinstance(f, DsmcState):
        return h_functional_sample(f.v, bins)[0]
    return h_functional_sample(f, bins)[0]


# ------------------------------------------------------------------------------------
# driver


@dataclass(frozen=True)
class DsmcParams:
    M: int = 100_000
    dt: float | None = None  # default: 0.1 mean free times
    n_cells: int = 1
    seed: int = 0
    collide: bool = True
    kernel: object = None
    output_every: int = 1
    snapshot_times: tuple = ()


@dataclass(eq=False)
class BoltzmannRun:
    times: np.ndarray
    mass: np.ndarray
    momentum: np.ndarray
    energy: np.ndarray
    H: np.ndarray
    H_stderr: np.ndarray
    fourth: np.ndarray
    snapshots: dict
    final: DsmcState

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "mass", "p1", "p2", "p3", "energy", "H", "H_stderr"])
            for k in range(self.times.size):
                row = [self.times[k], self.mass[k], *self.momentum[k], self.energy[k],
                       self.H[k], self.H_stderr[k]]
                w.writerow(["%.17g" % x for x in row])
        return path


def solve_boltzmann(f0: DensitySpec, T: float, params: DsmcParams = DsmcParams(),
                    t0: float | None = None) -> BoltzmannRun:
    """DSMC solution on ``[0, T]`` with Strang splitting; records moments and ``H``.

    ``t0`` (if given) enforces ``T <= 5 t0``.  Snapshots of the particle
    velocities are kept at the first output time at or after each requested time.
    """
    if t0 is not None and T > 5 * t0 * (1 + 1e-12):
        raise ValueError("horizon beyond 5 t0")
    beta = f0.effective_beta()
    dt = params.dt if params.dt is not None else 0.1 * mean_free_time(beta)
    if dt > 0.2 * mean_free_time(beta) * (1 + 1e-12) and params.collide:
        raise ValueError("dt exceeds 0.2 mean free times")
    steps = max(1, int(math.ceil(T / dt - 1e-9)))
    dt = T / steps
    state = dsmc_init(f0, params.M, params.seed, n_cells=params.n_cells, kernel=params.kernel,
                      collide=params.collide)
    bins = HistogramBins.scott(state.v)
    rec = {k: [] for k in ("t", "mass", "p", "e", "H", "Hs", "m4")}
    snaps = {}
    pending = sorted(params.snapshot_times)

    def record(s):
        H, se = h_functional_sample(s.v, bins)
        r2 = np.sum(s.v ** 2, axis=1)
        rec["t"].append(s.t)
        rec["mass"].append(s.M / params.M)
        rec["p"].append(s.v.mean(axis=0))
        rec["e"].append(0.5 * r2.mean())
        rec["H"].append(H)
        rec["Hs"].append(se)
        rec["m4"].append((r2 ** 2).mean())
        while pending and s.t >= pending[0] - 1e-12:
            snaps[pending.pop(0)] = s.v.copy()

    record(state)
    for k in range(steps):
        state = strang_step(state, dt)
        # accumulated time drifts by roundoff; pin the grid
        state = replace(state, t=(k + 1) * dt)
        if (k + 1) % params.output_every == 0 or k + 1 == steps:
            record(state)
    return BoltzmannRun(np.array(rec["t"]), np.array(rec["mass"]), np.array(rec["p"]),
                        np.array(rec["e"]), np.array(rec["H"]), np.array(rec["Hs"]),
                        np.array(rec["m4"]), snaps, state)
