"""Collision trees, backward flows and Monte Carlo evaluation of the series terms.

A tree ``Gamma(j, n)`` lists, for each created particle ``j+i`` (i = 1..n), its
progenitor ``k_i < j + i``.  Going backward from time ``t``, particle ``j+i``
appears at time ``t_i`` next to its progenitor with impact vector ``nu_i``
(pointing from the progenitor to the new particle) and velocity ``v_{j+i}``.
With ``s_i = nu_i . (v_{j+i} - eta_{k_i}(t_i))`` the creation is *outgoing* when
``s_i >= 0`` (type ``sigma = +``): the pair is in a post-collisional state, so
the backward flow continues with the scattered (pre-collisional) velocities.
Incoming creations (``sigma = -``) keep the velocities.  The series term is

    T(j, n) = sum_Gamma sum_sigma prod(sigma_i) int dLambda prod B_i f0^{(j+n)}(zeta(0)),

with ``B_i = |s_i|`` restricted to ``sigma_i s_i >= 0``.
"""

from __future__ import annotations

import csv
import itertools
import math
import time as _time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import BudgetExceeded
from .md import evolve_hard_spheres, evolve_newton
from .phase import DensitySpec, ParticleConfiguration, minimum_image, wrap
from .potentials import RadialPotential, hard_sphere
from .scattering import Cutoffs

TREE_BUDGET = 10 ** 5


# ------------------------------------------------------------------------------------
# arithmetic


def alpha(N: int, eps: float, j: int, n: int) -> float:
    """``eps^{2n} (N-j)(N-j-1)...(N-j-n+1)``, zero when ``n > N - j``.

    Evaluated in exact rational arithmetic on the decimal value of ``eps`` and
    rounded once, so e.g. ``alpha(100, 0.1, 1, 2) == 0.9702``.
    """
    if n < 0 or j < 0:
        raise ValueError("j and n must be nonnegative")
    if n > N - j:
        return 0.0
    e2 = Fraction(repr(float(eps))) ** 2
    out = Fraction(1)
    for m in range(n):
        out *= e2 * (N - j - m)
    return float(out)


def lanford_time(N: int, eps: float, b: float, beta: float, K: float = 1.0) -> float:
    """``t0 = 1 / (K pi N eps^2 b beta^{-1/2})``."""
    if min(N, eps, b, beta, K) <= 0:
        raise ValueError("all arguments must be positive")
    return 1.0 / (K * math.pi * (N * eps * eps) * b / math.sqrt(beta))


# ------------------------------------------------------------------------------------
# trees and dLambda


@dataclass(frozen=True)
class CollisionTree:
    j: int
    progenitors: tuple  # 0-based: progenitors[i] < j + i

    def __post_init__(self):
        for i, k in enumerate(self.progenitors):
            if not 0 <= k < self.j + i:
                raise ValueError(f"node {i + 1} has no progenitor {k}")

    @property
    def n(self) -> int:
        return len(self.progenitors)


def tree_count(j: int, n: int) -> int:
    return math.prod(j + i for i in range(n))


def enumerate_trees(j: int, n: int, budget: int = TREE_BUDGET) -> list[CollisionTree]:
    """All progenitor assignments of ``Gamma(j, n)`` in lexicographic order."""
    if j < 1 or n < 0:
        raise ValueError("need j >= 1 and n >= 0")
    if tree_count(j, n) > budget:
        raise BudgetExceeded(f"{tree_count(j, n)} trees exceed the budget of {budget}")
    ranges = [range(j + i) for i in range(n)]
    return [CollisionTree(j, tuple(p)) for p in itertools.product(*ranges)]


class GaussianProposal:
    """Isotropic Gaussian velocity law ``(beta/2pi)^{3/2} exp(-beta |v - u|^2 / 2)``."""

    def __init__(self, beta: float = 1.0, mean=(0.0, 0.0, 0.0)):
        self.beta = float(beta)
        self.mean = np.asarray(mean, dtype=float)

    @classmethod
    def for_density(cls, spec: DensitySpec) -> "GaussianProposal":
        # the widest component keeps f0 / q bounded
        return cls(min(spec.betas) if spec.is_mixture else spec.beta, spec.mean_velocity())

    def sample(self, shape, rng) -> np.ndarray:
        return self.mean + rng.standard_normal((*shape, 3)) / math.sqrt(self.beta)

    def pdf(self, v) -> np.ndarray:
        d2 = np.sum((np.asarray(v) - self.mean) ** 2, axis=-1)
        return (self.beta / (2 * np.pi)) ** 1.5 * np.exp(-0.5 * self.beta * d2)


@dataclass(frozen=True, eq=False)
class LambdaSample:
    times: np.ndarray  # descending, in (0, t)
    nus: np.ndarray  # (n, 3) unit vectors
    velocities: np.ndarray  # (n, 3)
    sigmas: np.ndarray  # (n,) entries +1 / -1
    weight: float  # importance weight of the draw for the measure dLambda (sigma summed)

    @property
    def n(self) -> int:
        return self.times.size


def _unit_vectors(shape, rng):
    x = rng.standard_normal((*shape, 3))
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def sample_lambda(tree: CollisionTree, t: float, velocity_law=None, seed=None) -> LambdaSample:
    """Draw ``(t_i, nu_i, v_{j+i}, sigma_i)``: ordered uniform times, uniform ``nu``,
    velocities from ``velocity_law`` (default a unit Gaussian), uniform ``sigma``.

    ``weight = t^n/n! (4 pi)^n 2^n / prod q(v_{j+i})`` makes the average of
    ``weight * F(Lambda)`` an unbiased estimate of ``sum_sigma int dLambda F``.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    rng = np.random.default_rng(seed)
    law = velocity_law or GaussianProposal()
    n = tree.n
    times = np.sort(rng.random(n) * t)[::-1]
    nus = _unit_vectors((n,), rng)
    vel = law.sample((n,), rng)
    sig = rng.choice(np.array([-1, 1]), size=n)
    w = t ** n / math.factorial(n) * (8 * math.pi) ** n / float(np.prod(law.pdf(vel)))
    return LambdaSample(times, nus, vel, sig, w)


# ------------------------------------------------------------------------------------
# backward flows


@dataclass(eq=False)
class BackwardTrajectory:
    """Piecewise-free backward flow.

    ``pieces`` is a list of ``(s, x, v)``: at time ``s`` the particles are at
    ``x`` with velocities ``v`` and move freely backward until the next piece.
    The last piece is at ``s = 0``.
    """

    flavor: str
    pieces: list = field(repr=False)
    creation_times: np.ndarray = None
    creation_pairs: list = None
    kernel_factors: np.ndarray = None  # B_i = |s_i|
    signs: np.ndarray = None  # sign of s_i (+1 outgoing)
    admissible: bool = True
    clearance_ok: bool = True
    eps: float = 0.0
    L: float = 1.0
    potential: RadialPotential | None = None

    @property
    def final(self):
        _, x, v = self.pieces[-1]
        return x, v

    def energy(self, at: int = -1) -> float:
        return 0.5 * float(np.sum(self.pieces[at][2] ** 2))


def _collide(vk, vn, nu):
    w = np.dot(vk - vn, nu)
    return vk - w * nu, vn + w * nu


def _check_sizes(tree, lam, roots):
    x, v = (np.atleast_2d(np.asarray(a, dtype=float)) for a in roots)
    if x.shape != (tree.j, 3) or v.shape != (tree.j, 3):
        raise ValueError("roots must be j positions and j velocities")
    if lam.n != tree.n:
        raise ValueError("Lambda sample and tree have different numbers of nodes")
    return x, v


def build_bbf(tree: CollisionTree, lam: LambdaSample, roots, t: float, L: float = 1.0):
    """Boltzmann backward flow: free flight, point creations, instantaneous scattering."""
    x, v = _check_sizes(tree, lam, roots)
    x, v = x.copy(), v.copy()
    pieces = [(t, x.copy(), v.copy())]
    s_now = t
    B, signs, pairs = [], [], []
    admissible = True
    for i in range(tree.n):
        ti, k = lam.times[i], tree.progenitors[i]
        x = x - v * (s_now - ti)
        s_now = ti
        vn = lam.velocities[i].copy()
        nu = lam.nus[i]
        s = float(np.dot(nu, vn - v[k]))
        B.append(abs(s))
        signs.append(1 if s >= 0 else -1)
        pairs.append((k, tree.j + i))
        if lam.sigmas[i] * s < 0:
            admissible = False
        if s >= 0:
            v[k], vn = _collide(v[k], vn, nu)
        x = np.vstack([x, x[k]])
        v = np.vstack([v, vn])
        pieces.append((ti, x.copy(), v.copy()))
    x = x - v * s_now
    pieces.append((0.0, x, v.copy()))
    return BackwardTrajectory("BBF", pieces, lam.times.copy(), pairs, np.array(B),
                              np.array(signs), admissible, True, 0.0, L, None)


def _replay(x, v, s_start, duration, record, L):
    """Rebuild the free pieces of a backward interacting run from its collision record.

    The run used reversed velocities; forward time ``tau`` maps to ``s_start - tau``.
    """
    pieces = []
    tprev = 0.0
    x = x.copy()
    v = v.copy()
    for tau, (a, b), post in zip(record.times, record.pairs, record.post_velocities):
        x = x - v * (tau - tprev)
        tprev = tau
        v[a], v[b] = -post[0], -post[1]
        pieces.append((s_start - tau, wrap(x, L), v.copy()))
    return pieces


def build_ibf(tree: CollisionTree, lam: LambdaSample, roots, t: float, eps: float,
              potential: RadialPotential | None = None, L: float = 1.0, dt: float | None = None):
    """Interacting backward flow: the whole set evolves under the ``eps``-range dynamics.

    Particle ``j+i`` is created at ``xi_k + eps nu_i``.  For hard spheres the
    scattering of an outgoing creation is applied at once (so ``eps = 0`` gives the
    Boltzmann flow); smooth potentials resolve it through the dynamics.  A creation
    closer than ``eps`` to any other particle sets ``clearance_ok = False``.
    """
    pot = potential or hard_sphere()
    x, v = _check_sizes(tree, lam, roots)
    x, v = wrap(x.copy(), L), v.copy()
    pieces = [(t, x.copy(), v.copy())]
    s_now = t
    B, signs, pairs = [], [], []
    admissible = True
    clearance = True

    def backward(x, v, duration):
        if duration <= 0:
            return x, v, []
        cfg = ParticleConfiguration(x, -v, eps, L)
        if pot.is_hard_sphere:
            out, rec = evolve_hard_spheres(cfg, duration, check=False)
            extra = _replay(x, v, s_now, duration, rec, L)
        else:
            vmax = float(np.max(np.linalg.norm(v, axis=1)))
            step = dt if dt is not None else eps / (50 * max(vmax, 1e-12))
            out = evolve_newton(cfg, duration, pot, step)
            extra = []
        return np.array(out.positions), -np.array(out.velocities), extra

    for i in range(tree.n):
        ti, k = lam.times[i], tree.progenitors[i]
        x, v, extra = backward(x, v, s_now - ti)
        pieces.extend(extra)
        s_now = ti
        vn = lam.velocities[i].copy()
        nu = lam.nus[i]
        s = float(np.dot(nu, vn - v[k]))
        B.append(abs(s))
        signs.append(1 if s >= 0 else -1)
        pairs.append((k, tree.j + i))
        if lam.sigmas[i] * s < 0:
            admissible = False
        xn = wrap(x[k] + eps * nu, L)
        others = [m for m in range(x.shape[0]) if m != k]
        if eps > 0 and others:
            d = np.linalg.norm(minimum_image(x[others] - xn, L), axis=1)
            if np.any(d <= eps):
                clearance = False
        if s >= 0 and pot.is_hard_sphere:
            v[k], vn = _collide(v[k], vn, nu)
        x = np.vstack([x, xn])
        v = np.vstack([v, vn])
        pieces.append((ti, x.copy(), v.copy()))
        if not clearance:
            break
    if clearance:
        x, v, extra = backward(x, v, s_now)
        pieces.extend(extra)
        pieces.append((0.0, x, v.copy()))
    return BackwardTrajectory("IBF", pieces, lam.times.copy(), pairs, np.array(B),
                              np.array(signs), admissible, clearance, eps, L, pot)


# ------------------------------------------------------------------------------------
# recollisions


@dataclass(frozen=True)
class RecollisionReport:
    pairs: list
    times: list
    distances: list

    @property
    def recollided(self) -> bool:
        return bool(self.pairs)


_SHIFTS = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=3)))


def _close_pairs(x, v, duration, delta, L, creation):
    """Pairs within ``delta`` (contact included) at some instant of a backward piece of length ``duration``.

    Creation pairs start in contact and separate; they only count when they come
    back towards each other.
    """
    n = x.shape[0]
    found = []
    for a in range(n):
        for b in range(a + 1, n):
            d0 = minimum_image(x[b] - x[a], L) + L * _SHIFTS
            dv = v[b] - v[a]
            # backward motion: d(tau) = d0 - dv tau
            dd = float(dv @ dv)
            proj = d0 @ dv
            tau = np.clip(proj / dd, 0.0, duration) if dd > 0 else np.zeros(len(d0))
            dist = np.linalg.norm(d0 - tau[:, None] * dv, axis=1)
            if (a, b) in creation:
                dist = np.where((proj > 0) & (tau > 0), dist, np.inf)
            m = int(np.argmin(dist))
            if dist[m] <= delta * (1 + 1e-12):
                found.append((a, b, float(tau[m]), float(dist[m])))
    return found


def detect_recollision(traj: BackwardTrajectory, delta: float) -> RecollisionReport:
    """Pairs of the backward flow that come within ``delta``, creation contacts excluded.

    The comparison is inclusive so that hard-sphere contacts of an interacting
    flow count at ``delta = eps``.

    A particle created within ``delta`` of a particle other than its progenitor
    counts as a close encounter, as does any later approach of a progenitor and
    its child.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if traj.flavor == "IBF" and delta < traj.eps:
        raise ValueError("delta must be at least eps for an interacting flow")
    creation = {tuple(sorted(p)) for p in traj.creation_pairs or ()}
    pairs, times, dists = [], [], []
    seen = set()
    ends = [p[0] for p in traj.pieces[1:]] + [traj.pieces[-1][0]]
    for (s0, x, v), s1 in zip(traj.pieces, ends):
        if x.shape[0] < 2:
            continue
        for a, b, tau, dist in _close_pairs(x, v, max(s0 - s1, 0.0), delta, traj.L, creation):
            if (a, b) in seen:
                continue
            seen.add((a, b))
            pairs.append((a, b))
            times.append(s0 - tau)
            dists.append(dist)
    return RecollisionReport(pairs, times, dists)


# ------------------------------------------------------------------------------------
# series terms


def _f0_product(f0: DensitySpec, x, v, L):
    return np.prod(f0.spatial_pdf(x, L) * f0.velocity_pdf(v), axis=-1)


def _bbf_batch(j, n, t, rx, rv, S, rng, law, L, f0, sigma_choice=None, cutoffs=None):
    """Vectorised Boltzmann backward flow for ``S`` independent draws.

    Returns per-draw weights and the cut-off indicator.  ``sigma_choice`` fixes the
    sigma pattern (exact summation); otherwise sigma is sampled uniformly.
    """
    times = np.sort(rng.random((S, n)) * t, axis=1)[:, ::-1]
    nus = _unit_vectors((S, n), rng)
    vel = law.sample((S, n), rng)
    prog = np.stack([rng.integers(0, j + i, size=S) for i in range(n)], axis=1) if n else \
        np.zeros((S, 0), dtype=int)
    if sigma_choice is None:
        sig = rng.choice(np.array([-1.0, 1.0]), size=(S, n))
        sigma_factor = 2.0 ** n
    else:
        sig = np.broadcast_to(np.asarray(sigma_choice, dtype=float), (S, n))
        sigma_factor = 1.0
    x = np.broadcast_to(rx, (S, j, 3)).copy()
    v = np.broadcast_to(rv, (S, j, 3)).copy()
    w = np.full(S, t ** n / math.factorial(n) * (4 * math.pi) ** n * sigma_factor
                * tree_count(j, n))
    cut = np.zeros(S, dtype=bool)
    rows = np.arange(S)
    s_now = np.full(S, t)
    for i in range(n):
        ti = times[:, i]
        x -= v * (s_now - ti)[:, None, None]
        s_now = ti
        k = prog[:, i]
        vk = v[rows, k]
        vn = vel[:, i]
        nu = nus[:, i]
        s = np.sum(nu * (vn - vk), axis=1)
        w *= s * (sig[:, i] * s >= 0) / law.pdf(vn)
        if cutoffs is not None:
            V = np.linalg.norm(vn - vk, axis=1)
            rho = np.sqrt(np.maximum(0.0, 1 - (s / np.maximum(V, 1e-300)) ** 2))
            cut |= cutoffs.excluded(rho, V, np.linalg.norm(np.stack([vk, vn], 1), axis=-1))
        out = s >= 0
        dw = np.sum((vk - vn) * nu, axis=1)[:, None] * nu
        vk2 = np.where(out[:, None], vk - dw, vk)
        vn2 = np.where(out[:, None], vn + dw, vn)
        v[rows, k] = vk2
        x = np.concatenate([x, x[rows, k][:, None]], axis=1)
        v = np.concatenate([v, vn2[:, None]], axis=1)
    x -= v * s_now[:, None, None]
    w *= _f0_product(f0, wrap(x, L), v, L)
    return w, cut


@dataclass(frozen=True)
class SeriesEstimate:
    j: int
    n: int
    flavor: str
    t: float
    estimate: float
    stderr: float
    samples: int
    recollision_fraction: float = 0.0
    cutoff_measure: float = 0.0
    partial: bool = False

    def row(self):
        return [self.j, self.n, self.flavor, self.t, self.estimate, self.stderr, self.samples,
                self.recollision_fraction, self.cutoff_measure]


def _batched(values, batches):
    """Mean and batch-means standard error."""
    values = np.asarray(values, dtype=float)
    m = values.size
    if m < 2:
        return (float(values.mean()) if m else 0.0), math.inf
    b = max(2, min(batches, m))
    means = np.array([chunk.mean() for chunk in np.array_split(values, b)])
    return float(values.mean()), float(means.std(ddof=1) / math.sqrt(b))


def eval_series_term(j: int, n: int, f0: DensitySpec, roots, t: float, samples: int = 100_000,
                     flavor: str = "BBF", eps: float | None = None, *, seed=0, L: float = 1.0,
                     exact_sigma: bool = False, proposal=None, cutoffs: Cutoffs | None = None,
                     delta: float | None = None, potential=None, batches: int = 50,
                     time_budget: float | None = None) -> SeriesEstimate:
    """Monte Carlo estimate of the series term ``T(j, n)`` at the root configuration.

    ``roots = (x, v)`` with ``j`` rows each.  The BBF estimator is vectorised; the
    IBF one builds each backward flow with the hard-sphere (or Newton) dynamics and
    also reports the fraction of draws with a recollision closer than ``delta``
    (default ``eps``).  Draws excluded by ``cutoffs`` get zero weight and their
    share of the total absolute weight is reported.  ``exact_sigma`` sums the
    ``2^n`` sign patterns instead of sampling them (``n <= 2``).
    """
    if n > 3:
        raise ValueError("n <= 3 is supported")
    if t <= 0:
        raise ValueError("t must be positive")
    flavor = flavor.upper()
    rx, rv = (np.atleast_2d(np.asarray(a, dtype=float)) for a in roots)
    if rx.shape != (j, 3) or rv.shape != (j, 3):
        raise ValueError("roots must hold j positions and velocities")
    if n == 0:
        val = float(_f0_product(f0, wrap(rx - rv * t, L), rv, L))
        return SeriesEstimate(j, 0, flavor, t, val, 0.0, 1)
    rng = np.random.default_rng(seed)
    law = proposal or GaussianProposal.for_density(f0)
    start = _time.perf_counter()
    if flavor == "BBF":
        if exact_sigma:
            if n > 2:
                raise ValueError("exact sigma summation is limited to n <= 2")
            seeds = rng.integers(0, 2 ** 63, size=1)
            total = np.zeros(samples)
            cut = np.zeros(samples, dtype=bool)
            for pattern in itertools.product((-1.0, 1.0), repeat=n):
                # common random numbers across patterns
                w, c = _bbf_batch(j, n, t, rx, rv, samples, np.random.default_rng(seeds[0]), law,
                                  L, f0, pattern, cutoffs)
                total += w
                cut |= c
            w = total
        else:
            w = np.empty(samples)
            cut = np.zeros(samples, dtype=bool)
            chunk = 200_000
            done = 0
            partial = False
            while done < samples:
                m = min(chunk, samples - done)
                w[done:done + m], cut[done:done + m] = _bbf_batch(j, n, t, rx, rv, m, rng, law,
                                                                  L, f0, None, cutoffs)
                done += m
                if time_budget is not None and _time.perf_counter() - start > time_budget \
                        and done < samples:
                    w, cut = w[:done], cut[:done]
                    partial = True
                    break
            est, se = _batched(np.where(cut, 0.0, w), batches)
            measure = _cut_measure(w, cut)
            return SeriesEstimate(j, n, "BBF", t, est, se, w.size, 0.0, measure, partial)
        est, se = _batched(np.where(cut, 0.0, w), batches)
        return SeriesEstimate(j, n, "BBF", t, est, se, samples, 0.0, _cut_measure(w, cut))
    if flavor != "IBF":
        raise ValueError("flavor must be BBF or IBF")
    if eps is None:
        raise ValueError("IBF needs eps")
    delta = eps if delta is None else delta
    weights, recoll = [], []
    partial = False
    for m in range(samples):
        prog = tuple(int(rng.integers(0, j + i)) for i in range(n))
        tree = CollisionTree(j, prog)
        lam = sample_lambda(tree, t, law, rng)
        traj = build_ibf(tree, lam, (rx, rv), t, eps, potential, L)
        wgt = 0.0
        if traj.admissible and traj.clearance_ok:
            x0, v0 = traj.final
            wgt = lam.weight * tree_count(j, n) * float(np.prod(traj.signs * traj.kernel_factors)) \
                * float(_f0_product(f0, x0, v0, L))
        weights.append(wgt)
        recoll.append(detect_recollision(traj, max(delta, eps)).recollided)
        if time_budget is not None and _time.perf_counter() - start > time_budget:
            partial = True
            break
    est, se = _batched(weights, batches)
    return SeriesEstimate(j, n, "IBF", t, est, se, len(weights), float(np.mean(recoll)), 0.0,
                          partial)


def _cut_measure(w, cut):
    tot = float(np.sum(np.abs(w)))
    return float(np.sum(np.abs(w[cut]))) / tot if tot > 0 else 0.0


def recollision_fraction(j: int, n: int, t: float, eps: float, samples: int, *, seed=0,
                         f0: DensitySpec | None = None, root_positions=None,
                         delta: float | None = None, L: float = 1.0):
    """Fraction of IBF draws with a close encounter below ``delta`` (default ``eps``).

    Trees are uniform over ``Gamma(j, n)``, ``Lambda`` follows ``sample_lambda`` and
    the root velocities are drawn from ``f0``.  Returns the fraction and its
    binomial standard error.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    f0 = f0 or DensitySpec.maxwellian()
    rng = np.random.default_rng(seed)
    law = GaussianProposal.for_density(f0)
    if root_positions is None:
        root_positions = np.full((j, 3), 0.5) + 0.2 * np.arange(j)[:, None]
    rx = np.atleast_2d(np.asarray(root_positions, dtype=float))
    hits = 0
    for _ in range(samples):
        tree = CollisionTree(j, tuple(int(rng.integers(0, j + i)) for i in range(n)))
        lam = sample_lambda(tree, t, law, rng)
        traj = build_ibf(tree, lam, (rx, f0.sample_velocities(j, rng)), t, eps, None, L)
        hits += detect_recollision(traj, eps if delta is None else delta).recollided
    p = hits / samples
    return p, math.sqrt(p * (1 - p) / samples)


# ------------------------------------------------------------------------------------
# envelope


@dataclass(frozen=True)
class SeriesBoundReport:
    C: float
    ratios: tuple
    ratio_errors: tuple
    envelope_holds: bool
    tau: float


def series_bound_check(estimates, t: float, t0: float) -> SeriesBoundReport:
    """Fit ``|T(j, n)| <= C (t/t0)^n`` and test successive ratios against ``t/t0``.

    ``estimates`` is a sequence of ``(value, stderr)`` for ``n = 0..n_max``.  ``C``
    is the smallest constant that bounds every term.  The envelope holds when each
    ratio ``|T_n| / |T_{n-1}|`` for ``n >= 2`` lies below ``t/t0`` plus three
    standard errors (terms compatible with zero pass trivially).
    """
    tau = t / t0
    vals = [abs(float(e[0])) for e in estimates]
    errs = [float(e[1]) for e in estimates]
    C = max((v / tau ** n for n, v in enumerate(vals)), default=0.0)
    ratios, rerr = [], []
    holds = True
    for n in range(1, len(vals)):
        a, b = vals[n], vals[n - 1]
        if b == 0:
            r, se = (0.0, 0.0) if a == 0 else (math.inf, math.inf)
        else:
            r = a / b
            se = r * math.hypot(errs[n] / a if a else 0.0, errs[n - 1] / b)
            if a == 0:
                se = errs[n] / b
        ratios.append(r)
        rerr.append(se)
        if n >= 2 and vals[n] > 3 * errs[n] and r > tau + 3 * se:
            holds = False
    return SeriesBoundReport(C, tuple(ratios), tuple(rerr), holds, tau)


def write_series_csv(estimates, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["j", "n", "flavor", "t", "estimate", "stderr", "samples",
                    "recollision_fraction", "cutoff_measure"])
        for e in estimates:
            r = e.row()
            w.writerow([r[0], r[1], r[2]] + ["%.17g" % r[3], "%.17g" % r[4], "%.17g" % r[5], r[6],
                                             "%.17g" % r[7], "%.17g" % r[8]])
    return path
