"""Microscopic dynamics: exact event-driven hard spheres and velocity Verlet for smooth potentials."""

from __future__ import annotations

import csv
import heapq
import math
import time as _time
from dataclasses import dataclass, field
from pathlib import Path

import numba as nb
import numpy as np

from .errors import EventBudgetError, InvalidConfigurationError
from .phase import ParticleConfiguration, minimum_image, to_macroscopic, to_microscopic, wrap
from .potentials import RadialPotential

TIE_WINDOW = 1e-14
# below this many cells per side the cell list cannot certify the minimum image,
# so every particle is treated as a neighbour of every other and images are searched
_MIN_CELLS = 7


def pair_collision_time(z_i, z_k, eps, horizon=np.inf, L=None):
    """First contact time of two free hard spheres of diameter ``eps``.

    ``z = (x, v)``.  Returns ``None`` when the pair is separating, misses, only
    grazes tangentially, or meets after ``horizon``.  With ``L`` given the
    separation uses the minimum image.
    """
    (xi, vi), (xk, vk) = z_i, z_k
    d = np.asarray(xk, float) - np.asarray(xi, float)
    if L is not None:
        d = minimum_image(d, L)
    dv = np.asarray(vk, float) - np.asarray(vi, float)
    tau = _pair_time(d, dv, eps)
    if tau == np.inf or tau > horizon:
        return None
    return tau


@nb.njit(cache=True)
def _pair_time(d, dv, eps):
    b = d[0] * dv[0] + d[1] * dv[1] + d[2] * dv[2]
    if b >= 0.0:
        return np.inf
    a = dv[0] * dv[0] + dv[1] * dv[1] + dv[2] * dv[2]
    c = d[0] * d[0] + d[1] * d[1] + d[2] * d[2] - eps * eps
    disc = b * b - a * c
    if disc <= 0.0:
        return np.inf
    tau = c / (-b + math.sqrt(disc))
    return tau if tau > 0.0 else 0.0


def apply_collision(v_i, v_k, nu, tol=1e-12):
    """Elastic hard-sphere collision with unit impact vector ``nu`` (from i to k)."""
    nu = np.asarray(nu, float)
    if abs(np.linalg.norm(nu) - 1.0) > tol:
        raise ValueError("impact vector must have unit length")
    v_i = np.asarray(v_i, float)
    v_k = np.asarray(v_k, float)
    w = np.dot(v_i - v_k, nu)
    return v_i - w * nu, v_k + w * nu


def reverse_velocities(config: ParticleConfiguration) -> ParticleConfiguration:
    return config.replace(velocities=-config.velocities)


def reversal_error(config: ParticleConfiguration, n_events: int = 50, horizon: float = 1e3):
    """Run forward for ``n_events`` collisions, reverse, run back the same time, reverse.

    Returns the largest minimum-image position error and the number of
    collisions seen on the forward leg.
    """
    fwd, rec = evolve_hard_spheres(config, horizon, stop_after_events=n_events)
    back, _ = evolve_hard_spheres(reverse_velocities(fwd), rec.t_final, check=False)
    back = reverse_velocities(back)
    err = np.abs(minimum_image(back.positions - config.positions, config.L)).max()
    return float(err), rec.event_count


@dataclass(frozen=True)
class CollisionEvent:
    time: float
    i: int
    k: int
    nu: tuple


@dataclass(eq=False)
class TrajectoryRecord:
    initial: ParticleConfiguration
    final: ParticleConfiguration
    times: np.ndarray
    pairs: np.ndarray  # (n, 2)
    nus: np.ndarray  # (n, 3)
    post_velocities: np.ndarray = field(repr=False)  # (n, 2, 3): outgoing v_i, v_k
    crossings: int = 0
    wall_time: float = 0.0
    t_final: float = 0.0

    @property
    def event_count(self) -> int:
        return int(self.times.size)

    @property
    def events(self) -> list[CollisionEvent]:
        return [CollisionEvent(float(t), int(p[0]), int(p[1]), tuple(map(float, n)))
                for t, p, n in zip(self.times, self.pairs, self.nus)]

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["event_index", "time", "i", "k", "nu1", "nu2", "nu3"])
            for n, (t, p, nu) in enumerate(zip(self.times, self.pairs, self.nus)):
                w.writerow([n, "%.17g" % t, int(p[0]), int(p[1])] + ["%.17g" % c for c in nu])
        return path


# --------------------------------------------------------------------------------------
# event-driven kernel
#
# Heap entries are (time, kind, i, k, count_i, count_k).  kind 0 is a pair collision
# (i < k), kind 1 a cell crossing of i (k encodes axis*2 + direction), kind 2 a
# refresh of i in single-cell mode.  An entry is stale as soon as the event counter
# of one of its particles has moved on.


@nb.njit(cache=True)
def _cell_of(x, cs, nc):
    c = np.empty(3, np.int64)
    for a in range(3):
        q = int(math.floor(x[a] / cs))
        c[a] = min(max(q, 0), nc - 1)
    return c


@nb.njit(cache=True)
def _neighbour_cells(c, nc):
    out = np.empty(27, np.int64)
    m = 0
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dz in (-1, 0, 1):
                idx = (((c[0] + dx) % nc) * nc + (c[1] + dy) % nc) * nc + (c[2] + dz) % nc
                dup = False
                for q in range(m):
                    if out[q] == idx:
                        dup = True
                        break
                if not dup:
                    out[m] = idx
                    m += 1
    return out[:m]


@nb.njit(cache=True)
def _pos_at(x, v, tl, i, t, out):
    dt = t - tl[i]
    for a in range(3):
        out[a] = x[i, a] + v[i, a] * dt


@nb.njit(cache=True)
def _predict_pair(x, v, tl, i, k, t, eps, L, search_images):
    xi = np.empty(3)
    xk = np.empty(3)
    _pos_at(x, v, tl, i, t, xi)
    _pos_at(x, v, tl, k, t, xk)
    d = np.empty(3)
    dv = np.empty(3)
    for a in range(3):
        dd = xk[a] - xi[a]
        d[a] = dd - L * np.rint(dd / L)
        dv[a] = v[k, a] - v[i, a]
    if not search_images:
        return _pair_time(d, dv, eps)
    best = np.inf
    e = np.empty(3)
    for sx in (-1.0, 0.0, 1.0):
        for sy in (-1.0, 0.0, 1.0):
            for sz in (-1.0, 0.0, 1.0):
                e[0] = d[0] + sx * L
                e[1] = d[1] + sy * L
                e[2] = d[2] + sz * L
                tau = _pair_time(e, dv, eps)
                if tau < best:
                    best = tau
    return best


@nb.njit(cache=True)
def _crossing(x, v, i, cell, cs):
    best = np.inf
    code = -1
    for a in range(3):
        if v[i, a] > 0.0:
            tau = ((cell[i, a] + 1) * cs - x[i, a]) / v[i, a]
            c = 2 * a + 1
        elif v[i, a] < 0.0:
            tau = (cell[i, a] * cs - x[i, a]) / v[i, a]
            c = 2 * a
        else:
            continue
        if tau < 0.0:
            tau = 0.0
        if tau < best:
            best = tau
            code = c
    return best, code


@nb.njit(cache=True)
def _schedule(heap, x, v, tl, cnt, cell, head, nxt, i, t, eps, L, cs, nc, single,
              only_higher):
    if single:
        speed = math.sqrt(v[i, 0] ** 2 + v[i, 1] ** 2 + v[i, 2] ** 2)
        if speed > 0.0:
            heapq.heappush(heap, (t + 0.25 * L / speed, 2, i, -1, cnt[i], 0))
        n = x.shape[0]
        for k in range(n):
            if k == i or (only_higher and k < i):
                continue
            tau = _predict_pair(x, v, tl, i, k, t, eps, L, True)
            if tau < np.inf:
                a, b = (i, k) if i < k else (k, i)
                heapq.heappush(heap, (t + tau, 0, a, b, cnt[a], cnt[b]))
        return
    tau, code = _crossing(x, v, i, cell, cs)
    if code >= 0:
        heapq.heappush(heap, (tl[i] + tau, 1, i, code, cnt[i], 0))
    for c in _neighbour_cells(cell[i], nc):
        k = head[c]
        while k >= 0:
            if k != i and not (only_higher and k < i):
                tau = _predict_pair(x, v, tl, i, k, t, eps, L, False)
                if tau < np.inf:
                    a, b = (i, k) if i < k else (k, i)
                    heapq.heappush(heap, (t + tau, 0, a, b, cnt[a], cnt[b]))
            k = nxt[k]


@nb.njit(cache=True)
def _unlink(i, c, head, nxt, prv):
    if prv[i] >= 0:
        nxt[prv[i]] = nxt[i]
    else:
        head[c] = nxt[i]
    if nxt[i] >= 0:
        prv[nxt[i]] = prv[i]
    nxt[i] = -1
    prv[i] = -1


@nb.njit(cache=True)
def _link(i, c, head, nxt, prv):
    nxt[i] = head[c]
    prv[i] = -1
    if head[c] >= 0:
        prv[head[c]] = i
    head[c] = i


@nb.njit(cache=True)
def _run(x0, v0, eps, L, t_final, max_events):
    n = x0.shape[0]
    x = x0.copy()
    v = v0.copy()
    tl = np.zeros(n)
    cnt = np.zeros(n, np.int64)
    nc = int(math.floor(L / eps)) if eps > 0 else 1
    single = nc < _MIN_CELLS
    if single:
        nc = 1
    cs = L / nc
    cell = np.zeros((n, 3), np.int64)
    head = -np.ones(nc * nc * nc, np.int64)
    nxt = -np.ones(n, np.int64)
    prv = -np.ones(n, np.int64)
    for i in range(n):
        cell[i] = _cell_of(x[i], cs, nc)
        _link(i, (cell[i, 0] * nc + cell[i, 1]) * nc + cell[i, 2], head, nxt, prv)

    cap = 1024
    ev_t = np.empty(cap)
    ev_p = np.empty((cap, 2), np.int64)
    ev_nu = np.empty((cap, 3))
    ev_v = np.empty((cap, 2, 3))
    n_ev = 0
    n_cross = 0

    heap = [(0.0, 0, 0, 0, 0, 0)]
    heapq.heappop(heap)
    if eps > 0:
        for i in range(n):
            _schedule(heap, x, v, tl, cnt, cell, head, nxt, i, 0.0, eps, L, cs, nc, single, True)

    group = [(0.0, 0, 0, 0, 0, 0)]
    xi = np.empty(3)
    xk = np.empty(3)
    status = 0
    while len(heap) > 0 and heap[0][0] <= t_final:
        ev = heapq.heappop(heap)
        t, kind, i, k, ci, ck = ev
        if kind != 0:
            if cnt[i] != ci:
                continue
            _pos_at(x, v, tl, i, t, xi)
            for a in range(3):
                x[i, a] = xi[a]
            tl[i] = t
            if kind == 1:
                a = k // 2
                c_old = (cell[i, 0] * nc + cell[i, 1]) * nc + cell[i, 2]
                _unlink(i, c_old, head, nxt, prv)
                if k % 2 == 1:
                    x[i, a] = (cell[i, a] + 1) * cs
                    cell[i, a] += 1
                    if cell[i, a] == nc:
                        cell[i, a] = 0
                        x[i, a] = 0.0
                else:
                    x[i, a] = cell[i, a] * cs
                    cell[i, a] -= 1
                    if cell[i, a] < 0:
                        cell[i, a] = nc - 1
                        x[i, a] = L
                _link(i, (cell[i, 0] * nc + cell[i, 1]) * nc + cell[i, 2], head, nxt, prv)
                n_cross += 1
            else:
                for a in range(3):
                    x[i, a] -= L * math.floor(x[i, a] / L)
            cnt[i] += 1
            _schedule(heap, x, v, tl, cnt, cell, head, nxt, i, t, eps, L, cs, nc, single, False)
            continue
        if cnt[i] != ci or cnt[k] != ck:
            continue
        # gather valid collisions that are simultaneous up to the tie window
        group.clear()
        group.append(ev)
        while len(heap) > 0 and heap[0][0] - t <= TIE_WINDOW and heap[0][0] <= t_final:
            e2 = heapq.heappop(heap)
            if e2[1] != 0:
                heapq.heappush(heap, (e2[0] + 0.0, e2[1], e2[2], e2[3], e2[4], e2[5]))
                break
            if cnt[e2[2]] == e2[4] and cnt[e2[3]] == e2[5]:
                group.append(e2)
        # insertion sort by (i, k): deterministic tie-breaking
        for a in range(1, len(group)):
            e = group[a]
            b = a - 1
            while b >= 0 and (group[b][2], group[b][3]) > (e[2], e[3]):
                group[b + 1] = group[b]
                b -= 1
            group[b + 1] = e
        touched = [0]
        touched.clear()
        for e in group:
            te, _, a, b, ca, cb = e
            if cnt[a] != ca or cnt[b] != cb:
                continue
            if n_ev >= max_events:
                status = 1
                break
            _pos_at(x, v, tl, a, te, xi)
            _pos_at(x, v, tl, b, te, xk)
            nrm = 0.0
            nu = np.empty(3)
            for q in range(3):
                x[a, q] = xi[q]
                x[b, q] = xk[q]
                dd = xk[q] - xi[q]
                nu[q] = dd - L * np.rint(dd / L)
                nrm += nu[q] * nu[q]
            nrm = math.sqrt(nrm)
            w = 0.0
            for q in range(3):
                nu[q] /= nrm
                w += (v[a, q] - v[b, q]) * nu[q]
            for q in range(3):
                v[a, q] -= w * nu[q]
                v[b, q] += w * nu[q]
            tl[a] = te
            tl[b] = te
            cnt[a] += 1
            cnt[b] += 1
            if n_ev == cap:
                cap *= 2
                t2 = np.empty(cap)
                t2[:n_ev] = ev_t
                ev_t = t2
                p2 = np.empty((cap, 2), np.int64)
                p2[:n_ev] = ev_p
                ev_p = p2
                nu2 = np.empty((cap, 3))
                nu2[:n_ev] = ev_nu
                ev_nu = nu2
                vv2 = np.empty((cap, 2, 3))
                vv2[:n_ev] = ev_v
                ev_v = vv2
            ev_t[n_ev] = te
            ev_p[n_ev, 0] = a
            ev_p[n_ev, 1] = b
            ev_nu[n_ev] = nu
            ev_v[n_ev, 0] = v[a]
            ev_v[n_ev, 1] = v[b]
            n_ev += 1
            touched.append(a)
            touched.append(b)
        if status:
            break
        for a in touched:
            _schedule(heap, x, v, tl, cnt, cell, head, nxt, a, tl[a], eps, L, cs, nc, single, False)

    # free flight to the final time
    t_end = t_final if status == 0 else ev_t[n_ev - 1]
    for i in range(n):
        for a in range(3):
            x[i, a] = x[i, a] + v[i, a] * (t_end - tl[i])
    return x, v, ev_t[:n_ev].copy(), ev_p[:n_ev].copy(), ev_nu[:n_ev].copy(), \
        ev_v[:n_ev].copy(), n_cross, status


def evolve_hard_spheres(config: ParticleConfiguration, t_final: float, *,
                        max_events: int = 10 ** 8, stop_after_events: int | None = None,
                        check: bool = True):
    """Exact hard-sphere flow up to ``t_final`` (macroscopic time).

    With ``stop_after_events=n`` the run ends halfway between the ``n``-th
    collision and the next one (or at ``t_final`` if fewer occur), which gives a
    well-defined stopping time for reversibility experiments.
    Returns the final configuration and a ``TrajectoryRecord``.
    """
    if t_final < 0:
        raise ValueError("t_final must be nonnegative")
    if check:
        config.check_exclusion()
    x0 = wrap(np.array(config.positions), config.L)
    v0 = np.array(config.velocities)
    start = _time.perf_counter()
    if stop_after_events is not None:
        n = int(stop_after_events)
        probe = _run(x0, v0, config.eps, config.L, float(t_final), n + 1)
        times = probe[2]
        if times.size >= n + 1:
            t_final = 0.5 * (times[n - 1] + times[n]) if n > 0 else 0.5 * times[0]
    x, v, et, ep, enu, ev, ncross, status = _run(x0, v0, config.eps, config.L,
                                                 float(t_final), int(max_events))
    if status:
        raise EventBudgetError(f"more than {max_events} collisions before t={t_final}")
    final = ParticleConfiguration(wrap(x, config.L), v, config.eps, config.L)
    rec = TrajectoryRecord(config, final, et, ep, enu, ev, int(ncross),
                           _time.perf_counter() - start, float(t_final))
    return final, rec


# --------------------------------------------------------------------------------------
# smooth potentials


def _forces(q, potential: RadialPotential, Lq: float):
    """Forces and unordered-pair potential energy in microscopic units (support radius 1)."""
    n = q.shape[0]
    f = np.zeros_like(q)
    if n < 2:
        return f, 0.0
    from scipy.spatial import cKDTree

    tree = cKDTree(wrap(q.copy(), Lq), boxsize=Lq)
    pairs = tree.query_pairs(1.0, output_type="ndarray")
    if pairs.size == 0:
        return f, 0.0
    d = minimum_image(q[pairs[:, 0]] - q[pairs[:, 1]], Lq)
    r = np.linalg.norm(d, axis=1)
    inside = r < 1.0
    pairs, d, r = pairs[inside], d[inside], r[inside]
    if r.size == 0:
        return f, 0.0
    if np.any(r == 0):
        raise InvalidConfigurationError("coincident particles")
    fpair = -(potential.derivative(r) / r)[:, None] * d  # force on the first of each pair
    np.add.at(f, pairs[:, 0], fpair)
    np.add.at(f, pairs[:, 1], -fpair)
    return f, float(np.sum(potential.value(r)))


def evolve_newton(config: ParticleConfiguration, t_final: float, potential: RadialPotential,
                  dt: float, *, return_energy: bool = False):
    """Velocity Verlet integration of the Newton equations with pair force ``-grad Phi(|q|)``.

    Works in microscopic variables ``q = x/eps``, ``tau = t/eps`` and reports the
    result in macroscopic ones.  ``dt`` is a macroscopic step and must satisfy
    ``dt <= eps / (50 v_max)``; it is shortened slightly so that ``t_final`` is hit
    exactly.  With ``return_energy`` the per-step energy (unordered pairs) is returned.
    """
    if potential.is_hard_sphere:
        raise ValueError("use evolve_hard_spheres for hard spheres")
    eps, L = config.eps, config.L
    if eps <= 0:
        raise ValueError("eps must be positive")
    vmax = float(np.max(np.linalg.norm(config.velocities, axis=1))) if config.N else 0.0
    if dt <= 0 or (vmax > 0 and dt > eps / (50 * vmax) * (1 + 1e-12)):
        raise ValueError(f"dt={dt:g} does not resolve the interaction (need <= eps/(50 v_max))")
    steps = int(math.ceil(t_final / dt - 1e-12)) if t_final > 0 else 0
    _, q = to_microscopic(0.0, config.positions, eps)
    Lq = L / eps
    v = np.array(config.velocities, dtype=float)
    q = np.array(q, dtype=float)
    energies = []
    if steps:
        htau = (t_final / steps) / eps
        f, u = _forces(q, potential, Lq)
        energies.append(0.5 * np.sum(v ** 2) + u)
        for _ in range(steps):
            v += 0.5 * htau * f
            q += htau * v
            f, u = _forces(q, potential, Lq)
            v += 0.5 * htau * f
            energies.append(0.5 * np.sum(v ** 2) + u)
    _, x = to_macroscopic(0.0, q, eps)
    out = ParticleConfiguration(wrap(np.array(x), L), v, eps, L)
    if return_energy:
        return out, np.array(energies)
    return out
