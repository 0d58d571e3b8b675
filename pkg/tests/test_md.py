import numpy as np
import pytest
from scipy.integrate import solve_ivp

from boltzgrad import potentials
from boltzgrad.errors import EventBudgetError, PotentialDomainError
from boltzgrad.md import (
    apply_collision,
    evolve_hard_spheres,
    evolve_newton,
    pair_collision_time,
    reversal_error,
    reverse_velocities,
)
from boltzgrad.phase import DensitySpec, ParticleConfiguration, ScalingRegime, sample_initial
from boltzgrad.trees import lanford_time


def test_pair_time_head_on():
    z1 = (np.zeros(3), np.zeros(3))
    z2 = (np.array([1.0, 0, 0]), np.array([-2.0, 0, 0]))
    assert pair_collision_time(z1, z2, 0.1) == pytest.approx(0.45, abs=1e-15)


def test_pair_time_none_cases():
    z1 = (np.zeros(3), np.zeros(3))
    assert pair_collision_time(z1, (np.array([1.0, 0, 0]), np.zeros(3)), 0.1) is None
    assert pair_collision_time(z1, (np.array([1.0, 1, 0]), np.array([0, -1.0, 0])), 0.1) is None
    # exact tangency
    assert pair_collision_time(z1, (np.array([1.0, 0.1, 0]), np.array([-1.0, 0, 0])), 0.1) is None
    # beyond the horizon
    z2 = (np.array([1.0, 0, 0]), np.array([-2.0, 0, 0]))
    assert pair_collision_time(z1, z2, 0.1, horizon=0.4) is None


def test_apply_collision_examples():
    a, b = apply_collision([1, 0, 0], [-1, 0, 0], [1, 0, 0])
    assert np.array_equal(a, [-1, 0, 0]) and np.array_equal(b, [1, 0, 0])
    a, b = apply_collision([1, 2, 0], [0, 0, 0], [0, 1, 0])
    assert np.array_equal(a, [1, 0, 0]) and np.array_equal(b, [0, 2, 0])
    a, b = apply_collision([1, 0, 0], [0, 0, 0], [0, 0, 1])
    assert np.array_equal(a, [1, 0, 0]) and np.array_equal(b, [0, 0, 0])
    with pytest.raises(ValueError):
        apply_collision([1, 0, 0], [0, 0, 0], [0, 0, 2])


def test_zero_time_is_identity():
    cfg = sample_initial(DensitySpec.maxwellian(), ScalingRegime.boltzmann_grad(50), seed=0)
    out, rec = evolve_hard_spheres(cfg, 0.0)
    assert np.array_equal(out.positions, cfg.positions) and rec.event_count == 0


def test_two_body_head_on():
    # box of side 4 so that a separation of 1 is not the particle's own image
    cfg = ParticleConfiguration([[0.0, 0.5, 0.5], [1.0, 0.5, 0.5]], [[0, 0, 0], [-2, 0, 0]], 0.1, L=4.0)
    out, rec = evolve_hard_spheres(cfg, 1.0)
    assert rec.event_count == 1 and rec.times[0] == pytest.approx(0.45, abs=1e-14)
    np.testing.assert_allclose(out.velocities, [[-2, 0, 0], [0, 0, 0]], atol=1e-14)
    np.testing.assert_allclose(out.positions, [[2.9, 0.5, 0.5], [0.1, 0.5, 0.5]], atol=1e-13)
    np.testing.assert_allclose(rec.nus[0], [1, 0, 0], atol=1e-13)


def _check_conservation(N, t):
    reg = ScalingRegime.boltzmann_grad(N)
    cfg = sample_initial(DensitySpec.maxwellian(), reg, seed=N)
    out, rec = evolve_hard_spheres(cfg, t)
    e0 = cfg.kinetic_energy()
    scale = np.abs(cfg.velocities).sum()
    assert abs(out.kinetic_energy() - e0) / e0 < 1e-12
    assert np.abs(out.momentum() - cfg.momentum()).max() / scale < 1e-12
    assert out.min_distance() >= reg.eps - 1e-12
    assert np.all(np.diff(rec.times) >= 0)
    assert np.allclose(np.linalg.norm(rec.nus, axis=1), 1, atol=1e-12)
    return rec


def test_conservation_n50():
    _check_conservation(50, 0.5 * lanford_time(50, 50 ** -0.5, 1, 1, 1))


def test_no_overlap_after_every_event():
    reg = ScalingRegime.boltzmann_grad(50)
    cfg = sample_initial(DensitySpec.maxwellian(), reg, seed=9)
    _, rec = evolve_hard_spheres(cfg, 0.3)
    for n in range(1, rec.event_count + 1, 7):
        out, _ = evolve_hard_spheres(cfg, 0.3, stop_after_events=n)
        assert out.min_distance() >= reg.eps - 1e-12


def test_deterministic():
    cfg = sample_initial(DensitySpec.maxwellian(), ScalingRegime.boltzmann_grad(200), seed=1)
    a, ra = evolve_hard_spheres(cfg, 0.2)
    b, rb = evolve_hard_spheres(cfg, 0.2)
    assert np.array_equal(a.positions, b.positions) and np.array_equal(ra.times, rb.times)


def test_event_budget():
    cfg = sample_initial(DensitySpec.maxwellian(), ScalingRegime.boltzmann_grad(200), seed=1)
    with pytest.raises(EventBudgetError):
        evolve_hard_spheres(cfg, 1.0, max_events=10)


def test_stop_after_events():
    cfg = sample_initial(DensitySpec.maxwellian(), ScalingRegime.boltzmann_grad(50), seed=3)
    _, full = evolve_hard_spheres(cfg, 5.0)
    _, rec = evolve_hard_spheres(cfg, 5.0, stop_after_events=10)
    assert rec.event_count == 10
    assert rec.t_final == pytest.approx(0.5 * (full.times[9] + full.times[10]))


def test_collision_rate_scales_as_order_one():
    rates = []
    for N in (50, 200, 800):
        reg = ScalingRegime.boltzmann_grad(N)
        counts = []
        for s in range(4):
            cfg = sample_initial(DensitySpec.maxwellian(), reg, seed=s)
            _, rec = evolve_hard_spheres(cfg, 0.2)
            counts.append(2 * rec.event_count / N / 0.2)
        rates.append(np.mean(counts))
    assert max(rates) / min(rates) < 2


def test_reverse_velocities_involution():
    cfg = sample_initial(DensitySpec.maxwellian(), ScalingRegime.boltzmann_grad(20), seed=0,
                         max_packing=0.15)
    assert np.array_equal(reverse_velocities(reverse_velocities(cfg)).velocities, cfg.velocities)
    rest = cfg.replace(velocities=np.zeros((20, 3)))
    assert np.array_equal(reverse_velocities(rest).velocities, rest.velocities)


def test_microreversibility_small_system():
    errs = []
    for s in range(20):
        cfg = sample_initial(DensitySpec.maxwellian(), ScalingRegime.boltzmann_grad(20), seed=s,
                             max_packing=0.15)
        err, n = reversal_error(cfg, 50)
        assert n == 50
        errs.append(err)
    assert np.mean(np.array(errs) < 1e-6) >= 0.95


def test_trajectory_csv(tmp_path):
    cfg = sample_initial(DensitySpec.maxwellian(), ScalingRegime.boltzmann_grad(50), seed=3)
    _, rec = evolve_hard_spheres(cfg, 0.2)
    lines = rec.to_csv(tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "event_index,time,i,k,nu1,nu2,nu3"
    assert len(lines) == rec.event_count + 1


# ----- smooth potentials


def test_newton_free_flight():
    cfg = ParticleConfiguration([[0.1, 0.2, 0.3], [0.6, 0.6, 0.6]], [[1, 0, 0], [0, 0.5, 0]], 0.1)
    out = evolve_newton(cfg, 0.25, potentials.zero(), 0.001)
    np.testing.assert_allclose(out.positions, [[0.35, 0.2, 0.3], [0.6, 0.725, 0.6]], atol=1e-13)


def _head_on(eps=0.1, v=0.5):
    return ParticleConfiguration([[0.3, 0.5, 0.5], [0.6, 0.5, 0.5]], [[v, 0, 0], [-v, 0, 0]], eps)


def test_newton_head_on_speed_preserved():
    cfg = _head_on()
    out = evolve_newton(cfg, 0.6, potentials.quadratic(), 0.1 / 5000)
    # (1-r)^2 with E_rel = 1/4 < Phi(0)=1: reflection, velocities exchanged
    np.testing.assert_allclose(out.velocities[:, 0], [-0.5, 0.5], atol=1e-6)
    # time-reversal symmetry of the symmetric encounter
    back = evolve_newton(out.replace(velocities=-out.velocities), 0.6, potentials.quadratic(), 0.1 / 5000)
    np.testing.assert_allclose(back.positions, cfg.positions, atol=1e-9)


def test_newton_matches_adaptive_oracle():
    eps, pot = 0.1, potentials.quadratic()
    cfg = ParticleConfiguration([[0.3, 0.5, 0.5], [0.6, 0.53, 0.5]], [[0.5, 0, 0], [-0.5, 0, 0]], eps)

    def rhs(_, y):
        q1, q2, v1, v2 = y[:3], y[3:6], y[6:9], y[9:]
        d = q1 - q2
        r = np.linalg.norm(d)
        f = -pot.derivative(r) * d / r if r < 1 else np.zeros(3)
        return np.concatenate([v1, v2, f, -f])

    y0 = np.concatenate([cfg.positions[0] / eps, cfg.positions[1] / eps, cfg.velocities.ravel()])
    sol = solve_ivp(rhs, (0, 0.6 / eps), y0, rtol=1e-11, atol=1e-12, method="DOP853", max_step=0.05)
    out = evolve_newton(cfg, 0.6, pot, eps / 3000)
    np.testing.assert_allclose(out.velocities.ravel(), sol.y[6:, -1], atol=1e-5)


def test_newton_second_order_energy_drift():
    cfg = _head_on(v=1.0)
    drifts = []
    # a wall whose force vanishes smoothly at the edge of the support, so no kink spoils the order
    for dt in (0.1 / 100, 0.1 / 200):
        _, e = evolve_newton(cfg, 0.3, potentials.steep_wall(2.0), dt, return_energy=True)
        drifts.append(np.abs(e - e[0]).max())
    assert 3.0 < drifts[0] / drifts[1] < 5.0


def test_newton_rejects_coarse_step():
    with pytest.raises(ValueError):
        evolve_newton(_head_on(), 0.1, potentials.quadratic(), 0.01)


def test_newton_domain_error():
    r = np.linspace(0.5, 1.0, 40)
    pot = potentials.tabulated(r, (1 - r) ** 2 * 0.01)
    with pytest.raises(PotentialDomainError):
        evolve_newton(_head_on(v=1.0), 0.3, pot, 0.1 / 60)


def test_newton_energy_drift_small_over_lanford_time():
    reg = ScalingRegime.boltzmann_grad(50)
    cfg = sample_initial(DensitySpec.maxwellian(), reg, seed=2)
    vmax = np.linalg.norm(cfg.velocities, axis=1).max()
    t0 = lanford_time(50, reg.eps, 1, 1, 1)
    _, e = evolve_newton(cfg, t0, potentials.quadratic(), reg.eps / (50 * vmax),
                         return_energy=True)
    assert np.abs(e - e[0]).max() / e[0] < 1e-4
