import numpy as np
import pytest

from boltzgrad import potentials
from boltzgrad.errors import InvalidConfigurationError, PackingTooDenseError
from boltzgrad.phase import (
    DensitySpec,
    ParticleConfiguration,
    ScalingRegime,
    hamiltonian,
    read_configuration_csv,
    sample_initial,
    to_macroscopic,
    to_microscopic,
    write_configuration_csv,
)


def test_hamiltonian_single_particle_at_rest():
    cfg = ParticleConfiguration([[0.5, 0.5, 0.5]], [[0, 0, 0]], 0.1)
    assert hamiltonian(cfg, potentials.hard_sphere()) == 0.0


def test_hamiltonian_hard_sphere_kinetic_only():
    cfg = ParticleConfiguration([[0.1, 0.1, 0.1], [0.6, 0.6, 0.6]], [[1, 0, 0], [0, 2, 0]], 0.1)
    assert hamiltonian(cfg, potentials.hard_sphere()) == 2.5


def test_hamiltonian_counts_ordered_pairs():
    cfg = ParticleConfiguration([[0.5, 0.5, 0.5], [0.55, 0.5, 0.5]], np.zeros((2, 3)), 0.1)
    assert hamiltonian(cfg, potentials.quadratic()) == pytest.approx(0.5, abs=1e-14)
    assert hamiltonian(cfg, potentials.quadratic(), pairs="unordered") == pytest.approx(0.25, abs=1e-14)


def test_hamiltonian_uses_minimum_image():
    cfg = ParticleConfiguration([[0.02, 0.5, 0.5], [0.97, 0.5, 0.5]], np.zeros((2, 3)), 0.1)
    assert hamiltonian(cfg, potentials.quadratic()) == pytest.approx(0.5, abs=1e-12)


def test_hamiltonian_rejects_overlap():
    cfg = ParticleConfiguration([[0.5, 0.5, 0.5], [0.55, 0.5, 0.5]], np.zeros((2, 3)), 0.1)
    with pytest.raises(InvalidConfigurationError):
        hamiltonian(cfg, potentials.hard_sphere())


def test_hamiltonian_symmetries():
    rng = np.random.default_rng(3)
    cfg = sample_initial(DensitySpec.maxwellian(), ScalingRegime(30, 0.12), seed=4)
    pot = potentials.quadratic()
    h = hamiltonian(cfg, pot)
    assert hamiltonian(cfg.replace(velocities=-cfg.velocities), pot) == h
    shifted = cfg.replace(positions=np.mod(cfg.positions + rng.random(3), 1.0))
    assert hamiltonian(shifted, pot) == pytest.approx(h, rel=1e-12)


def test_configuration_rejects_large_eps():
    with pytest.raises(InvalidConfigurationError):
        ParticleConfiguration([[0, 0, 0]], [[0, 0, 0]], 0.3)


def test_scaling_examples():
    t, x = to_macroscopic(10.0, [10.0, 0, 0], 0.1)
    assert t == pytest.approx(1.0) and np.allclose(x, [1, 0, 0])
    t, x = to_macroscopic(3.7, [1.5, 2.0, -1.0], 1.0)
    assert t == 3.7 and np.array_equal(x, [1.5, 2.0, -1.0])


def test_scaling_round_trip_exact_for_power_of_two():
    rng = np.random.default_rng(0)
    tau, q = rng.random(), rng.normal(size=(50, 3))
    for eps in (2.0 ** -3, 2.0 ** -7):
        t2, q2 = to_microscopic(*to_macroscopic(tau, q, eps), eps)
        assert t2 == tau and np.array_equal(q2, q)


def test_scaling_round_trip_generic_eps():
    rng = np.random.default_rng(1)
    q = rng.normal(size=(20, 3))
    _, q2 = to_microscopic(*to_macroscopic(0.0, q, 0.0731), 0.0731)
    np.testing.assert_allclose(q2, q, rtol=1e-15)


def test_bg_regime():
    reg = ScalingRegime.boltzmann_grad(800)
    assert abs(reg.product - 1) < 1e-12 and reg.bg


def test_sampler_deterministic_and_excluding():
    reg = ScalingRegime.boltzmann_grad(100)
    a = sample_initial(DensitySpec.maxwellian(), reg, seed=11)
    b = sample_initial(DensitySpec.maxwellian(), reg, seed=11)
    assert np.array_equal(a.positions, b.positions) and np.array_equal(a.velocities, b.velocities)
    assert a.min_distance() >= reg.eps


def test_sampler_single_particle():
    cfg = sample_initial(DensitySpec.maxwellian(), ScalingRegime(1, 0.1), seed=0)
    assert cfg.N == 1


def test_sampler_second_moment():
    reg = ScalingRegime.boltzmann_grad(50)
    vs = np.concatenate([sample_initial(DensitySpec.maxwellian(1.0), reg, seed=s).velocities
                         for s in range(200)])
    # 10^4 velocity draws
    assert abs(np.mean(np.sum(vs ** 2, axis=1)) - 3.0) < 5e-2


def test_sampler_eps_zero_is_product():
    cfg = sample_initial(DensitySpec.maxwellian(), ScalingRegime(2000, 0.0), seed=5)
    hist, _ = np.histogram(cfg.positions[:, 0], bins=10, range=(0, 1))
    assert hist.min() > 150


def test_sampler_too_dense():
    with pytest.raises(PackingTooDenseError):
        sample_initial(DensitySpec.maxwellian(), ScalingRegime(2000, 0.2), seed=0)


def test_sampler_budget():
    with pytest.raises(PackingTooDenseError):
        sample_initial(DensitySpec.maxwellian(), ScalingRegime(400, 0.07), seed=0,
                       max_packing=0.5, budget=300)


def test_density_spec_validation():
    with pytest.raises(ValueError):
        DensitySpec((0.5, 0.6), (1.0, 2.0), ((0, 0, 0), (0, 0, 0)))
    spec = DensitySpec.two_temperature(1.0, 4.0)
    assert spec.second_moment() == pytest.approx(0.5 * 3 + 0.5 * 0.75)
    assert spec.effective_beta() == pytest.approx(1.6)


def test_tabulated_density_samples_its_mean():
    axis = np.linspace(-6, 6, 41)
    V = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), -1)
    vals = (1 / (2 * np.pi)) ** 1.5 * np.exp(-0.5 * np.sum((V - [0.6, 0, 0]) ** 2, -1))
    h = axis[1] - axis[0]
    w = np.ones(41)
    w[[0, -1]] = 0.5
    vals /= np.einsum("ijk,i,j,k->", vals, w, w, w) * h ** 3
    spec = DensitySpec(grid=(axis, vals))
    v = spec.sample_velocities(20000, np.random.default_rng(0))
    assert abs(v[:, 0].mean() - 0.6) < 0.05
    assert spec.velocity_pdf(np.array([0.6, 0, 0])) == pytest.approx((2 * np.pi) ** -1.5, rel=1e-3)


def test_configuration_csv_round_trip(tmp_path):
    cfg = sample_initial(DensitySpec.maxwellian(), ScalingRegime.boltzmann_grad(50), seed=2)
    path = write_configuration_csv(cfg, tmp_path / "c.csv")
    assert path.read_text().splitlines()[0] == "particle_id,x1,x2,x3,v1,v2,v3"
    back = read_configuration_csv(path, cfg.eps)
    assert np.array_equal(back.positions, cfg.positions)
    assert np.array_equal(back.velocities, cfg.velocities)
