import math
import os
from pathlib import Path

import numpy as np
import pytest

from boltzgrad import lab
from boltzgrad.errors import BudgetExceeded, ConfigError


def write(tmp_path, text, name="exp.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


H_THEOREM = """
[experiment]
name = h-theorem
seed = 3
output = out
horizon = 0.5
ensemble = 3
[regime]
N = 100
[density]
betas = 1, 4
weights = 0.5, 0.5
[h-theorem]
particles = 4000
collide = {collide}
"""


def read_csv(path):
    lines = Path(path).read_text().splitlines()
    return lines[0].split(","), np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])


# ---- configuration --------------------------------------------------------------------


def test_minimal_config_defaults(tmp_path, monkeypatch):
    monkeypatch.delenv(lab.OUTPUT_ENV, raising=False)
    cfg = lab.load_config(write(tmp_path, "[experiment]\nname = reversibility\n[regime]\nN = 50\n"))
    assert cfg.N == (50,) and cfg.bg and cfg.R == 1
    assert cfg.output == tmp_path / "output"
    assert cfg.t0 == pytest.approx(1 / math.pi)
    assert cfg.options["events"] == 50


def test_t0_uses_effective_temperature(tmp_path):
    cfg = lab.load_config(write(tmp_path, H_THEOREM.format(collide="yes")))
    assert cfg.beta == pytest.approx(1.6)
    assert cfg.t0 == pytest.approx(math.sqrt(1.6) / math.pi)
    assert cfg.t_final == pytest.approx(0.5 * cfg.t0)


@pytest.mark.parametrize("body, match", [
    ("[regime]\nN = 20\n", "experiment"),
    ("[experiment]\nname = nonsense\n[regime]\nN = 20\n", "unknown experiment"),
    ("[experiment]\nname = reversibility\n[regime]\nN =\n", "empty"),
    ("[experiment]\nname = reversibility\nhorizon = 5.5\n[regime]\nN = 20\n", "horizon"),
    ("[experiment]\nname = reversibility\nhorizon = 0\n[regime]\nN = 20\n", "horizon"),
    ("[experiment]\nname = reversibility\n[regime]\nN = 20\nbg = no\n", "eps"),
    ("[experiment]\nname = reversibility\n[regime]\nN = 20\n[reversibility]\nwobble = 1\n",
     "unknown option"),
    ("[experiment]\nname = h-theorem\n[regime]\nN = 20\n[density]\ntable = nowhere.csv\n",
     "does not exist"),
    ("[experiment]\nname = scattering-table\n[regime]\nN = 20\n[potential]\nname = table\n"
     "path = missing.txt\n", "does not exist"),
    ("[experiment]\nname = scattering-table\n[regime]\nN = 20\n[potential]\nname = spiky\n",
     "unknown potential"),
    ("[experiment]\nname = reversibility\n[regime]\nN = 20\n", "packing"),
    ("[experiment]\nname = tree-series\n[regime]\nN = 20\n[tree-series]\nflavor = XYZ\n", "flavor"),
    ("[experiment]\nname = h-theorem\n[regime]\nN = 20\n[density]\nbetas = 1, 2\n"
     "weights = 0.3, 0.3\n", "weights"),
])
def test_invalid_configs(tmp_path, body, match):
    with pytest.raises(ConfigError, match=match):
        lab.load_config(write(tmp_path, body))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        lab.load_config(tmp_path / "absent.ini")


def test_density_and_potential_tables(tmp_path):
    axis = np.linspace(-5, 5, 21)
    V = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    f = (2 * np.pi) ** -1.5 * np.exp(-0.5 * np.sum(V ** 2, axis=1))
    h = axis[1] - axis[0]
    w1 = np.full(21, h)
    w1[[0, -1]] = h / 2
    w = np.einsum("i,j,k->ijk", w1, w1, w1).ravel()
    f /= np.sum(f * w)
    rows = np.column_stack([V, f])[np.random.default_rng(0).permutation(len(f))]
    np.savetxt(tmp_path / "dens.csv", rows, delimiter=",", header="v1,v2,v3,f", comments="")
    r = np.linspace(0.01, 1.0, 50)
    np.savetxt(tmp_path / "phi.txt", np.column_stack([r, (1 - r) ** 2]))
    cfg = lab.load_config(write(tmp_path, "[experiment]\nname = scattering-table\n[regime]\nN = 20\n"
                                          "[density]\ntable = dens.csv\n[potential]\nname = table\n"
                                          "path = phi.txt\n"))
    assert not cfg.density.is_mixture
    assert cfg.density.velocity_pdf(np.zeros(3)) == pytest.approx((2 * np.pi) ** -1.5, rel=1e-3)
    pot = cfg.build_potential()
    assert pot.name == "tabulated"
    assert float(pot.phi(0.5)) == pytest.approx(0.25, abs=1e-8)


def test_output_env_override(tmp_path, monkeypatch):
    target = tmp_path / "elsewhere"
    monkeypatch.setenv(lab.OUTPUT_ENV, str(target))
    cfg = lab.load_config(write(tmp_path, H_THEOREM.format(collide="yes")))
    assert cfg.output == target


# ---- experiments -----------------------------------------------------------------------


def test_h_theorem_without_collisions_is_flat(tmp_path):
    res = lab.run_experiment(lab.load_config(write(tmp_path, H_THEOREM.format(collide="no"))))
    header, data = read_csv(res.output / "h_theorem.csv")
    assert header == ["t", "t_over_t0", "H", "H_stderr", "energy", "fourth_moment"]
    assert np.ptp(data[:, 2]) <= 3 * data[0, 3]
    assert res.summary["H_nonincreasing_3sigma"]


def test_h_theorem_with_collisions_decreases(tmp_path):
    res = lab.run_experiment(lab.load_config(write(tmp_path, H_THEOREM.format(collide="yes"))))
    _, data = read_csv(res.output / "h_theorem.csv")
    assert data[-1, 2] < data[0, 2]
    np.testing.assert_allclose(data[:, 4], data[0, 4], rtol=1e-12)


def test_reruns_are_byte_identical_and_manifest_matches(tmp_path, monkeypatch):
    cfg = lab.load_config(write(tmp_path, H_THEOREM.format(collide="yes")))
    a = lab.run_experiment(cfg)
    first = {p.name: p.read_bytes() for p in a.files}
    manifest = (a.output / "manifest.ini").read_bytes()
    b = lab.run_experiment(cfg)
    assert {p.name: p.read_bytes() for p in b.files} == first
    assert (b.output / "manifest.ini").read_bytes() == manifest
    assert lab.verify_manifest(b.output / "manifest.ini") == []
    _, _, files = lab.read_manifest(b.output / "manifest.ini")
    assert set(files) == {"h_theorem.csv", "summary.txt"}
    (b.output / "summary.txt").write_text("tampered\n")
    assert lab.verify_manifest(b.output / "manifest.ini") == ["summary.txt"]


def test_reversibility_experiment(tmp_path):
    cfg = lab.load_config(write(tmp_path, "[experiment]\nname = reversibility\nensemble = 4\n"
                                          "[regime]\nN = 20\nmax_packing = 0.15\n"))
    res = lab.run_experiment(cfg)
    header, data = read_csv(res.output / "reversibility.csv")
    assert header == ["N", "seed", "events", "error"]
    assert data.shape == (4, 4)
    assert np.all(data[:, 2] == 50)
    assert np.all(data[:, 3] < 1e-6)
    assert res.summary["fraction_below_tolerance"] == 1.0


def test_scattering_experiment_hard_sphere_columns(tmp_path):
    cfg = lab.load_config(write(tmp_path, "[experiment]\nname = scattering-table\n[regime]\nN = 20\n"
                                          "[scattering-table]\nrho_points = 4\nspeeds = 1\n"))
    res = lab.run_experiment(cfg)
    header, data = read_csv(res.output / "scattering_table.csv")
    assert header == ["rho", "V", "chi", "t_star", "B"]
    np.testing.assert_allclose(data[:, 2], 2 * np.arccos(data[:, 0]), atol=1e-10)
    assert res.summary["monotone_structure"]


def test_tree_series_experiment(tmp_path):
    cfg = lab.load_config(write(tmp_path, "[experiment]\nname = tree-series\nhorizon = 0.2\n"
                                          "[regime]\nN = 100\n[density]\nbetas = 1, 4\n"
                                          "[tree-series]\nsamples = 5000\nn_max = 2\n"))
    res = lab.run_experiment(cfg)
    lines = (res.output / "tree_series.csv").read_text().splitlines()
    assert lines[0].startswith("j,n,flavor,t,estimate,stderr")
    assert len(lines) == 4
    assert "ratio_2" in res.summary


def test_bg_convergence_rows_and_flags(tmp_path):
    cfg = lab.load_config(write(tmp_path, """
[experiment]
name = bg-convergence
horizon = 0.5
ensemble = 30
[regime]
N = 20, 40
max_packing = 0.15
[bg-convergence]
reference_particles = 10000
reference_seeds = 2
bootstrap = 5
"""))
    res = lab.run_experiment(cfg)
    header, data = read_csv(res.output / "bg_convergence.csv")
    assert header[:4] == ["N", "eps", "R", "chaos_defect"]
    assert list(data[:, 0]) == [20, 40]
    assert data[:, 1] == pytest.approx([20 ** -0.5, 40 ** -0.5])
    for key in ("defect_monotone", "gap_monotone", "defect_slope"):
        assert key in res.summary


def test_budget_exhaustion(tmp_path):
    text = H_THEOREM.format(collide="yes").replace("ensemble = 3", "ensemble = 3\nbudget_seconds = 0")
    with pytest.raises(BudgetExceeded):
        lab.run_experiment(lab.load_config(write(tmp_path, text)))


def test_fitted_slope():
    N = np.array([50, 200, 800])
    assert lab.fitted_slope(N, 3.0 * N ** -0.5) == pytest.approx(-0.5)
    assert math.isnan(lab.fitted_slope(N, [0.0, 0.0, 1.0]))


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, 1e-300, -2.5e17):
        assert float(lab.fmt(x)) == x
    assert lab.fmt(True) == "1" and lab.fmt(np.int64(7)) == "7"


# ---- plot scripts ---------------------------------------------------------------------


def test_plot_script_for_h_theorem(tmp_path):
    res = lab.run_experiment(lab.load_config(write(tmp_path, H_THEOREM.format(collide="no"))))
    script = lab.emit_plot_script(res.output / "manifest.ini").read_text()
    assert script.count("plot ") == 1
    assert "filledcurves" in script and '"h_theorem.csv"' in script


def test_plot_script_empty_series(tmp_path):
    out = tmp_path / "run"
    out.mkdir()
    (out / "bg_convergence.csv").write_text("N,eps,R,chaos_defect\n")
    res = lab.RunResult("bg-convergence", out, [out / "bg_convergence.csv"], {})
    lab.write_manifest(res, "bg_convergence.csv")
    script = lab.emit_plot_script(out / "manifest.ini").read_text()
    assert "plot NaN notitle" in script and "xrange" in script


def test_plot_script_slope_annotation(tmp_path):
    out = tmp_path / "run"
    out.mkdir()
    N = np.array([50, 200, 800])
    d = 2.0 * N ** -0.25
    rows = "\n".join(f"{n},0,10,{lab.fmt(v)},0.01,0.0,0.0,0.3,0.01,0.001" for n, v in zip(N, d))
    (out / "bg_convergence.csv").write_text("N,eps,R,chaos_defect,defect_stderr,defect_floor,"
                                            "defect_excess,pairing,pairing_gap,gap_stderr\n"
                                            + rows + "\n")
    lab.write_manifest(lab.RunResult("bg-convergence", out, [out / "bg_convergence.csv"], {}),
                       "bg_convergence.csv")
    script = lab.emit_plot_script(out / "manifest.ini").read_text()
    assert "fitted slope -0.250" in script
    assert "set logscale xy" in script


def test_plot_needs_data(tmp_path):
    res = lab.run_experiment(lab.load_config(write(tmp_path, H_THEOREM.format(collide="no"))))
    os.remove(res.output / "h_theorem.csv")
    with pytest.raises(FileNotFoundError):
        lab.emit_plot_script(res.output / "manifest.ini")
    with pytest.raises(FileNotFoundError):
        lab.emit_plot_script(tmp_path / "nothing.ini")
