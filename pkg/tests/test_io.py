import numpy as np

from hpstoch import catalog, io
from hpstoch.integrators import integrate_implicit_el
from hpstoch.paths import NoiseSpec, make_uniform_grid, sample_noise
from hpstoch.variational import noether_charge, rotation_generator


def _solution():
    sys = catalog.planar_central_potential()
    noise = sample_noise(NoiseSpec.standard(1), make_uniform_grid(1.0, 50), 0)
    return sys, noise, integrate_implicit_el(sys, noise, [1.0, 0.0], [0.0, 1.0])


def test_sample_path_round_trip(tmp_path):
    _, noise, _ = _solution()
    f = io.write_sample_path(noise, tmp_path / "noise.csv")
    assert f.read_text().splitlines()[0] == "t,x0,x1"
    assert io.read_sample_path(f) == noise


def test_pontryagin_path_round_trip(tmp_path):
    _, _, path = _solution()
    f = io.write_pontryagin_path(path, tmp_path / "path.csv")
    header = f.read_text().splitlines()[0].split(",")
    assert header == ["t", "q_0", "q_1", "v_0", "v_1", "p_0", "p_1", "fp_iters", "residual"]
    back = io.read_pontryagin_path(f)
    np.testing.assert_array_equal(back.stacked(), path.stacked())
    np.testing.assert_array_equal(back.iterations, path.iterations)
    np.testing.assert_array_equal(back.residuals, path.residuals)


def test_field_report_and_charge(tmp_path):
    rows = [{"field_id": 0, "g_kind": "sine", "direction": "1 0 0", "K_kind": "none", "derivative": 1e-5}]
    f = io.write_field_report(rows, tmp_path / "r.csv", {"derivative": 1e-5})
    body, summary = io.read_field_report(f)
    assert body[0]["g_kind"] == "sine" and float(body[0]["derivative"]) == 1e-5
    assert summary["field_id"] == "summary"
    sys, _, path = _solution()
    c = io.write_charge(noether_charge(sys, path, rotation_generator), tmp_path / "c.csv")
    assert c.read_text().splitlines()[0] == "t,charge"
