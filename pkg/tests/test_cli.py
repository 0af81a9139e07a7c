import json
import os

import numpy as np
import pytest

from covest.cli import main
from covest.model import ProblemSpec, build_mimo_spec, save_spec


@pytest.fixture
def scalar_files(tmp_path):
    spec = ProblemSpec(
        H=np.array([[1.0]]), U=np.zeros((1, 1)), P0=np.array([[0.8]]),
        R0=np.array([[1.0]]), nu_x=3.0, nu_w=3.0, N=1,
    )
    spec_path = tmp_path / "spec.json"
    save_spec(spec, spec_path)
    y_path = tmp_path / "y.json"
    y_path.write_text(json.dumps({"Y": [[9.0]]}))
    return str(spec_path), str(y_path), tmp_path


class TestEstimate:
    def test_two_minima_instance(self, scalar_files, capsys):
        spec_path, y_path, tmp = scalar_files
        out = str(tmp / "res.json")
        code = main(["estimate", spec_path, y_path, "--estimator", "cmap", "--out", out])
        captured = capsys.readouterr().out
        assert code == 0
        assert "distinct minima" in captured
        doc = json.loads(open(out).read())
        assert abs(doc["X_hat"][0][0] - 0.0896) < 1e-3
        assert doc["converged"] is True

    def test_malformed_input_exits_2(self, scalar_files, capsys):
        spec_path, _, tmp = scalar_files
        bad = tmp / "bad.json"
        bad.write_text(json.dumps({"Z": [[1.0]]}))
        code = main(["estimate", spec_path, str(bad)])
        assert code == 2
        assert "Y" in capsys.readouterr().err

    def test_dimension_mismatch_exits_2(self, scalar_files, capsys):
        spec_path, _, tmp = scalar_files
        bad = tmp / "wide.json"
        bad.write_text(json.dumps({"Y": [[1.0, 2.0]]}))
        code = main(["estimate", spec_path, str(bad)])
        assert code == 2

    def test_limit_equivalence_cmap_vs_map(self, tmp_path):
        spec = build_mimo_spec(4, 1.0, 1e5, 1e5, 2)
        spec_path = tmp_path / "spec.json"
        save_spec(spec, spec_path)
        rng = np.random.default_rng(0)
        y_path = tmp_path / "y.json"
        y_path.write_text(json.dumps({"Y": rng.standard_normal((spec.m, 2)).tolist()}))
        out_c = str(tmp_path / "cmap.json")
        out_m = str(tmp_path / "map.json")
        assert main(["estimate", str(spec_path), str(y_path), "--estimator", "cmap",
                     "--out", out_c]) == 0
        assert main(["estimate", str(spec_path), str(y_path), "--estimator", "map",
                     "--out", out_m]) == 0
        xc = np.array(json.loads(open(out_c).read())["X_hat"])
        xm = np.array(json.loads(open(out_m).read())["X_hat"])
        assert np.linalg.norm(xc - xm) / np.linalg.norm(xm) < 1e-3

    def test_nonconvergence_exits_3_with_result(self, scalar_files, tmp_path):
        spec = build_mimo_spec(8, 1.0, 6.0, 18.0, 4)
        spec_path = tmp_path / "mimo.json"
        save_spec(spec, spec_path)
        rng = np.random.default_rng(1)
        y_path = tmp_path / "ymimo.json"
        y_path.write_text(json.dumps({"Y": rng.standard_normal((16, 4)).tolist()}))
        out = str(tmp_path / "res.json")
        code = main(["estimate", str(spec_path), str(y_path), "--max-iters", "2",
                     "--out", out])
        assert code == 3
        assert json.loads(open(out).read())["converged"] is False


class TestReproduce:
    def test_unknown_scenario_exits_4(self, capsys):
        assert main(["reproduce", "fig99", "--out", "/tmp/nowhere"]) == 4
        assert "fig99" in capsys.readouterr().err

    def test_smoke_fig6_outputs(self, tmp_path, capsys):
        out = str(tmp_path / "fig6")
        code = main(["reproduce", "fig6", "--trials", "30", "--out", out,
                     "--workers", "1"])
        assert code == 0
        for name in ("config.json", "summary.json", "nmse.csv", "ccdf.csv",
                     "nmse.png", "ccdf.png"):
            assert os.path.exists(os.path.join(out, name)), name
        summary = json.loads(open(os.path.join(out, "summary.json")).read())
        assert summary["schema_version"] == 1
        assert "cmap" in summary["points"][0]["nmse_db"]

    def test_no_plot_flag(self, tmp_path):
        out = str(tmp_path / "fig3")
        assert main(["reproduce", "fig3", "--trials", "10", "--out", out,
                     "--no-plot", "--no-report"]) == 0
        assert not os.path.exists(os.path.join(out, "nmse.png"))

    def test_multi_config_scenario_subdirs(self, tmp_path):
        out = str(tmp_path / "fig5")
        assert main(["reproduce", "fig5", "--trials", "8", "--out", out,
                     "--no-plot", "--no-report"]) == 0
        for label in ("nu0_nu0", "nu0_nuinf", "nuinf_nu0", "nuinf_nuinf"):
            assert os.path.exists(os.path.join(out, label, "nmse.csv"))

    def test_seed_env_override(self, tmp_path, monkeypatch):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        monkeypatch.setenv("COVEST_SEED", "424242")
        main(["reproduce", "fig3", "--trials", "12", "--seed", "1", "--out", out1,
              "--no-plot", "--no-report"])
        main(["reproduce", "fig3", "--trials", "12", "--seed", "2", "--out", out2,
              "--no-plot", "--no-report"])
        a = open(os.path.join(out1, "nmse.csv")).read()
        b = open(os.path.join(out2, "nmse.csv")).read()
        assert a == b


class TestConvergence:
    def test_empty_eps_exits_2(self, capsys):
        assert main(["convergence", "--trials", "5"]) == 2

    def test_writes_niter_ccdf(self, tmp_path):
        out = str(tmp_path / "conv")
        code = main(["convergence", "--eps", "1e-1", "--eps", "1e-3",
                     "--trials", "15", "--out", out, "--no-plot"])
        assert code == 0
        assert os.path.exists(os.path.join(out, "niter_ccdf.csv"))
        assert os.path.exists(os.path.join(out, "nmse.csv"))
