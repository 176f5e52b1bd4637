import json

import numpy as np
import pytest

from corneropt.cli import (EXIT_BREAKDOWN, EXIT_CONFIG, EXIT_FAIL,
                           EXIT_INFEASIBLE, EXIT_OK, load_config, main)
from corneropt.errors import ConfigError


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestListModels:
    def test_registry_names_listed(self, capsys):
        code, out, _ = run(capsys, "list-models")
        assert code == EXIT_OK
        for name in ("classical-nlp", "sphere-polygon", "remark-counterexample"):
            assert name in out

    def test_empty_filter_lists_all(self, capsys):
        code, out, _ = run(capsys, "list-models", "--output", "json")
        assert code == EXIT_OK
        data = json.loads(out)
        assert len(data["models"]) == 5

    def test_unknown_filter_empty_exit_zero(self, capsys):
        code, out, _ = run(capsys, "list-models", "--filter", "zzz",
                           "--output", "json")
        assert code == EXIT_OK
        assert json.loads(out)["models"] == []


class TestCheck:
    def test_kkt_point_exit_zero(self, capsys):
        code, out, _ = run(capsys, "check", "--model", "remark-counterexample",
                           "--point", "0,0", "--output", "json")
        assert code == EXIT_OK
        data = json.loads(out)
        assert data["kkt"]["holds"]
        np.testing.assert_allclose(data["kkt"]["mu_chart"], [1.0, 0.0], atol=1e-12)

    def test_feasible_non_stationary_exit_one(self, capsys):
        code, out, _ = run(capsys, "check", "--model", "remark-counterexample",
                           "--point=-1,0", "--output", "json")
        assert code == EXIT_FAIL
        data = json.loads(out)
        assert not data["kkt"]["holds"]

    def test_infeasible_exit_two(self, capsys):
        code, _, _ = run(capsys, "check", "--model", "remark-counterexample",
                         "--point", "1,0")
        assert code == EXIT_INFEASIBLE

    def test_unknown_model_exit_three(self, capsys):
        code, _, err = run(capsys, "check", "--model", "nope", "--point", "0,0")
        assert code == EXIT_CONFIG
        assert "unknown model" in err

    def test_missing_point_exit_three(self, capsys):
        code, _, _ = run(capsys, "check", "--model", "remark-counterexample")
        assert code == EXIT_CONFIG

    def test_bad_point_dimension_exit_three(self, capsys):
        code, _, _ = run(capsys, "check", "--model", "remark-counterexample",
                         "--point", "0,0,0")
        assert code == EXIT_CONFIG


class TestCertify:
    def test_convex_minimizer_exit_zero(self, capsys, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text('model.name = "classical-nlp"\n'
                       'model.params.seed = 13\n')
        from corneropt.models import build_classical_nlp
        point = build_classical_nlp({"seed": 13}).extras["reference"]["point"]
        code, out, _ = run(capsys, "certify", "--config", str(cfg),
                           "--point", ",".join(map(str, point)),
                           "--output", "json")
        assert code == EXIT_OK
        data = json.loads(out)
        assert data["sosc"]["status"] == "holds"
        assert data["invariance"]["passed"]

    def test_indefinite_saddle_exit_one(self, capsys, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text('model.name = "classical-nlp"\n'
                       'model.params.m = 2\n'
                       'model.params.n_ineq = 0\n'
                       'model.params.n_eq = 0\n'
                       'model.params.seed = 0\n'
                       'model.params.curvature = "indefinite"\n')
        from corneropt.models import build_classical_nlp
        point = build_classical_nlp(
            {"m": 2, "n_ineq": 0, "n_eq": 0, "seed": 0,
             "curvature": "indefinite"}).extras["reference"]["point"]
        code, out, _ = run(capsys, "certify", "--config", str(cfg),
                           "--point", ",".join(map(str, point)),
                           "--output", "json")
        assert code == EXIT_FAIL
        data = json.loads(out)
        assert data["sosc"]["status"] == "fails"
        assert data["sonc"]["status"] == "fails"
        witness = np.asarray(data["sosc"]["witness"], dtype=float)
        hess = np.asarray(data["hessian"]["matrix"], dtype=float)
        assert float(witness @ hess @ witness) < -1e-6

    def test_remark_sonc_holds(self, capsys):
        code, out, _ = run(capsys, "certify", "--model", "remark-counterexample",
                           "--point", "0,0", "--output", "json")
        assert code == EXIT_OK
        data = json.loads(out)
        assert data["sonc"]["status"] == "holds"


class TestSolve:
    def test_sphere_polygon_converges(self, capsys):
        code, out, _ = run(capsys, "solve", "--model", "sphere-polygon",
                           "--point", "0.577350269,0.577350269,0.577350269",
                           "--output", "json")
        assert code == EXIT_OK
        data = json.loads(out)
        assert data["status"] == "converged"
        merits = [(r["merit_before"], r["merit_after"]) for r in data["iterations"]
                  if r["step_length"] > 0]
        for before, after in merits:
            assert after <= before + 1e-12

    def test_optimal_start_short_run(self, capsys):
        from corneropt.models import build_sphere_polygon
        point = build_sphere_polygon().extras["reference"]["point"]
        code, out, _ = run(capsys, "solve", "--model", "sphere-polygon",
                           "--point", ",".join(map(str, point)),
                           "--output", "json")
        assert code == EXIT_OK
        assert len(json.loads(out)["iterations"]) <= 1

    def test_absurd_tolerance_hits_iteration_limit(self, capsys, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text('model.name = "sphere-polygon"\n'
                       'solver.tol_kkt = 1e-30\n'
                       'solver.max_iter = 10\n')
        code, out, _ = run(capsys, "solve", "--config", str(cfg),
                           "--point", "0.577350269,0.577350269,0.577350269",
                           "--output", "json")
        assert code == EXIT_FAIL
        assert json.loads(out)["status"] == "max_iter"

    def test_breakdown_exit_code(self, capsys, monkeypatch):
        from corneropt import cli as cli_module
        from corneropt.solver import SolveResult

        def fake_solve(prob, p0, opts):
            return SolveResult(point=np.asarray(p0, dtype=float), certificate=None,
                               iterations=[], status="breakdown", message="stub")

        monkeypatch.setattr(cli_module, "solve", fake_solve)
        code, out, _ = run(capsys, "solve", "--model", "remark-counterexample",
                           "--point", "0,0", "--output", "json")
        assert code == EXIT_BREAKDOWN
        assert json.loads(out)["message"] == "stub"


class TestInvariance:
    def test_remark_invariance_passes(self, capsys):
        code, out, _ = run(capsys, "invariance", "--model", "remark-counterexample",
                           "--point", "0,0", "--output", "json")
        assert code == EXIT_OK
        data = json.loads(out)
        assert data["invariance"]["kkt_residual_alternate_charts"] <= 1e-7
        assert data["invariance"]["cone_membership"]["disagreements"] == 0


class TestConfigFile:
    def test_round_trip_values(self, tmp_path):
        cfg = tmp_path / "a.cfg"
        cfg.write_text('model.name = "sphere-polygon"\n'
                       '# a comment line\n'
                       'model.params.target = [1.0, 0.5, -0.25]\n'
                       'seed = 99\n'
                       'tol = 1e-9\n')
        tree = load_config(str(cfg))
        assert tree["model"]["name"] == "sphere-polygon"
        assert tree["model"]["params"]["target"] == [1.0, 0.5, -0.25]
        assert tree["seed"] == 99

    def test_invalid_json_value(self, tmp_path):
        cfg = tmp_path / "a.cfg"
        cfg.write_text("model.name = sphere-polygon\n")
        with pytest.raises(ConfigError):
            load_config(str(cfg))

    def test_missing_file_exit_three(self, capsys):
        code, _, _ = run(capsys, "check", "--config", "/nonexistent.cfg",
                         "--model", "remark-counterexample", "--point", "0,0")
        assert code == EXIT_CONFIG

    def test_flag_overrides_config(self, capsys, tmp_path):
        cfg = tmp_path / "a.cfg"
        cfg.write_text('model.name = "classical-nlp"\npoint = [9, 9]\n')
        code, out, _ = run(capsys, "check", "--config", str(cfg),
                           "--model", "remark-counterexample",
                           "--point", "0,0", "--output", "json")
        assert code == EXIT_OK
        assert json.loads(out)["model"] == "remark-counterexample"


class TestJsonContract:
    def test_round_trip(self, capsys):
        _, out, _ = run(capsys, "certify", "--model", "remark-counterexample",
                        "--point", "0,0", "--output", "json")
        data = json.loads(out)
        assert data["schema_version"] == 1
        assert json.loads(json.dumps(data)) == data

    def test_byte_identical_reports_for_same_seed(self, capsys):
        argv = ["certify", "--model", "sphere-polygon", "--seed", "11",
                "--output", "json", "--point",
                "0.780868809,0.624695047,0.0"]
        _, first, _ = run(capsys, *argv)
        _, second, _ = run(capsys, *argv)
        assert first == second

    def test_different_seed_changes_nothing_structural(self, capsys):
        argv = lambda s: ["check", "--model", "remark-counterexample",
                          "--point", "0,0", "--seed", str(s), "--output", "json"]
        _, a, _ = run(capsys, *argv(1))
        _, b, _ = run(capsys, *argv(2))
        da, db = json.loads(a), json.loads(b)
        assert da["kkt"] == db["kkt"]
