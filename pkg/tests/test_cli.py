import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from thermogeom.cli import main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def write_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload, indent=2))
    return path


def qubit_observables():
    return {
        "dim": 2,
        "observables": [
            {"name": "sz", "matrix": [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-1.0, 0.0]]]}
        ],
    }


def run(argv):
    return main([str(a) for a in argv])


class TestGibbsCommand:
    def test_reports_ln2_at_zero(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "cfg.json",
            {"observables": qubit_observables(), "gibbs": {"lambda": [0.0]}},
        )
        out = tmp_path / "out.json"
        assert run(["gibbs", "--config", cfg, "--out", out]) == 0
        doc = json.loads(out.read_text())
        assert doc["S"] == pytest.approx(math.log(2), rel=1e-12)
        assert doc["Z"] == pytest.approx(2.0, rel=1e-12)

    def test_closed_form_row(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "cfg.json",
            {"observables": qubit_observables(), "gibbs": {"lambda": [1.0]}},
        )
        out = tmp_path / "out.json"
        assert run(["gibbs", "--config", cfg, "--out", out]) == 0
        doc = json.loads(out.read_text())
        assert doc["Z"] == pytest.approx(2 * math.cosh(1.0), rel=1e-12)
        assert doc["a"][0] == pytest.approx(-math.tanh(1.0), rel=1e-12)

    def test_malformed_matrix_is_config_error(self, tmp_path):
        bad = qubit_observables()
        bad["observables"][0]["matrix"] = [[1.0, 0.0], [0.0, -1.0]]  # not [re,im]
        cfg = write_config(
            tmp_path, "cfg.json", {"observables": bad, "gibbs": {"lambda": [0.0]}}
        )
        assert run(["gibbs", "--config", cfg]) == 2

    def test_missing_config_file(self, tmp_path):
        assert run(["gibbs", "--config", tmp_path / "absent.json"]) == 2


class TestMetricCommand:
    def test_reproduces_sech_squared_column(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "cfg.json",
            {
                "observables": qubit_observables(),
                "metric": {"grid": {"start": [-2.0], "stop": [2.0], "num": [21]}},
            },
        )
        out = tmp_path / "metric.csv"
        assert run(["metric", "--config", cfg, "--out", out, "--format", "csv"]) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "l1,g_1_1"
        assert len(lines) == 22
        for line in lines[1:]:
            lam, g = map(float, line.split(","))
            assert g == pytest.approx(1.0 / math.cosh(lam) ** 2, abs=1e-8)

    def test_rows_in_lexicographic_order(self, tmp_path):
        two = {
            "dim": 4,
            "observables": [
                {
                    "name": "z1",
                    "matrix": [
                        [[1, 0], [0, 0], [0, 0], [0, 0]],
                        [[0, 0], [1, 0], [0, 0], [0, 0]],
                        [[0, 0], [0, 0], [-1, 0], [0, 0]],
                        [[0, 0], [0, 0], [0, 0], [-1, 0]],
                    ],
                },
                {
                    "name": "z2",
                    "matrix": [
                        [[1, 0], [0, 0], [0, 0], [0, 0]],
                        [[0, 0], [-1, 0], [0, 0], [0, 0]],
                        [[0, 0], [0, 0], [1, 0], [0, 0]],
                        [[0, 0], [0, 0], [0, 0], [-1, 0]],
                    ],
                },
            ],
        }
        cfg = write_config(
            tmp_path,
            "cfg.json",
            {
                "observables": two,
                "metric": {"grid": {"start": [0.0, 0.0], "stop": [1.0, 1.0], "num": [2, 2]}},
            },
        )
        out = tmp_path / "metric.csv"
        assert run(["metric", "--config", cfg, "--out", out, "--format", "csv"]) == 0
        rows = [line.split(",")[:2] for line in out.read_text().strip().splitlines()[1:]]
        assert [[float(a), float(b)] for a, b in rows] == [
            [0.0, 0.0],
            [0.0, 1.0],
            [1.0, 0.0],
            [1.0, 1.0],
        ]

    def test_empty_grid_yields_header_only(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "cfg.json",
            {
                "observables": qubit_observables(),
                "metric": {"grid": {"start": [0.0], "stop": [1.0], "num": [0]}},
            },
        )
        out = tmp_path / "metric.csv"
        assert run(["metric", "--config", cfg, "--out", out, "--format", "csv"]) == 0
        assert out.read_text() == "l1,g_1_1\n"

    def test_boundary_proximate_lambda_is_numeric_error(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "cfg.json",
            {
                "observables": qubit_observables(),
                "metric": {"grid": {"start": [18.0], "stop": [18.0], "num": [1]}},
            },
        )
        assert run(["metric", "--config", cfg, "--out", tmp_path / "x.csv"]) == 3


class TestLengthCommand:
    def test_qubit_unit_path_oracle(self, tmp_path):
        out = tmp_path / "len.json"
        code = run(
            ["length", "--config", CONFIG_DIR / "run_length.json", "--out", out]
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["length"] == pytest.approx(0.8658, abs=1e-4)
        assert doc["length"] == pytest.approx(2 * math.atan(math.tanh(0.5)), abs=1e-4)


class TestContactCheckCommand:
    def test_qubit_residual(self, tmp_path):
        out = tmp_path / "contact.json"
        code = run(
            ["contact-check", "--config", CONFIG_DIR / "run_contact_check.json", "--out", out]
        )
        assert code == 0
        assert json.loads(out.read_text())["max_residual"] < 1e-8


class TestHolonomyCommand:
    def test_lift_and_curvature_agree(self, tmp_path):
        out = tmp_path / "hol.json"
        code = run(
            ["holonomy", "--config", CONFIG_DIR / "run_holonomy.json", "--out", out]
        )
        assert code == 0
        results = {r["method"]: r for r in json.loads(out.read_text())["results"]}
        assert results["lift"]["dS"] == pytest.approx(-1.0, abs=1e-6)
        assert results["curvature-integral"]["dS"] == pytest.approx(-1.0, abs=1e-6)
        assert results["lift"]["da"] == [0.0, 0.0]

    def test_single_method_emits_bare_result_object(self, tmp_path):
        cfg_doc = json.loads((CONFIG_DIR / "run_holonomy.json").read_text())
        cfg_doc["observables"] = json.loads(
            (CONFIG_DIR / "observables_two_qubit.json").read_text()
        )
        cfg_doc["holonomy"]["method"] = "lift"
        cfg = write_config(tmp_path, "cfg.json", cfg_doc)
        out = tmp_path / "hol.json"
        assert run(["holonomy", "--config", cfg, "--out", out]) == 0
        doc = json.loads(out.read_text())
        assert set(doc) == {"dS", "da", "method"}
        assert doc["method"] == "lift"
        assert doc["dS"] == pytest.approx(-1.0, abs=1e-6)


class TestGeodesicCommand:
    def test_non_convergence_exit_code_with_artifact(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "cfg.json",
            {
                "observables": qubit_observables(),
                "geodesic": {
                    "start": [0.0],
                    "end": [1.0],
                    "interior_points": 7,
                    "max_iters": 1,
                    "tolerance": 1e-14,
                },
            },
        )
        out = tmp_path / "geo.json"
        assert run(["geodesic", "--config", cfg, "--out", out]) == 4
        doc = json.loads(out.read_text())
        assert doc["convergence"]["converged"] is False
        assert len(doc["samples"]) == 9

    def test_converged_run(self, tmp_path):
        out = tmp_path / "geo.json"
        code = run(
            ["geodesic", "--config", CONFIG_DIR / "run_geodesic.json", "--out", out]
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["convergence"]["converged"] is True
        assert doc["convergence"]["energy_final"] <= doc["convergence"]["energy_initial"]


class TestValidateMode:
    @pytest.mark.parametrize(
        "command,config",
        [
            ("gibbs", "run_gibbs.json"),
            ("metric", "run_metric.json"),
            ("length", "run_length.json"),
            ("entropy-production", "run_entropy_production.json"),
            ("geodesic", "run_geodesic.json"),
            ("third-law", "run_third_law.json"),
            ("boundary-entropy", "run_boundary_entropy.json"),
            ("contact-check", "run_contact_check.json"),
            ("holonomy", "run_holonomy.json"),
            ("curvature-map", "run_curvature_map.json"),
            ("flatness", "run_flatness.json"),
        ],
    )
    def test_shipped_configs_validate(self, command, config, tmp_path):
        out = tmp_path / "artifact"
        assert run([command, "--config", CONFIG_DIR / config, "--validate", "--out", out]) == 0
        assert not out.exists()  # validate mode computes nothing

    def test_validation_catches_missing_section(self, tmp_path):
        cfg = write_config(tmp_path, "cfg.json", {"observables": qubit_observables()})
        assert run(["gibbs", "--config", cfg, "--validate"]) == 2

    def test_validation_catches_bad_expression(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "cfg.json",
            {
                "observables": qubit_observables(),
                "connection": {"g_S": "1", "h": ["l7"]},
                "flatness": {"grid": {"start": [0.0], "stop": [1.0], "num": [3]}},
            },
        )
        assert run(["flatness", "--config", cfg, "--validate"]) == 2


class TestDeterminism:
    @pytest.mark.parametrize("fmt", ["json", "csv"])
    def test_two_runs_byte_identical(self, fmt, tmp_path):
        first = tmp_path / f"a.{fmt}"
        second = tmp_path / f"b.{fmt}"
        for out in (first, second):
            code = run(
                [
                    "metric",
                    "--config",
                    CONFIG_DIR / "run_metric.json",
                    "--out",
                    out,
                    "--format",
                    fmt,
                ]
            )
            assert code == 0
        assert first.read_bytes() == second.read_bytes()


class TestEntropyProductionCommand:
    def test_rates_and_total(self, tmp_path):
        out = tmp_path / "ep.json"
        code = run(
            [
                "entropy-production",
                "--config",
                CONFIG_DIR / "run_entropy_production.json",
                "--out",
                out,
            ]
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["total"] > 0
        assert len(doc["rates"]) == 129
        assert all(r >= 0 for r in doc["rates"])


class TestThirdLawCommand:
    def test_monotone_table(self, tmp_path):
        out = tmp_path / "scan.csv"
        code = run(
            [
                "third-law",
                "--config",
                CONFIG_DIR / "run_third_law.json",
                "--out",
                out,
                "--format",
                "csv",
            ]
        )
        assert code == 0
        lines = out.read_text().strip().splitlines()
        lengths = [float(line.split(",")[1]) for line in lines[1:]]
        assert lengths == sorted(lengths)
        assert lines[1].split(",")[2] == ""  # first row has no increment


class TestBoundaryEntropyCommand:
    def test_qutrit_limit(self, tmp_path):
        out = tmp_path / "be.json"
        code = run(
            [
                "boundary-entropy",
                "--config",
                CONFIG_DIR / "run_boundary_entropy.json",
                "--out",
                out,
            ]
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["ground_degeneracy"] == 2
        assert doc["S"][0] == pytest.approx(math.log(3), rel=1e-12)
        assert abs(doc["gap_to_ln_k"][-1]) < 1e-6


class TestStdoutFallback(object):
    def test_writes_to_stdout_without_out(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path,
            "cfg.json",
            {"observables": qubit_observables(), "gibbs": {"lambda": [0.0]}},
        )
        assert run(["gibbs", "--config", cfg]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["S"] == pytest.approx(math.log(2), rel=1e-12)


class TestModuleEntryPoint:
    def test_python_dash_m_invocation(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "cfg.json",
            {"observables": qubit_observables(), "gibbs": {"lambda": [0.0]}},
        )
        proc = subprocess.run(
            [sys.executable, "-m", "thermogeom", "gibbs", "--config", str(cfg)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["Z"] == pytest.approx(2.0)
