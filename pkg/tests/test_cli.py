"""Exit codes, instance parsing, artifact files, and round trips."""

import json

import numpy as np
import pytest

from motbounds import DualCertificate, dual_objective
from motbounds.cli import main, parse_instance

HAND_INSTANCE = {
    "marginals": [
        {"atoms": [-1.0, 1.0], "weights": [0.5, 0.5]},
        {"atoms": [-2.0, 2.0], "weights": [0.5, 0.5]},
    ],
    "cost": {"form": "squared_increment"},
}

REVERSED_INSTANCE = {
    "marginals": [
        {"atoms": [-1.0, 1.0], "weights": [0.5, 0.5]},
        {"atoms": [0.0], "weights": [1.0]},
    ],
    "cost": {"form": "squared_increment"},
}


def write_instance(tmp_path, payload, name="instance.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


class TestCheck:
    def test_valid_three_marginal(self, tmp_path, capsys):
        payload = {
            "marginals": [
                {"atoms": [0.0], "weights": [1.0]},
                {"atoms": [-1.0, 1.0], "weights": [0.5, 0.5]},
                {"lognormal": {"location": 0.0, "scale": 0.0, "m": 1}},
            ],
            "cost": {"form": "basket", "strike": 0.0},
        }
        # the degenerate lognormal is delta_1: wrong mean, so fix it
        payload["marginals"][2] = {"atoms": [-2.0, 2.0], "weights": [0.5, 0.5]}
        assert main(["check", write_instance(tmp_path, payload)]) == 0

    def test_reversed_order_exit_2_with_witness(self, tmp_path, capsys):
        code = main(["--json", "check", write_instance(tmp_path, REVERSED_INSTANCE)])
        assert code == 2
        report = json.loads(capsys.readouterr().out)
        assert report["ok"] is False
        assert report["pairs"][0]["witness_k"] == pytest.approx(0.0)

    def test_malformed_json_exit_1(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text('{"marginals": [')
        assert main(["check", str(path)]) == 1
        assert "error" in capsys.readouterr().err

    def test_missing_file_exit_1(self):
        assert main(["check", "/nonexistent/instance.json"]) == 1


class TestSolve:
    def test_hand_instance_both(self, tmp_path, capsys):
        code = main(["--json", "solve", write_instance(tmp_path, HAND_INSTANCE),
                     "--side", "lower", "--method", "both"])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["primal_value"] == pytest.approx(3.0, abs=1e-8)
        assert out["gap"] < 1e-6

    def test_zero_cost_table(self, tmp_path, capsys):
        rows = ["-1.0,-2.0,0.0", "-1.0,2.0,0.0", "1.0,-2.0,0.0", "1.0,2.0,0.0"]
        csv = tmp_path / "zeros.csv"
        csv.write_text("\n".join(rows) + "\n")
        payload = dict(HAND_INSTANCE, cost={"form": "custom_table", "path": str(csv)})
        for side in ("lower", "upper"):
            code = main(["--json", "solve", write_instance(tmp_path, payload),
                         "--side", side])
            assert code == 0
            out = json.loads(capsys.readouterr().out)
            assert out["primal_value"] == pytest.approx(0.0, abs=1e-10)

    def test_oversized_grid_exit_3(self, tmp_path, capsys):
        big = {
            "marginals": [
                {"lognormal": {"location": -0.02, "scale": 0.2, "m": 600}},
                {"lognormal": {"location": -0.08, "scale": 0.4, "m": 600}},
            ],
            "cost": {"form": "terminal_call", "strike": 1.0},
        }
        assert main(["solve", write_instance(tmp_path, big)]) == 3

    def test_infeasible_exit_2(self, tmp_path):
        assert main(["solve", write_instance(tmp_path, REVERSED_INSTANCE)]) == 2

    def test_var_cap_option_exit_3(self, tmp_path):
        payload = dict(HAND_INSTANCE, options={"var_cap": 3})
        assert main(["solve", write_instance(tmp_path, payload)]) == 3

    def test_artifacts_round_trip(self, tmp_path, capsys):
        out_dir = tmp_path / "artifacts"
        code = main(["--json", "--out", str(out_dir), "solve",
                     write_instance(tmp_path, HAND_INSTANCE), "--method", "both"])
        assert code == 0
        capsys.readouterr()
        cert = DualCertificate.from_dict(
            json.loads((out_dir / "certificate.json").read_text())
        )
        inst = parse_instance(write_instance(tmp_path, HAND_INSTANCE))
        value = dual_objective(cert.variant, inst.cost, inst.marginals, cert.dual_variables)
        assert value == pytest.approx(cert.dual_value, abs=1e-10)
        coupling_lines = (out_dir / "coupling.csv").read_text().strip().splitlines()
        assert coupling_lines[0] == "x_1,x_2,mass"
        total = sum(float(line.split(",")[-1]) for line in coupling_lines[1:])
        assert total == pytest.approx(1.0, abs=1e-9)
        trace_lines = (out_dir / "trace.csv").read_text().strip().splitlines()
        assert trace_lines[0] == "iter,dual_value,grad_norm,elapsed_ms"


class TestCertifyCommand:
    def test_unit_instance_exit_0(self, tmp_path, capsys):
        code = main(["--json", "certify", write_instance(tmp_path, HAND_INSTANCE)])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["passed"] is True
        assert all(g < 1e-4 for g in report["gaps"].values())

    def test_infeasible_exit_2(self, tmp_path):
        assert main(["certify", write_instance(tmp_path, REVERSED_INSTANCE)]) == 2

    def test_report_written(self, tmp_path, capsys):
        out_dir = tmp_path / "cert"
        code = main(["--json", "--out", str(out_dir), "certify",
                     write_instance(tmp_path, HAND_INSTANCE)])
        assert code == 0
        report = json.loads((out_dir / "report.json").read_text())
        assert report["passed"] is True
        assert (out_dir / "trace_proposition.csv").exists()


class TestEnvelopeCommand:
    def test_tent_at_zero(self, tmp_path, capsys):
        csv = tmp_path / "tent.csv"
        csv.write_text("-1,0\n0,1\n1,0\n")
        assert main(["envelope", str(csv), "--at", "0"]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(0.0)

    def test_parabola_identity_hull(self, tmp_path, capsys):
        csv = tmp_path / "sq.csv"
        xs = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
        csv.write_text("\n".join(f"{x},{x * x}" for x in xs) + "\n")
        assert main(["envelope", str(csv)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 1 + xs.size

    def test_zigzag_interior_value(self, tmp_path, capsys):
        csv = tmp_path / "zig.csv"
        csv.write_text("0,0\n1,-1\n2,3\n3,0\n")
        assert main(["envelope", str(csv), "--at", "2"]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(-0.5)

    def test_unsorted_exit_1(self, tmp_path, capsys):
        csv = tmp_path / "bad.csv"
        csv.write_text("1,0\n0,1\n")
        assert main(["envelope", str(csv)]) == 1


class TestQuantizeCommand:
    def test_emits_measure_json(self, capsys):
        assert main(["quantize", "--location", "0.0", "--scale", "0.3", "--m", "8"]) == 0
        payload = json.loads(capsys.readouterr().out)
        mean = float(np.dot(payload["atoms"], payload["weights"]))
        assert mean == pytest.approx(np.exp(0.045), abs=1e-9)

    def test_invalid_parameters_exit_1(self, capsys):
        assert main(["quantize", "--location", "0.0", "--scale", "-1.0", "--m", "4"]) == 1


class TestInstanceParsing:
    def test_field_anchored_errors(self, tmp_path):
        bad = dict(HAND_INSTANCE, cost={"form": "no_such_form"})
        with pytest.raises(Exception) as err:
            parse_instance(write_instance(tmp_path, bad))
        assert "cost.form" in str(err.value)

    def test_bad_weights_name_the_marginal(self, tmp_path):
        bad = {
            "marginals": [
                {"atoms": [0.0], "weights": [1.0]},
                {"atoms": [-1.0, 1.0], "weights": [0.5, 0.6]},
            ],
            "cost": {"form": "squared_increment"},
        }
        with pytest.raises(Exception) as err:
            parse_instance(write_instance(tmp_path, bad))
        assert "marginals[1]" in str(err.value)

    def test_options_flow_into_config(self, tmp_path):
        payload = dict(HAND_INSTANCE, options={"variant": "remark_b", "max_iters": 77})
        inst = parse_instance(write_instance(tmp_path, payload))
        assert inst.config.variant == "remark_b"
        assert inst.config.max_iters == 77

    def test_flags_override_options(self, tmp_path, capsys):
        payload = dict(HAND_INSTANCE, options={"max_iters": 7})
        code = main(["--json", "--max-iters", "44", "--variant", "remark_b", "solve",
                     write_instance(tmp_path, payload), "--method", "dual"])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["iterations"] <= 44
