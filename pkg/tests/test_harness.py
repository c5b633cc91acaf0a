import json
import math
from pathlib import Path

import numpy as np
import pytest

from qbdl import hhl
from qbdl.cli import main
from qbdl.errors import QBDLError
from qbdl.harness import default_config, emit_plot, load_config, quantum_gp_predict, run_experiment
from qbdl.harness import records
from qbdl.harness.config import DEFAULTS, config_from_mapping
from qbdl.harness.experiments import inversion_circuit, pad_system

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def small(experiment, **changes):
    base = {
        "fig2": dict(noise_grid=(0.0, 0.1), trials_per_point=5, max_repetitions=200),
        "fig3": dict(noise_grid=(0.0, 0.1), trials_per_point=2, max_repetitions=50),
        "fig4": dict(noise_grid=(0.0, 0.05), shots=64),
        "end-to-end": {},
        "elementwise": dict(patterns=("", "h", "o"), epsilons=(0.1, 0.05), instances=2),
    }[experiment]
    base.update(changes)
    return default_config(experiment, **base)


class TestConfig:
    @pytest.mark.parametrize("name, experiment", [
        ("fig2", "fig2"), ("fig3", "fig3"), ("fig4", "fig4"),
        ("end_to_end", "end-to-end"), ("elementwise", "elementwise"),
    ])
    def test_shipped_configs_match_defaults(self, name, experiment):
        cfg = load_config(CONFIG_DIR / f"{name}.toml")
        assert cfg.experiment == experiment
        assert cfg == default_config(experiment, output_dir=cfg.output_dir)

    def test_defaults(self):
        assert default_config("fig2").trials_per_point == 200
        assert default_config("fig3").trials_per_point == 50
        assert default_config("fig4").shots == 8192
        assert default_config("end-to-end").noise_var == 1e-2
        assert set(DEFAULTS) == {"fig2", "fig3", "fig4", "end-to-end", "elementwise"}

    def test_dotted_keys_equal_tables(self, tmp_path):
        (tmp_path / "a.toml").write_text('experiment = "fig2"\n[noise]\nscope = "all"\n')
        (tmp_path / "b.toml").write_text('experiment = "fig2"\nnoise.scope = "all"\n')
        assert load_config(tmp_path / "a.toml") == load_config(tmp_path / "b.toml")

    def test_matrix_file(self, tmp_path):
        (tmp_path / "m.csv").write_text("2,0\n0,1\n")
        (tmp_path / "c.toml").write_text('experiment = "fig3"\nhhl.matrix_file = "m.csv"\nhhl.vector = [1.0, 0.0]\n')
        assert load_config(tmp_path / "c.toml").matrix == ((2.0, 0.0), (0.0, 1.0))

    def test_unknown_key(self):
        with pytest.raises(QBDLError, match="unknown-config-key"):
            config_from_mapping({"experiment": "fig2", "noise.level": 0.1})

    @pytest.mark.parametrize("changes", [
        {"noise_grid": (0.0, 1.5)}, {"trials_per_point": 0}, {"noise_scope": "some"},
    ])
    def test_invalid(self, changes):
        with pytest.raises(QBDLError, match="bad-config"):
            default_config("fig2", **changes)

    def test_bad_toml(self, tmp_path):
        (tmp_path / "x.toml").write_text("experiment = \n")
        with pytest.raises(QBDLError, match="bad-config"):
            load_config(tmp_path / "x.toml")


class TestRecords:
    def test_trial_seed_depends_on_position_only(self):
        assert records.trial_seed(1, 0, 2, 3) == records.trial_seed(1, 0, 2, 3)
        assert len({records.trial_seed(1, 0, g, t) for g in range(5) for t in range(5)}) == 25
        assert records.trial_seed(1, 0, 0, 0) != records.trial_seed(2, 0, 0, 0)

    def test_csv_cells(self):
        text = records.csv_text(("a", "b", "c"), [{"a": True, "b": 0.1, "c": np.int64(3)}])
        assert text == "a,b,c\n1,0.1,3\n"

    def test_summary(self):
        rows = [{"noise_type": "gate", "p": 0.1, "fidelity": f, "repetitions": r, "success": s}
                for f, r, s in [(1.0, 1, True), (0.5, 3, False)]]
        (out,) = records.summarize_trials(rows, "fig2")
        assert out["mean_fidelity"] == 0.75 and out["mean_repetitions"] == 2.0
        assert out["max_repetitions"] == 3 and out["success_rate"] == 0.5


class TestFigures:
    def test_fig2_outputs(self, tmp_path):
        out = run_experiment(small("fig2"), tmp_path)
        summary = records.read_csv(out.paths["summary"])
        assert list(summary[0]) == list(records.SUMMARY_COLUMNS)
        clean = [r for r in summary if float(r["p"]) == 0.0]
        assert all(float(r["mean_fidelity"]) >= 0.999 for r in clean)
        trials = records.read_csv(out.paths["trials"])
        assert list(trials[0]) == list(records.TRIAL_COLUMNS)
        assert all(0.0 <= float(r["fidelity"]) <= 1.0 for r in trials)
        svgs = sorted(p.name for p in tmp_path.glob("*.svg"))
        assert svgs == ["fig2_summary_fidelity_gate.svg", "fig2_summary_fidelity_measurement.svg",
                        "fig2_summary_repetitions_gate.svg", "fig2_summary_repetitions_measurement.svg"]
        # the maximum series is drawn dashed
        assert "stroke-dasharray" in (tmp_path / "fig2_summary_repetitions_gate.svg").read_text()
        manifest = json.loads(out.paths["manifest"].read_text())
        assert manifest["seed"] == 2019 and "numpy" in manifest["versions"]

    def test_fig3_noise_free(self):
        out = run_experiment(small("fig3", noise_grid=(0.0,), noise_types=("gate",)))
        assert out.summary[0]["mean_fidelity"] >= 0.9

    def test_fig3_qubit_budget(self):
        circ, ideal = inversion_circuit(default_config("fig3"))
        assert hhl.build_swap_verification(circ, ideal).num_qubits <= 12

    def test_fig4(self, tmp_path):
        cfg = small("fig4", noise_grid=(0.0, 1.0), noise_types=("measurement",))
        out = run_experiment(cfg, tmp_path)
        by_p = {r["p"]: r["p_success"] for r in out.rows}
        assert by_p[0.0] >= 0.99
        assert by_p[1.0] <= 0.01
        assert (tmp_path / "fig4_swap.svg").exists()

    def test_workers_do_not_change_results(self):
        one = run_experiment(small("fig2", workers=1))
        two = run_experiment(small("fig2", workers=2))
        assert one.rows == two.rows

    def test_same_seed_same_bytes(self, tmp_path):
        for sub in ("a", "b"):
            run_experiment(small("fig2"), tmp_path / sub)
        for name in ("fig2_trials.csv", "fig2_summary.csv", "fig2_summary_fidelity_gate.svg"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_different_seed_different_trials(self):
        a = run_experiment(small("fig2", noise_grid=(0.1,)))
        b = run_experiment(small("fig2", noise_grid=(0.1,), seed=7))
        assert [r["repetitions"] for r in a.rows] != [r["repetitions"] for r in b.rows]


class TestEndToEnd:
    def test_scalar_kernel(self):
        cmp = quantum_gp_predict(np.eye(4) * 2.0, np.array([0.3, 0.1, -0.2, 0.4]), 3.0,
                                 np.array([1.0, -1.0, 0.5, 0.2]), 0.01, 6)
        assert abs(cmp.quantum_mean - cmp.classical_mean) <= 1e-3
        assert abs(cmp.quantum_variance - cmp.classical_variance) <= 1e-3

    def test_demo_report(self, tmp_path):
        out = run_experiment(small("end-to-end"), tmp_path)
        rows = records.read_csv(out.paths["report"])
        assert [r["quantity"] for r in rows] == ["mean", "variance"]
        assert float(rows[1]["quantum"]) >= 0.0
        assert all(float(r["relative_error"]) <= 0.05 for r in rows)

    def test_ill_conditioned(self):
        with pytest.raises(QBDLError, match="ill-conditioned-for-clock-bits"):
            quantum_gp_predict(np.diag([1.0, 100.0]), np.array([0.1, 0.1]), 1.0, np.array([1.0, 1.0]), 0.01, 6)

    def test_padding_keeps_solution(self):
        a = np.array([[2.0, 0.5, 0.0], [0.5, 1.5, 0.2], [0.0, 0.2, 1.0]])
        v = np.array([1.0, -1.0, 0.5])
        big, vec = pad_system(a, v)
        assert big.shape == (4, 4)
        assert np.allclose(np.linalg.solve(big, vec)[:3], np.linalg.solve(a, v))
        assert np.isclose(np.linalg.cond(big), np.linalg.cond(a))


class TestElementwiseRun:
    def test_table(self, tmp_path):
        out = run_experiment(small("elementwise"), tmp_path)
        rows = out.rows
        assert {r["pattern"] for r in rows} == {"", "h", "o"}
        assert all(r["copies_consumed"] == r["steps"] * r["order"] for r in rows)
        for pattern in ("", "h", "o"):
            for inst in range(2):
                errs = [r["error"] for r in rows if r["pattern"] == pattern and r["instance"] == inst]
                assert errs[1] < errs[0]
        assert (tmp_path / "elementwise.svg").exists()

    def test_budget_overflow_is_recorded(self):
        out = run_experiment(small("elementwise", patterns=("h",), epsilons=(1e-4,), evolution_time=400.0,
                                   instances=1))
        assert out.rows[0]["status"] == "budget-exceeded"
        assert math.isnan(out.rows[0]["error"])


class TestPlots:
    def test_empty_input(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text(",".join(records.SUMMARY_COLUMNS) + "\n")
        with pytest.raises(QBDLError, match="empty-input"):
            emit_plot(path, "fidelity")

    def test_schema_mismatch(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(QBDLError, match="schema-mismatch"):
            emit_plot(path, "swap")

    def test_bad_kind(self, tmp_path):
        with pytest.raises(QBDLError, match="bad-plot-kind"):
            emit_plot(tmp_path / "x.csv", "pie")

    def test_deterministic_bytes(self, tmp_path):
        rows = [{"experiment": "fig4", "noise_type": k, "p": p, "seed": 1, "shots": 10, "attempts": 12,
                 "p_success": 0.5 + p, "fidelity": 2 * p} for k in ("gate", "measurement") for p in (0.0, 0.1)]
        path = records.write_csv(tmp_path / "swap.csv", records.SWAP_COLUMNS, rows)
        first = emit_plot(path, "swap", tmp_path / "a")[0].read_bytes()
        second = emit_plot(path, "swap", tmp_path / "b")[0].read_bytes()
        assert first == second
        assert b"<svg" in first


class TestCLI:
    def test_kernel_and_gp(self, tmp_path, capsys):
        data = tmp_path / "d.csv"
        data.write_text("1,0,1.0\n0,1,-0.5\n")
        assert main(["kernel", "--data", str(data), "--depth", "1"]) == 0
        assert capsys.readouterr().out.startswith("# layer=1")
        assert main(["gp", "--data", str(data), "--query", "0.5,0.5"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0].startswith("mean,") and out[1].startswith("variance,")

    def test_hhl_specialized(self, tmp_path, capsys):
        circ_path = tmp_path / "c.txt"
        assert main(["hhl", "--specialized", "--circuit-out", str(circ_path)]) == 0
        lines = dict(line.split(",") for line in capsys.readouterr().out.splitlines())
        assert lines["gates"] == "18" and float(lines["success_probability"]) == pytest.approx(0.625)
        assert circ_path.read_text().startswith("QUBITS 4")

    def test_hhl_matrix(self, tmp_path, capsys):
        m = tmp_path / "a.csv"
        m.write_text("1.5,0.5\n0.5,1.5\n")
        assert main(["hhl", "--matrix", str(m), "--vector", "1,0", "--clock-bits", "2"]) == 0
        lines = dict(line.split(",") for line in capsys.readouterr().out.splitlines())
        assert float(lines["fidelity"]) == pytest.approx(1.0)

    def test_swap_test(self, capsys):
        assert main(["swap-test", "--a", "1,0", "--b", "1,0", "--shots", "100"]) == 0
        assert "fidelity,1.0" in capsys.readouterr().out

    def test_elementwise(self, capsys):
        assert main(["elementwise", "--pattern", "ho", "--t", "1", "--epsilon", "0.05"]) == 0
        lines = dict(line.split(",") for line in capsys.readouterr().out.splitlines())
        assert lines["steps"] == "20" and lines["copies_consumed"] == "60"

    def test_experiment(self, tmp_path, capsys):
        cfg = tmp_path / "c.toml"
        cfg.write_text('experiment = "fig4"\nnoise.grid = [0.0]\nrun.shots = 32\n')
        assert main(["experiment", "fig4", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
        assert (tmp_path / "out" / "fig4_swap.csv").exists()
        assert (tmp_path / "out" / "manifest.json").exists()

    def test_errors_exit_2(self, tmp_path, capsys):
        assert main(["hhl"]) == 2
        assert main(["kernel", "--data", str(tmp_path / "missing.csv")]) == 2
        cfg = tmp_path / "c.toml"
        cfg.write_text('experiment = "fig2"\n')
        assert main(["experiment", "fig4", "--config", str(cfg)]) == 2
        assert "error:" in capsys.readouterr().err
