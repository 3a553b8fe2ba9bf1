import json

import numpy as np
import pytest

from lfpca.cli import main


@pytest.fixture()
def sample_csv(tmp_path):
    """Two uncorrelated regions: sine bumps on [0, 0.5) and (0.5, 1]."""
    rng = np.random.default_rng(42)
    p, n = 51, 40
    pts = np.linspace(0, 1, p)
    left = np.where(pts < 0.5, np.sin(2 * np.pi * pts), 0.0)
    right = np.where(pts > 0.5, np.sin(4 * np.pi * pts), 0.0)
    curves = (
        rng.normal(0, 2.0, (n, 1)) * left
        + rng.normal(0, 1.0, (n, 1)) * right
        + rng.normal(0, 0.05, (n, p))
    )
    path = tmp_path / "curves.csv"
    rows = [",".join(f"{v:.10g}" for v in pts)]
    rows += [",".join(f"{v:.10g}" for v in row) for row in curves]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path


class TestFit:
    def test_writes_all_outputs(self, sample_csv, tmp_path, capsys):
        out = tmp_path / "fit_out"
        code = main(["fit", "--input", str(sample_csv), "--out-dir", str(out)])
        assert code == 0
        for name in ("eigensystem.json", "components.csv", "fpca_components.csv", "report.txt"):
            assert (out / name).exists()
            assert (out / f"{name}.meta.json").exists()
        payload = json.loads((out / "eigensystem.json").read_text())
        assert payload["components"]
        assert len(payload["pve_per_block"]) == len(payload["partition"])
        assert "smoothing" in payload["metadata"]
        report = (out / "report.txt").read_text()
        assert "blocks detected" in report and "pve" in report

    def test_explicit_threshold_fit(self, sample_csv, tmp_path):
        out = tmp_path / "fit_thr"
        code = main(
            ["fit", "--input", str(sample_csv), "--out-dir", str(out), "--threshold", "0.4"]
        )
        assert code == 0
        meta = json.loads((out / "eigensystem.json").read_text())["metadata"]
        assert meta["resolved_threshold"] == 0.4

    def test_pve_out_of_range_is_usage_error(self, sample_csv, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["fit", "--input", str(sample_csv), "--out-dir", str(tmp_path), "--pve", "1.01"])
        assert err.value.code == 2

    def test_threshold_and_quantile_conflict(self, sample_csv, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(
                [
                    "fit", "--input", str(sample_csv), "--out-dir", str(tmp_path),
                    "--threshold", "0.2", "--quantile", "0.99",
                ]
            )
        assert err.value.code == 2

    def test_oversized_m_clamps_with_warning(self, sample_csv, tmp_path, capsys):
        out = tmp_path / "fit_clamp"
        code = main(["fit", "--input", str(sample_csv), "--out-dir", str(out), "--m", "500"])
        assert code == 0
        assert "clamp" in capsys.readouterr().err

    def test_missing_input_is_runtime_error(self, tmp_path, capsys):
        code = main(["fit", "--input", str(tmp_path / "no.csv"), "--out-dir", str(tmp_path)])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_malformed_input_is_runtime_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("0,0.5,0.5\n1,2,3\n", encoding="utf-8")
        code = main(["fit", "--input", str(bad), "--out-dir", str(tmp_path / "o")])
        assert code == 1
        assert "increasing" in capsys.readouterr().err


class TestSimulate:
    def test_deterministic_metrics_csv(self, tmp_path):
        args = [
            "simulate", "--design", "A", "--n", "60", "--reps", "2", "--seed", "7",
            "--grid-points", "201",
        ]
        code1 = main(args + ["--out-dir", str(tmp_path / "r1")])
        code2 = main(args + ["--out-dir", str(tmp_path / "r2")])
        assert code1 == 0 and code2 == 0
        b1 = (tmp_path / "r1" / "metrics.csv").read_bytes()
        b2 = (tmp_path / "r2" / "metrics.csv").read_bytes()
        assert b1 == b2

    def test_summary_contains_per_block_medians(self, tmp_path):
        out = tmp_path / "sim_b"
        code = main(
            [
                "simulate", "--design", "B", "--n", "60", "--reps", "2", "--seed", "3",
                "--grid-points", "201", "--out-dir", str(out),
            ]
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["design"] == "B"
        assert len(summary["per_block"]) == 3
        assert summary["per_block"][0]["specificity"]["median"] is not None

    def test_fpca_tau_without_tau_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(
                [
                    "simulate", "--design", "A", "--method", "fpca-tau",
                    "--out-dir", str(tmp_path),
                ]
            )
        assert err.value.code == 2

    def test_tau_with_lfpca_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(
                [
                    "simulate", "--design", "A", "--method", "lfpca", "--tau", "0.001",
                    "--out-dir", str(tmp_path),
                ]
            )
        assert err.value.code == 2


class TestReport:
    @pytest.fixture()
    def metrics_file(self, tmp_path):
        out = tmp_path / "study"
        main(
            [
                "simulate", "--design", "A", "--n", "60", "--reps", "2", "--seed", "5",
                "--grid-points", "201", "--out-dir", str(out),
            ]
        )
        return out / "metrics.csv"

    def test_single_file_table(self, metrics_file, capsys):
        assert main(["report", str(metrics_file)]) == 0
        table = capsys.readouterr().out
        assert "specificity" in table
        assert "lfpca" in table
        assert " A " in table  # design label from the sidecar

    def test_two_files_pool_by_group(self, metrics_file, tmp_path, capsys):
        other = tmp_path / "copy.csv"
        other.write_bytes(metrics_file.read_bytes())
        assert main(["report", str(metrics_file), str(other)]) == 0
        out = capsys.readouterr().out
        assert out.count("lfpca") >= 3

    def test_missing_column_is_named(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("rep,method,block\n1,lfpca,1\n", encoding="utf-8")
        assert main(["report", str(bad)]) == 1
        assert "specificity" in capsys.readouterr().err

    def test_malformed_value_names_row(self, tmp_path, capsys):
        bad = tmp_path / "bad2.csv"
        bad.write_text(
            "rep,method,block,specificity,precision,pve_ratio,n_blocks_detected\n"
            "1,lfpca,1,oops,1.0,1.0,3\n",
            encoding="utf-8",
        )
        assert main(["report", str(bad)]) == 1
        err = capsys.readouterr().err
        assert "row 2" in err

    def test_gnuplot_emission(self, metrics_file, tmp_path, capsys):
        dat = tmp_path / "table.dat"
        assert main(["report", str(metrics_file), "--gnuplot", str(dat)]) == 0
        assert dat.exists()
        assert dat.read_text().startswith("#")
