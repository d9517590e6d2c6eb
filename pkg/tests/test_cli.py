import json

import numpy as np
import pytest

from twolocal import __version__
from twolocal.cli import load_localization, main, parse_n_range, read_summary


def run(*argv):
    return main([str(a) for a in argv])


def result_files(directory):
    return sorted((directory / "results").glob("*.json"))


class TestParsing:

    @pytest.mark.parametrize("text, expected", [
        ("7", [7]), ("4,5,6", [4, 5, 6]), ("6-10", [6, 7, 8, 9, 10]), ("3, 5-6", [3, 5, 6]), (4, [4]),
    ])
    def test_n_range(self, text, expected):
        assert parse_n_range(text) == expected

    def test_empty_range(self):
        with pytest.raises(ValueError):
            parse_n_range("")

    def test_usage_error_exit_code(self, tmp_path):
        with pytest.raises(SystemExit) as e:
            run("localize", "--flavor", "bogus", "--out", tmp_path)
        assert e.value.code == 1

    def test_validation_exit_code(self, tmp_path, capsys):
        assert run("localize", "--n", 3, "--realizations", 0, "--out", tmp_path) == 1
        assert "realizations" in capsys.readouterr().err


class TestGenSpectrum:

    def test_deterministic(self, tmp_path):
        for sub in ("a", "b"):
            assert run("gen-spectrum", "--n", 6, "--count", 3, "--seed", 7, "--out", tmp_path / sub) == 0
        a, b = result_files(tmp_path / "a"), result_files(tmp_path / "b")
        assert len(a) == 3
        for x, y in zip(a, b):
            dx, dy = json.loads(x.read_text()), json.loads(y.read_text())
            # only the echoed output directory differs
            dx["config"].pop("out"), dy["config"].pop("out")
            assert dx == dy

    def test_tridiagonal_shape(self, tmp_path):
        assert run("gen-spectrum", "--n", 14, "--generator", "tridiag", "--out", tmp_path) == 0
        d = json.loads(result_files(tmp_path)[0].read_text())
        assert len(d["values"]) == 16384

    def test_cap(self, tmp_path):
        assert run("gen-spectrum", "--n", 25, "--generator", "tridiag", "--out", tmp_path) == 2
        assert "error" in read_summary(tmp_path / "summary.csv")[0]

    def test_provenance(self, tmp_path):
        run("gen-spectrum", "--n", 3, "--count", 2, "--seed", 5, "--out", tmp_path)
        d = json.loads(result_files(tmp_path)[1].read_text())
        assert d["tool"] == "twolocal" and d["version"] == __version__
        assert d["seed"] == 5 and d["stream_id"] == 5 ^ 1
        assert d["config"]["realizations"] == 2
        first = (tmp_path / "summary.csv").read_text().splitlines()[0]
        assert first.startswith(f"# twolocal {__version__} config=")


class TestLocalize:

    def test_small_sweep_is_exact(self, tmp_path):
        assert run("localize", "--n", "3,4", "--realizations", 2, "--out", tmp_path) == 0
        rows = read_summary(tmp_path / "summary.csv")
        assert len(rows) == 4
        assert all(float(r["final_cost"]) < 1e-12 for r in rows)
        agg = read_summary(tmp_path / "aggregate.csv")
        assert [int(r["count"]) for r in agg] == [2, 2]
        target, result, head = load_localization(result_files(tmp_path)[0])
        assert result.basis.flavor == "real_2local" and head["stream_id"] == 0

    def test_sparse_has_sparsity_column(self, tmp_path):
        assert run("localize", "--n", 3, "--variant", "sparse", "--lambda", 1e-3, "--out", tmp_path) == 0
        row = read_summary(tmp_path / "summary.csv")[0]
        assert 0 <= float(row["sparsity"]) <= 1

    def test_low_rank_needs_rank(self, tmp_path):
        assert run("localize", "--n", 4, "--flavor", "z_only_2local", "--variant", "low_rank",
                   "--out", tmp_path) == 1
        assert run("localize", "--n", 4, "--flavor", "z_only_2local", "--variant", "low_rank",
                   "--rank", 2, "--out", tmp_path) == 0

    def test_parallel_matches_serial(self, tmp_path):
        args = ("localize", "--n", 4, "--realizations", 3, "--seed", 3)
        assert run(*args, "--jobs", 1, "--out", tmp_path / "s") == 0
        assert run(*args, "--jobs", 2, "--out", tmp_path / "p") == 0
        for a, b in zip(result_files(tmp_path / "s"), result_files(tmp_path / "p")):
            ra, rb = load_localization(a)[1], load_localization(b)[1]
            np.testing.assert_array_equal(ra.couplings, rb.couplings)

    def test_config_file_and_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n": "3", "realizations": 2, "flavor": "one_local_real"}))
        assert run("localize", "--config", cfg, "--realizations", 1, "--out", tmp_path / "o") == 0
        rows = read_summary(tmp_path / "o" / "summary.csv")
        assert len(rows) == 1 and rows[0]["flavor"] == "one_local_real"

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"colour": 1}))
        assert run("localize", "--config", cfg, "--out", tmp_path) == 1


class TestAnalysis:

    def test_stability_on_z_only(self, tmp_path):
        run("localize", "--n", 5, "--flavor", "z_only_2local", "--out", tmp_path / "loc")
        assert run("stability", "--results", tmp_path / "loc", "--out", tmp_path / "st") == 0
        row = read_summary(tmp_path / "st" / "summary.csv")[0]
        assert row["identity_metric"] == "True"
        assert float(row["lambda1_exact"]) == pytest.approx(1.0)

    def test_stability_missing_results(self, tmp_path):
        assert run("stability", "--results", tmp_path / "nothing", "--out", tmp_path) == 1
        assert run("stability", "--out", tmp_path) == 1

    def test_sff(self, tmp_path):
        run("localize", "--n", 4, "--realizations", 3, "--out", tmp_path / "loc")
        assert run("sff", "--results", tmp_path / "loc", "--n-times", 50, "--out", tmp_path / "sff") == 0
        rows = (tmp_path / "sff" / "sff_reference.csv").read_text().splitlines()
        assert rows[0] == "t,sff_raw,sff_normalized"
        assert float(rows[1].split(",")[1]) == 256.0
        report = json.loads((tmp_path / "sff" / "sff_report.json").read_text())
        assert report["n_realizations"] == 3 and report["max_log_ratio"] < 1e-3

    def test_sff_rejects_mixed_n(self, tmp_path):
        run("localize", "--n", "3,4", "--out", tmp_path / "loc")
        assert run("sff", "--results", tmp_path / "loc", "--out", tmp_path / "sff") == 1

    def test_sw_xxx_with_trace(self, tmp_path):
        assert run("sw", "--trace", "--out", tmp_path) == 0
        body = json.loads((tmp_path / "sw_result.json").read_text())
        assert body["converged"] and body["residual_norm"] < 1e-8
        lines = (tmp_path / "sw_trace.csv").read_text().splitlines()
        assert lines[1] == "iteration,residual_norm,spectral_drift"
        assert len(lines) == body["iterations"] + 3

    def test_sw_not_converged_exit_code(self, tmp_path):
        assert run("sw", "--max-iters", 5, "--out", tmp_path) == 2

    def test_lambda2(self, tmp_path):
        assert run("lambda2", "--n", "5", "--exact-max-n", 5, "--out", tmp_path) == 0
        row = read_summary(tmp_path / "summary.csv")[0]
        assert float(row["lambda2_closed"]) == pytest.approx(float(row["lambda2_bruteforce"]), rel=1e-10)
        assert 0 < float(row["lambda2_exact_metric"]) <= 1

    def test_rank_bound(self, tmp_path):
        assert run("rank-bound", "--n", "1,3,10", "--out", tmp_path) == 0
        rows = read_summary(tmp_path / "summary.csv")
        assert float(rows[0]["generic_bound"]) == 0.5
        assert float(rows[1]["tighter_bound"]) == pytest.approx(4 / 3)
        assert float(rows[2]["generic_bound"]) == pytest.approx(1024 / 436)

    def test_rank_bound_projector_check(self, tmp_path):
        assert run("rank-bound", "--n", 3, "--check-projector", "--restarts", 2, "--out", tmp_path) == 0
        row = read_summary(tmp_path / "summary.csv")[0]
        assert float(row["projector_best_cost"]) > 1e-6
