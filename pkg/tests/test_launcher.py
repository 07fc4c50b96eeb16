import csv
from pathlib import Path

import pytest

from launcher import build_parser, collect_overrides, config_path, main
from shared.constants import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_RUNTIME_ERROR

SMALL_CONFIG = """
[chain]
max_iter = 40
burn_in = 10

[synth]
classes = 3
tpc = 3
dim = 16
views_per_subject = 4

[experiment]
views = 2
trials = 4

[benchmark]
methods = michs, src_l1
views = 1,3
tpc = 2,3
trials = 3
max_iter = 30
burn_in = 10
workers = 1
"""

REPO_CONFIG = Path(__file__).resolve().parent.parent / "config.ini"

def read_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


@pytest.fixture
def workspace(tmp_path):
    """Small config plus a synthetic dataset and its dictionary"""
    config = tmp_path / "small.ini"
    config.write_text(SMALL_CONFIG, encoding="utf-8")
    data, dictionary = tmp_path / "data", tmp_path / "dict"
    assert main(["synth", "--config", str(config), "--seed", "5", "--out", str(data), "--quiet"]) == EXIT_OK
    assert main(["build-dict", "--config", str(config), "--train", str(data / "train_manifest.csv"),
                 "--out", str(dictionary), "--quiet"]) == EXIT_OK
    return tmp_path, config, data, dictionary


def classify_args(workspace, out, *extra):
    root, config, data, dictionary = workspace
    return ["classify", "--config", str(config), "--dict", str(dictionary),
            "--test", str(data / "test_manifest.csv"), "--out", str(root / out), "--quiet", *extra]


class TestSynth:

    def test_manifest_size_and_reproducibility(self, tmp_path):
        args = ["synth", "--classes", "10", "--tpc", "5", "--dim", "64", "--seed", "7", "--quiet"]
        assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
        assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
        assert len(read_rows(tmp_path / "a" / "train_manifest.csv")) == 1 + 50
        for name in ("train_matrix.csv", "test_matrix.csv", "train_manifest.csv", "test_manifest.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_zero_tpc_is_a_config_error(self, tmp_path, capsys):
        assert main(["synth", "--tpc", "0", "--out", str(tmp_path), "--quiet"]) == EXIT_CONFIG_ERROR
        assert "Error:" in capsys.readouterr().err


class TestBuildDict:

    def test_dictionary_files(self, workspace):
        _, _, _, dictionary = workspace
        assert len(read_rows(dictionary / "dictionary.csv")) == 16
        assert len((dictionary / "dictionary_classes.txt").read_text().split()) == 9

    def test_tpc_selects_atoms(self, workspace):
        root, config, data, _ = workspace
        assert main(["build-dict", "--config", str(config), "--train", str(data / "train_manifest.csv"),
                     "--tpc", "2", "--out", str(root / "d2"), "--quiet"]) == EXIT_OK
        assert len(read_rows(root / "d2" / "dictionary.csv")[0]) == 6

    def test_missing_manifest_is_a_runtime_error(self, tmp_path):
        assert main(["build-dict", "--train", str(tmp_path / "none.csv"), "--out", str(tmp_path),
                     "--quiet"]) == EXIT_RUNTIME_ERROR


class TestClassify:

    def test_results_table(self, workspace):
        assert main(classify_args(workspace, "res")) == EXIT_OK
        rows = read_rows(workspace[0] / "res" / "results.csv")
        assert rows[0] == ["sample_id", "true_class", "predicted", "cost_1", "cost_2", "cost_3", "wall_ms"]
        assert len(rows) == 1 + 4
        for row in rows[1:]:
            assert 1 <= int(row[2]) <= 3
            assert row[-1] == ""

    def test_baseline_shares_the_schema(self, workspace):
        assert main(classify_args(workspace, "l1", "--method", "src_l1")) == EXIT_OK
        rows = read_rows(workspace[0] / "l1" / "results.csv")
        assert len(rows[0]) == 7 and len(rows) == 5

    def test_reruns_are_byte_identical(self, workspace):
        assert main(classify_args(workspace, "r1")) == EXIT_OK
        assert main(classify_args(workspace, "r2")) == EXIT_OK
        root = workspace[0]
        assert (root / "r1" / "results.csv").read_bytes() == (root / "r2" / "results.csv").read_bytes()

    def test_class_subset(self, workspace):
        assert main(classify_args(workspace, "sub", "--classes", "2")) == EXIT_OK
        rows = read_rows(workspace[0] / "sub" / "results.csv")
        assert len(rows[0]) == 6
        assert {row[1] for row in rows[1:]} <= {"1", "2"}

    def test_single_view(self, workspace, capsys):
        assert main(classify_args(workspace, "t1", "--views", "1", "--trials", "2")) == EXIT_OK
        assert "accuracy=" in capsys.readouterr().out


class TestBenchmark:

    def test_grid_outputs(self, tmp_path):
        config = tmp_path / "small.ini"
        config.write_text(SMALL_CONFIG, encoding="utf-8")
        assert main(["benchmark", "--config", str(config), "--out", str(tmp_path / "bench"), "--quiet"]) == EXIT_OK
        out = tmp_path / "bench"
        cells = read_rows(out / "benchmark_cells.csv")
        assert cells[0] == ["method", "views", "tpc", "samples", "accuracy", "mean_wall_ms"]
        assert len(cells) == 1 + 2 * 2 * 2
        assert len(list(out.glob("confusion_*.csv"))) == 8
        by_views = read_rows(out / "accuracy_by_views.csv")
        assert by_views[0] == ["method", "T=1", "T=3"]
        assert [row[0] for row in by_views[1:]] == ["michs", "src_l1"]
        assert read_rows(out / "accuracy_by_tpc.csv")[0] == ["method", "TPC=2", "TPC=3"]

    def test_empty_method_list_is_a_config_error(self, tmp_path):
        assert main(["benchmark", "--method", "", "--out", str(tmp_path), "--quiet"]) == EXIT_CONFIG_ERROR

    def test_unknown_method_is_a_config_error(self, tmp_path):
        assert main(["benchmark", "--method", "michs,svm", "--out", str(tmp_path), "--quiet"]) == EXIT_CONFIG_ERROR

    def test_test_manifest_needs_train_manifest(self, tmp_path):
        assert main(["benchmark", "--test", "x.csv", "--out", str(tmp_path), "--quiet"]) == EXIT_CONFIG_ERROR


class TestChainTrace:

    def test_trace_and_frequencies(self, workspace):
        root, config, data, dictionary = workspace
        assert main(["chain-trace", "--config", str(config), "--dict", str(dictionary),
                     "--test", str(data / "test_manifest.csv"), "--index", "1",
                     "--out", str(root / "trace"), "--quiet"]) == EXIT_OK
        trace = read_rows(root / "trace" / "chain_trace.csv")
        assert trace[0] == ["iteration", "atom_index", "gamma_value"]
        assert len(trace) == 1 + 30 * 9
        assert trace[1][0] == "11"
        freq = read_rows(root / "trace" / "inclusion_freq.csv")
        assert len(freq) == 1 + 9
        for row in freq[1:]:
            assert 0.0 <= float(row[2]) <= 1.0
            assert row[3] in ("0", "1")

    def test_index_out_of_range(self, workspace):
        root, config, data, dictionary = workspace
        assert main(["chain-trace", "--config", str(config), "--dict", str(dictionary),
                     "--test", str(data / "test_manifest.csv"), "--index", "999",
                     "--out", str(root / "trace"), "--quiet"]) == EXIT_CONFIG_ERROR


class TestArguments:

    def test_build_dict_tpc_is_not_a_synthetic_override(self):
        args = build_parser().parse_args(["build-dict", "--tpc", "4"])
        assert "tpc" not in collect_overrides(args)

    def test_benchmark_grids_parsed(self):
        args = build_parser().parse_args(["benchmark", "--views", "1-3", "--tpc", "5"])
        overrides = collect_overrides(args)
        assert overrides["bench_views"] == (1, 2, 3)
        assert overrides["bench_tpc"] == (5,)

    def test_bad_grid_exits_through_argparse(self):
        with pytest.raises(SystemExit) as info:
            build_parser().parse_args(["benchmark", "--views", "3-1"])
        assert info.value.code == 2

    def test_benchmark_workers_flag(self):
        args = build_parser().parse_args(["benchmark", "--workers", "3"])
        overrides = collect_overrides(args)
        assert overrides["bench_workers"] == 3
        assert "workers" not in overrides


DEFAULT_FILE = """
[synth]
classes = 2
tpc = 2
dim = 8
views_per_subject = 2
subspace_dim = 2
"""


class TestDefaultConfigFile:

    def test_config_path_resolution(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert config_path(None) is None
        (tmp_path / "config.ini").write_text(DEFAULT_FILE, encoding="utf-8")
        assert config_path(None) == "config.ini"
        assert config_path("other.ini") == "other.ini"

    def test_working_directory_file_loaded_and_flags_win(self, tmp_path, monkeypatch, capsys):
        monkeypatch.chdir(tmp_path)
        (tmp_path / "config.ini").write_text(DEFAULT_FILE, encoding="utf-8")
        assert main(["synth", "--out", "a", "--quiet"]) == EXIT_OK
        assert "Wrote 4 training and 4 test vectors" in capsys.readouterr().out
        assert main(["synth", "--classes", "3", "--out", "b", "--quiet"]) == EXIT_OK
        assert "Wrote 6 training and 6 test vectors" in capsys.readouterr().out

    def test_invalid_working_directory_file_is_a_config_error(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        (tmp_path / "config.ini").write_text("[synth]\ncolour = red\n", encoding="utf-8")
        assert main(["synth", "--out", "a", "--quiet"]) == EXIT_CONFIG_ERROR


def cell_accuracy(path):
    """{(method, T, TPC): accuracy} from benchmark_cells.csv"""
    return {(row[0], int(row[1]), int(row[2])): float(row[4]) for row in read_rows(path)[1:]}


def mean_over_tpc(cells, method, views, tpc_grid):
    return sum(cells[(method, views, k)] for k in tpc_grid) / len(tpc_grid)


class TestBenchmarkAcceptance:
    """Trends of the default synthetic benchmark (C=10, seed 0)"""

    def test_reduced_default_benchmark(self, tmp_path):
        out = tmp_path / "bench"
        assert main(["benchmark", "--config", str(REPO_CONFIG), "--tpc", "3,7", "--trials", "25",
                     "--workers", "1", "--out", str(out), "--quiet"]) == EXIT_OK
        cells = cell_accuracy(out / "benchmark_cells.csv")
        assert len(cells) == 2 * 2 * 2
        michs_t1 = mean_over_tpc(cells, "michs", 1, (3, 7))
        michs_t3 = mean_over_tpc(cells, "michs", 3, (3, 7))
        assert michs_t1 < 0.98
        assert michs_t3 >= michs_t1
        for views in (1, 3):
            michs, src = (mean_over_tpc(cells, method, views, (3, 7)) for method in ("michs", "src_l1"))
            assert michs >= src - 0.15

    @pytest.mark.slow
    def test_default_benchmark(self, tmp_path):
        out = tmp_path / "bench"
        assert main(["benchmark", "--config", str(REPO_CONFIG), "--out", str(out), "--quiet"]) == EXIT_OK
        cells = cell_accuracy(out / "benchmark_cells.csv")
        grid = (3, 5, 7)
        assert len(cells) == 2 * 2 * len(grid)

        michs = {t: mean_over_tpc(cells, "michs", t, grid) for t in (1, 3)}
        src = {t: mean_over_tpc(cells, "src_l1", t, grid) for t in (1, 3)}
        assert michs[1] < 0.95
        assert michs[3] - michs[1] >= 0.10
        for views in (1, 3):
            assert michs[views] >= src[views]

        michs_loss = cells[("michs", 3, 7)] - cells[("michs", 3, 3)]
        src_loss = cells[("src_l1", 3, 7)] - cells[("src_l1", 3, 3)]
        assert cells[("michs", 3, 3)] >= cells[("src_l1", 3, 3)]
        assert michs_loss <= src_loss
