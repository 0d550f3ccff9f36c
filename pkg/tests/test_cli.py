import os
import shutil
import subprocess

import numpy as np
import pytest

from nccbank import filterbank as fb
from nccbank import gridio
from nccbank import irdatagen as dg
from nccbank import nccnet as nn
from nccbank.cli import cli_main


def run(*argv):
    return cli_main(list(argv))


def dir_bytes(root):
    out = {}
    for base, _, files in os.walk(root):
        for f in files:
            p = os.path.join(base, f)
            with open(p, "rb") as fh:
                out[os.path.relpath(p, root)] = fh.read()
    return out


class TestUsage:
    def test_help_exits_zero(self, capsys):
        assert run("--help") == 0
        assert "datagen" in capsys.readouterr().out

    def test_subcommand_help_exits_zero(self):
        for cmd in ("datagen", "train", "export-filter", "fit-hat",
                    "detect", "bench", "roc"):
            assert run(cmd, "--help") == 0

    def test_no_command_is_usage_error(self):
        assert run() == 2

    def test_unknown_command_is_usage_error(self):
        assert run("frobnicate") == 2

    def test_missing_required_flag_is_usage_error(self):
        assert run("train", "--out", "x.txt") == 2

    def test_bad_choice_is_usage_error(self):
        assert run("datagen", "--clutter", "rain", "--out", "x") == 2


class TestDatagen:
    def test_requires_a_destination(self, tmp_path, capsys):
        assert run("datagen", "--scenes", "2") == 1
        assert "nothing to do" in capsys.readouterr().err

    def test_writes_dataset_and_frames(self, tmp_path, capsys):
        data = tmp_path / "train.nccd"
        frames = tmp_path / "frames"
        code = run(
            "datagen", "--scenes", "4", "--negatives", "60",
            "--seed", "11", "--out", str(data), "--frames-dir", str(frames),
        )
        assert code == 0
        samples = dg.read_dataset(data)
        n_pos = sum(1 for s in samples if s.label == 1)
        assert n_pos == 4 * 9
        assert len(samples) - n_pos == 60
        loaded, truths = dg.read_frames(frames)
        assert len(loaded) == 4
        assert sum(len(t) for t in truths) == 4 * 9
        out = capsys.readouterr().out
        assert "36 positives" in out

    def test_single_clutter_kind_and_frames_per_scene(self, tmp_path):
        frames = tmp_path / "frames"
        code = run(
            "datagen", "--scenes", "2", "--frames-per-scene", "3",
            "--clutter", "collimator", "--targets", "2",
            "--width", "72", "--height", "72",
            "--frames-dir", str(frames),
        )
        assert code == 0
        loaded, truths = dg.read_frames(frames)
        assert len(loaded) == 6
        assert all(f.shape == (72, 72) for f in loaded)

    def test_byte_identical_reruns(self, tmp_path):
        args = ["datagen", "--scenes", "3", "--negatives", "40", "--seed", "7"]
        for name in ("a", "b"):
            code = run(*args, "--out", str(tmp_path / f"{name}.nccd"),
                       "--frames-dir", str(tmp_path / name))
            assert code == 0
        assert (tmp_path / "a.nccd").read_bytes() == (tmp_path / "b.nccd").read_bytes()
        assert dir_bytes(tmp_path / "a") == dir_bytes(tmp_path / "b")


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    """One small dataset + frame folder shared by the pipeline tests."""
    root = tmp_path_factory.mktemp("corpus")
    data = root / "train.nccd"
    frames = root / "frames"
    assert run(
        "datagen", "--scenes", "4", "--negatives", "60", "--seed", "11",
        "--out", str(data), "--frames-dir", str(frames),
    ) == 0
    return data, frames


class TestTrain:
    def test_trains_and_saves(self, small_corpus, tmp_path, capsys):
        data, _ = small_corpus
        out = tmp_path / "net.txt"
        code = run(
            "train", "--data", str(data), "--out", str(out),
            "--filters", "1", "--epochs", "1", "--seed", "3",
        )
        assert code == 0
        net = nn.load_network(out)
        assert net.num_filters == 1
        assert net.filter_size == dg.CORE_SIZE
        printed = capsys.readouterr().out
        assert "epoch 1:" in printed
        assert "holdout_acc=" in printed

    def test_deterministic_network_files(self, small_corpus, tmp_path):
        data, _ = small_corpus
        for name in ("a", "b"):
            assert run(
                "train", "--data", str(data), "--out", str(tmp_path / name),
                "--filters", "2", "--norm", "mad", "--epochs", "1",
            ) == 0
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()

    def test_missing_data_file(self, tmp_path):
        assert run("train", "--data", str(tmp_path / "nope.nccd"),
                   "--out", str(tmp_path / "n.txt")) == 1


class TestExportFilter:
    @pytest.fixture()
    def net_path(self, tmp_path):
        net = nn.init_network(num_filters=2, filter_size=15, seed=5)
        path = tmp_path / "net.txt"
        nn.save_network(net, path)
        return path

    def test_float_export(self, net_path, tmp_path):
        out = tmp_path / "f.txt"
        assert run("export-filter", "--net", str(net_path), "--index", "1",
                   "--out", str(out)) == 0
        grid = gridio.read_grid(out)
        net = nn.load_network(net_path)
        assert np.array_equal(grid, net.filters[1])

    def test_fixed_export(self, net_path, tmp_path):
        out = tmp_path / "q.txt"
        assert run("export-filter", "--net", str(net_path), "--index", "0",
                   "--out", str(out), "--fixed") == 0
        raw, qf = fb.load_quantized_filter(out)
        assert raw.shape == (15, 15)
        assert (qf.total_bits, qf.frac_bits) == (8, 7)
        assert np.max(np.abs(raw)) == qf.raw_max  # prescaled to full range

    def test_index_out_of_range(self, net_path, tmp_path):
        assert run("export-filter", "--net", str(net_path), "--index", "9",
                   "--out", str(tmp_path / "x.txt")) == 1


class TestFitHat:
    def test_fits_and_writes(self, tmp_path, capsys):
        target = fb.ricker_hat_grid(11)
        src = tmp_path / "target.txt"
        gridio.write_grid(target, src)
        out = tmp_path / "hat.txt"
        assert run("fit-hat", "--filter", str(src), "--out", str(out)) == 0
        printed = capsys.readouterr().out
        assert "similarity=" in printed
        sim = float(printed.split("similarity=")[1].splitlines()[0])
        assert sim > 0.999
        fitted = gridio.read_grid(out)
        assert fitted.shape == (11, 11)
        assert abs(fitted.sum()) < 1e-9

    def test_flat_filter_fails_cleanly(self, tmp_path):
        src = tmp_path / "flat.txt"
        gridio.write_grid(np.zeros((9, 9)), src)
        assert run("fit-hat", "--filter", str(src)) == 1


class TestDetect:
    def test_detects_targets_in_frame(self, small_corpus, tmp_path):
        _, frames = small_corpus
        out = tmp_path / "dets.csv"
        code = run(
            "detect", "--frame", str(frames / "frame_0000.txt"),
            "--method", "gauss-1.2", "--threshold", "0.5",
            "--out", str(out),
        )
        assert code == 0
        rows = out.read_text().splitlines()
        assert rows[0] == "row,col,score"
        dets = [tuple(map(float, r.split(","))) for r in rows[1:]]
        _, truths = dg.read_frames(frames)
        hits = sum(
            1 for t in truths[0]
            if any(np.hypot(d[0] - t[0], d[1] - t[1]) <= 2.0 for d in dets)
        )
        assert hits >= len(truths[0]) - 1  # bright seeded targets score high

    def test_unknown_method(self, small_corpus, tmp_path):
        _, frames = small_corpus
        assert run("detect", "--frame", str(frames / "frame_0000.txt"),
                   "--method", "sobel", "--threshold", "0") == 1

    def test_missing_frame(self, tmp_path):
        assert run("detect", "--frame", str(tmp_path / "no.txt"),
                   "--method", "gauss-1.2", "--threshold", "0") == 1


class TestBenchAndRoc:
    def test_bench_writes_report(self, small_corpus, tmp_path, capsys):
        _, frames = small_corpus
        out = tmp_path / "report"
        code = run(
            "bench", "--data", str(frames),
            "--methods", "gauss-1.2,mad-ratio",
            "--out-dir", str(out), "--thresholds", "64",
        )
        assert code == 0
        roc = (out / "roc.csv").read_text().splitlines()
        assert roc[0] == "method,threshold,hit_rate,fa_per_frame"
        assert len(roc) == 1 + 2 * 64
        auc = (out / "auc.csv").read_text().splitlines()
        assert auc[0] == "method,auc,ms_per_frame"
        printed = capsys.readouterr().out
        assert "gauss-1.2: auc=" in printed

    def test_no_timing_reruns_byte_identical(self, small_corpus, tmp_path):
        _, frames = small_corpus
        for name in ("a", "b"):
            assert run(
                "bench", "--data", str(frames),
                "--methods", "gauss-1.2,hat9-fixed-mad",
                "--out-dir", str(tmp_path / name),
                "--thresholds", "32", "--no-timing",
            ) == 0
        assert dir_bytes(tmp_path / "a") == dir_bytes(tmp_path / "b")

    def test_roc_resweep_matches(self, small_corpus, tmp_path):
        _, frames = small_corpus
        orig = tmp_path / "orig"
        assert run(
            "bench", "--data", str(frames), "--methods", "mad-ratio",
            "--out-dir", str(orig), "--thresholds", "32", "--no-timing",
        ) == 0
        again = tmp_path / "again"
        assert run("roc", "--scores", str(orig), "--out-dir", str(again)) == 0
        assert dir_bytes(orig) == dir_bytes(again)

    def test_empty_method_list(self, small_corpus, tmp_path):
        _, frames = small_corpus
        assert run("bench", "--data", str(frames), "--methods", ",",
                   "--out-dir", str(tmp_path / "r")) == 1

    def test_missing_frames_dir(self, tmp_path):
        assert run("bench", "--data", str(tmp_path / "missing"),
                   "--methods", "mad-ratio",
                   "--out-dir", str(tmp_path / "r")) == 1


@pytest.mark.skipif(shutil.which("nccbank") is None,
                    reason="console script not installed")
def test_console_entry_point():
    proc = subprocess.run(["nccbank", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "datagen" in proc.stdout
