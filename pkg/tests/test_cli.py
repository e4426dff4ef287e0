import io
import time

import numpy as np
import pytest

from conftest import IMAGES, LABELS
from sparseproj import bench, soae
from sparseproj.cli import main
from sparseproj.core import project_nonneg, sigma, target_for_sigma

DATA = ["--images", str(IMAGES), "--labels", str(LABELS)]


def run(argv, tmp_path, name="out.csv"):
    out = tmp_path / name
    main(argv + ["-o", str(out)])
    return out.read_text()


def table(text):
    return bench.read_csv(io.StringIO(text))


class TestBench:
    def test_random_input_sparseness(self):
        rng = np.random.default_rng(0)
        for sampler in bench.SAMPLERS:
            x = bench.random_input(500, 0.15, rng, sampler)
            assert x.min() >= 0
            assert sigma(x) == pytest.approx(0.15, abs=1e-9)

    def test_trial_streams_are_independent_of_order(self):
        a = bench.trial_rng(1, 100, 7).random(3)
        bench.trial_rng(1, 100, 6).random(3)
        np.testing.assert_array_equal(bench.trial_rng(1, 100, 7).random(3), a)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            bench.BenchConfig(dims=[])
        with pytest.raises(ValueError):
            bench.BenchConfig(trials=0)

    def test_workers_give_same_counts(self):
        base = bench.BenchConfig(dims=[200], trials=20, seed=3)
        pooled = bench.BenchConfig(dims=[200], trials=20, seed=3, workers=2)
        a, b = bench.iteration_counts(base)[200], bench.iteration_counts(pooled)[200]
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_support_decay_starts_full(self):
        rows = bench.support_decay(bench.BenchConfig(dims=[300], trials=10))
        first = [r for r in rows if r[0] == 1]
        assert [r[2] for r in first] == [1.0, 1.0]

    def test_csv_round_trip(self):
        buf = io.StringIO()
        bench.write_csv(buf, ("a", "b"), [(1, 0.5)], {"seed": 3})
        meta, header, rows = bench.read_csv(io.StringIO(buf.getvalue()))
        assert meta == {"seed": "3"} and header == ["a", "b"] and rows == [["1", "0.5"]]


class TestSubcommands:
    def test_iterations(self, tmp_path):
        meta, header, rows = table(run(["iterations", "--dims", "100,1000", "--trials", "20"], tmp_path))
        assert header == ["n", "algo", "mean_iters", "min_iters", "max_iters"]
        assert len(rows) == 4
        assert "uniform" in meta["input_sampling"]
        by = {(r[0], r[1]): r for r in rows}
        assert float(by["1000", "improved"][2]) <= float(by["1000", "original"][2])

    def test_single_trial(self, tmp_path):
        a = run(["iterations", "--dims", "50", "--trials", "1", "--seed", "9"], tmp_path, "a")
        b = run(["iterations", "--dims", "50", "--trials", "1", "--seed", "9"], tmp_path, "b")
        assert a == b

    def test_support_decay(self, tmp_path):
        _, header, rows = table(run(["support-decay", "--dims", "1000", "--trials", "20"], tmp_path))
        assert header == ["iteration", "algo", "mean_support_fraction"]
        assert rows[0] == ["1", "original", "1.0"]

    def test_speedup_single_cell(self, tmp_path):
        argv = ["speedup", "--dims", "32", "--input-sigmas", "0.3", "--trials", "3", "--min-seconds", "0.01"]
        _, header, rows = table(run(argv, tmp_path))
        assert header == list(bench.SPEEDUP_COLUMNS)
        assert len(rows) == 1 and float(rows[0][4]) > 0

    def test_train_smoke(self, tmp_path):
        start = time.monotonic()
        ckpt = tmp_path / "m.bin"
        argv = ["train", *DATA, "--train-size", "100", "--eval-size", "100", "--n-hidden", "16",
                "--epochs", "5", "--checkpoint", str(ckpt)]
        meta, header, rows = table(run(argv, tmp_path))
        assert time.monotonic() - start < 60
        assert header == ["epoch", "mean_loss", "alpha", "step", "eval_error"]
        assert [r[0] for r in rows] == ["1", "2", "3", "4", "5"]
        params, cfg = soae.load_checkpoint(ckpt)
        assert params.W.shape == (784, 16) and cfg.max_epochs == 5

    def test_train_reports_bad_dataset(self, tmp_path):
        with pytest.raises(SystemExit, match="cannot load dataset"):
            main(["train", "--images", str(tmp_path / "nope"), "--labels", str(LABELS)])

    def test_activity_sweep(self, tmp_path):
        argv = ["activity-sweep", *DATA, "--train-size", "100", "--eval-size", "50", "--n-hidden", "16",
                "--epochs", "2", "--sigma-hs", "0.3,0.9"]
        _, header, rows = table(run(argv, tmp_path))
        assert header == ["sigma_H", "mean_l0", "std_l0"]
        assert float(rows[0][1]) > float(rows[1][1])

    def test_project(self, tmp_path, capsys):
        vec = tmp_path / "v.txt"
        vec.write_text("1, 2, 3, 4, 5\n")
        main(["project", str(vec), "--sigma", "0.8", "--nonneg"])
        lines = capsys.readouterr().out.splitlines()
        p = np.array([float(v) for v in lines[0].split()])
        ref = project_nonneg(np.arange(1.0, 6.0), target_for_sigma(5, 0.8))
        np.testing.assert_array_equal(p, ref.point)
        assert lines[1] == f"iterations: {len(ref.trace.iterations)}"

    def test_project_l0_and_lambda(self, tmp_path, capsys):
        vec = tmp_path / "v.txt"
        vec.write_text("3 -1 2\n")
        main(["project", str(vec), "--l0", "2"])
        assert capsys.readouterr().out.splitlines()[0] == "3.0 0.0 2.0"
        main(["project", str(vec), "--lambda1", "2.0", "--lambda2", "1.5"])
        p = np.array([float(v) for v in capsys.readouterr().out.split("\n")[0].split()])
        assert np.abs(p).sum() == pytest.approx(2.0) and np.linalg.norm(p) == pytest.approx(1.5)

    def test_project_needs_a_target(self, tmp_path):
        vec = tmp_path / "v.txt"
        vec.write_text("3 -1 2\n")
        with pytest.raises(SystemExit):
            main(["project", str(vec)])


class TestConfigFile:
    def test_flags_override_file(self, tmp_path):
        ini = tmp_path / "c.ini"
        ini.write_text("[iterations]\ndims = 100\ntrials = 5\nseed = 4\n")
        _, _, rows = table(run(["--config", str(ini), "iterations"], tmp_path, "a"))
        assert {r[0] for r in rows} == {"100"}
        meta, _, _ = table(run(["--config", str(ini), "iterations", "--trials", "3"], tmp_path, "b"))
        assert meta["trials"] == "3" and meta["seed"] == "4"

    def test_file_can_supply_required_paths(self, tmp_path):
        ini = tmp_path / "c.ini"
        ini.write_text(f"[train]\nimages = {IMAGES}\nlabels = {LABELS}\ntrain_size = 50\neval_size = 20\n"
                       "n_hidden = 8\nepochs = 1\n")
        _, _, rows = table(run(["--config", str(ini), "train"], tmp_path))
        assert len(rows) == 1

    def test_unknown_key(self, tmp_path):
        ini = tmp_path / "c.ini"
        ini.write_text("[iterations]\nbogus = 1\n")
        with pytest.raises(SystemExit):
            main(["--config", str(ini), "iterations"])
