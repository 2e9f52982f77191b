import numpy as np
import pytest

from rnn2dfa.cli import (
    EXIT_ERROR,
    EXIT_NOT_CLUSTERABLE,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    OUT_ENV,
    main,
)
from rnn2dfa.config import (
    ExperimentConfig,
    config_from_text,
    derive_seed,
    load_config,
)


class TestDeriveSeed:
    def test_deterministic(self):
        assert derive_seed(42, 2) == derive_seed(42, 2)

    def test_distinct_roles_and_masters(self):
        seeds = {derive_seed(m, r) for m in (0, 1, 2) for r in (2, 3, 4, 5, 10, 11)}
        assert len(seeds) == 18

    def test_member_path(self):
        assert derive_seed(0, 10) != derive_seed(0, 11)


class TestConfig:
    def test_round_trip(self):
        cfg = ExperimentConfig(problem="tomita5", seed=3, nu=0.5, noise_ramp=True)
        back = config_from_text(cfg.to_text())
        assert back == cfg

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown config key"):
            config_from_text("learning_rate=0.1\n")

    def test_comments_and_blanks_ignored(self):
        cfg = config_from_text("# a comment\n\nproblem=parity  # trailing\nseed=7\n")
        assert cfg.problem == "parity" and cfg.seed == 7

    def test_malformed_line_rejected(self):
        with pytest.raises(ValueError, match="key=value"):
            config_from_text("problem parity\n")

    def test_overrides_win(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("problem=parity\nseed=1\n")
        cfg = load_config(p, seed=9)
        assert cfg.seed == 9 and cfg.problem == "parity"

    def test_unknown_problem_rejected(self):
        with pytest.raises(ValueError, match="unknown problem"):
            ExperimentConfig(problem="tomita9")

    def test_val_symbols_defaults(self):
        assert ExperimentConfig(problem="tomita2").val_symbols == 100_000
        assert ExperimentConfig(problem="add-base2").val_symbols == 50_000
        assert ExperimentConfig(problem="add-base2", val_symbols=123).val_symbols == 123

    def test_sigma_list(self):
        assert ExperimentConfig(sigmas="0.05, 0.1,0.2").sigma_list == [0.05, 0.1, 0.2]


TINY = [
    "--problem", "parity", "--seed", "0", "--n-hidden", "8",
    "--epochs", "8", "--train-symbols", "3000", "--val-symbols", "1500",
    "--quiet",
]


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path))
    return tmp_path


class TestTrainCommand:
    def test_writes_artifacts(self, outdir):
        code = main(["train", *TINY])
        assert code in (EXIT_OK, EXIT_NOT_CONVERGED)
        run = outdir / "runs" / "parity" / "seed0"
        for name in ("config.txt", "model.txt", "trace.csv", "run.txt"):
            assert (run / name).exists(), name
        kv = dict(
            line.split("=", 1) for line in (run / "run.txt").read_text().splitlines()
        )
        assert set(kv) >= {"converged", "epochs", "val_acc", "train_acc_clean"}
        assert int(kv["epochs"]) <= 8

    def test_rerun_is_byte_identical(self, outdir):
        main(["train", *TINY])
        run = outdir / "runs" / "parity" / "seed0"
        first = {n: (run / n).read_bytes() for n in ("model.txt", "trace.csv")}
        main(["train", *TINY])
        for name, blob in first.items():
            assert (run / name).read_bytes() == blob, name

    def test_member_suffix(self, outdir):
        main(["train", *TINY, "--member", "1"])
        assert (outdir / "runs" / "parity" / "seed0_m1" / "model.txt").exists()


class TestExtractCommand:
    def test_verdict_matches_exit_code(self, outdir):
        main(["train", *TINY])
        model = outdir / "runs" / "parity" / "seed0" / "model.txt"
        code = main(["extract", *TINY, "--model", str(model)])
        verdict = dict(
            line.split("=", 1)
            for line in (model.parent / "extract" / "verdict.txt").read_text().splitlines()
        )
        status_by_code = {
            0: "ok", 3: "not-clusterable", 4: "nondeterministic-transition", 5: "inequivalent",
        }
        assert verdict["status"] in (status_by_code[code], "unknown-destination")

    def test_missing_model_is_error(self, outdir):
        assert main(["extract", *TINY, "--model", str(outdir / "nope.txt")]) == EXIT_ERROR


class TestStabilityCommand:
    def test_long_string_csv_written(self, outdir):
        main(["train", *TINY])
        model = outdir / "runs" / "parity" / "seed0" / "model.txt"
        code = main([
            "stability", *TINY, "--models", str(model),
            "--long-length", "2000", "--long-strings", "2",
            "--trials", "5", "--step-budget", "2000",
        ])
        long_csv = model.parent / "stability" / "long_accuracy.csv"
        assert long_csv.exists()
        assert code in (EXIT_OK, EXIT_NOT_CLUSTERABLE)
        if code == EXIT_OK:
            assert (model.parent / "stability" / "dispersion.csv").exists()
            assert (model.parent / "stability" / "destination_match.csv").exists()
            assert (model.parent / "stability" / "sweep.csv").exists()


class TestReportCommand:
    def test_empty_directory(self, tmp_path, capsys):
        assert main(["report", "--out", str(tmp_path / "nothing")]) == EXIT_OK
        assert "problem" in capsys.readouterr().out

    def test_after_train(self, outdir, capsys):
        main(["train", *TINY])
        assert main(["report", "--out", str(outdir / "runs")]) == EXIT_OK
        out = capsys.readouterr().out
        assert "parity" in out


def test_bad_config_file_is_cli_error(tmp_path):
    bad = tmp_path / "c.txt"
    bad.write_text("nonsense=1\n")
    assert main(["train", "--config", str(bad)]) == EXIT_ERROR
