"""Config files, sweep/ablation drivers, and the command-line entry points."""

import numpy as np
import pytest

from codepress.cli import main
from codepress.codes import load_code_table
from codepress.composer import load_codebook
from codepress.configfile import (
    DEFAULTS,
    build_code_config,
    build_guidance_config,
    build_train_config,
    describe_defaults,
    parse_config,
)
from codepress.datasets import clustered_embeddings, make_vocab, save_embeddings
from codepress.reporting import load_reports
from codepress.sweeps import (
    ABLATION_ORDER,
    SweepBase,
    ablation_variants,
    derived_seed,
    run_ablation,
    run_one,
    sweep,
)
from codepress.training import TrainConfig


class TestConfigFile:
    def test_empty_file_yields_documented_defaults(self, tmp_path):
        path = tmp_path / "empty.cfg"
        path.write_text("# nothing but comments\n\n")
        settings = parse_config(path)
        assert settings == {k: spec.default for k, spec in DEFAULTS.items()}

    def test_values_parse_with_comments(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "alphabet_size = 8   # digits per position\n"
            "learning_rate=0.05\n"
            "use_straight_through = false\n"
            "composer = lstm\n"
        )
        settings = parse_config(path)
        assert settings["alphabet_size"] == 8
        assert settings["learning_rate"] == 0.05
        assert settings["use_straight_through"] is False
        assert settings["composer"] == "lstm"

    def test_unknown_key_names_the_line(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("epochs = 5\nalphabetsize = 8\n")
        with pytest.raises(ValueError, match=r"bad\.cfg:2: unknown key"):
            parse_config(path)

    def test_missing_equals_sign(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("epochs 5\n")
        with pytest.raises(ValueError, match="expected 'key = value'"):
            parse_config(path)

    def test_bad_boolean(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("allow_lossy = maybe\n")
        with pytest.raises(ValueError, match="boolean"):
            parse_config(path)

    def test_describe_defaults_covers_every_key(self):
        text = describe_defaults()
        for key in DEFAULTS:
            assert key in text

    def test_builders_reflect_file_values(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "vocab_size = 30\nalphabet_size = 5\ncode_length = 2\ndigit_dim = 6\n"
            "epochs = 7\nbatch_size = 9\noptimizer = sgd\nschedule_kind = constant\n"
            "tau_init = 0.8\ntau_min = 0.8\nguidance_mode = odg\nkeep_prob = 0.6\n"
        )
        settings = parse_config(path)
        code = build_code_config(settings)
        assert (code.vocab_size, code.alphabet_size, code.code_length) == (30, 5, 2)
        assert code.code_embed_dim == 6
        train = build_train_config(settings)
        assert train.epochs == 7 and train.batch_size == 9
        assert train.optimizer == "sgd"
        assert train.schedule.kind == "constant"
        guide = build_guidance_config(settings)
        assert guide.mode == "odg" and guide.keep_prob == 0.6


def sweep_base(n=40, dim=6, seed=0, epochs=2):
    targets, _ = clustered_embeddings(n, dim, 4, np.random.default_rng(seed))
    return SweepBase(
        targets=targets,
        alphabet_size=4,
        code_length=3,
        digit_dim=dim,
        train=TrainConfig(epochs=epochs, batch_size=16, learning_rate=0.02, seed=seed),
    )


class TestSweeps:
    def test_derived_seeds_are_stable_and_distinct(self):
        assert derived_seed(0, 0) == derived_seed(0, 0)
        seeds = {derived_seed(0, i) for i in range(20)}
        assert len(seeds) == 20
        assert derived_seed(1, 0) != derived_seed(0, 0)

    def test_single_value_sweep_equals_direct_run(self):
        base = sweep_base()
        [report] = sweep("alphabet_size", [4], base)
        direct, _ = run_one(base, derived_seed(0, 0), alphabet_size=4)
        assert report.method == "kd[alphabet_size=4]"
        assert report.bits == direct.bits
        assert report.metrics == direct.metrics

    def test_failed_value_is_preserved_not_raised(self):
        base = sweep_base()
        reports = sweep("alphabet_size", [4, 0], base)
        assert len(reports) == 2
        assert not reports[0].method.endswith("FAILED")
        assert reports[1].method == "kd[alphabet_size=0] FAILED"
        assert "error" in reports[1].config
        assert reports[1].bits == 0

    def test_longer_codes_reconstruct_better(self):
        base = sweep_base(n=60, dim=8, epochs=25)
        reports = sweep("code_length", [1, 4], base)
        errs = [r.metrics["reconstruction_mse"] for r in reports]
        assert errs[1] < errs[0]

    def test_axis_validation(self):
        with pytest.raises(ValueError, match="axis"):
            sweep("vocab_size", [10], sweep_base())

    def test_run_one_echo_supports_accounting(self):
        base = sweep_base()
        report, result = run_one(base, 123)
        assert report.config["family"] == "kd"
        assert report.config["seed"] == 123
        assert report.config["extra_params"] == result.book.extra_param_count()
        assert report.metrics["val_loss"] == result.best_val


class TestAblation:
    def test_ladder_tags_in_order(self):
        variants = ablation_variants(TrainConfig())
        assert tuple(tag for tag, _ in variants) == ABLATION_ORDER

    def test_ladder_wirings(self):
        variants = dict(ablation_variants(TrainConfig()))
        cr = variants["cr"]
        assert not cr.use_straight_through
        assert cr.schedule.kind == "constant"
        assert cr.entropy_weight == 0.0
        assert cr.guidance.mode == "none"
        ste = variants["cr_ste"]
        assert ste.use_straight_through and ste.schedule.kind == "constant"
        sched = variants["cr_ste_sched"]
        assert sched.schedule.kind == "exponential"
        assert sched.entropy_weight == 0.0
        ent = variants["cr_ste_sched_ent"]
        assert ent.entropy_weight > 0.0
        pdg_off = variants["pdg_no_autoencoder"]
        assert pdg_off.guidance.mode == "pdg" and not pdg_off.guidance.autoencoder
        pdg_on = variants["pdg_full"]
        assert pdg_on.guidance.mode == "pdg" and pdg_on.guidance.autoencoder

    def test_all_variants_share_the_base_seed(self):
        variants = ablation_variants(TrainConfig(seed=31))
        assert all(cfg.seed == 31 for _, cfg in variants)

    def test_run_ablation_produces_six_rows(self):
        reports = run_ablation(sweep_base(n=30, dim=4, epochs=1))
        assert [r.method for r in reports] == list(ABLATION_ORDER)
        assert all(r.bits > 0 for r in reports)


@pytest.fixture()
def workdir(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "vocab_size = 40\nembed_dim = 6\nsynthetic_clusters = 4\n"
        "alphabet_size = 4\ncode_length = 3\ndigit_dim = 6\n"
        "epochs = 2\nbatch_size = 16\nlearning_rate = 0.02\n"
    )
    return tmp_path


class TestCli:
    def test_fit_codes_is_byte_reproducible(self, workdir, capsys):
        outs = []
        for name in ("a", "b"):
            out = workdir / name
            assert main(["fit-codes", str(workdir / "run.cfg"), "--out-dir", str(out)]) == 0
            outs.append(out)
        capsys.readouterr()
        for artifact in ("codes.txt", "codebook.bin", "metrics.jsonl"):
            first = (outs[0] / artifact).read_bytes()
            second = (outs[1] / artifact).read_bytes()
            assert first == second, artifact
            assert len(first) > 0

    def test_fit_codes_artifacts_load_back(self, workdir, capsys):
        out = workdir / "run"
        assert main(["fit-codes", str(workdir / "run.cfg"), "--out-dir", str(out)]) == 0
        assert "fit-codes: vocab=40 K=4 D=3" in capsys.readouterr().out
        table = load_code_table(out / "codes.txt")
        book = load_codebook(out / "codebook.bin")
        assert table.vocab_size == 40
        assert book.alphabet_size == 4 and book.code_length == 3
        lines = (out / "metrics.jsonl").read_text().strip().split("\n")
        assert len(lines) == 2  # one record per epoch

    def test_eval_against_saved_artifacts(self, workdir, capsys):
        out = workdir / "run"
        main(["fit-codes", str(workdir / "run.cfg"), "--out-dir", str(out)])
        # synthetic targets regenerate deterministically from the config
        from codepress.cli import _load_targets
        from codepress.configfile import parse_config
        from codepress.datasets import VocabTable

        symbols, targets = _load_targets(parse_config(workdir / "run.cfg"))
        emb = workdir / "emb.txt"
        save_embeddings(emb, VocabTable(symbols), targets)
        capsys.readouterr()
        report_path = workdir / "report.jsonl"
        code = main([
            "eval", "--codes", str(out / "codes.txt"),
            "--codebook", str(out / "codebook.bin"),
            "--embeddings", str(emb), "--k", "3",
            "--out", str(report_path),
        ])
        assert code == 0
        printed = capsys.readouterr().out
        assert "kd(linear-sum)" in printed
        [report] = load_reports(report_path)
        assert report.nn_overlap is not None
        assert report.config["family"] == "kd"

    def test_baseline_subcommands(self, workdir, capsys):
        rng = np.random.default_rng(0)
        targets, _ = clustered_embeddings(30, 6, 3, rng)
        emb = workdir / "emb.txt"
        save_embeddings(emb, make_vocab(30), targets)
        for argv, expect in [
            (["baseline", "full", "--embeddings", str(emb)], "full"),
            (["baseline", "lowrank", "--embeddings", str(emb), "--rank", "2"],
             "lowrank(r=2)"),
            (["baseline", "pq", "--embeddings", str(emb), "--subspaces", "2",
              "--centroids", "4"], "pq(2x4)"),
            (["baseline", "scalar", "--embeddings", str(emb), "--bits", "8"],
             "scalar(8bit)"),
            (["baseline", "random", "--embeddings", str(emb), "--alphabet", "4",
              "--length", "2", "--epochs", "1"], "random-codes"),
        ]:
            assert main(argv) == 0, argv
            assert expect in capsys.readouterr().out

    def test_sweep_command_writes_reports(self, workdir, capsys):
        report_path = workdir / "sweep.jsonl"
        code = main([
            "sweep", str(workdir / "run.cfg"),
            "--axis", "alphabet_size", "--values", "2,4",
            "--out", str(report_path),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "kd[alphabet_size=2]" in out
        assert len(load_reports(report_path)) == 2

    def test_probe_codes_groups_output(self, workdir, capsys):
        out = workdir / "run"
        main(["fit-codes", str(workdir / "run.cfg"), "--out-dir", str(out)])
        capsys.readouterr()
        assert main(["probe-codes", "--codes", str(out / "codes.txt")]) == 0
        printed = capsys.readouterr().out
        assert ":" in printed  # "<code>: symbols" lines

    def test_help_config_lists_keys(self, capsys):
        assert main(["fit-codes", "--help-config"]) == 0
        printed = capsys.readouterr().out
        for key in ("alphabet_size", "tau_init", "guidance_mode"):
            assert key in printed

    def test_errors_exit_nonzero_with_message(self, workdir, capsys):
        assert main(["fit-codes", str(workdir / "missing.cfg")]) == 1
        assert "error:" in capsys.readouterr().err
        bad = workdir / "bad.cfg"
        bad.write_text("alphabet_size = -3\n")
        assert main(["fit-codes", str(bad)]) == 1
        assert "error:" in capsys.readouterr().err
