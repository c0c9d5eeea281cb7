import json

import pytest

from narrationdep.cli import main
from narrationdep.data import load_jsonl


@pytest.fixture
def synth_file(tmp_path):
    path = tmp_path / "data.jsonl"
    code = main(["synth", "--out", str(path), "--n-users", "12",
                 "--tweets-per-user", "10", "--d-w", "6", "--n-themes", "3",
                 "--seed", "0"])
    assert code == 0
    return path


def run(args):
    return main([str(a) for a in args])


class TestSynthIngest:
    def test_synth_writes_loadable_file(self, synth_file):
        ds = load_jsonl(synth_file)
        assert len(ds.users) == 12
        assert ds.d_w == 6

    def test_synth_writes_provenance(self, synth_file):
        prov = json.loads((synth_file.parent / "data.jsonl.provenance.json").read_text())
        assert "config_hash" in prov and prov["seed"] == 0
        assert "narrationdep" in prov["versions"]

    def test_ingest_stats(self, synth_file, capsys):
        assert run(["ingest", "--data", synth_file]) == 0
        stats = json.loads(capsys.readouterr().out)
        assert stats["users"] == 12
        assert stats["depressed"] + stats["non_depressed"] == 12

    def test_missing_data_path_exits_2(self, tmp_path, capsys):
        code = run(["ingest", "--data", tmp_path / "absent.jsonl"])
        assert code == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "data"
        assert "absent.jsonl" in err["message"]

    def test_missing_subcommand_exits_1(self, capsys):
        assert main([]) == 1
        assert json.loads(capsys.readouterr().err)["error"] == "usage"

    def test_bad_flag_value_exits_1(self, capsys):
        assert main(["synth", "--n-users", "many"]) == 1


class TestClusterTrainEvaluate:
    def test_cluster_output_schema(self, synth_file, tmp_path):
        out = tmp_path / "assignments.jsonl"
        assert run(["cluster", "--data", synth_file, "--out", out,
                    "--min-cluster-size", "2", "--min-tweets", "1"]) == 0
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(lines) == 12
        assert all({"user_id", "labels", "E", "params"} <= set(l) for l in lines)

    def test_train_then_evaluate_checkpoint(self, synth_file, tmp_path, capsys):
        ckpt = tmp_path / "model.ckpt.json"
        assert run(["train", "--data", synth_file, "--out", ckpt,
                    "--epochs", "2", "--d-hidden", "3", "--min-tweets", "1",
                    "--min-cluster-size", "2"]) == 0
        assert ckpt.exists() and ckpt.with_suffix(".json.bin").exists()
        capsys.readouterr()
        report = tmp_path / "holdout.json"
        assert run(["evaluate", "--data", synth_file, "--checkpoint", ckpt,
                    "--out", report, "--d-hidden", "3", "--min-tweets", "1",
                    "--min-cluster-size", "2"]) == 0
        payload = json.loads(report.read_text())
        assert "holdout" in payload and "config_hash" in payload

    def test_evaluate_refuses_dim_mismatch(self, synth_file, tmp_path, capsys):
        ckpt = tmp_path / "model.ckpt.json"
        run(["train", "--data", synth_file, "--out", ckpt, "--epochs", "1",
             "--d-hidden", "3", "--min-tweets", "1", "--min-cluster-size", "2"])
        capsys.readouterr()
        code = run(["evaluate", "--data", synth_file, "--checkpoint", ckpt,
                    "--d-hidden", "5", "--min-tweets", "1"])
        assert code == 2
        err = json.loads(capsys.readouterr().err)
        assert "dims" in err["message"]

    def test_train_determinism_bit_identical(self, synth_file, tmp_path):
        a = tmp_path / "one" / "m.json"
        b = tmp_path / "two" / "m.json"
        a.parent.mkdir()
        b.parent.mkdir()
        for out in (a, b):
            assert run(["train", "--data", synth_file, "--out", out,
                        "--epochs", "2", "--d-hidden", "3", "--seed", "7",
                        "--min-tweets", "1", "--min-cluster-size", "2"]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert (a.parent / "m.json.bin").read_bytes() == (b.parent / "m.json.bin").read_bytes()


class TestConfigPrecedence:
    def test_flags_override_file(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n_users": 4, "d_w": 3}))
        out = tmp_path / "d.jsonl"
        assert run(["synth", "--config", cfg, "--out", out, "--n-users", "6"]) == 0
        ds = load_jsonl(out)
        assert len(ds.users) == 6  # flag wins
        assert ds.d_w == 3         # file beats default

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"nonsense": 1}))
        assert run(["synth", "--config", cfg, "--out", tmp_path / "x.jsonl"]) == 1


class TestExplainCommand:
    def test_explain_produces_report(self, synth_file, tmp_path, capsys):
        ckpt = tmp_path / "model.ckpt.json"
        run(["train", "--data", synth_file, "--out", ckpt, "--epochs", "1",
             "--d-hidden", "3", "--min-tweets", "1", "--min-cluster-size", "2"])
        capsys.readouterr()
        out = tmp_path / "explain.json"
        assert run(["explain", "--data", synth_file, "--checkpoint", ckpt,
                    "--user-id", "u0000", "--out", out, "--d-hidden", "3",
                    "--min-cluster-size", "2"]) == 0
        payload = json.loads(out.read_text())
        assert payload["user_id"] == "u0000"
        assert abs(sum(payload["salience"]) - 1.0) < 1e-9
        assert len(payload["weekday_profile"]) == 7
        assert len(payload["hourly_profile"]) == 24

    def test_explain_unknown_user_exits_2(self, synth_file, tmp_path, capsys):
        ckpt = tmp_path / "model.ckpt.json"
        run(["train", "--data", synth_file, "--out", ckpt, "--epochs", "1",
             "--d-hidden", "3", "--min-tweets", "1", "--min-cluster-size", "2"])
        capsys.readouterr()
        code = run(["explain", "--data", synth_file, "--checkpoint", ckpt,
                    "--user-id", "ghost", "--out", tmp_path / "x.json",
                    "--d-hidden", "3"])
        assert code == 2


class TestPipeline:
    def test_end_to_end(self, tmp_path, capsys):
        data = tmp_path / "data.jsonl"
        run(["synth", "--out", data, "--n-users", "15", "--tweets-per-user",
             "10", "--d-w", "6", "--n-themes", "3", "--seed", "1"])
        out_dir = tmp_path / "run"
        code = run(["pipeline", "--data", data, "--out-dir", out_dir,
                    "--epochs", "6", "--lr", "0.005", "--batch-size", "8",
                    "--d-hidden", "3", "--folds", "3", "--min-tweets", "1",
                    "--min-cluster-size", "2"])
        assert code == 0
        for artifact in ("assignments.jsonl", "model.ckpt.json",
                         "metrics.json", "report.json"):
            assert (out_dir / artifact).exists()
            assert (out_dir / f"{artifact}.provenance.json").exists()
        metrics = json.loads((out_dir / "metrics.json").read_text())
        assert "cv" in metrics and "mean" in metrics["cv"]
