"""End-to-end command tests driving cli.main in process."""

import json
from pathlib import Path

import jsonschema
import pytest

from taboo import cli
from taboo.container import load_container
from taboo.corpus import read_tree_file

SCHEMA = json.loads(
    (Path(__file__).resolve().parent.parent / "docs" / "api-schema.json")
    .read_text(encoding="utf-8"))


def write_corpus(path, rows) -> Path:
    lines = []
    for label, info_type, doc_id, tokens in rows:
        sexpr = "(S " + " ".join(tokens) + ")"
        lines.append(f"{label}\t{info_type}\t{doc_id}\t{sexpr}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return Path(path)


def rows_single(n=12, info_type="SYNTH"):
    rows = []
    for i in range(n):
        if i % 2 == 0:
            tokens = ["we", "share", "the", "zkey", "plan", f"w{i}"]
            rows.append((1, info_type, f"d{i}", tokens))
        else:
            tokens = ["lunch", "was", "fine", "at", "noon", f"w{i}"]
            rows.append((0, info_type, f"d{i}", tokens))
    return rows


@pytest.fixture
def train_file(tmp_path):
    return write_corpus(tmp_path / "train.tsv", rows_single(12))


@pytest.fixture
def dev_file(tmp_path):
    return write_corpus(tmp_path / "dev.tsv", rows_single(4))


class TestPrepare:
    def test_writes_three_splits(self, tmp_path, capsys):
        src = write_corpus(tmp_path / "raw.tsv", rows_single(10))
        out = tmp_path / "out"
        rc = cli.main(["prepare", "--input", str(src), "--out", str(out)])
        assert rc == 0
        counts = {}
        for name in ("train", "dev", "test"):
            assert (out / f"{name}.tsv").exists()
            counts[name] = len(read_tree_file(out / f"{name}.tsv"))
        assert sum(counts.values()) == 10
        line = capsys.readouterr().out
        assert "kept=10" in line and "removed_short=0" in line

    def test_same_seed_is_byte_identical(self, tmp_path):
        src = write_corpus(tmp_path / "raw.tsv", rows_single(10))
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            assert cli.main(["prepare", "--input", str(src),
                             "--out", str(out), "--seed", "3"]) == 0
            outs.append(out)
        for name in ("train", "dev", "test"):
            assert (outs[0] / f"{name}.tsv").read_bytes() == \
                (outs[1] / f"{name}.tsv").read_bytes()

    def test_all_train_split(self, tmp_path):
        src = write_corpus(tmp_path / "raw.tsv", rows_single(8))
        out = tmp_path / "out"
        rc = cli.main(["prepare", "--input", str(src), "--out", str(out),
                       "--splits", "1,0,0"])
        assert rc == 0
        assert len(read_tree_file(out / "train.tsv")) == 8
        assert read_tree_file(out / "dev.tsv") == []
        assert read_tree_file(out / "test.tsv") == []

    def test_length_filter_reports_short(self, tmp_path, capsys):
        rows = rows_single(6) + [(0, "SYNTH", "dx", ["too", "short"])]
        src = write_corpus(tmp_path / "raw.tsv", rows)
        rc = cli.main(["prepare", "--input", str(src),
                       "--out", str(tmp_path / "out")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "removed_short=1" in out and "kept=6" in out

    def test_mixed_types_need_silver_flag(self, tmp_path, capsys):
        rows = rows_single(4, "TYPE_A") + rows_single(4, "TYPE_B")
        src = write_corpus(tmp_path / "raw.tsv", rows)
        rc = cli.main(["prepare", "--input", str(src),
                       "--out", str(tmp_path / "out")])
        assert rc == 1
        err = capsys.readouterr().err
        assert err.startswith("error\tCorpusError\t")
        assert "--silver" in err

    def test_silver_builds_balanced_single_type(self, tmp_path):
        rows = rows_single(6, "TYPE_A") + rows_single(6, "TYPE_B")
        src = write_corpus(tmp_path / "raw.tsv", rows)
        out = tmp_path / "out"
        rc = cli.main(["prepare", "--input", str(src), "--out", str(out),
                       "--silver", "TYPE_A"])
        assert rc == 0
        records = []
        for name in ("train", "dev", "test"):
            records.extend(read_tree_file(out / f"{name}.tsv"))
        assert len(records) == 12
        assert {info_type for _, info_type, _, _ in records} == {"TYPE_A"}
        labels = [label for label, _, _, _ in records]
        assert labels.count(1) == labels.count(0) == 6

    def test_unknown_flag_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            cli.main(["prepare", "--input", "x", "--out", "y", "--frob"])
        assert exc.value.code == 2


class TestTrain:
    def test_infrule_container_stores_thresholds(self, tmp_path, train_file,
                                                 capsys):
        out = tmp_path / "rules.json"
        rc = cli.main(["train", "--model", "infrule",
                       "--train", str(train_file), "--out", str(out),
                       "--min-support", "2", "--min-confidence", "0.6"])
        assert rc == 0
        assert "saved=" in capsys.readouterr().out
        container = load_container(out)
        assert container.kind == "infrule"
        assert container.info_type == "SYNTH"
        assert container.model.min_support_count == 2
        assert container.model.min_confidence == 0.6
        assert "zkey" in container.model.rules

    @pytest.mark.parametrize("kind", ["infrule", "csan", "keyword-max",
                                      "recnn", "selective"])
    def test_every_kind_round_trips(self, tmp_path, train_file, dev_file,
                                    kind):
        out = tmp_path / f"{kind}.json"
        argv = ["train", "--model", kind, "--train", str(train_file),
                "--dev", str(dev_file), "--out", str(out)]
        if kind in ("recnn", "selective"):
            argv += ["--dim", "4", "--hidden", "5", "--epochs", "2",
                     "--lr", "0.05", "--batch-size", "4",
                     "--probe-interval", "100", "--seed", "0"]
        if kind == "selective":
            argv += ["--k", "2", "--cutoff", "inf", "--pretrain-budget", "3"]
        assert cli.main(argv) == 0
        container = load_container(out)
        assert container.kind == kind.replace("-", "_")

    def test_network_without_dev_fails(self, tmp_path, train_file, capsys):
        rc = cli.main(["train", "--model", "recnn",
                       "--train", str(train_file),
                       "--out", str(tmp_path / "m.json")])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error\tTrainError\t")

    def test_missing_train_file_fails(self, tmp_path, capsys):
        rc = cli.main(["train", "--model", "infrule",
                       "--train", str(tmp_path / "absent.tsv"),
                       "--out", str(tmp_path / "m.json")])
        assert rc == 1
        assert "error\t" in capsys.readouterr().err


@pytest.fixture
def rule_container(tmp_path, train_file):
    out = tmp_path / "rules.json"
    assert cli.main(["train", "--model", "infrule",
                     "--train", str(train_file), "--out", str(out)]) == 0
    return out


class TestEval:
    def test_table_output(self, tmp_path, rule_container, capsys):
        data = write_corpus(tmp_path / "eval.tsv", rows_single(8))
        capsys.readouterr()
        rc = cli.main(["eval", "--model", str(rule_container),
                       "--data", str(data)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "accuracy" in out

    def test_json_output(self, tmp_path, rule_container, capsys):
        data = write_corpus(tmp_path / "eval.tsv", rows_single(8))
        capsys.readouterr()
        rc = cli.main(["eval", "--model", str(rule_container),
                       "--data", str(data), "--json"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["accuracy"] == 1.0


class TestCompare:
    def test_model_against_itself(self, tmp_path, rule_container, capsys):
        data = write_corpus(tmp_path / "eval.tsv", rows_single(8))
        capsys.readouterr()
        rc = cli.main(["compare", "--model-a", str(rule_container),
                       "--model-b", str(rule_container),
                       "--data", str(data), "--json"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["only_identified_a"] == 0.0
        assert payload["only_identified_b"] == 0.0
        assert payload["errors_only_a"] == 0
        assert payload["sentences"] == 8


class TestPredict:
    TEXT = "We share the zkey plan today. Lunch was fine."

    def test_tsv_lines(self, rule_container, capsys):
        capsys.readouterr()
        rc = cli.main(["predict", "--model", str(rule_container),
                       "--text", self.TEXT])
        assert rc == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 2
        first = lines[0].split("\t")
        assert first[0] == "1"
        assert first[4] == "scored"
        assert first[5] == "We share the zkey plan today."
        assert lines[1].split("\t")[0] == "0"

    def test_json_matches_schema(self, rule_container, capsys):
        capsys.readouterr()
        rc = cli.main(["predict", "--model", str(rule_container),
                       "--text", self.TEXT, "--json"])
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        jsonschema.validate(
            payload, {**SCHEMA, "$ref": "#/definitions/predict_response"})
        assert [s["label"] for s in payload["sentences"]] == [1, 0]

    def test_input_file(self, tmp_path, rule_container, capsys):
        doc = tmp_path / "doc.txt"
        doc.write_text(self.TEXT, encoding="utf-8")
        capsys.readouterr()
        rc = cli.main(["predict", "--model", str(rule_container),
                       "--input", str(doc)])
        assert rc == 0
        assert len(capsys.readouterr().out.splitlines()) == 2

    def test_text_and_input_conflict(self, tmp_path, rule_container, capsys):
        capsys.readouterr()
        rc = cli.main(["predict", "--model", str(rule_container),
                       "--text", "a b.", "--input", str(tmp_path / "f")])
        assert rc == 1
        assert "exactly one" in capsys.readouterr().err


class TestConfigFile:
    def test_config_supplies_defaults(self, tmp_path, train_file):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# mining thresholds\nmin-support = 3\n"
                       "min-confidence = 0.7\n", encoding="utf-8")
        out = tmp_path / "m.json"
        rc = cli.main(["train", "--config", str(cfg), "--model", "infrule",
                       "--train", str(train_file), "--out", str(out)])
        assert rc == 0
        model = load_container(out).model
        assert model.min_support_count == 3
        assert model.min_confidence == 0.7

    def test_explicit_flag_wins(self, tmp_path, train_file):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("min-support = 3\n", encoding="utf-8")
        out = tmp_path / "m.json"
        rc = cli.main(["train", "--config", str(cfg), "--model", "infrule",
                       "--train", str(train_file), "--out", str(out),
                       "--min-support", "4"])
        assert rc == 0
        assert load_container(out).model.min_support_count == 4

    def test_unknown_key_exits_2(self, tmp_path, train_file):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("frobnicate = 1\n", encoding="utf-8")
        with pytest.raises(SystemExit) as exc:
            cli.main(["train", "--config", str(cfg), "--model", "infrule",
                      "--train", str(train_file),
                      "--out", str(tmp_path / "m.json")])
        assert exc.value.code == 2

    def test_malformed_line_fails(self, tmp_path, train_file, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("just words\n", encoding="utf-8")
        rc = cli.main(["train", "--config", str(cfg), "--model", "infrule",
                       "--train", str(train_file),
                       "--out", str(tmp_path / "m.json")])
        assert rc == 1
        assert "expected key = value" in capsys.readouterr().err


class TestServe:
    def test_no_models_dir_fails(self, monkeypatch, capsys):
        monkeypatch.delenv("TABOO_MODELS_DIR", raising=False)
        rc = cli.main(["serve"])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error\tContainerError\t")
