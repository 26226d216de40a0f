"""
Command-line surface and exit codes
"""
import json
import shutil

import pytest

from main import cli_main

SMALL = {"epochs": 2, "batch_size": 8, "e": 8, "g": 4, "c": 3, "K": 6, "memory_size_train": 3,
         "memory_size_eval": 8, "patience": 5}


def run(capsys, *argv):
    code = cli_main(list(argv) + ["--log-file", ""])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def trained(workspace):
    """synth -> ingest -> train once for the whole module"""
    raw, data, ckpt = workspace / "raw", workspace / "artifacts", workspace / "model.ckpt"
    config = workspace / "train.json"
    config.write_text(json.dumps(SMALL))
    common = ["--log-file", "", "--format", "json"]
    assert cli_main(["synth", "--out", str(raw), "--users", "12", "--items", "24", "--topics", "2", "--vocab", "30",
                     "--topics-per-user", "1", "--likes-per-topic", "6", "--doc-length", "12", "--seed", "3"]
                    + common) == 0
    assert cli_main(["ingest", "--interactions", str(raw / "interactions.tsv"), "--items", str(raw / "items.jsonl"),
                     "--out", str(data), "--min-freq", "1", "--max-len", "12", "--seed", "0"] + common) == 0
    assert cli_main(["train", "--data", str(data), "--config", str(config), "--out", str(ckpt), "--seed", "5"]
                    + common) == 0
    return data, ckpt


def test_missing_subcommand(capsys):
    code, _, err = run(capsys)
    assert code == 1
    assert "Error" in err


def test_help_exits_zero(capsys):
    assert cli_main(["--help"]) == 0
    assert "Exit codes" in capsys.readouterr().out


def test_invalid_config_field(capsys, tmp_path):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"epochs": 1, "momentum": 0.9}))
    code, _, err = run(capsys, "train", "--data", str(tmp_path), "--config", str(config),
                       "--out", str(tmp_path / "x.ckpt"))
    assert code == 1
    assert "momentum" in err


def test_missing_data_directory(capsys, tmp_path):
    code, _, err = run(capsys, "evaluate", "--data", str(tmp_path / "nowhere"), "--checkpoint",
                       str(tmp_path / "none.ckpt"))
    assert code == 2
    assert err.startswith("Error:")


def test_gradcheck_passes(capsys):
    code, out, _ = run(capsys, "gradcheck", "--probes", "10", "--format", "json")
    assert code == 0
    assert json.loads(out)["passed"] is True


def test_train_writes_checkpoint_and_metrics(trained):
    data, ckpt = trained
    assert ckpt.exists()
    records = ckpt.with_name("model.metrics.jsonl").read_text().splitlines()
    assert len(records) == 2


def test_evaluate_json(capsys, trained):
    data, ckpt = trained
    code, out, _ = run(capsys, "evaluate", "--data", str(data), "--checkpoint", str(ckpt), "--recall-at", "5,10",
                       "--ap-mode", "standard", "--format", "json")
    assert code == 0
    report = json.loads(out)
    assert set(report["aggregate"]) == {"recall@5", "recall@10", "map"}
    assert report["ap_mode"] == "standard"
    assert report["metadata"]["seed"] == 5


def test_recommend_and_explain(capsys, trained):
    data, ckpt = trained
    dataset = json.loads((data / "dataset.json").read_text())
    user = dataset["users"][0]

    code, out, _ = run(capsys, "recommend", "--data", str(data), "--checkpoint", str(ckpt), "--user", user,
                       "--top", "3", "--explain", "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert len(payload["items"]) == 3
    item = payload["items"][0]["item_id"]
    assert payload["explanations"][0]["item_id"] == item

    code, out, _ = run(capsys, "explain", "--data", str(data), "--checkpoint", str(ckpt), "--user", user,
                       "--item", item)
    assert code == 0
    assert "Because you liked:" in out


def test_unknown_user_is_a_data_error(capsys, trained):
    data, ckpt = trained
    code, _, err = run(capsys, "recommend", "--data", str(data), "--checkpoint", str(ckpt), "--user", "ghost")
    assert code == 2
    assert "ghost" in err


def test_inspect(capsys, trained):
    _, ckpt = trained
    code, out, _ = run(capsys, "inspect", "--checkpoint", str(ckpt))
    assert code == 0
    assert "format version: 1" in out
    assert "user.kernels" in out


def _bad_dataset(path):
    (path / "dataset.json").write_text("{not json")


def _bad_vocab_index(path):
    lines = (path / "vocab.tsv").read_text().splitlines()
    lines[1] = "<pad>\tzero\t0"
    (path / "vocab.tsv").write_text("\n".join(lines) + "\n")


def _bad_documents(path):
    (path / "documents.npz").write_bytes(b"not a zip archive")


def _manifest_without_splits(path):
    (path / "splits.json").write_text(json.dumps({"seed": 0}))


def _vocab_not_utf8(path):
    (path / "vocab.tsv").write_bytes((path / "vocab.tsv").read_bytes() + b"\xff\xfe\t7\t1\n")


@pytest.mark.parametrize("corrupt", [_bad_dataset, _bad_vocab_index, _bad_documents, _manifest_without_splits,
                                     _vocab_not_utf8])
def test_corrupt_artifacts_are_data_errors(capsys, trained, tmp_path, corrupt):
    data, ckpt = trained
    broken = tmp_path / "broken"
    shutil.copytree(data, broken)
    corrupt(broken)
    user = json.loads((data / "dataset.json").read_text())["users"][0]
    for argv in (["evaluate", "--data", str(broken), "--checkpoint", str(ckpt)],
                 ["recommend", "--data", str(broken), "--checkpoint", str(ckpt), "--user", user]):
        code, _, err = run(capsys, *argv)
        assert code == 2
        assert err.startswith("Error:")
        assert "Traceback" not in err


def test_items_file_not_utf8(capsys, tmp_path):
    interactions = tmp_path / "ratings.tsv"
    interactions.write_text("u1\ti1\t5\nu1\ti2\t5\nu1\ti3\t5\n")
    items = tmp_path / "items.jsonl"
    items.write_bytes(b'{"item_id": "i1", "text": "caf\xe9 au lait"}\n')
    code, _, err = run(capsys, "ingest", "--interactions", str(interactions), "--items", str(items),
                       "--out", str(tmp_path / "out"))
    assert code == 2
    assert "UTF-8" in err


def test_interactions_file_not_utf8(capsys, tmp_path):
    interactions = tmp_path / "ratings.tsv"
    interactions.write_bytes(b"u1\ti\xff1\t5\n")
    items = tmp_path / "items.jsonl"
    items.write_text('{"item_id": "i1", "text": "coffee"}\n')
    code, _, err = run(capsys, "ingest", "--interactions", str(interactions), "--items", str(items),
                       "--out", str(tmp_path / "out"))
    assert code == 2
    assert "UTF-8" in err
