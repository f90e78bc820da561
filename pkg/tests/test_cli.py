import json

import numpy as np
import pytest

from relkit import cli

TINY = {"d": 8, "d_k": 4, "d_s": 8, "hidden": 8, "decoder_width": 8}


def write_config(tmp_path, **kw):
    doc = {
        "task": {"kind": "same_different", "vocab_size": 10, "feature_dim": 10},
        "schedule": {"max_episodes": 80, "batch_size": 8, "eval_every": 40,
                     "eval_size": 16, "lr": 3e-3, "seed": 0},
        "archs": ["corelnet"],
        "seeds": [0],
        "models": {"corelnet": TINY},
    }
    doc.update(kw)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def test_unknown_top_level_key_exits_2(tmp_path):
    cfg = write_config(tmp_path, bogus=1)
    assert cli.main(["gen", "--config", cfg, "--count", "1"]) == 2


def test_unknown_task_key_exits_2(tmp_path):
    cfg = write_config(tmp_path, task={"kind": "same_different", "oops": 3})
    assert cli.main(["train", "--config", cfg, "--arch", "corelnet",
                     "--out", str(tmp_path / "o")]) == 2


def test_bad_json_exits_2(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    assert cli.main(["gen", "--config", str(path), "--count", "1"]) == 2


def test_gen_writes_parseable_lines(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "insts.jsonl"
    assert cli.main(["gen", "--config", cfg, "--count", "6", "--out", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").strip().splitlines()
    assert len(lines) == 6
    rec = json.loads(lines[0])
    assert rec["task"] == "same_different"
    assert len(rec["features"]) == 2


def test_train_eval_probe_roundtrip(tmp_path):
    cfg = write_config(tmp_path, task={"kind": "identity_rules", "vocab_size": 10,
                                       "feature_dim": 10},
                       archs=["esbn"], models={"esbn": TINY})
    out = tmp_path / "run"
    assert cli.main(["train", "--config", cfg, "--arch", "esbn", "--out", str(out)]) == 0
    assert (out / "params.npz").exists()
    assert (out / "runs.csv").exists()
    assert cli.main(["eval", "--config", cfg, "--model-dir", str(out),
                     "--side", "ood", "--count", "32"]) == 0
    assert cli.main(["probe", "--config", cfg, "--kind", "symbols",
                     "--model-dir", str(out), "--count", "10"]) == 0


def test_probe_isolation_runs(tmp_path):
    cfg = write_config(tmp_path)
    assert cli.main(["probe", "--config", cfg, "--kind", "isolation",
                     "--arch", "corelnet", "--count", "3"]) == 0


def test_compare_writes_reports_and_asserts(tmp_path):
    cfg = write_config(
        tmp_path,
        archs=["corelnet", "relationnet"],
        seeds=[0, 1],
        models={"corelnet": TINY, "relationnet": TINY},
        assertions={"ood_min": {"corelnet": 2.0}},  # impossible floor
    )
    out = tmp_path / "cmp"
    assert cli.main(["compare", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "runs.csv").exists()
    assert (out / "curves.svg").exists()
    assert cli.main(["compare", "--config", cfg, "--out", str(out), "--assert"]) == 4


def test_compare_reproducible_bytes(tmp_path):
    cfg = write_config(tmp_path, archs=["corelnet"], seeds=[0, 1])
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["compare", "--config", cfg, "--out", str(out_a)]) == 0
    assert cli.main(["compare", "--config", cfg, "--out", str(out_b)]) == 0
    assert (out_a / "runs.csv").read_bytes() == (out_b / "runs.csv").read_bytes()


def test_seed_override_changes_rows(tmp_path):
    cfg = write_config(tmp_path)
    out_a, out_b = tmp_path / "s0", tmp_path / "s7"
    assert cli.main(["train", "--config", cfg, "--arch", "corelnet",
                     "--out", str(out_a)]) == 0
    assert cli.main(["train", "--config", cfg, "--arch", "corelnet",
                     "--out", str(out_b), "--seed", "7"]) == 0
    assert (out_a / "runs.csv").read_bytes() != (out_b / "runs.csv").read_bytes()


def test_ib_verify_outputs(tmp_path):
    out = tmp_path / "ib"
    assert cli.main(["ib-verify", "--alphabet", "2", "--length", "3",
                     "--beta", "1.0", "--out", str(out)]) == 0
    text = (out / "ib_report.txt").read_text(encoding="utf-8")
    assert "sufficiency gap" in text
    lines = (out / "ib_channels.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "channel,i_xz,i_zy,objective"
    assert any(l.startswith("equality-relation") for l in lines)


def test_report_rerenders_from_csv(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "cmp"
    assert cli.main(["compare", "--config", cfg, "--out", str(out)]) == 0
    out2 = tmp_path / "re"
    assert cli.main(["report", "--runs", str(out / "runs.csv"),
                     "--out", str(out2)]) == 0
    assert (out2 / "curves.svg").exists()
