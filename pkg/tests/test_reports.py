import re

import numpy as np
import pytest

from relkit import harness as hz
from relkit import reports as rp


def fixed_record(arch="corelnet", seed=3):
    rec = hz.RunRecord(arch=arch, seed=seed, config_hash="deadbeef")
    for i in range(3):
        rec.rows.append({
            "episode": (i + 1) * 100,
            "train_accuracy": 0.5 + 0.1 * i,
            "train_loss": 0.7 - 0.1 * i,
            "ood_accuracy": 0.4 + 0.1 * i,
            "ood_loss": 0.8 - 0.1 * i,
        })
    return rec


def test_empty_report_is_header_only(tmp_path):
    path = tmp_path / "runs.csv"
    rp.write_runs_csv([], path)
    assert path.read_text(encoding="utf-8") == "architecture,seed,episode,split,accuracy,loss\n"


def test_runs_csv_golden_and_stable(tmp_path):
    rec = fixed_record()
    text1 = rp.runs_csv_text([rec])
    text2 = rp.runs_csv_text([rec])
    assert text1 == text2
    want_first = "corelnet,3,100,ood,0.4,0.8"
    assert text1.splitlines()[1] == want_first
    assert "\r" not in text1


def test_runs_csv_sorted_by_arch_seed_episode_split():
    recs = [fixed_record("esbn", 1), fixed_record("corelnet", 2), fixed_record("corelnet", 0)]
    rows = rp.run_rows(recs)
    keys = [(r[0], r[1], r[2], r[3]) for r in rows]
    assert keys == sorted(keys)


def test_csv_roundtrip(tmp_path):
    path = tmp_path / "runs.csv"
    rp.write_runs_csv([fixed_record()], path)
    rows = rp.read_runs_csv(path)
    assert len(rows) == 6
    assert rows[0]["architecture"] == "corelnet"
    assert rows[0]["split"] == "ood"
    assert rows[0]["accuracy"] == pytest.approx(0.4)


def check_svg_well_formed(text):
    """Minimal structural validation: one root, balanced tags."""
    assert text.startswith("<svg") and text.rstrip().endswith("</svg>")
    stack = []
    for m in re.finditer(r"<(/?)([a-zA-Z][a-zA-Z0-9]*)[^>]*?(/?)>", text):
        closing, name, selfclose = m.group(1), m.group(2), m.group(3)
        if selfclose:
            continue
        if closing:
            assert stack and stack.pop() == name, f"unbalanced </{name}>"
        else:
            stack.append(name)
    assert stack == []
    assert text.count("<svg") == 1


def test_curves_svg_well_formed(tmp_path):
    path = tmp_path / "runs.csv"
    rp.write_runs_csv([fixed_record(), fixed_record("esbn", 0)], path)
    rows = rp.read_runs_csv(path)
    svg = rp.curves_svg(rows)
    check_svg_well_formed(svg)
    assert "accuracy" in svg and "training episodes" in svg
    assert svg.count("<polyline") == 2


def test_export_report_reproducible(tmp_path):
    report = hz.ComparisonReport(experiment_hash="h", records=[fixed_record()],
                                 stats={"corelnet": {
                                     "median_episodes_to_criterion": 100.0,
                                     "criterion_censored_runs": 0,
                                     "median_best_ood": 0.6,
                                     "median_final_ood": 0.6,
                                     "aborted_runs": 0}},
                                 ratios={})
    p1 = rp.export_report(report, tmp_path / "a")
    p2 = rp.export_report(report, tmp_path / "b")
    assert p1["runs"].read_bytes() == p2["runs"].read_bytes()
    assert p1["curves"].read_bytes() == p2["curves"].read_bytes()
    assert "corelnet" in p1["summary"].read_text(encoding="utf-8")
