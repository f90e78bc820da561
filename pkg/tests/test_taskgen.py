import json

import numpy as np
import pytest

from relkit import taskgen as tg


def vocab40():
    return tg.make_vocab(40, 40, "one-hot", seed=0)


def split40():
    return tg.split_vocab(vocab40(), 0.5, seed=1)


# ---------------------------------------------------------------------------
# vocabulary


def test_one_hot_vocab_is_basis():
    v = tg.make_vocab(4, 4, "one-hot", seed=3)
    assert np.array_equal(v.features, np.eye(4))


def test_vocab_same_seed_identical():
    a = tg.make_vocab(12, 9, "random-gaussian", seed=5)
    b = tg.make_vocab(12, 9, "random-gaussian", seed=5)
    assert a.features.tobytes() == b.features.tobytes()


def test_binary_vocab_pairwise_distinct():
    v = tg.make_vocab(40, 12, "random-binary", seed=7)
    for i in range(40):
        for j in range(i + 1, 40):
            assert np.sum(v.features[i] != v.features[j]) > 0


def test_one_hot_requires_wide_features():
    with pytest.raises(tg.TaskError):
        tg.make_vocab(5, 4, "one-hot", seed=0)


# ---------------------------------------------------------------------------
# split


def test_split_half_of_forty():
    s = split40()
    assert len(s.train_ids) == 20 and len(s.ood_ids) == 20


def test_split_disjoint_and_covering():
    s = split40()
    assert set(s.train_ids) & set(s.ood_ids) == set()
    assert set(s.train_ids) | set(s.ood_ids) == set(range(40))


def test_split_same_seed_identical():
    v = vocab40()
    assert tg.split_vocab(v, 0.5, 9) == tg.split_vocab(v, 0.5, 9)


def test_split_empty_side_rejected():
    with pytest.raises(tg.TaskError):
        tg.split_vocab(vocab40(), 0.001, seed=0)


# ---------------------------------------------------------------------------
# same/different


def test_same_pair_labeled_same():
    v = vocab40()
    got = tg.gen_same_different(v, [3, 7], count=50, seed=2)
    for inst in got:
        a, b = inst.object_ids
        assert inst.label == (1 if a == b else 0)


def test_same_different_balance():
    v = vocab40()
    s = split40()
    insts = tg.gen_same_different(v, s.train_ids, count=1000, seed=3)
    frac = np.mean([i.label for i in insts])
    assert abs(frac - 0.5) <= 0.02


def test_same_different_undersized_side():
    with pytest.raises(tg.TaskError):
        tg.gen_same_different(vocab40(), [1], count=4, seed=0)


# ---------------------------------------------------------------------------
# identity rules


def test_identity_rule_aba_label():
    v = vocab40()
    insts = tg.gen_identity_rules(v, split40().train_ids, count=400, seed=4)
    for inst in insts:
        a, b, third, c, d, c0, c1 = inst.object_ids
        correct = c if third == a else d
        assert third in (a, b)
        assert {c0, c1} == {c, d}
        assert (c0, c1)[inst.label] == correct
        assert len({a, b, c, d}) == 4


def test_identity_rules_candidate_position_balance():
    v = vocab40()
    insts = tg.gen_identity_rules(v, split40().train_ids, count=1000, seed=5)
    frac = np.mean([i.label for i in insts])
    assert abs(frac - 0.5) <= 0.03


def test_identity_rules_undersized_side():
    with pytest.raises(tg.TaskError):
        tg.gen_identity_rules(vocab40(), [1, 2, 3], count=4, seed=0)


# ---------------------------------------------------------------------------
# counting


def test_counting_single_object():
    v = vocab40()
    insts = tg.gen_counting(v, split40().train_ids, max_count=10, count=20, seed=6,
                            stage=1)
    for inst in insts:
        assert inst.label == 0
        assert len(inst.object_ids) == 2
        assert inst.object_ids[-1] == tg.QUERY_ID


def test_counting_label_matches_length():
    v = vocab40()
    insts = tg.gen_counting(v, split40().train_ids, max_count=10, count=200, seed=7,
                            stage=10)
    for inst in insts:
        assert inst.label == len(inst.object_ids) - 2


def test_counting_stage_limits_sizes():
    v = vocab40()
    insts = tg.gen_counting(v, split40().train_ids, max_count=10, count=10_000, seed=8,
                            stage=3)
    sizes = {len(i.object_ids) - 1 for i in insts}
    assert max(sizes) <= 3


def test_counting_exact_n():
    v = vocab40()
    insts = tg.gen_counting(v, split40().train_ids, max_count=10, count=30, seed=9,
                            stage=10, exact_n=7)
    assert all(i.label == 6 for i in insts)


def test_counting_bad_stage():
    with pytest.raises(tg.TaskError):
        tg.gen_counting(vocab40(), split40().train_ids, max_count=10, count=1, seed=0,
                        stage=0)


# ---------------------------------------------------------------------------
# sorting


def insertion_sort_perm(vals):
    order = list(range(len(vals)))
    for i in range(1, len(order)):
        j = i
        while j > 0 and vals[order[j - 1]] > vals[order[j]]:
            order[j - 1], order[j] = order[j], order[j - 1]
            j -= 1
    return tuple(order)


def test_sorting_identity_and_reversal():
    v = vocab40()
    insts = tg.gen_sorting(v, split40().train_ids, length=5, count=200, seed=10)
    for inst in insts:
        attrs = inst.episode[:, -1]
        if np.all(np.diff(attrs) > 0):
            assert inst.label == tuple(range(5))
        if np.all(np.diff(attrs) < 0):
            assert inst.label == tuple(reversed(range(5)))


def test_sorting_against_comparison_sort_oracle():
    v = vocab40()
    insts = tg.gen_sorting(v, split40().train_ids, length=6, count=100, seed=11)
    for inst in insts:
        assert inst.label == insertion_sort_perm(list(inst.episode[:, -1]))


def test_sorting_attribute_channel_appended():
    v = vocab40()
    spec = tg.sorting_spec(v, 5)
    inst = tg.gen_sorting(v, split40().train_ids, length=5, count=1, seed=12)[0]
    assert inst.episode.shape == (5, spec.d_in)
    assert spec.d_in == v.d_in + 1


def test_sorting_length_checks():
    with pytest.raises(tg.TaskError):
        tg.gen_sorting(vocab40(), split40().train_ids, length=1, count=1, seed=0)
    with pytest.raises(tg.TaskError):
        tg.gen_sorting(vocab40(), [1, 2], length=3, count=1, seed=0)


# ---------------------------------------------------------------------------
# stream properties


def test_streams_deterministic_per_seed():
    v = vocab40()
    s = split40()
    a = tg.gen_identity_rules(v, s.train_ids, count=25, seed=13)
    b = tg.gen_identity_rules(v, s.train_ids, count=25, seed=13)
    assert all(x.object_ids == y.object_ids and x.label == y.label for x, y in zip(a, b))
    c = tg.gen_identity_rules(v, s.train_ids, count=25, seed=14)
    assert any(x.object_ids != y.object_ids for x, y in zip(a, c))


def test_split_hygiene_over_many_instances():
    v = vocab40()
    s = split40()
    ood = set(s.ood_ids)
    total = 0
    for seed in range(4):
        for insts in (
            tg.gen_same_different(v, s.train_ids, count=10_000, seed=seed),
            tg.gen_identity_rules(v, s.train_ids, count=10_000, seed=seed),
            tg.gen_counting(v, s.train_ids, 10, count=2_500, seed=seed, stage=10),
            tg.gen_sorting(v, s.train_ids, 5, count=2_500, seed=seed),
        ):
            for inst in insts:
                total += len(inst.object_ids)
                assert not (set(inst.object_ids) - {tg.QUERY_ID}) & ood
    assert total > 100_000


def test_instance_record_roundtrip():
    v = vocab40()
    inst = tg.gen_sorting(v, split40().train_ids, length=4, count=1, seed=15)[0]
    rec = json.loads(tg.instance_record(inst))
    assert rec["task"] == "sorting"
    assert rec["label"] == list(inst.label)
    assert np.allclose(np.array(rec["features"]), inst.episode)
