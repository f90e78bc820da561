"""Seeded synthetic generators for the four relational tasks.

Objects are feature vectors drawn from a vocabulary that is split into
disjoint train/OOD id sets. Every generator is a pure function of its
configuration and seed, and labels are correct by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class TaskError(ValueError):
    """Invalid task configuration (undersized side, bad stage, ...)."""


QUERY_ID = -1  # reserved id for the counting query token


@dataclass(frozen=True)
class ObjectVocabulary:
    features: np.ndarray  # n x d_in, row i belongs to object id i
    kind: str
    seed: int

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def d_in(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class SplitSpec:
    train_ids: tuple[int, ...]
    ood_ids: tuple[int, ...]

    def __post_init__(self):
        if set(self.train_ids) & set(self.ood_ids):
            raise TaskError("train/OOD id sets overlap")
        if not self.train_ids or not self.ood_ids:
            raise TaskError("both split sides must be non-empty")


@dataclass(frozen=True)
class TaskSpec:
    """Shape contract a model needs to consume a task's episodes."""

    kind: str
    d_in: int
    n_classes: int
    max_len: int
    sequence: bool = False  # True when the target is a permutation


@dataclass(frozen=True)
class TaskInstance:
    kind: str
    episode: np.ndarray  # N x d_in
    label: int | tuple[int, ...]
    object_ids: tuple[int, ...]
    seed: int


VOCAB_KINDS = ("one-hot", "random-binary", "random-gaussian")


def make_vocab(n: int, d_in: int, kind: str, seed: int) -> ObjectVocabulary:
    """Deterministic vocabulary with pairwise-distinct feature rows."""
    if n < 2:
        raise TaskError(f"need at least 2 objects, got {n}")
    if kind not in VOCAB_KINDS:
        raise TaskError(f"unknown vocabulary kind {kind!r}")
    rng = np.random.default_rng(seed)
    if kind == "one-hot":
        if d_in < n:
            raise TaskError(f"one-hot vocabulary needs d_in >= n, got d_in={d_in} n={n}")
        feats = np.eye(d_in)[:n].copy()
    else:
        rows: list[np.ndarray] = []
        seen: set[bytes] = set()
        while len(rows) < n:
            if kind == "random-binary":
                row = rng.integers(0, 2, size=d_in).astype(np.float64)
            else:
                row = rng.normal(size=d_in)
            key = row.tobytes()
            if key in seen:
                continue  # resample on collision
            seen.add(key)
            rows.append(row)
        feats = np.stack(rows)
    return ObjectVocabulary(features=feats, kind=kind, seed=seed)


def split_vocab(vocab: ObjectVocabulary, train_fraction: float, seed: int) -> SplitSpec:
    ids = np.arange(vocab.size)
    rng = np.random.default_rng(seed)
    rng.shuffle(ids)
    cut = int(round(vocab.size * train_fraction))
    if cut == 0 or cut == vocab.size:
        raise TaskError(f"train fraction {train_fraction} empties one split side")
    return SplitSpec(train_ids=tuple(int(i) for i in ids[:cut]),
                     ood_ids=tuple(int(i) for i in ids[cut:]))


def _side_features(vocab: ObjectVocabulary, obj_id: int) -> np.ndarray:
    if obj_id == QUERY_ID:
        return np.full(vocab.d_in, -1.0)
    return vocab.features[obj_id]


def _episode(vocab: ObjectVocabulary, obj_ids: Sequence[int]) -> np.ndarray:
    return np.stack([_side_features(vocab, i) for i in obj_ids])


# ---------------------------------------------------------------------------
# task specs


def same_different_spec(vocab: ObjectVocabulary) -> TaskSpec:
    return TaskSpec(kind="same_different", d_in=vocab.d_in, n_classes=2, max_len=2)


def identity_rules_spec(vocab: ObjectVocabulary) -> TaskSpec:
    return TaskSpec(kind="identity_rules", d_in=vocab.d_in, n_classes=2, max_len=7)


def counting_spec(vocab: ObjectVocabulary, max_count: int) -> TaskSpec:
    return TaskSpec(kind="counting", d_in=vocab.d_in, n_classes=max_count,
                    max_len=max_count + 1)


def sorting_spec(vocab: ObjectVocabulary, length: int) -> TaskSpec:
    # one extra channel carries the per-episode scalar attribute
    return TaskSpec(kind="sorting", d_in=vocab.d_in + 1, n_classes=length,
                    max_len=length, sequence=True)


# ---------------------------------------------------------------------------
# generators


def gen_same_different(vocab: ObjectVocabulary, side: Sequence[int], count: int,
                       seed: int) -> list[TaskInstance]:
    """Pairs, label 1 iff both objects are identical; 50/50 per batch of 2."""
    side = list(side)
    if len(side) < 2:
        raise TaskError(f"same/different needs >= 2 objects on the side, got {len(side)}")
    rng = np.random.default_rng(seed)
    out: list[TaskInstance] = []
    while len(out) < count:
        pair_labels = rng.permutation([0, 1])
        for lbl in pair_labels:
            if len(out) >= count:
                break
            if lbl == 1:
                a = side[rng.integers(len(side))]
                ids = (a, a)
            else:
                i, j = rng.choice(len(side), size=2, replace=False)
                ids = (side[i], side[j])
            out.append(TaskInstance(kind="same_different", episode=_episode(vocab, ids),
                                    label=int(lbl), object_ids=ids, seed=seed))
    return out


def gen_identity_rules(vocab: ObjectVocabulary, side: Sequence[int], count: int,
                       seed: int) -> list[TaskInstance]:
    """Match-to-sample over ABA/ABB patterns.

    Episode layout: source triple, target prefix pair, then the two
    candidate completions in random order. Label is the index of the
    candidate that matches the source pattern.
    """
    side = list(side)
    if len(side) < 4:
        raise TaskError(f"identity rules need >= 4 objects on the side, got {len(side)}")
    rng = np.random.default_rng(seed)
    out: list[TaskInstance] = []
    for _ in range(count):
        a, b, c, d = (side[i] for i in rng.choice(len(side), size=4, replace=False))
        pattern_aba = bool(rng.integers(2))
        third = a if pattern_aba else b
        correct = c if pattern_aba else d
        cands = (c, d) if rng.integers(2) else (d, c)
        label = cands.index(correct)
        ids = (a, b, third, c, d, cands[0], cands[1])
        out.append(TaskInstance(kind="identity_rules", episode=_episode(vocab, ids),
                                label=int(label), object_ids=ids, seed=seed))
    return out


def gen_counting(vocab: ObjectVocabulary, side: Sequence[int], max_count: int,
                 count: int, seed: int, stage: int, exact_n: int | None = None
                 ) -> list[TaskInstance]:
    """Cardinality classification: n object tokens, a query token, label n.

    During staged training n is drawn uniformly from 1..stage; `exact_n`
    pins the set size for per-number evaluation sets.
    """
    side = list(side)
    if stage < 1:
        raise TaskError(f"counting stage must be >= 1, got {stage}")
    if stage > max_count:
        raise TaskError(f"stage {stage} exceeds max_count {max_count}")
    if exact_n is not None and not (1 <= exact_n <= max_count):
        raise TaskError(f"exact_n {exact_n} outside 1..{max_count}")
    rng = np.random.default_rng(seed)
    out: list[TaskInstance] = []
    for _ in range(count):
        n = exact_n if exact_n is not None else int(rng.integers(1, stage + 1))
        ids = tuple(int(side[i]) for i in rng.integers(0, len(side), size=n)) + (QUERY_ID,)
        out.append(TaskInstance(kind="counting", episode=_episode(vocab, ids),
                                label=n - 1, object_ids=ids, seed=seed))
    return out


def gen_sorting(vocab: ObjectVocabulary, side: Sequence[int], length: int, count: int,
                seed: int) -> list[TaskInstance]:
    """Episodes of objects with a scalar attribute channel; target is the
    ascending argsort permutation."""
    side = list(side)
    if length < 2:
        raise TaskError(f"sorting needs length >= 2, got {length}")
    if length > len(side):
        raise TaskError(f"sorting length {length} exceeds side size {len(side)}")
    rng = np.random.default_rng(seed)
    out: list[TaskInstance] = []
    for _ in range(count):
        ids = tuple(int(side[i]) for i in rng.choice(len(side), size=length, replace=False))
        while True:
            attrs = rng.uniform(0.0, 1.0, size=length)
            if len(np.unique(attrs)) == length:
                break  # resample on tie
        episode = np.concatenate([_episode(vocab, ids), attrs[:, None]], axis=1)
        perm = tuple(int(i) for i in np.argsort(attrs, kind="stable"))
        out.append(TaskInstance(kind="sorting", episode=episode, label=perm,
                                object_ids=ids, seed=seed))
    return out


# ---------------------------------------------------------------------------
# serialization for the `gen` CLI and cross-implementation checks


def instance_record(inst: TaskInstance) -> str:
    label = list(inst.label) if isinstance(inst.label, tuple) else inst.label
    rec = {
        "task": inst.kind,
        "seed": inst.seed,
        "object_ids": list(inst.object_ids),
        "features": [[float(v) for v in row] for row in inst.episode],
        "label": label,
    }
    return json.dumps(rec, separators=(",", ":"))
