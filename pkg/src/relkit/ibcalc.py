"""Exact information-bottleneck arithmetic on finite micro-worlds.

Everything here is enumeration over finite probability tables: mutual
information in bits, Markov-chain composition X -> Z -> Y, the bottleneck
objective I(X;Z) - beta*I(Z;Y), and sufficiency/minimality audits of
relational codes (deterministic maps from object tuples to the tuple of
pairwise relation values).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np

ATOL = 1e-12


class TableError(ValueError):
    """A probability table violates normalization or alphabet constraints."""


class ContractError(ValueError):
    """A caller-supplied channel breaks an audit precondition."""


def entropy_bits(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0.0]
    return float(-(nz * np.log2(nz)).sum())


@dataclass(frozen=True)
class DiscreteJoint:
    x_labels: tuple[Hashable, ...]
    y_labels: tuple[Hashable, ...]
    table: np.ndarray  # |X| x |Y|, p(x, y)

    def __post_init__(self):
        t = np.asarray(self.table, dtype=np.float64)
        if t.shape != (len(self.x_labels), len(self.y_labels)):
            raise TableError(f"joint table shape {t.shape} does not match labels")
        if np.any(t < 0.0):
            raise TableError("joint table has negative entries")
        if abs(t.sum() - 1.0) > ATOL:
            raise TableError(f"joint table sums to {t.sum()!r}, not 1")
        object.__setattr__(self, "table", t)

    def x_marginal(self) -> np.ndarray:
        return self.table.sum(axis=1)

    def y_marginal(self) -> np.ndarray:
        return self.table.sum(axis=0)


@dataclass(frozen=True)
class EncoderChannel:
    x_labels: tuple[Hashable, ...]
    z_labels: tuple[Hashable, ...]
    table: np.ndarray  # |X| x |Z|, p(z | x), rows sum to 1
    name: str = "channel"

    def __post_init__(self):
        t = np.asarray(self.table, dtype=np.float64)
        if t.shape != (len(self.x_labels), len(self.z_labels)):
            raise TableError(f"channel table shape {t.shape} does not match labels")
        if np.any(t < 0.0):
            raise TableError("channel table has negative entries")
        if np.max(np.abs(t.sum(axis=1) - 1.0)) > ATOL:
            raise TableError(f"channel {self.name!r} rows do not sum to 1")
        object.__setattr__(self, "table", t)

    @property
    def deterministic(self) -> bool:
        return bool(np.all((self.table == 0.0) | (self.table == 1.0)))


def deterministic_channel(x_labels: Sequence[Hashable], f: Callable[[Hashable], Hashable],
                          name: str = "deterministic") -> EncoderChannel:
    """0/1 channel for Z = f(X); the Z alphabet is the realized image."""
    x_labels = tuple(x_labels)
    images = [f(x) for x in x_labels]
    z_labels = tuple(dict.fromkeys(images))  # first-seen order, deterministic
    z_index = {z: i for i, z in enumerate(z_labels)}
    t = np.zeros((len(x_labels), len(z_labels)))
    for i, z in enumerate(images):
        t[i, z_index[z]] = 1.0
    return EncoderChannel(x_labels=x_labels, z_labels=z_labels, table=t, name=name)


def identity_channel(x_labels: Sequence[Hashable]) -> EncoderChannel:
    return deterministic_channel(x_labels, lambda x: x, name="identity")


def constant_channel(x_labels: Sequence[Hashable]) -> EncoderChannel:
    return deterministic_channel(x_labels, lambda x: 0, name="constant")


@dataclass(frozen=True)
class RelationalCode:
    """A finite relation-value table applied to all ordered pairs i != j."""

    relation: dict[tuple[Hashable, Hashable], Hashable]
    name: str = "relational"
    properties: tuple[str, ...] = ()

    def value(self, a: Hashable, b: Hashable) -> Hashable:
        try:
            return self.relation[(a, b)]
        except KeyError:
            raise ContractError(f"relational code {self.name!r} is partial at ({a!r}, {b!r})")


def equality_code(alphabet: Sequence[Hashable]) -> RelationalCode:
    rel = {}
    for a in alphabet:
        for b in alphabet:
            rel[(a, b)] = "same" if a == b else "diff"
    return RelationalCode(relation=rel, name="equality-relation",
                          properties=("symmetry", "transitivity"))


def _check_relation_properties(code: RelationalCode, alphabet: Sequence[Hashable]) -> None:
    if "symmetry" in code.properties:
        for a in alphabet:
            for b in alphabet:
                if code.value(a, b) != code.value(b, a):
                    raise ContractError(f"{code.name!r} declares symmetry but r({a},{b}) != r({b},{a})")
    if "transitivity" in code.properties:
        # transitivity of the "same" value
        for a in alphabet:
            for b in alphabet:
                for c in alphabet:
                    if (code.value(a, b) == "same" and code.value(b, c) == "same"
                            and code.value(a, c) != "same"):
                        raise ContractError(f"{code.name!r} declares transitivity but it fails")


# ---------------------------------------------------------------------------
# operations


def mutual_information(joint: DiscreteJoint) -> float:
    """I(X;Y) in bits, with 0*log 0 = 0."""
    p = joint.table
    px = joint.x_marginal()
    py = joint.y_marginal()
    total = 0.0
    for i in range(p.shape[0]):
        for j in range(p.shape[1]):
            v = p[i, j]
            if v > 0.0:
                total += v * np.log2(v / (px[i] * py[j]))
    return float(total)


def compose(joint: DiscreteJoint, enc: EncoderChannel) -> tuple[DiscreteJoint, DiscreteJoint]:
    """Markov composition X -> Z -> Y: joints over (X,Z) and (Z,Y)."""
    if enc.x_labels != joint.x_labels:
        raise TableError("channel alphabet does not match the joint's X labels")
    px = joint.x_marginal()
    xz = px[:, None] * enc.table
    zy = enc.table.T @ joint.table
    return (
        DiscreteJoint(x_labels=joint.x_labels, y_labels=enc.z_labels, table=xz),
        DiscreteJoint(x_labels=enc.z_labels, y_labels=joint.y_labels, table=zy),
    )


def ib_objective(joint: DiscreteJoint, enc: EncoderChannel, beta: float) -> float:
    """I(X;Z) - beta * I(Z;Y), computed exactly from the composed joints."""
    if beta < 0:
        raise TableError(f"beta must be non-negative, got {beta}")
    xz, zy = compose(joint, enc)
    return mutual_information(xz) - beta * mutual_information(zy)


def relational_encode(alphabet_tuples: Sequence[tuple], code: RelationalCode) -> EncoderChannel:
    """Deterministic channel from object tuples to their relation tuples."""
    alphabet_tuples = [tuple(t) for t in alphabet_tuples]
    symbols = sorted({s for t in alphabet_tuples for s in t})
    _check_relation_properties(code, symbols)

    def encode(t):
        n = len(t)
        return tuple(code.value(t[i], t[j]) for i in range(n) for j in range(n) if i != j)

    return deterministic_channel(alphabet_tuples, encode, name=code.name)


def sufficiency_gap(joint: DiscreteJoint, enc: EncoderChannel) -> float:
    """I(X;Y) - I(Z;Y); zero iff Z keeps everything X says about Y."""
    _, zy = compose(joint, enc)
    gap = mutual_information(joint) - mutual_information(zy)
    if gap < -ATOL:
        raise AssertionError(f"data-processing violation: gap {gap}")
    return max(gap, 0.0)


def minimality_audit(joint: DiscreteJoint, encoders: Sequence[EncoderChannel]
                     ) -> list[EncoderChannel]:
    """Among sufficient channels, return every I(X;Z) minimizer (ties kept)."""
    if not encoders:
        raise ContractError("minimality_audit needs at least one channel")
    rates = []
    for enc in encoders:
        gap = sufficiency_gap(joint, enc)
        if gap > ATOL:
            raise ContractError(
                f"channel {enc.name!r} is not sufficient (gap {gap:.3e} bits)"
            )
        xz, _ = compose(joint, enc)
        rates.append(mutual_information(xz))
    best = min(rates)
    return [enc for enc, r in zip(encoders, rates) if r <= best + ATOL]


# ---------------------------------------------------------------------------
# micro-worlds


def pattern_of(t: tuple) -> tuple[int, ...]:
    """Equality pattern in first-occurrence canonical form: (a,b,a) -> (0,1,0)."""
    seen: dict = {}
    out = []
    for s in t:
        if s not in seen:
            seen[s] = len(seen)
        out.append(seen[s])
    return tuple(out)


def tuple_alphabet(k: int, n: int) -> list[tuple[str, ...]]:
    symbols = [f"s{i}" for i in range(k)]
    return [tuple(t) for t in itertools.product(symbols, repeat=n)]


def labeled_world(k: int, n: int, label_fn: Callable[[tuple], Hashable]) -> DiscreteJoint:
    """Uniform distribution over all k^n tuples, Y = label_fn(tuple)."""
    xs = tuple_alphabet(k, n)
    ys = tuple(dict.fromkeys(label_fn(t) for t in xs))
    y_index = {y: j for j, y in enumerate(ys)}
    table = np.zeros((len(xs), len(ys)))
    for i, t in enumerate(xs):
        table[i, y_index[label_fn(t)]] = 1.0 / len(xs)
    return DiscreteJoint(x_labels=tuple(xs), y_labels=ys, table=table)


def pattern_world(k: int, n: int) -> DiscreteJoint:
    """Y is the full equality pattern of the tuple (the identity-rule classes)."""
    return labeled_world(k, n, pattern_of)


def aba_abb_label(t: tuple) -> str:
    pat = pattern_of(t)
    if pat == (0, 1, 0):
        return "ABA"
    if pat == (0, 1, 1):
        return "ABB"
    return "other"


def pattern_factored_channels(joint: DiscreteJoint, max_z: int) -> list[EncoderChannel]:
    """All deterministic channels that factor through the equality pattern,
    using at most `max_z` output labels.

    For a pattern-labeled world any deterministic sufficient channel with
    |Z| <= |patterns| must refine the pattern partition with no cells to
    spare, so it factors through the pattern map: this family is the whole
    search space that matters for the minimality audit.
    """
    patterns = sorted({pattern_of(t) for t in joint.x_labels})
    out = []
    for assignment in itertools.product(range(max_z), repeat=len(patterns)):
        amap = dict(zip(patterns, assignment))
        name = "pat:" + "".join(str(a) for a in assignment)
        out.append(deterministic_channel(joint.x_labels,
                                         lambda t, amap=amap: amap[pattern_of(t)],
                                         name=name))
    return out


def audit_rows(joint: DiscreteJoint, encoders: Sequence[EncoderChannel], beta: float
               ) -> list[dict]:
    """Per-channel report rows for the CSV surface."""
    rows = []
    for enc in encoders:
        xz, zy = compose(joint, enc)
        ixz = mutual_information(xz)
        izy = mutual_information(zy)
        rows.append({
            "channel": enc.name,
            "i_xz": ixz,
            "i_zy": izy,
            "objective": ixz - beta * izy,
        })
    return rows
