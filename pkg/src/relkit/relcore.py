"""Relational primitives shared by the bottleneck architectures.

The conduit through the bottleneck is an N x N matrix of scaled inner
products between projected object embeddings. Downstream modules may
consume that matrix (or attention mixtures of learned symbols driven by
it) but never the embeddings themselves. `isolation_probe` operationalizes
that guarantee: it rotates embedding content while provably preserving
every inner product entering the relation computation, and measures how
much the final output moves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from . import numcore as nc
from .numcore import ParameterError, ShapeError, Tensor


class CapacityError(ValueError):
    """More objects than available symbol slots."""


@dataclass
class ProjectionPair:
    """Query/key projection matrices; tied pairs share one object."""

    w_phi: Tensor
    w_psi: Tensor
    tied: bool = False

    def __post_init__(self):
        if self.tied and self.w_psi is not self.w_phi:
            raise ParameterError("tied ProjectionPair must share a single matrix object")
        if self.w_phi.shape != self.w_psi.shape:
            raise ShapeError(
                f"projection shapes differ: {self.w_phi.shape} vs {self.w_psi.shape}"
            )


@dataclass
class SymbolLibrary:
    """Learned value vectors bound positionally: symbol m serves slot m.

    The vectors receive gradients during training but no forward path
    feeds object embeddings into them.
    """

    values: Tensor  # M x d_s

    @property
    def capacity(self) -> int:
        return self.values.shape[0]


def project(emb: Tensor, pair: ProjectionPair) -> tuple[Tensor, Tensor]:
    """Project embedding rows to queries and keys."""
    if emb.shape[1] != pair.w_phi.shape[0]:
        raise ShapeError(
            f"project: embeddings width {emb.shape[1]} vs projection rows {pair.w_phi.shape[0]}"
        )
    queries = nc.matmul(emb, pair.w_phi)
    keys = queries if pair.tied else nc.matmul(emb, pair.w_psi)
    return queries, keys


def relation_matrix(queries: Tensor, keys: Tensor, scale: float) -> Tensor:
    """R[i][j] = scale * <q_i, k_j>."""
    if scale <= 0:
        raise ParameterError(f"relation scale must be positive, got {scale}")
    if queries.shape[1] != keys.shape[1]:
        raise ShapeError(
            f"relation_matrix: query width {queries.shape[1]} vs key width {keys.shape[1]}"
        )
    return nc.scale(nc.matmul(queries, nc.transpose(keys)), scale)


def l2_normalize_rows(x: Tensor, epsilon: float = 1e-12) -> Tensor:
    """Row-wise L2 normalization (optional bounded-relation knob)."""
    sq = nc.tsum(nc.mul(x, x), axis=1, keepdims=True)
    inv = nc.tensor(1.0 / np.sqrt(sq.data + epsilon))
    return nc.mul(x, inv)


def attend_symbols(relations: Tensor, symbols: SymbolLibrary, temperature: float = 1.0) -> Tensor:
    """Row-softmax the relation matrix and mix the first N symbols.

    The output depends on object embeddings only through `relations`;
    handing in the same matrix from any source yields the same mixtures.
    """
    n = relations.shape[0]
    if symbols.capacity < n:
        raise CapacityError(
            f"{n} objects but only {symbols.capacity} symbols in the library"
        )
    weights = nc.softmax(relations, axis=-1, temperature=temperature)
    return nc.matmul(weights, nc.narrow(symbols.values, 0, 0, n))


def random_orthogonal(dim: int, seed: int) -> np.ndarray:
    """Seeded orthogonal matrix via QR with a deterministic sign fix."""
    if dim < 1:
        raise ParameterError(f"dimension must be >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    q = q * np.sign(np.diag(r))
    return q


class RotatableModel(Protocol):
    """What the probe needs: logits as a pure function of an episode, with
    an optional rotation applied to the representation entering the
    relation computation (compensating any query/key projections)."""

    def output(self, episode: np.ndarray, rotation: np.ndarray | None = None) -> np.ndarray: ...


def isolation_probe(
    model: RotatableModel,
    episode: np.ndarray,
    orthogonal_q: np.ndarray | None = None,
    seed: int = 0,
) -> float:
    """Max absolute output change under an inner-product-preserving rotation.

    Architectures whose downstream computation sees only relations are
    invariant (deviation at rounding level); anything that consumes
    embedding content through value paths or decoders moves.
    """
    base = model.output(episode)
    if orthogonal_q is None:
        orthogonal_q = random_orthogonal(base_rotation_dim(model), seed)
    q = np.asarray(orthogonal_q, dtype=np.float64)
    err = np.max(np.abs(q.T @ q - np.eye(q.shape[0])))
    if err > 1e-10:
        raise ParameterError(f"probe matrix is not orthogonal (deviation {err:.2e})")
    rotated = model.output(episode, rotation=q)
    return float(np.max(np.abs(rotated - base)))


def base_rotation_dim(model) -> int:
    dim = getattr(model, "rotation_dim", None)
    if dim is None:
        raise ParameterError("model does not expose rotation_dim; pass orthogonal_q explicitly")
    return int(dim)


def pairwise_cosine_mean(vectors: Sequence[np.ndarray], epsilon: float = 1e-12) -> float:
    """Mean cosine similarity over all unordered pairs."""
    arr = np.stack([np.asarray(v, dtype=np.float64).reshape(-1) for v in vectors])
    norms = np.linalg.norm(arr, axis=1, keepdims=True)
    unit = arr / np.maximum(norms, epsilon)
    gram = unit @ unit.T
    k = len(vectors)
    if k < 2:
        return 1.0
    off = gram.sum() - np.trace(gram)
    return float(off / (k * (k - 1)))
