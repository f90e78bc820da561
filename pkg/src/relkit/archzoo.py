"""Six end-to-end architectures over a shared encoder and head convention.

Bottleneck trio:
    esbn        sequential key/value memory; the controller sees only
                retrieval mixtures of its own past states
    corelnet    decoder consumes the flattened relation matrix and nothing else
    abstractor  relational cross-attention onto learned symbols

Baseline trio (no bottleneck):
    transformer self-attention; values carry embedding content downstream
    recurrent   gated recurrent cell fed embeddings directly
    relationnet learned pairwise MLP instead of inner products

Conventions shared by every architecture in a comparison: the same
two-layer tanh encoder maps raw object features to embeddings, and a
two-layer tanh head maps a model-specific summary to class logits. Episode
batches are stacked on the leading axis so the tape stays short.

Every forward accepts an optional orthogonal `rotation` applied to the
representation entering the relation computation, with query/key
projections compensated so that all relation entries are preserved; value
paths and decoders are never compensated. That is the isolation probe's
lever: bottleneck models cannot see the rotation, baselines can.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import numcore as nc
from . import relcore as rc
from .numcore import ParameterError, ShapeError, Tensor
from .taskgen import TaskSpec

ARCHITECTURES = ("esbn", "corelnet", "abstractor", "transformer", "recurrent", "relationnet")
BOTTLENECK = ("esbn", "corelnet", "abstractor")
BASELINES = ("transformer", "recurrent", "relationnet")

# architectures whose head reads a fixed number of slots; shorter episodes
# are front-padded with zero objects up to max_len
FIXED_LENGTH = ("corelnet", "abstractor", "transformer", "relationnet")


@dataclass(frozen=True)
class ModelConfig:
    arch: str
    d_in: int
    n_classes: int
    max_len: int
    sequence: bool = False
    d: int = 64
    d_k: int = 32
    d_s: int = 64
    heads: int = 1
    layers: int = 1
    hidden: int = 64
    decoder_width: int = 64
    tied: bool = False
    temperature: float = 1.0
    esbn_gate: bool = False
    step_embedding: bool = False
    normalize_relations: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ParameterError(f"unknown architecture {self.arch!r}")
        for name in ("d_in", "n_classes", "max_len", "d", "d_k", "d_s", "heads",
                     "layers", "hidden", "decoder_width"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be positive")
        if self.d_k % self.heads != 0:
            raise ParameterError(f"heads={self.heads} must divide d_k={self.d_k}")
        if self.temperature <= 0:
            raise ParameterError("temperature must be positive")


def config_for_task(arch: str, task: TaskSpec, seed: int = 0, **overrides) -> ModelConfig:
    return ModelConfig(arch=arch, d_in=task.d_in, n_classes=task.n_classes,
                       max_len=task.max_len, sequence=task.sequence, seed=seed,
                       **overrides)


# ---------------------------------------------------------------------------
# initialization


def _gauss(rng, rows: int, cols: int) -> np.ndarray:
    return rng.normal(size=(rows, cols)) / np.sqrt(rows)


def _p(d: dict, name: str, arr) -> None:
    d[name] = nc.tensor(arr, requires_grad=True)


def _init_gru(d: dict, rng, pre: str, in_dim: int, h: int) -> None:
    for g in ("z", "r", "c"):
        _p(d, f"{pre}.w{g}", _gauss(rng, in_dim + h, h))
        _p(d, f"{pre}.b{g}", np.zeros(h))


def _summary_width(cfg: ModelConfig) -> int:
    if cfg.arch in ("esbn", "recurrent"):
        return cfg.hidden
    if cfg.arch == "corelnet":
        return cfg.max_len * cfg.max_len
    if cfg.arch == "abstractor":
        return cfg.max_len * cfg.d_s
    if cfg.arch == "transformer":
        return cfg.max_len * cfg.d
    return cfg.d_s  # relationnet: f consumes the aggregated pair code


def init_params(cfg: ModelConfig) -> dict[str, Tensor]:
    """Seeded scaled-Gaussian parameters (std 1/sqrt(fan_in), zero biases)."""
    rng = np.random.default_rng(cfg.seed)
    p: dict[str, Tensor] = {}
    _p(p, "enc.w1", _gauss(rng, cfg.d_in, cfg.d))
    _p(p, "enc.b1", np.zeros(cfg.d))
    _p(p, "enc.w2", _gauss(rng, cfg.d, cfg.d))
    _p(p, "enc.b2", np.zeros(cfg.d))

    if cfg.arch == "esbn":
        in_dim = cfg.hidden + (8 if cfg.step_embedding else 0)
        _init_gru(p, rng, "gru", in_dim, cfg.hidden)
        # a zero start is a fixed point of the zero-bias cell; seed it like a symbol
        _p(p, "h0", rng.normal(size=(1, cfg.hidden)))
        if cfg.esbn_gate:
            _p(p, "gate", np.zeros((1, 1)))
        if cfg.step_embedding:
            _p(p, "step_emb", rng.normal(size=(cfg.max_len, 8)))
    elif cfg.arch == "recurrent":
        _init_gru(p, rng, "gru", cfg.d, cfg.hidden)
        _p(p, "h0", rng.normal(size=(1, cfg.hidden)))
    elif cfg.arch == "abstractor":
        dk_h = cfg.d_k // cfg.heads
        for h in range(cfg.heads):
            _p(p, f"abs.wq{h}", _gauss(rng, cfg.d, dk_h))
            if not cfg.tied:
                _p(p, f"abs.wk{h}", _gauss(rng, cfg.d, dk_h))
        _p(p, "symbols", rng.normal(size=(cfg.max_len, cfg.d_s)))
        _p(p, "mix.w", _gauss(rng, cfg.heads * cfg.d_s, cfg.d_s))
        _p(p, "mix.b", np.zeros(cfg.d_s))
        for l in range(cfg.layers):
            _p(p, f"ff{l}.w1", _gauss(rng, cfg.d_s, cfg.d_s))
            _p(p, f"ff{l}.b1", np.zeros(cfg.d_s))
            _p(p, f"ff{l}.w2", _gauss(rng, cfg.d_s, cfg.d_s))
            _p(p, f"ff{l}.b2", np.zeros(cfg.d_s))
            _p(p, f"ln{l}.g", np.ones(cfg.d_s))
            _p(p, f"ln{l}.b", np.zeros(cfg.d_s))
        if cfg.sequence:
            _init_gru(p, rng, "dec", cfg.d_s, cfg.d_s)
            _p(p, "dec.q0", rng.normal(size=(1, cfg.d_s)))
            _p(p, "ptr.w", _gauss(rng, cfg.d_s, cfg.d_s))
    elif cfg.arch == "transformer":
        _p(p, "pos", rng.normal(size=(cfg.max_len, cfg.d)) / np.sqrt(cfg.d))
        for l in range(cfg.layers):
            for w in ("wq", "wk", "wv", "wo"):
                _p(p, f"at{l}.{w}", _gauss(rng, cfg.d, cfg.d))
            _p(p, f"ff{l}.w1", _gauss(rng, cfg.d, cfg.d))
            _p(p, f"ff{l}.b1", np.zeros(cfg.d))
            _p(p, f"ff{l}.w2", _gauss(rng, cfg.d, cfg.d))
            _p(p, f"ff{l}.b2", np.zeros(cfg.d))
            for ln in ("a", "b"):
                _p(p, f"ln{l}{ln}.g", np.ones(cfg.d))
                _p(p, f"ln{l}{ln}.b", np.zeros(cfg.d))
    elif cfg.arch == "relationnet":
        _p(p, "g.w1", _gauss(rng, 2 * cfg.d, cfg.decoder_width))
        _p(p, "g.b1", np.zeros(cfg.decoder_width))
        _p(p, "g.w2", _gauss(rng, cfg.decoder_width, cfg.d_s))
        _p(p, "g.b2", np.zeros(cfg.d_s))

    if not cfg.sequence:
        width = _summary_width(cfg)
        _p(p, "head.w1", _gauss(rng, width, cfg.decoder_width))
        _p(p, "head.b1", np.zeros(cfg.decoder_width))
        _p(p, "head.w2", _gauss(rng, cfg.decoder_width, cfg.n_classes))
        _p(p, "head.b2", np.zeros(cfg.n_classes))
    return p


def count_params(params: dict[str, Tensor]) -> int:
    return int(sum(t.size for t in params.values()))


def match_decoder_width(cfg_a: ModelConfig, cfg_b: ModelConfig,
                        tolerance: float = 0.10) -> tuple[ModelConfig, ModelConfig]:
    """Widen the smaller model's decoder until counts agree within tolerance.

    Counts are affine in decoder_width, so the target width is solved
    directly from two probes.
    """

    def count_at(cfg, w):
        return count_params(init_params(replace(cfg, decoder_width=w)))

    ca, cb = count_at(cfg_a, cfg_a.decoder_width), count_at(cfg_b, cfg_b.decoder_width)
    small, big, target = (cfg_a, cfg_b, cb) if ca < cb else (cfg_b, cfg_a, ca)
    w0 = small.decoder_width
    c0, c1 = count_at(small, w0), count_at(small, w0 + 16)
    slope = (c1 - c0) / 16.0
    w = max(8, int(round(w0 + (target - c0) / slope)))
    small = replace(small, decoder_width=w)
    got = count_at(small, w)
    if abs(got - target) / target > tolerance:
        raise ParameterError(
            f"could not match parameter counts: {got} vs {target} "
            f"({small.arch} vs {big.arch})"
        )
    return (small, big) if ca < cb else (big, small)


# ---------------------------------------------------------------------------
# shared pieces


def _mlp_encode(x: Tensor, p: dict[str, Tensor]) -> Tensor:
    h = nc.tanh(nc.add(nc.matmul(x, p["enc.w1"]), p["enc.b1"]))
    return nc.add(nc.matmul(h, p["enc.w2"]), p["enc.b2"])


def encode(x: np.ndarray, params: dict[str, Tensor]) -> Tensor:
    """Two-layer perceptron encoder over rows of object features."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[1] != params["enc.w1"].shape[0]:
        raise ShapeError(
            f"encode: input width {arr.shape[1]} vs encoder {params['enc.w1'].shape[0]}"
        )
    return _mlp_encode(nc.tensor(arr), params)


def _head(summary: Tensor, p: dict[str, Tensor]) -> Tensor:
    h = nc.tanh(nc.add(nc.matmul(summary, p["head.w1"]), p["head.b1"]))
    return nc.add(nc.matmul(h, p["head.w2"]), p["head.b2"])


def _gru_step(x: Tensor, h: Tensor, p: dict[str, Tensor], pre: str) -> Tensor:
    gin = nc.concat([x, h], axis=1)
    z = nc.sigmoid(nc.add(nc.matmul(gin, p[f"{pre}.wz"]), p[f"{pre}.bz"]))
    r = nc.sigmoid(nc.add(nc.matmul(gin, p[f"{pre}.wr"]), p[f"{pre}.br"]))
    gin2 = nc.concat([x, nc.mul(r, h)], axis=1)
    c = nc.tanh(nc.add(nc.matmul(gin2, p[f"{pre}.wc"]), p[f"{pre}.bc"]))
    return nc.add(h, nc.mul(z, nc.sub(c, h)))


def _tile_rows(row: Tensor, b: int) -> Tensor:
    return nc.matmul(nc.tensor(np.ones((b, 1))), row)


def _pad_front(ep: np.ndarray, n: int) -> np.ndarray:
    if ep.shape[0] == n:
        return ep
    if ep.shape[0] > n:
        raise ShapeError(f"episode length {ep.shape[0]} exceeds configured max {n}")
    return np.concatenate([np.zeros((n - ep.shape[0], ep.shape[1])), ep], axis=0)


def _encode_stack(rows: np.ndarray, params: dict[str, Tensor],
                  rotation: np.ndarray | None) -> Tensor:
    e = _mlp_encode(nc.tensor(rows), params)
    if rotation is not None:
        e = nc.matmul(e, nc.tensor(rotation))
    return e


def _proj(params: dict[str, Tensor], name: str, rotation: np.ndarray | None) -> Tensor:
    """Query/key projection, right-composed with the rotation's inverse so
    rotated embeddings produce identical relation entries."""
    w = params[name]
    if rotation is None:
        return w
    return nc.tensor(rotation.T @ w.data)


# ---------------------------------------------------------------------------
# forwards (classification): episodes with equal lengths per call


def _esbn_like_forward(episodes, params, cfg, rotation, trace, with_memory: bool):
    b = len(episodes)
    n = episodes[0].shape[0]
    rows = np.concatenate([np.stack([ep[t] for ep in episodes]) for t in range(n)], axis=0)
    enc = _encode_stack(rows, params, rotation)
    h = _tile_rows(params["h0"], b)
    keys: list[Tensor] = []
    vals: list[Tensor] = []
    for t in range(n):
        z_t = nc.narrow(enc, 0, t * b, (t + 1) * b)
        if with_memory:
            if t == 0:
                v_ret = nc.tensor(np.zeros((b, cfg.hidden)))
            else:
                scores = nc.concat(
                    [nc.tsum(nc.mul(z_t, k), axis=1, keepdims=True) for k in keys], axis=1
                )
                weights = nc.softmax(scores, axis=-1, temperature=cfg.temperature)
                v_ret = nc.mul(vals[0], nc.narrow(weights, 1, 0, 1))
                for tau in range(1, t):
                    v_ret = nc.add(v_ret, nc.mul(vals[tau], nc.narrow(weights, 1, tau, tau + 1)))
                if trace is not None:
                    trace.setdefault("retrieval_weights", []).append(weights.data.copy())
            if cfg.esbn_gate:
                gate = _tile_rows(nc.sigmoid(params["gate"]), b)
                v_ret = nc.mul(v_ret, gate)
            if trace is not None:
                trace.setdefault("v_ret", []).append(v_ret.data.copy())
            x_in = v_ret
            if cfg.step_embedding:
                step = _tile_rows(nc.gather_rows(params["step_emb"], [t]), b)
                x_in = nc.concat([x_in, step], axis=1)
        else:
            x_in = z_t
        h = _gru_step(x_in, h, params, "gru")
        if with_memory:
            keys.append(z_t)
            vals.append(h)
    return _head(h, params)


def esbn_forward(episodes, params, cfg, rotation=None, trace=None) -> Tensor:
    """Sequential memory binding: perceptual keys, control-pathway values.

    The controller never receives z_t; its input is the retrieval mixture
    of previously written controller states (a zero vector at t=0).
    """
    return _esbn_like_forward(episodes, params, cfg, rotation, trace, with_memory=True)


def recurrent_forward(episodes, params, cfg, rotation=None, trace=None) -> Tensor:
    """Gated recurrent baseline consuming embeddings directly."""
    return _esbn_like_forward(episodes, params, cfg, rotation, trace, with_memory=False)


def _episode_offsets(episodes) -> list[int]:
    offs = [0]
    for ep in episodes:
        offs.append(offs[-1] + ep.shape[0])
    return offs


def corelnet_forward(episodes, params, cfg, rotation=None, trace=None) -> Tensor:
    """Tied identity projections; the decoder sees only the flattened
    relation matrix."""
    n = cfg.max_len
    episodes = [_pad_front(ep, n) for ep in episodes]
    rows = np.concatenate(episodes, axis=0)
    enc = _encode_stack(rows, params, rotation)
    scale = 1.0 / np.sqrt(cfg.d)
    flat = []
    for i in range(len(episodes)):
        e = nc.narrow(enc, 0, i * n, (i + 1) * n)
        if cfg.normalize_relations:
            e = rc.l2_normalize_rows(e)
        r = rc.relation_matrix(e, e, scale)
        if trace is not None:
            trace.setdefault("relations", []).append(r.data.copy())
        flat.append(nc.reshape(r, (1, n * n)))
    return _head(nc.concat(flat, axis=0), params)


def _abstract_states(episodes, params, cfg, rotation, trace) -> tuple[Tensor, int]:
    """Relational cross-attention plus the feedforward stack; returns
    (b*n) x d_s states."""
    n = cfg.max_len
    episodes = [_pad_front(ep, n) for ep in episodes]
    rows = np.concatenate(episodes, axis=0)
    enc = _encode_stack(rows, params, rotation)
    dk_h = cfg.d_k // cfg.heads
    scale = 1.0 / np.sqrt(dk_h)
    lib = rc.SymbolLibrary(values=params["symbols"])
    states = []
    for i in range(len(episodes)):
        e = nc.narrow(enc, 0, i * n, (i + 1) * n)
        per_head = []
        for hd in range(cfg.heads):
            wq = _proj(params, f"abs.wq{hd}", rotation)
            wk = wq if cfg.tied else _proj(params, f"abs.wk{hd}", rotation)
            q = nc.matmul(e, wq)
            k = q if cfg.tied else nc.matmul(e, wk)
            if cfg.normalize_relations:
                q, k = rc.l2_normalize_rows(q), rc.l2_normalize_rows(k)
            r = rc.relation_matrix(q, k, scale)
            if trace is not None:
                trace.setdefault("relations", []).append(r.data.copy())
            per_head.append(rc.attend_symbols(r, lib, temperature=cfg.temperature))
        a = per_head[0] if cfg.heads == 1 else nc.concat(per_head, axis=1)
        states.append(a)
    x = nc.add(nc.matmul(nc.concat(states, axis=0), params["mix.w"]), params["mix.b"])
    for l in range(cfg.layers):
        f = nc.tanh(nc.add(nc.matmul(x, params[f"ff{l}.w1"]), params[f"ff{l}.b1"]))
        f = nc.add(nc.matmul(f, params[f"ff{l}.w2"]), params[f"ff{l}.b2"])
        x = nc.layer_norm(nc.add(x, f), params[f"ln{l}.g"], params[f"ln{l}.b"])
    return x, n


def abstractor_forward(episodes, params, cfg, rotation=None, trace=None) -> Tensor:
    states, n = _abstract_states(episodes, params, cfg, rotation, trace)
    summary = nc.reshape(states, (len(episodes), n * cfg.d_s))
    return _head(summary, params)


def transformer_forward(episodes, params, cfg, rotation=None, trace=None) -> Tensor:
    """Standard self-attention encoder; values come from the embeddings, so
    content flows downstream (no bottleneck)."""
    n = cfg.max_len
    episodes = [_pad_front(ep, n) for ep in episodes]
    b = len(episodes)
    rows = np.concatenate(episodes, axis=0)
    enc = _mlp_encode(nc.tensor(rows), params)
    pos = nc.gather_rows(params["pos"], list(range(n)) * b)
    x = nc.add(enc, pos)
    if rotation is not None:
        x = nc.matmul(x, nc.tensor(rotation))
    scale = 1.0 / np.sqrt(cfg.d)
    for l in range(cfg.layers):
        q = nc.matmul(x, _proj(params, f"at{l}.wq", rotation))
        k = nc.matmul(x, _proj(params, f"at{l}.wk", rotation))
        v = nc.matmul(x, params[f"at{l}.wv"])
        mixed = []
        for i in range(b):
            qi = nc.narrow(q, 0, i * n, (i + 1) * n)
            ki = nc.narrow(k, 0, i * n, (i + 1) * n)
            vi = nc.narrow(v, 0, i * n, (i + 1) * n)
            attn = nc.softmax(nc.scale(nc.matmul(qi, nc.transpose(ki)), scale), axis=-1)
            if trace is not None:
                trace.setdefault("attention", []).append(attn.data.copy())
            mixed.append(nc.matmul(attn, vi))
        o = nc.matmul(nc.concat(mixed, axis=0), params[f"at{l}.wo"])
        x = nc.layer_norm(nc.add(x, o), params[f"ln{l}a.g"], params[f"ln{l}a.b"])
        f = nc.tanh(nc.add(nc.matmul(x, params[f"ff{l}.w1"]), params[f"ff{l}.b1"]))
        f = nc.add(nc.matmul(f, params[f"ff{l}.w2"]), params[f"ff{l}.b2"])
        x = nc.layer_norm(nc.add(x, f), params[f"ln{l}b.g"], params[f"ln{l}b.b"])
    summary = nc.reshape(x, (b, n * cfg.d))
    return _head(summary, params)


def relationnet_forward(episodes, params, cfg, rotation=None, trace=None) -> Tensor:
    """Learned pairwise function g over all ordered pairs, summed, then f.

    The sum makes the aggregate order-invariant; g itself is free to encode
    perceptual content, which is exactly what the bottleneck forbids.
    """
    n = cfg.max_len
    episodes = [_pad_front(ep, n) for ep in episodes]
    b = len(episodes)
    rows = np.concatenate(episodes, axis=0)
    enc = _encode_stack(rows, params, rotation)
    left, right = [], []
    for e in range(b):
        for i in range(n):
            for j in range(n):
                if i != j:
                    left.append(e * n + i)
                    right.append(e * n + j)
    pairs = nc.concat([nc.gather_rows(enc, left), nc.gather_rows(enc, right)], axis=1)
    g = nc.tanh(nc.add(nc.matmul(pairs, params["g.w1"]), params["g.b1"]))
    g = nc.add(nc.matmul(g, params["g.w2"]), params["g.b2"])
    per_ep = n * (n - 1)
    seg = np.zeros((b, b * per_ep))
    for e in range(b):
        seg[e, e * per_ep:(e + 1) * per_ep] = 1.0
    pooled = nc.matmul(nc.tensor(seg), g)
    return _head(pooled, params)


CLASSIFIER_FORWARDS = {
    "esbn": esbn_forward,
    "corelnet": corelnet_forward,
    "abstractor": abstractor_forward,
    "transformer": transformer_forward,
    "recurrent": recurrent_forward,
    "relationnet": relationnet_forward,
}


def classification_logits(episodes: Sequence[np.ndarray], params, cfg: ModelConfig,
                          rotation: np.ndarray | None = None, trace=None) -> Tensor:
    """Batched class logits; handles unequal episode lengths per arch policy."""
    episodes = [np.asarray(e, dtype=np.float64) for e in episodes]
    if not episodes:
        raise ShapeError("empty episode batch")
    if any(e.shape[0] < 1 for e in episodes):
        raise ShapeError("empty episode")
    fwd = CLASSIFIER_FORWARDS[cfg.arch]
    if cfg.arch in FIXED_LENGTH:
        return fwd(episodes, params, cfg, rotation, trace)
    lengths = sorted({e.shape[0] for e in episodes})
    if len(lengths) == 1:
        return fwd(episodes, params, cfg, rotation, trace)
    # group by length, then restore input order
    chunks, order = [], []
    for n in lengths:
        idx = [i for i, e in enumerate(episodes) if e.shape[0] == n]
        order.extend(idx)
        chunks.append(fwd([episodes[i] for i in idx], params, cfg, rotation, trace))
    stacked = nc.concat(chunks, axis=0)
    inverse = np.empty(len(order), dtype=int)
    inverse[np.asarray(order)] = np.arange(len(order))
    return nc.gather_rows(stacked, list(inverse))


# ---------------------------------------------------------------------------
# pointer decoding for sequence (sorting) tasks


def pointer_step_logits(episodes, targets, params, cfg: ModelConfig,
                        rotation=None) -> list[Tensor]:
    """Teacher-forced pointer logits per output step.

    The decoder runs over abstract states only: a gated cell consumes the
    state of the previously selected position and scores positions against
    a projection of their states.
    """
    b = len(episodes)
    n = cfg.max_len
    states, _ = _abstract_states(episodes, params, cfg, rotation, None)
    q = _tile_rows(params["dec.q0"], b)
    mask = np.zeros((b, n))
    step_logits: list[Tensor] = []
    for t in range(n):
        proj = nc.matmul(q, params["ptr.w"])
        scores = []
        for i in range(b):
            si = nc.narrow(states, 0, i * n, (i + 1) * n)
            pi = nc.narrow(proj, 0, i, i + 1)
            scores.append(nc.matmul(pi, nc.transpose(si)))
        logits = nc.add(nc.concat(scores, axis=0), nc.tensor(mask * -1e9))
        step_logits.append(logits)
        chosen = [int(targets[i][t]) for i in range(b)]
        for i, c in enumerate(chosen):
            mask[i, c] = 1.0
        picked = nc.gather_rows(states, [i * n + c for i, c in enumerate(chosen)])
        q = _gru_step(picked, q, params, "dec")
    return step_logits


def pointer_greedy(episodes, params, cfg: ModelConfig, rotation=None) -> np.ndarray:
    """Greedy masked decode; always returns valid permutations."""
    b = len(episodes)
    n = cfg.max_len
    states, _ = _abstract_states(episodes, params, cfg, rotation, None)
    sd = states.data
    q = np.tile(params["dec.q0"].data, (b, 1))
    mask = np.zeros((b, n))
    out = np.zeros((b, n), dtype=int)
    for t in range(n):
        proj = q @ params["ptr.w"].data
        scores = np.stack([proj[i] @ sd[i * n:(i + 1) * n].T for i in range(b)])
        scores = scores + mask * -1e9
        pick = scores.argmax(axis=1)
        out[:, t] = pick
        mask[np.arange(b), pick] = 1.0
        picked = nc.tensor(sd[[i * n + int(c) for i, c in enumerate(pick)]])
        q = _gru_step(picked, nc.tensor(q), params, "dec").data
    return out


def pointer_sequence_logits(episodes, params, cfg: ModelConfig, rotation=None) -> np.ndarray:
    """Greedy-path step logits stacked into one array (probe surface)."""
    b = len(episodes)
    n = cfg.max_len
    states, _ = _abstract_states(episodes, params, cfg, rotation, None)
    sd = states.data
    q = np.tile(params["dec.q0"].data, (b, 1))
    mask = np.zeros((b, n))
    all_logits = []
    for t in range(n):
        proj = q @ params["ptr.w"].data
        scores = np.stack([proj[i] @ sd[i * n:(i + 1) * n].T for i in range(b)])
        masked = scores + mask * -1e9
        all_logits.append(scores.copy())
        pick = masked.argmax(axis=1)
        mask[np.arange(b), pick] = 1.0
        picked = nc.tensor(sd[[i * n + int(c) for i, c in enumerate(pick)]])
        q = _gru_step(picked, nc.tensor(q), params, "dec").data
    return np.stack(all_logits, axis=1)


# ---------------------------------------------------------------------------
# model wrapper (probe surface and evaluation convenience)


class Model:
    """A config plus its parameters, with a rotation-aware output surface."""

    def __init__(self, cfg: ModelConfig, params: dict[str, Tensor] | None = None):
        self.cfg = cfg
        self.params = init_params(cfg) if params is None else params

    @property
    def rotation_dim(self) -> int:
        return self.cfg.d

    def output(self, episode: np.ndarray, rotation: np.ndarray | None = None) -> np.ndarray:
        eps = [np.asarray(episode, dtype=np.float64)]
        if self.cfg.sequence:
            return pointer_sequence_logits(eps, self.params, self.cfg, rotation)[0]
        return classification_logits(eps, self.params, self.cfg, rotation).data[0]

    def batch_logits(self, episodes: Sequence[np.ndarray]) -> np.ndarray:
        return classification_logits(episodes, self.params, self.cfg).data

    def predict_permutations(self, episodes: Sequence[np.ndarray]) -> np.ndarray:
        return pointer_greedy(episodes, self.params, self.cfg)

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())
