import numpy as np

from relkit import archzoo as az
from relkit import numcore as nc


def tiny_cfg(arch, *, sequence=False, seed=0, **overrides):
    """Small dimensions so full finite-difference sweeps stay fast."""
    base = dict(d_in=5, n_classes=3, max_len=3, d=8, d_k=4, d_s=8, hidden=8,
                decoder_width=8, layers=1)
    base.update(overrides)
    return az.ModelConfig(arch=arch, sequence=sequence, seed=seed, **base)


def random_episodes(rng, b, n, d_in):
    return [rng.normal(size=(n, d_in)) for _ in range(b)]


def unit_rel_err(a, b):
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def model_grad_check(cfg, episodes, targets, *, h=1e-5, coords_per_param=24, seed=0):
    """Compare tape gradients against central differences on sampled
    coordinates of every parameter. Returns the worst unit-floored error."""
    params = az.init_params(cfg)
    rng = np.random.default_rng(seed + 1000)

    def loss_value():
        if cfg.sequence:
            sl = az.pointer_step_logits(episodes, targets, params, cfg)
            vals = [nc.cross_entropy(l, [t[i] for t in targets]).item()
                    for i, l in enumerate(sl)]
            return float(np.mean(vals))
        return nc.cross_entropy(
            az.classification_logits(episodes, params, cfg), targets
        ).item()

    nc.zero_grads(params.values())
    with nc.Tape() as tape:
        if cfg.sequence:
            sl = az.pointer_step_logits(episodes, targets, params, cfg)
            losses = [nc.cross_entropy(l, [t[i] for t in targets]) for i, l in enumerate(sl)]
            total = losses[0]
            for l in losses[1:]:
                total = nc.add(total, l)
            loss = nc.scale(total, 1.0 / len(losses))
        else:
            loss = nc.cross_entropy(az.classification_logits(episodes, params, cfg), targets)
    nc.backward(tape, loss)

    worst = 0.0
    for name in sorted(params):
        p = params[name]
        flat = p.data.reshape(-1)
        k = min(coords_per_param, flat.size)
        idx = rng.choice(flat.size, size=k, replace=False)
        fd = np.zeros(k)
        for j, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + h
            fp = loss_value()
            flat[i] = orig - h
            fm = loss_value()
            flat[i] = orig
            fd[j] = (fp - fm) / (2.0 * h)
        ad = p.grad.reshape(-1)[idx]
        worst = max(worst, unit_rel_err(ad, fd))
    return worst
