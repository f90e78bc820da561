"""Training, evaluation, comparisons, and the counting mastery analysis.

A run is fully determined by (model config, task config, schedule): data
streams, evaluation sets, and parameter updates are all seeded from the
schedule seed, and evaluation is a pure argmax rule, so identical inputs
reproduce identical records byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import archzoo as az
from . import numcore as nc
from . import relcore as rc
from . import taskgen as tg
from .archzoo import ModelConfig
from .numcore import NumericError, Tensor
from .taskgen import TaskInstance, TaskSpec


class ConfigError(ValueError):
    """Invalid experiment configuration."""


TASK_KINDS = ("same_different", "identity_rules", "counting", "sorting")


@dataclass(frozen=True)
class TaskConfig:
    kind: str
    vocab_size: int = 40
    feature_dim: int = 40
    vocab_kind: str = "one-hot"
    vocab_seed: int = 0
    train_fraction: float = 0.5
    split_seed: int = 0
    max_count: int = 10   # counting
    length: int = 5       # sorting

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ConfigError(f"unknown task kind {self.kind!r}")

    def build(self) -> tuple[tg.ObjectVocabulary, tg.SplitSpec, TaskSpec]:
        vocab = tg.make_vocab(self.vocab_size, self.feature_dim, self.vocab_kind,
                              self.vocab_seed)
        split = tg.split_vocab(vocab, self.train_fraction, self.split_seed)
        if self.kind == "same_different":
            spec = tg.same_different_spec(vocab)
        elif self.kind == "identity_rules":
            spec = tg.identity_rules_spec(vocab)
        elif self.kind == "counting":
            spec = tg.counting_spec(vocab, self.max_count)
        else:
            spec = tg.sorting_spec(vocab, self.length)
        return vocab, split, spec


@dataclass(frozen=True)
class TrainSchedule:
    max_episodes: int = 5000
    batch_size: int = 16
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    eval_every: int = 250
    eval_size: int = 200
    theta: float = 0.95
    window: int = 3
    early_stop: bool = True
    seed: int = 0

    def __post_init__(self):
        if not (0.5 < self.theta <= 1.0):
            raise ConfigError(f"theta must lie in (0.5, 1], got {self.theta}")
        if self.window < 1:
            raise ConfigError(f"window must be >= 1, got {self.window}")
        if self.max_episodes < 1 or self.batch_size < 1 or self.eval_every < 1:
            raise ConfigError("episode/batch/cadence settings must be positive")


@dataclass
class RunRecord:
    arch: str
    seed: int
    config_hash: str
    rows: list[dict] = field(default_factory=list)
    wall_clock: float = 0.0
    aborted: bool = False
    abort_reason: str = ""
    episodes_seen: int = 0
    final_params: dict[str, Tensor] | None = None

    def episodes_to_criterion(self, theta: float, window: int) -> int | None:
        """Episode count at the first eval opening a window of `window`
        consecutive holdout accuracies >= theta. Never recomputed downward."""
        run = 0
        start = None
        for row in self.rows:
            if row["train_accuracy"] >= theta:
                if run == 0:
                    start = row["episode"]
                run += 1
                if run >= window:
                    return start
            else:
                run = 0
                start = None
        return None

    def best_ood(self) -> float:
        return max((r["ood_accuracy"] for r in self.rows), default=0.0)

    def final_ood(self) -> float:
        return self.rows[-1]["ood_accuracy"] if self.rows else 0.0


def config_hash(*parts) -> str:
    blob = json.dumps([asdict(p) if hasattr(p, "__dataclass_fields__") else p
                       for p in parts], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _derived_seed(seed: int, *salt: int) -> int:
    return int(np.random.SeedSequence([seed, *salt]).generate_state(1)[0])


def model_config(arch: str, task_cfg: TaskConfig, seed: int = 0, **overrides) -> ModelConfig:
    _, _, spec = task_cfg.build()
    return az.config_for_task(arch, spec, seed=seed, **overrides)


# ---------------------------------------------------------------------------
# data plumbing


def make_instances(task_cfg: TaskConfig, vocab, side: Sequence[int], count: int,
                   seed: int, stage: int | None = None, exact_n: int | None = None
                   ) -> list[TaskInstance]:
    if task_cfg.kind == "same_different":
        return tg.gen_same_different(vocab, side, count, seed)
    if task_cfg.kind == "identity_rules":
        return tg.gen_identity_rules(vocab, side, count, seed)
    if task_cfg.kind == "counting":
        return tg.gen_counting(vocab, side, task_cfg.max_count, count, seed,
                               stage=stage if stage is not None else task_cfg.max_count,
                               exact_n=exact_n)
    return tg.gen_sorting(vocab, side, task_cfg.length, count, seed)


def _episodes_labels(instances: Sequence[TaskInstance]):
    return [i.episode for i in instances], [i.label for i in instances]


# ---------------------------------------------------------------------------
# evaluation


def evaluate(predict: Callable[[Sequence[np.ndarray]], np.ndarray],
             instances: Sequence[TaskInstance], batch: int = 64) -> tuple[float, float]:
    """Accuracy and mean loss under the pure argmax rule.

    `predict` maps a list of episodes to a logits array (B x C); argmax
    breaks ties at the lowest class index. Losses are mean cross-entropy.
    """
    if not instances:
        raise ConfigError("evaluate needs a non-empty dataset")
    correct = 0
    loss_total = 0.0
    for ofs in range(0, len(instances), batch):
        chunk = instances[ofs:ofs + batch]
        eps, labels = _episodes_labels(chunk)
        logits = np.asarray(predict(eps), dtype=np.float64)
        preds = logits.argmax(axis=1)
        correct += int((preds == np.asarray(labels)).sum())
        loss_total += nc.cross_entropy(nc.tensor(logits), labels).item() * len(chunk)
    return correct / len(instances), loss_total / len(instances)


def evaluate_sequence(params, cfg: ModelConfig, instances: Sequence[TaskInstance],
                      batch: int = 64) -> tuple[float, float]:
    """Exact-match accuracy for permutation targets, teacher-forced loss."""
    if not instances:
        raise ConfigError("evaluate needs a non-empty dataset")
    correct = 0
    loss_total = 0.0
    for ofs in range(0, len(instances), batch):
        chunk = instances[ofs:ofs + batch]
        eps, labels = _episodes_labels(chunk)
        perms = az.pointer_greedy(eps, params, cfg)
        for p, t in zip(perms, labels):
            correct += int(tuple(p.tolist()) == tuple(t))
        step_logits = az.pointer_step_logits(eps, labels, params, cfg)
        vals = [nc.cross_entropy(l, [t[i] for t in labels]).item()
                for i, l in enumerate(step_logits)]
        loss_total += float(np.mean(vals)) * len(chunk)
    return correct / len(instances), loss_total / len(instances)


def _model_evaluator(params, cfg: ModelConfig):
    if cfg.sequence:
        return lambda insts: evaluate_sequence(params, cfg, insts)
    return lambda insts: evaluate(
        lambda eps: az.classification_logits(eps, params, cfg).data, insts)


# ---------------------------------------------------------------------------
# training


def _batch_loss(params, cfg: ModelConfig, eps, labels) -> nc.Tensor:
    if cfg.sequence:
        step_logits = az.pointer_step_logits(eps, labels, params, cfg)
        losses = [nc.cross_entropy(l, [t[i] for t in labels])
                  for i, l in enumerate(step_logits)]
        total = losses[0]
        for l in losses[1:]:
            total = nc.add(total, l)
        return nc.scale(total, 1.0 / len(losses))
    logits = az.classification_logits(eps, params, cfg)
    return nc.cross_entropy(logits, labels)


def train(model_cfg: ModelConfig, task_cfg: TaskConfig, schedule: TrainSchedule) -> RunRecord:
    """Seeded mini-batch training with cadenced train-holdout/OOD evaluation."""
    started = time.perf_counter()
    vocab, split, spec = task_cfg.build()
    record = RunRecord(arch=model_cfg.arch, seed=schedule.seed,
                       config_hash=config_hash(model_cfg, task_cfg, schedule))
    params = az.init_params(model_cfg)
    plist = [params[k] for k in sorted(params)]
    state = nc.adam_init(plist, lr=schedule.lr, beta1=schedule.beta1,
                         beta2=schedule.beta2, epsilon=schedule.epsilon)

    hold = make_instances(task_cfg, vocab, split.train_ids, schedule.eval_size,
                          _derived_seed(schedule.seed, 2))
    ood = make_instances(task_cfg, vocab, split.ood_ids, schedule.eval_size,
                         _derived_seed(schedule.seed, 3))
    evaluator = _model_evaluator(params, model_cfg)

    steps_per_eval = max(1, schedule.eval_every // schedule.batch_size)
    sustained = 0
    episodes = 0
    step = 0
    while episodes < schedule.max_episodes:
        batch = make_instances(task_cfg, vocab, split.train_ids, schedule.batch_size,
                               _derived_seed(schedule.seed, 1, step))
        eps, labels = _episodes_labels(batch)
        try:
            nc.zero_grads(plist)
            with nc.Tape() as tape:
                loss = _batch_loss(params, model_cfg, eps, labels)
            nc.backward(tape, loss)
            nc.adam_step(plist, [p.grad for p in plist], state)
        except NumericError as err:
            record.aborted = True
            record.abort_reason = str(err)
            record.rows.append({"episode": episodes, "train_accuracy": float("nan"),
                                "train_loss": float("nan"), "ood_accuracy": float("nan"),
                                "ood_loss": float("nan"), "aborted": True})
            break
        episodes += len(batch)
        step += 1
        if step % steps_per_eval == 0 or episodes >= schedule.max_episodes:
            tr_acc, tr_loss = evaluator(hold)
            ood_acc, ood_loss = evaluator(ood)
            record.rows.append({"episode": episodes, "train_accuracy": tr_acc,
                                "train_loss": tr_loss, "ood_accuracy": ood_acc,
                                "ood_loss": ood_loss, "aborted": False})
            sustained = sustained + 1 if tr_acc >= schedule.theta else 0
            if schedule.early_stop and sustained >= schedule.window:
                break
    record.episodes_seen = episodes
    record.final_params = params
    record.wall_clock = time.perf_counter() - started
    return record


# ---------------------------------------------------------------------------
# comparisons


@dataclass(frozen=True)
class ExperimentConfig:
    task: TaskConfig
    schedule: TrainSchedule
    archs: tuple[str, ...]
    seeds: tuple[int, ...]
    models: dict = field(default_factory=dict)        # per-arch ModelConfig overrides
    match_pairs: tuple[tuple[str, str], ...] = ()     # decoder-width matched pairs
    workers: int = 1

    def __post_init__(self):
        if len(self.archs) < 1:
            raise ConfigError("experiment needs at least one architecture")
        for a in self.archs:
            if a not in az.ARCHITECTURES:
                raise ConfigError(f"unknown architecture {a!r}")
        for pair in self.match_pairs:
            if len(pair) != 2:
                raise ConfigError("match_pairs entries must be [arch, arch]")


@dataclass
class ComparisonReport:
    experiment_hash: str
    records: list[RunRecord]
    stats: dict
    ratios: dict

    def row_count(self) -> int:
        return len(self.records)


def build_model_configs(exp: ExperimentConfig) -> dict[str, ModelConfig]:
    """Per-arch configs with decoder widths matched inside declared pairs."""
    cfgs = {}
    for arch in exp.archs:
        overrides = dict(exp.models.get(arch, {}))
        cfgs[arch] = model_config(arch, exp.task, seed=0, **overrides)
    for a, b in exp.match_pairs:
        if a in cfgs and b in cfgs:
            cfgs[a], cfgs[b] = az.match_decoder_width(cfgs[a], cfgs[b])
    return cfgs


def _run_cell(args) -> RunRecord:
    model_cfg, task_cfg, schedule = args
    return train(model_cfg, task_cfg, schedule)


def compare(exp: ExperimentConfig) -> ComparisonReport:
    """Run the architecture x seed grid and summarize medians and ratios.

    Aborted cells stay in the report with their diagnostic rows; their
    episodes-to-criterion is censored at the episode budget.
    """
    cfgs = build_model_configs(exp)
    cells = []
    for arch in exp.archs:
        for seed in exp.seeds:
            model_cfg = replace(cfgs[arch], seed=seed)
            cells.append((model_cfg, exp.task, replace(exp.schedule, seed=seed)))
    if exp.workers > 1:
        with ProcessPoolExecutor(max_workers=exp.workers) as pool:
            records = list(pool.map(_run_cell, cells))
    else:
        records = [_run_cell(c) for c in cells]

    stats: dict = {}
    for arch in exp.archs:
        runs = [r for r in records if r.arch == arch]
        etc = [r.episodes_to_criterion(exp.schedule.theta, exp.schedule.window)
               for r in runs]
        censored = [e if e is not None else exp.schedule.max_episodes for e in etc]
        stats[arch] = {
            "median_episodes_to_criterion": float(np.median(censored)),
            "criterion_censored_runs": sum(1 for e in etc if e is None),
            "median_best_ood": float(np.median([r.best_ood() for r in runs])),
            "median_final_ood": float(np.median([r.final_ood() for r in runs])),
            "aborted_runs": sum(1 for r in runs if r.aborted),
        }
    ratios = {}
    for a in exp.archs:
        for b in exp.archs:
            if a != b:
                denom = stats[b]["median_episodes_to_criterion"]
                if denom > 0:
                    ratios[f"{a}/{b}"] = stats[a]["median_episodes_to_criterion"] / denom
    return ComparisonReport(
        experiment_hash=config_hash(exp.task, exp.schedule,
                                    {"archs": list(exp.archs), "seeds": list(exp.seeds)}),
        records=records, stats=stats, ratios=ratios)


# ---------------------------------------------------------------------------
# staged counting and the mastery curve


@dataclass
class CountingRecord:
    arch: str
    seed: int
    mastery: dict[int, int] = field(default_factory=dict)  # n -> episode first sustained
    rows: list[dict] = field(default_factory=list)
    episodes_seen: int = 0
    aborted: bool = False
    final_params: dict | None = None


def train_staged_counting(model_cfg: ModelConfig, task_cfg: TaskConfig,
                          schedule: TrainSchedule, per_n_eval: int = 40) -> CountingRecord:
    """Counting curriculum: train on set sizes 1..stage, advancing the stage
    once the current stage size is reliably mastered; evaluate every size at
    each cadence so generalization ahead of the curriculum is recorded."""
    if task_cfg.kind != "counting":
        raise ConfigError("staged training is defined for the counting task")
    vocab, split, spec = task_cfg.build()
    record = CountingRecord(arch=model_cfg.arch, seed=schedule.seed)
    params = az.init_params(model_cfg)
    plist = [params[k] for k in sorted(params)]
    state = nc.adam_init(plist, lr=schedule.lr, beta1=schedule.beta1,
                         beta2=schedule.beta2, epsilon=schedule.epsilon)
    max_n = task_cfg.max_count
    eval_sets = {
        n: make_instances(task_cfg, vocab, split.train_ids, per_n_eval,
                          _derived_seed(schedule.seed, 10, n), exact_n=n)
        for n in range(1, max_n + 1)
    }
    predict = lambda eps: az.classification_logits(eps, params, model_cfg).data

    stage = 1
    streaks = {n: 0 for n in range(1, max_n + 1)}
    window_start = {n: None for n in range(1, max_n + 1)}
    episodes = 0
    step = 0
    steps_per_eval = max(1, schedule.eval_every // schedule.batch_size)
    while episodes < schedule.max_episodes:
        batch = make_instances(task_cfg, vocab, split.train_ids, schedule.batch_size,
                               _derived_seed(schedule.seed, 1, step), stage=stage)
        eps, labels = _episodes_labels(batch)
        try:
            nc.zero_grads(plist)
            with nc.Tape() as tape:
                loss = _batch_loss(params, model_cfg, eps, labels)
            nc.backward(tape, loss)
            nc.adam_step(plist, [p.grad for p in plist], state)
        except NumericError:
            record.aborted = True
            break
        episodes += len(batch)
        step += 1
        if step % steps_per_eval == 0:
            row = {"episode": episodes, "stage": stage}
            for n in range(1, max_n + 1):
                acc, _ = evaluate(predict, eval_sets[n])
                row[f"acc_{n}"] = acc
                if n in record.mastery:
                    continue
                if acc >= schedule.theta:
                    if streaks[n] == 0:
                        window_start[n] = episodes
                    streaks[n] += 1
                    if streaks[n] >= schedule.window:
                        record.mastery[n] = window_start[n]
                else:
                    streaks[n] = 0
                    window_start[n] = None
            record.rows.append(row)
            while stage < max_n and stage in record.mastery:
                stage += 1
            if len(record.mastery) == max_n:
                break
    record.episodes_seen = episodes
    record.final_params = params
    return record


def mastery_curve(record: CountingRecord) -> dict[int, int]:
    """Episodes to first sustained mastery per set size; absent = unmastered."""
    return dict(sorted(record.mastery.items()))


def late_early_ratio(mastery: dict[int, int], max_count: int = 10,
                     censor_at: int | None = None) -> float | None:
    """Sum of mastery increments for n in 6..max_count over the sum for
    n in 1..5; increments telescope, so this is (m_max - m_5) / m_5.

    Undefined (None) when any of n=1..5 is unmastered. Unmastered late
    numbers are censored at `censor_at` when given.
    """
    if any(n not in mastery for n in range(1, 6)):
        return None
    filled = dict(mastery)
    for n in range(6, max_count + 1):
        if n not in filled:
            if censor_at is None:
                return None
            filled[n] = censor_at
    early = sum(filled[n] - filled.get(n - 1, 0) for n in range(1, 6))
    late = sum(filled[n] - filled[n - 1] for n in range(6, max_count + 1))
    return late / early


# ---------------------------------------------------------------------------
# probes


def isolation_probe_deviation(arch: str, task_cfg: TaskConfig, *, d: int = 64,
                              seeds: Sequence[int] = (0,), init_seed: int = 0,
                              **overrides) -> list[float]:
    """Probe deviations at random init over a batch of orthogonal draws."""
    vocab, split, spec = task_cfg.build()
    cfg = az.config_for_task(arch, spec, seed=init_seed, d=d, **overrides)
    model = az.Model(cfg)
    inst = make_instances(task_cfg, vocab, split.train_ids, 1, _derived_seed(init_seed, 7))[0]
    out = []
    for s in seeds:
        q = rc.random_orthogonal(cfg.d, seed=s)
        out.append(rc.isolation_probe(model, inst.episode, orthogonal_q=q))
    return out


def aba_probe_instances(task_cfg: TaskConfig, count: int, seed: int,
                        side: str = "ood") -> list[TaskInstance]:
    """Identity-rule episodes restricted to the ABA pattern, novel fillers."""
    vocab, split, _ = task_cfg.build()
    ids = split.ood_ids if side == "ood" else split.train_ids
    out: list[TaskInstance] = []
    salt = 0
    while len(out) < count:
        for inst in tg.gen_identity_rules(vocab, ids, count, _derived_seed(seed, 20, salt)):
            if inst.object_ids[2] == inst.object_ids[0]:  # ABA episodes only
                out.append(inst)
                if len(out) >= count:
                    break
        salt += 1
    return out


def symbol_consistency_probe(params, model_cfg: ModelConfig,
                             instances: Sequence[TaskInstance],
                             step_index: int = 2) -> float:
    """Mean pairwise cosine of the retrieved value at the role-matching step.

    For ABA episodes the third item repeats the first, so at step 2 the
    retrieval mixture should resolve onto the value bound at step 0,
    regardless of which objects fill the roles.
    """
    if model_cfg.arch != "esbn":
        raise ConfigError("the symbol consistency probe reads ESBN retrievals")
    eps = [i.episode for i in instances]
    trace: dict = {}
    az.classification_logits(eps, params, model_cfg, trace=trace)
    v_ret = trace["v_ret"][step_index]
    return rc.pairwise_cosine_mean(list(v_ret))
