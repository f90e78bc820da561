"""Command-line surface: gen, train, eval, compare, ib-verify, probe, report.

Experiments are described by a single JSON document; unknown keys are
rejected. A --seed flag overrides the config seed. Exit codes: 0 success,
2 config error, 3 numeric abort, 4 failed assertion in `compare --assert`.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import archzoo as az
from . import harness as hz
from . import ibcalc as ib
from . import reports as rp
from .harness import ConfigError
from .numcore import NumericError
from .taskgen import TaskError, instance_record

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_ASSERT = 4

MODEL_OVERRIDE_KEYS = {
    "d", "d_k", "d_s", "heads", "layers", "hidden", "decoder_width", "tied",
    "temperature", "esbn_gate", "step_embedding", "normalize_relations",
}
ASSERTION_KEYS = {"ratio", "ood_min", "ood_max"}


def _strict(section: str, doc: dict, allowed: set[str]) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")


def _dataclass_from(section: str, cls, doc: dict):
    _strict(section, doc, {f.name for f in dataclasses.fields(cls)})
    return cls(**doc)


def load_config(path: str, seed_override: int | None = None) -> dict:
    """Parse and validate the experiment document."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}")
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    _strict("config", doc, {"task", "schedule", "archs", "seeds", "models",
                            "match_pairs", "workers", "assertions"})
    if "task" not in doc:
        raise ConfigError("config needs a 'task' section")
    task = _dataclass_from("task", hz.TaskConfig, doc["task"])
    schedule = _dataclass_from("schedule", hz.TrainSchedule, doc.get("schedule", {}))
    if seed_override is not None:
        schedule = dataclasses.replace(schedule, seed=seed_override)
    models = doc.get("models", {})
    for arch, overrides in models.items():
        if arch not in az.ARCHITECTURES:
            raise ConfigError(f"models section names unknown architecture {arch!r}")
        _strict(f"models.{arch}", overrides, MODEL_OVERRIDE_KEYS)
    assertions = doc.get("assertions", {})
    _strict("assertions", assertions, ASSERTION_KEYS)
    exp = hz.ExperimentConfig(
        task=task,
        schedule=schedule,
        archs=tuple(doc.get("archs", ())) or ("corelnet",),
        seeds=tuple(doc.get("seeds", (schedule.seed,))),
        models=models,
        match_pairs=tuple(tuple(p) for p in doc.get("match_pairs", ())),
        workers=int(doc.get("workers", 1)),
    )
    return {"experiment": exp, "assertions": assertions}


def _save_model(out_dir: Path, params, model_cfg) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    np.savez(out_dir / "params.npz", **{k: v.data for k, v in params.items()})
    (out_dir / "model.json").write_text(
        json.dumps(dataclasses.asdict(model_cfg), indent=2, sort_keys=True),
        encoding="utf-8")


def load_model(model_dir: str):
    mdir = Path(model_dir)
    cfg = az.ModelConfig(**json.loads((mdir / "model.json").read_text(encoding="utf-8")))
    params = az.init_params(cfg)
    with np.load(mdir / "params.npz") as blob:
        for name in params:
            params[name].data = blob[name].astype(np.float64)
    return params, cfg


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    cfg = load_config(args.config, args.seed)
    exp = cfg["experiment"]
    vocab, split, _ = exp.task.build()
    side = split.ood_ids if args.side == "ood" else split.train_ids
    insts = hz.make_instances(exp.task, vocab, side, args.count, exp.schedule.seed,
                              stage=args.stage)
    lines = [instance_record(i) for i in insts]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args.config, args.seed)
    exp = cfg["experiment"]
    if args.arch not in exp.archs:
        raise ConfigError(f"--arch {args.arch!r} is not listed in the config archs")
    model_cfg = dataclasses.replace(
        hz.build_model_configs(exp)[args.arch], seed=exp.schedule.seed)
    record = hz.train(model_cfg, exp.task, exp.schedule)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rp.write_runs_csv([record], out / "runs.csv")
    _save_model(out, record.final_params, model_cfg)
    (out / "record.json").write_text(json.dumps({
        "arch": record.arch, "seed": record.seed, "config_hash": record.config_hash,
        "episodes_seen": record.episodes_seen, "aborted": record.aborted,
        "abort_reason": record.abort_reason, "rows": record.rows,
    }, indent=2), encoding="utf-8")
    print(f"trained {record.arch} for {record.episodes_seen} episodes; "
          f"final OOD accuracy {record.final_ood():.3f}")
    return EXIT_NUMERIC if record.aborted else EXIT_OK


def cmd_eval(args) -> int:
    cfg = load_config(args.config, args.seed)
    exp = cfg["experiment"]
    params, model_cfg = load_model(args.model_dir)
    vocab, split, _ = exp.task.build()
    side = split.ood_ids if args.side == "ood" else split.train_ids
    insts = hz.make_instances(exp.task, vocab, side, args.count, exp.schedule.seed)
    if model_cfg.sequence:
        acc, loss = hz.evaluate_sequence(params, model_cfg, insts)
    else:
        acc, loss = hz.evaluate(
            lambda eps: az.classification_logits(eps, params, model_cfg).data, insts)
    print(f"accuracy {acc:.4f}  loss {loss:.4f}  ({args.side}, {len(insts)} instances)")
    return EXIT_OK


def _check_assertions(report, assertions) -> list[str]:
    failures = []
    for spec in assertions.get("ratio", []):
        key = f"{spec['baseline']}/{spec['bottleneck']}"
        got = report.ratios.get(key)
        if got is None or got < spec["min"]:
            failures.append(f"ratio {key} = {got} < {spec['min']}")
    for arch, floor in assertions.get("ood_min", {}).items():
        got = report.stats[arch]["median_best_ood"]
        if got < floor:
            failures.append(f"median best OOD of {arch} = {got:.3f} < {floor}")
    for arch, ceil in assertions.get("ood_max", {}).items():
        got = report.stats[arch]["median_best_ood"]
        if got > ceil:
            failures.append(f"median best OOD of {arch} = {got:.3f} > {ceil}")
    return failures


def cmd_compare(args) -> int:
    cfg = load_config(args.config, args.seed)
    exp = cfg["experiment"]
    if args.workers is not None:
        exp = dataclasses.replace(exp, workers=args.workers)
    report = hz.compare(exp)
    paths = rp.export_report(report, args.out)
    print(rp.summary_text(report))
    print(f"wrote {paths['runs']}, {paths['summary']}, {paths['curves']}")
    if any(r.aborted for r in report.records) and not args.keep_going:
        return EXIT_NUMERIC
    if args.check:
        failures = _check_assertions(report, cfg["assertions"])
        if failures:
            for f in failures:
                print(f"ASSERTION FAILED: {f}")
            return EXIT_ASSERT
    return EXIT_OK


def cmd_ib_verify(args) -> int:
    world = ib.pattern_world(args.alphabet, args.length)
    code = ib.equality_code([f"s{i}" for i in range(args.alphabet)])
    rel = ib.relational_encode(world.x_labels, code)
    ident = ib.identity_channel(world.x_labels)
    channels = [ident, rel]
    patterns = len(rel.z_labels)
    if args.audit:
        family = ib.pattern_factored_channels(world, max_z=patterns)
        sufficient = [c for c in family
                      if ib.sufficiency_gap(world, c) <= 1e-12]
        winners = ib.minimality_audit(world, sufficient + [rel])
        channels = channels + sufficient
    else:
        winners = ib.minimality_audit(world, [rel])
    rows = ib.audit_rows(world, channels, beta=args.beta)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rp.write_ib_csv(rows, out / "ib_channels.csv")
    gap = ib.sufficiency_gap(world, rel)
    hx = ib.entropy_bits(world.x_marginal())
    ixr = rows[[r["channel"] for r in rows].index(rel.name)]["i_xz"]
    lines = [
        f"micro-world: alphabet {args.alphabet}, tuple length {args.length}, "
        f"uniform input distribution (assumed)",
        f"relation patterns realized: {patterns}",
        f"H(X) = {hx:.6f} bits, I(X;R) = {ixr:.6f} bits",
        f"sufficiency gap of the relational code: {gap:.3e} bits",
        f"relational code among minimal sufficient channels: "
        f"{any(w.name == rel.name for w in winners)}",
        f"winning channels: {len(winners)}",
    ]
    (out / "ib_report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return EXIT_OK


def cmd_probe(args) -> int:
    cfg = load_config(args.config, args.seed)
    exp = cfg["experiment"]
    if args.kind == "isolation":
        arch = args.arch or exp.archs[0]
        devs = hz.isolation_probe_deviation(arch, exp.task,
                                            seeds=range(args.count),
                                            init_seed=exp.schedule.seed)
        for s, d in enumerate(devs):
            print(f"draw {s}: deviation {d:.3e}")
        print(f"max {max(devs):.3e}  min {min(devs):.3e}")
        return EXIT_OK
    params, model_cfg = load_model(args.model_dir)
    insts = hz.aba_probe_instances(exp.task, args.count, exp.schedule.seed)
    cos = hz.symbol_consistency_probe(params, model_cfg, insts)
    print(f"mean pairwise cosine of role-aligned retrievals over "
          f"{len(insts)} episodes: {cos:.4f}")
    return EXIT_OK


def cmd_report(args) -> int:
    rows = rp.read_runs_csv(args.runs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rp.write_curves_svg(rows, out / "curves.svg", split=args.split)
    print(f"wrote {out / 'curves.svg'}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relkit",
                                description="relational-bottleneck workbench")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="experiment JSON document")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")

    sp = sub.add_parser("gen", help="emit task instances as JSON lines")
    common(sp)
    sp.add_argument("--count", type=int, default=100)
    sp.add_argument("--side", choices=("train", "ood"), default="train")
    sp.add_argument("--stage", type=int, default=None, help="counting curriculum stage")
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_gen)

    sp = sub.add_parser("train", help="train one architecture on the config task")
    common(sp)
    sp.add_argument("--arch", required=True, choices=az.ARCHITECTURES)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("eval", help="evaluate saved parameters on fresh instances")
    common(sp)
    sp.add_argument("--model-dir", required=True)
    sp.add_argument("--side", choices=("train", "ood"), default="ood")
    sp.add_argument("--count", type=int, default=500)
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("compare", help="run the architecture x seed grid")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--assert", dest="check", action="store_true",
                    help="exit 4 when config assertions fail")
    sp.add_argument("--keep-going", action="store_true",
                    help="exit 0 even when cells aborted")
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(fn=cmd_compare)

    sp = sub.add_parser("ib-verify", help="exact bottleneck audit on a micro-world")
    sp.add_argument("--alphabet", type=int, default=4)
    sp.add_argument("--length", type=int, default=3)
    sp.add_argument("--beta", type=float, default=1.0)
    sp.add_argument("--audit", action="store_true",
                    help="enumerate all pattern-factored channels")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_ib_verify)

    sp = sub.add_parser("probe", help="isolation or symbol-consistency probes")
    common(sp)
    sp.add_argument("--kind", choices=("isolation", "symbols"), required=True)
    sp.add_argument("--arch", default=None)
    sp.add_argument("--model-dir", default=None)
    sp.add_argument("--count", type=int, default=10)
    sp.set_defaults(fn=cmd_probe)

    sp = sub.add_parser("report", help="re-render curves from a runs CSV")
    sp.add_argument("--runs", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--split", choices=("train", "ood"), default="ood")
    sp.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, TaskError, TypeError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as err:
        print(f"numeric abort: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
