"""Command-line interface: train, attack, sweep, transfer, policy and report commands."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import bridge as bridge_mod
from .attack import AttackError, read_records
from .attribution import METHODS
from .harness import (
    ConfigError,
    DatasetError,
    ExperimentConfig,
    evaluate_policy,
    load_dataset,
    run_semi_universal,
    run_sweep,
    run_transfer,
)
from .lexicon import Lexicon, LexiconError
from .models import (
    ARCHITECTURES,
    ModelConfig,
    ModelError,
    TrainConfig,
    build_model,
    load_model,
    train,
)
from .reporting import emit_report, parse_curve_csv, render_curve_figure
from .universal import PolicyError, build_policy, load_policy, save_policy

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

_CONFIG_ERRORS = (ConfigError, AttackError, ModelError, LexiconError, PolicyError, DatasetError)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="global RNG seed")
    parser.add_argument("--config", default=None, help="JSON file mirroring the run config")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--model", default=None, help="native checkpoint path or bridge:URL")
    parser.add_argument("--explainer", choices=METHODS, default=None)
    parser.add_argument("--ig-steps", type=int, default=None)
    parser.add_argument("--rho-max", type=float, default=None)
    parser.add_argument("--variant", choices=("tef", "ra", "ri", "rs"), default=None)
    parser.add_argument("--candidates", type=int, default=None, help="synonym candidate count")
    parser.add_argument("--dataset", default=None, help="text,label CSV path")
    parser.add_argument("--embeddings", default=None, help="word-vector file")
    parser.add_argument("--pos-lexicon", default=None, help="word<TAB>tag TSV")
    parser.add_argument("--stop-words", default=None, help="stop-word list (one per line)")
    parser.add_argument(
        "--synonym-embeddings", default=None, help="separate vectors for synonym lookup"
    )
    parser.add_argument("--sweep", default=None, help="comma-separated rho_max sweep list")
    parser.add_argument("--bins", type=int, default=None, help="curve bin count")
    parser.add_argument("--attention-layer", type=int, default=None)
    parser.add_argument("--attention-head", type=int, default=None)
    parser.add_argument("--no-figures", action="store_true", help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attrfool",
        description="Estimate how robust text-classifier explanations are to synonym attacks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a native classifier")
    _add_common(p_train)
    p_train.add_argument("--arch", choices=ARCHITECTURES, default="attention_pool")
    p_train.add_argument("--epochs", type=int, default=30)
    p_train.add_argument("--learning-rate", type=float, default=0.5)
    p_train.add_argument("--batch-size", type=int, default=32)
    p_train.add_argument("--hidden", type=int, default=16)
    p_train.add_argument("--kernel-widths", default="2,3")
    p_train.add_argument("--eval-dataset", default=None)

    p_attack = sub.add_parser("attack", help="attack a dataset at one rho_max")
    _add_common(p_attack)

    p_sweep = sub.add_parser("sweep", help="attack over a rho_max sweep and build the curve")
    _add_common(p_sweep)

    p_transfer = sub.add_parser("transfer", help="re-evaluate records on another model/explainer")
    _add_common(p_transfer)
    p_transfer.add_argument("--records", required=True, help="records JSONL from a prior run")

    p_pb = sub.add_parser("policy-build", help="aggregate records into a substitution policy")
    _add_common(p_pb)
    p_pb.add_argument("--records", action="append", required=True, help="records JSONL (repeatable)")

    p_pa = sub.add_parser("policy-apply", help="apply a policy and evaluate the shift")
    _add_common(p_pa)
    p_pa.add_argument("--policy", required=True, help="policy CSV path")

    p_semi = sub.add_parser(
        "semi-universal", help="split, build a policy on one half, evaluate on the other"
    )
    _add_common(p_semi)

    p_report = sub.add_parser("report", help="render figures for an existing run directory")
    _add_common(p_report)
    p_report.add_argument("--run", required=True, help="directory holding curve.csv/summary.json")

    p_demo = sub.add_parser("demo-data", help="write the synthetic corpus and its lexicon files")
    _add_common(p_demo)
    p_demo.add_argument("--train-size", type=int, default=1200)
    p_demo.add_argument("--test-size", type=int, default=440)

    return parser


def _experiment_config(args) -> ExperimentConfig:
    base: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            base = json.load(fh)
        if not isinstance(base, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
    overrides = {
        "dataset": args.dataset,
        "model": args.model,
        "explainer": args.explainer,
        "ig_steps": args.ig_steps,
        "attention_layer": args.attention_layer,
        "attention_head": args.attention_head,
        "variant": args.variant,
        "seed": args.seed,
        "out": args.out,
        "candidates": args.candidates,
        "embeddings": args.embeddings,
        "pos_lexicon": args.pos_lexicon,
        "stopwords": args.stop_words,
        "synonym_embeddings": args.synonym_embeddings,
        "bins": args.bins,
    }
    if args.sweep is not None:
        overrides["sweep"] = [float(x) for x in args.sweep.split(",") if x.strip()]
    elif args.rho_max is not None and "sweep" not in base:
        overrides["sweep"] = [args.rho_max]
    base.update({k: v for k, v in overrides.items() if v is not None})
    for key in ("dataset", "model", "embeddings", "pos_lexicon"):
        if not base.get(key):
            raise ConfigError(f"missing required setting {key!r} (flag or config)")
    return ExperimentConfig.from_dict(base)


def _load_lexicon(cfg: ExperimentConfig) -> Lexicon:
    return Lexicon.load(
        cfg.embeddings,
        cfg.pos_lexicon,
        stopwords_path=cfg.stopwords,
        synonym_embeddings_path=cfg.synonym_embeddings,
        neighbor_cap=cfg.candidates,
    )


def _resolve_model(spec: str, lex: Lexicon):
    if spec.startswith("bridge:"):
        return bridge_mod.connect(spec[len("bridge:") :])
    return load_model(spec, lex.store)


def _emit(curve, records, cfg: ExperimentConfig, extra=None, figures=True) -> dict:
    paths = emit_report(curve, records, cfg.out, cfg.to_dict(), extra=extra, figures=figures)
    print(f"ACC {curve.acc!r}  binned {curve.binned_count}  zero-rho {curve.zero_rho_count}"
          f"  degenerate {curve.degenerate_count}")
    for name, path in sorted(paths.items()):
        print(f"wrote {name}: {path}")
    return paths


def _cmd_train(args) -> int:
    for key, flag in (("dataset", "--dataset"), ("embeddings", "--embeddings")):
        if getattr(args, key) is None:
            raise ConfigError(f"train requires {flag}")
    from .lexicon import EmbeddingStore

    store = EmbeddingStore.from_file(args.embeddings)
    dataset = load_dataset(args.dataset)
    config = ModelConfig(
        arch=args.arch,
        embed_dim=store.dimension,
        num_labels=dataset.num_labels,
        hidden=args.hidden,
        kernel_widths=tuple(int(k) for k in args.kernel_widths.split(",")),
        seed=args.seed or 0,
    )
    model = build_model(config, store)
    eval_samples = load_dataset(args.eval_dataset).samples if args.eval_dataset else None
    stats = train(
        model,
        dataset.samples,
        TrainConfig(
            epochs=args.epochs,
            learning_rate=args.learning_rate,
            batch_size=args.batch_size,
            seed=args.seed or 0,
        ),
        eval_samples=eval_samples,
    )
    outdir = args.out or "out"
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "model.json")
    model.save(path)
    print(f"train accuracy {stats.train_accuracy:.4f}")
    if stats.eval_accuracy is not None:
        print(f"test accuracy {stats.eval_accuracy:.4f}")
    print(f"wrote checkpoint: {path}")
    return EXIT_OK


def _cmd_sweep(args, single_rho: bool) -> int:
    cfg = _experiment_config(args)
    if single_rho and len(cfg.sweep) != 1:
        raise ConfigError("attack takes exactly one --rho-max; use sweep for lists")
    lex = _load_lexicon(cfg)
    model = _resolve_model(cfg.model, lex)
    dataset = load_dataset(cfg.dataset)
    result = run_sweep(model, dataset, lex, cfg)
    extra = {} if result.ppl_increase is None else {"ppl_increase": result.ppl_increase}
    _emit(result.curve, result.records, cfg, extra, figures=not args.no_figures)
    return EXIT_OK


def _cmd_transfer(args) -> int:
    cfg = _experiment_config(args)
    lex = _load_lexicon(cfg)
    model = _resolve_model(cfg.model, lex)
    dataset = load_dataset(cfg.dataset)
    records = read_records(args.records)
    result = run_transfer(records, dataset, model, lex, cfg)
    extra = {"retained": result.retained, "total": result.total,
             "retention_rate": result.retention_rate}
    if result.ppl_increase is not None:
        extra["ppl_increase"] = result.ppl_increase
    _emit(result.curve, [r.record for r in result.results], cfg, extra,
          figures=not args.no_figures)
    return EXIT_OK


def _cmd_policy_build(args) -> int:
    records = []
    for path in args.records:
        records.extend(read_records(path))
    policy = build_policy(records)
    outdir = args.out or "out"
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "policy.csv")
    save_policy(policy, path)
    print(f"policy rows: {len(policy)}")
    print(f"wrote policy: {path}")
    return EXIT_OK


def _cmd_policy_apply(args) -> int:
    cfg = _experiment_config(args)
    lex = _load_lexicon(cfg)
    model = _resolve_model(cfg.model, lex)
    dataset = load_dataset(cfg.dataset)
    policy = load_policy(args.policy)
    result = evaluate_policy(policy, model, dataset, lex, cfg)
    extra = {"retained": result.retained, "total": result.total,
             "retention_rate": result.retention_rate}
    if result.ppl_increase is not None:
        extra["ppl_increase"] = result.ppl_increase
    _emit(result.curve, [r.record for r in result.results], cfg, extra,
          figures=not args.no_figures)
    return EXIT_OK


def _cmd_semi_universal(args) -> int:
    cfg = _experiment_config(args)
    lex = _load_lexicon(cfg)
    model = _resolve_model(cfg.model, lex)
    dataset = load_dataset(cfg.dataset)
    result = run_semi_universal(model, dataset, lex, cfg)
    os.makedirs(cfg.out, exist_ok=True)
    policy_path = os.path.join(cfg.out, "policy.csv")
    save_policy(result.policy, policy_path)
    extra = {
        "retained": result.retained,
        "total": result.total,
        "attack_set_size": len(result.attack_indices),
        "eval_set_size": len(result.eval_indices),
    }
    paths = _emit(result.curve, [r.record for r in result.results], cfg, extra,
                  figures=not args.no_figures)
    print(f"wrote policy: {policy_path}")
    return EXIT_OK


def _cmd_report(args) -> int:
    curve_path = os.path.join(args.run, "curve.csv")
    summary_path = os.path.join(args.run, "summary.json")
    bins = parse_curve_csv(curve_path)
    with open(summary_path, encoding="utf-8") as fh:
        summary = json.load(fh)
    from .harness import RobustnessCurve

    curve = RobustnessCurve(
        bins=bins,
        acc=summary["acc"],
        ceiling=summary["ceiling"],
        zero_rho_count=summary["zero_rho_count"],
        degenerate_count=summary["degenerate_count"],
        binned_count=summary["binned_count"],
    )
    print(json.dumps(summary, sort_keys=True, indent=2))
    if not args.no_figures:
        fig_path = render_curve_figure(curve, os.path.join(args.run, "curve.png"))
        print(f"wrote figure: {fig_path}")
    return EXIT_OK


def _cmd_demo_data(args) -> int:
    from .synthdata import CorpusSpec, write_corpus

    spec = CorpusSpec(
        seed=args.seed if args.seed is not None else 7,
        train_size=args.train_size,
        test_size=args.test_size,
    )
    paths = write_corpus(args.out or "data", spec)
    for name, path in sorted(paths.items()):
        print(f"wrote {name}: {path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "attack":
            return _cmd_sweep(args, single_rho=True)
        if args.command == "sweep":
            return _cmd_sweep(args, single_rho=False)
        if args.command == "transfer":
            return _cmd_transfer(args)
        if args.command == "policy-build":
            return _cmd_policy_build(args)
        if args.command == "policy-apply":
            return _cmd_policy_apply(args)
        if args.command == "semi-universal":
            return _cmd_semi_universal(args)
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "demo-data":
            return _cmd_demo_data(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
