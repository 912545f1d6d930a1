"""Command-line entry point: ``memadmit <subcommand> ...``.

Exit codes: 0 success, 2 configuration or input error, 3 provider error,
4 invariant violation, 130 interrupted.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from memadmit.admission import MemoryStore, process_conversation, read_store, write_decisions, write_store
from memadmit.config import PROVIDER_MODES, ConfigError, EngineConfig
from memadmit.core import InputError, InvariantViolation
from memadmit.evalharness import (
    ExperimentPlan,
    prepare,
    run_ablation,
    run_benchmark,
    run_domain_eval,
    run_latency,
    run_sweep,
)
from memadmit.ingest import candidate_to_dict, candidates_for, extract_candidates, parse_dataset
from memadmit.policy import learn_policy, load_policy, save_policy
from memadmit.scorers.providers import ProviderError
from memadmit.scorers.utility import ScoringError

logger = logging.getLogger("memadmit")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROVIDER = 3
EXIT_INVARIANT = 4
EXIT_INTERRUPTED = 130


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="memadmit", description="Admission control for long-term agent memory.")
    parser.add_argument("--config", help="YAML or JSON config file")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--provider-mode", choices=PROVIDER_MODES, help="override provider.mode")
    parser.add_argument("--jobs", type=int, help="worker threads for feature computation")
    parser.add_argument("--dry-run", action="store_true", help="validate config and inputs without scoring")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="extract candidate memories from a dataset")
    p.add_argument("dataset", nargs="?")
    p.add_argument("--out", help="candidates file (default: <output>/candidates.jsonl)")
    p.add_argument("--labels", action="store_true", help="emit labeled candidates where present")

    p = sub.add_parser("admit", help="run admission over conversations and update a store")
    p.add_argument("conversations")
    p.add_argument("policy")
    p.add_argument("store", nargs="?", help="store file, read if present and rewritten")
    p.add_argument("--log", help="decision log (default: <output>/decisions.jsonl)")

    p = sub.add_parser("train", help="learn a policy on the training split")
    p.add_argument("dataset", nargs="?")
    p.add_argument("--out", help="policy file (default: <output>/policy.json)")

    for name, help_text in (
        ("bench", "compare A-MAC against the baselines"),
        ("ablate", "re-learn with each feature removed"),
        ("sweep", "threshold sensitivity of the learned weights"),
        ("latency", "per-feature timing breakdown"),
        ("domains", "per-domain evaluation of one policy"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("dataset", nargs="?")
        p.add_argument("--out", help="output directory (overrides paths.output)")
        if name == "latency":
            p.add_argument("--n", type=int, default=30, help="candidates to time (>= 30)")
            p.add_argument("--stub-delay-ms", type=float, help="simulated utility latency in stub mode")
        if name == "domains":
            p.add_argument("--policy", help="policy file; learned on the training split when omitted")
    return parser


def _config(args: argparse.Namespace) -> EngineConfig:
    overrides = {
        "seed": args.seed,
        "jobs": args.jobs,
        "provider.mode": args.provider_mode,
        "provider.stub_delay_ms": getattr(args, "stub_delay_ms", None),
    }
    if args.command in ("bench", "ablate", "sweep", "latency", "domains"):
        overrides["paths.output"] = args.out
    overrides["paths.dataset"] = getattr(args, "dataset", None)
    overrides["paths.store"] = getattr(args, "store", None)
    cfg = EngineConfig.load(args.config)
    return cfg.with_overrides(**overrides)


def _dataset_path(cfg: EngineConfig) -> str:
    path = cfg.path("dataset")
    if not path:
        raise ConfigError("no dataset given on the command line or in paths.dataset")
    return path


def _plan(cfg: EngineConfig) -> ExperimentPlan:
    return ExperimentPlan(
        dataset_path=_dataset_path(cfg),
        output_dir=cfg.path("output"),
        split=cfg.split,
        grid=cfg.grid,
        baselines=tuple(cfg.baselines),
        provider_mode=cfg.provider_mode,
        seed=cfg.seed,
        jobs=cfg.jobs,
        config_hash=cfg.content_hash(),
    )


def cmd_ingest(args: argparse.Namespace, cfg: EngineConfig) -> int:
    dataset = parse_dataset(_dataset_path(cfg))
    if args.dry_run:
        print(f"ok: {len(dataset)} conversations")
        return EXIT_OK
    out = Path(args.out or Path(cfg.path("output")) / "candidates.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    total = 0
    with out.open("w", encoding="utf-8") as fh:
        for rec in dataset.records:
            cands = candidates_for(rec) if args.labels else extract_candidates(rec.conversation)
            for c in cands:
                fh.write(json.dumps(candidate_to_dict(c), sort_keys=True, separators=(",", ":")) + "\n")
            total += len(cands)
            print(f"{rec.conversation.conversation_id}\t{len(rec.conversation.turns)} turns\t{len(cands)} candidates")
    print(f"total\t{len(dataset)} conversations\t{total} candidates -> {out}")
    return EXIT_OK


def cmd_admit(args: argparse.Namespace, cfg: EngineConfig) -> int:
    dataset = parse_dataset(args.conversations)
    policy = load_policy(args.policy)
    store_path = cfg.path("store")
    store = MemoryStore(conflict_similarity=cfg.conflict_similarity)
    if store_path and Path(store_path).exists():
        store = read_store(store_path, cfg.conflict_similarity)
    if args.dry_run:
        print(f"ok: {len(dataset)} conversations, {len(store)} stored entries, theta={policy.threshold}")
        return EXIT_OK
    log_path = Path(args.log or Path(cfg.path("output")) / "decisions.jsonl")
    extractor = cfg.build_extractor(concurrent=cfg.jobs > 1)
    decisions = []
    code = EXIT_OK
    try:
        # One store threaded through the conversations in file order.
        for rec in dataset.records:
            store, ds = process_conversation(
                rec.conversation, policy, store, extractor, candidates=candidates_for(rec)
            )
            decisions.extend(ds)
    except KeyboardInterrupt:
        logger.warning("interrupted; writing %d decisions processed so far", len(decisions))
        code = EXIT_INTERRUPTED
    finally:
        extractor.close()
        write_decisions(decisions, log_path)
        if store_path:
            write_store(store, store_path)
    errors = sum(d.error is not None for d in decisions)
    counts = {o: sum(d.outcome.value == o for d in decisions) for o in ("Admitted", "Updated", "Rejected")}
    print(" ".join(f"{k}={v}" for k, v in counts.items()) + f" errors={errors} store={len(store)} -> {log_path}")
    if code == EXIT_OK and errors:
        code = EXIT_PROVIDER
    return code


def cmd_train(args: argparse.Namespace, cfg: EngineConfig) -> int:
    plan = _plan(cfg)
    if args.dry_run:
        print(f"ok: {len(parse_dataset(plan.dataset_path))} conversations")
        return EXIT_OK
    prepared = prepare(plan, cfg.build_extractor())
    result = learn_policy(prepared.examples("train"), plan.grid)
    out = Path(args.out or Path(plan.output_dir) / "policy.json")
    save_policy(out, result.best_policy, grid=plan.grid, result=result, dataset_hash=prepared.dataset.content_hash)
    folds = ", ".join(f"{f:.3f}" for f in result.per_fold_f1)
    print(f"weights={result.best_policy.weights} theta={result.best_policy.threshold} "
          f"mean_val_f1={result.mean_val_f1:.4f} folds=[{folds}] -> {out}")
    return EXIT_OK


def _experiment(args: argparse.Namespace, cfg: EngineConfig) -> int:
    plan = _plan(cfg)
    if args.dry_run:
        print(f"ok: {len(parse_dataset(plan.dataset_path))} conversations, output {plan.output_dir}")
        return EXIT_OK
    extractor = cfg.build_extractor()
    out = Path(plan.output_dir)
    if args.command == "bench":
        report = run_benchmark(plan, extractor)
        for r in report.rows:
            print(f"{r.method:<16} P={r.metrics.precision:.3f} R={r.metrics.recall:.3f} F1={r.metrics.f1:.3f}")
        print(f"-> {out / 'benchmark.csv'}")
    elif args.command == "ablate":
        for r in run_ablation(plan, extractor):
            print(f"{r.feature:<12} F1={r.f1:.3f} dF1={r.delta_f1:+.3f}")
        print(f"-> {out / 'ablation.csv'}")
    elif args.command == "sweep":
        for r in run_sweep(plan, extractor):
            print(f"theta={r.theta:.2f} P={r.precision:.3f} R={r.recall:.3f} F1={r.f1:.3f} admitted={r.admitted}")
        print(f"-> {out / 'threshold_sweep.csv'}")
    elif args.command == "latency":
        report = run_latency(plan, extractor, args.n)
        for r in report.rows:
            print(f"{r.component:<12} mean={r.mean_ms:.3f}ms median={r.median_ms:.3f}ms {r.percent:.1f}%")
        print(f"-> {out / 'latency.csv'}")
    else:
        policy = load_policy(args.policy) if args.policy else None
        report = run_domain_eval(plan, extractor, policy)
        for r in report.rows:
            print(f"{r.domain:<14} n={r.samples} F1={r.f1:.3f} delta={r.delta_from_mean:+.3f}")
        print(f"macro F1={report.macro_f1:.3f} micro F1={report.micro_f1:.3f} "
              f"std(pop)={report.std_population:.3f} std(sample)={report.std_sample:.3f}")
        print(f"-> {out / 'domains.csv'}")
    extractor.close()
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "admit": cmd_admit,
    "train": cmd_train,
    "bench": _experiment,
    "ablate": _experiment,
    "sweep": _experiment,
    "latency": _experiment,
    "domains": _experiment,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except (ProviderError, ScoringError) as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_INTERRUPTED


if __name__ == "__main__":
    sys.exit(main())
