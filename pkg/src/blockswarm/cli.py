"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import shutil
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

from . import analysis
from .blockmodel import StackPlan, parameter_count
from .datasets import make_surrogate_dataset
from .encoding import BlockSpec, InvalidSpecError
from .evaluator import EvaluationError, HistoryStore, run_training
from .oracle import SyntheticTrainer
from .plugin import PluginError, PluginTrainer
from .pso import Swarm
from .search import RunLog, SearchConfig, run_search, stack_and_select

log = logging.getLogger("blockswarm")

ANALYSES = ("convergence", "ablation", "baseline", "growth", "filterstats")
MANIFEST = "manifest.json"
ARTIFACTS = {
    "config": "config.json",
    "history": "history.jsonl",
    "checkpoints": "checkpoints",
    "runlog": "runlog.json",
    "analyses": "analysis",
}


class UsageError(Exception):
    pass


def tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


def load_config(path: str | None, seed: int | None = None, parallel: int | None = None) -> SearchConfig:
    try:
        doc = json.loads(Path(path).read_text()) if path else {}
        if not isinstance(doc, dict):
            raise ValueError("config must be a JSON object")
        cfg = SearchConfig.from_dict(doc)
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"bad config {path}: {exc}") from exc
    if seed is not None:
        cfg = cfg.with_seed(seed)
    if parallel is not None:
        cfg = dataclasses.replace(cfg, parallel_evaluations=parallel)
    return cfg


def make_trainer(spec: str, cfg: SearchConfig):
    if spec == "synthetic":
        return SyntheticTrainer(cfg.oracle)
    if spec.startswith("plugin:") and spec[len("plugin:"):].strip():
        return PluginTrainer(spec[len("plugin:"):])
    raise UsageError(f"unknown trainer {spec!r}; use 'synthetic' or 'plugin:<command>'")


def _shutdown(trainer) -> None:
    stop = getattr(trainer, "shutdown", None)
    if stop is not None:
        stop()


def cmd_search(args) -> int:
    cfg = load_config(args.config, args.seed, args.parallel)
    trainer = make_trainer(args.trainer, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {k: out / v for k, v in ARTIFACTS.items()}
    if not args.resume:
        paths["history"].unlink(missing_ok=True)
        shutil.rmtree(paths["checkpoints"], ignore_errors=True)
    paths["config"].write_text(json.dumps(cfg.to_dict(), indent=1, sort_keys=True))
    manifest = {
        "tool_version": tool_version(),
        "seed": cfg.seed,
        "trainer": args.trainer,
        "config": cfg.to_dict(),
        "artifacts": {k: v for k, v in ARTIFACTS.items()},
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=True))

    store = HistoryStore(cfg.encoding, paths["history"])
    try:
        best, runlog = run_search(cfg, trainer, store, paths["checkpoints"], resume=args.resume)
        t, accs = stack_and_select(
            best, cfg.dataset, trainer, cfg.max_stack,
            max_epochs=cfg.max_epochs, seed=cfg.seed, parallel=cfg.parallel_evaluations,
        )
    finally:
        _shutdown(trainer)
    runlog.stacking_accuracies = accs
    runlog.stacking_parameters = [
        parameter_count(StackPlan(best, r, stem_channels=cfg.oracle.stem_channels))
        for r in range(1, cfg.max_stack + 1)
    ]
    runlog.chosen_repeats = t
    paths["runlog"].write_text(runlog.to_json())
    print(json.dumps({
        "final_block": runlog.final_block,
        "gbest_fitness": runlog.gbest_fitness,
        "chosen_repeats": t,
        "full_evaluations": runlog.full_evaluations,
        "runlog_sha256": hashlib.sha256(paths["runlog"].read_bytes()).hexdigest(),
    }))
    return 0


def _require(path: Path) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"missing artifact: {path}")
    return path


def cmd_analyze(args) -> int:
    if args.which not in ANALYSES:
        raise UsageError(f"unknown analysis {args.which!r}; choose from {', '.join(ANALYSES)}")
    run = Path(args.run_dir)
    manifest = json.loads(_require(run / MANIFEST).read_text())
    cfg = SearchConfig.from_dict(manifest["config"])
    arts = manifest["artifacts"]
    out = run / arts["analyses"]
    out.mkdir(exist_ok=True)
    summary: dict = {"analysis": args.which}

    if args.which == "filterstats":
        runlog = RunLog.from_dict(json.loads(_require(run / arts["runlog"]).read_text()))
        rows = analysis.filter_stats(runlog)
        late = [r for r in rows if r["generation"] >= 11]
        if late:
            summary["filtered_fraction_gen11_plus"] = sum(r["filtered"] for r in late) / sum(
                r["filtered"] + r["trained"] for r in late
            )
    elif args.which == "convergence":
        files = sorted(_require(run / arts["checkpoints"]).glob("gen_*.json"))
        swarms = [Swarm.from_dict(json.loads(f.read_text())["swarm"]) for f in files]
        rows = analysis.convergence_trace(swarms)
    else:
        store = HistoryStore(cfg.encoding, _require(run / arts["history"]))
        if args.which == "ablation":
            rows = analysis.feature_ablation(
                store, cfg.svm, cutting_epoch=cfg.feature_spec.cutting_epoch,
                max_pairs=cfg.max_pairs, folds=cfg.cv_folds, seed=cfg.seed,
            )
        elif args.which == "baseline":
            acc = analysis.tenth_epoch_baseline(store, cfg.feature_spec.cutting_epoch)
            rows = [{"epoch": cfg.feature_spec.cutting_epoch, "agreement": acc}]
        else:
            rows = analysis.growth_rate_stats(store)
    analysis.write_csv(rows, out / f"{args.which}.csv")
    summary["rows"] = len(rows)
    (out / f"{args.which}.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    print(json.dumps(summary))
    return 0


def cmd_eval_block(args) -> int:
    cfg = load_config(args.config, args.seed)
    try:
        spec = BlockSpec.from_json(args.block)
        spec.validate(cfg.encoding)
    except (ValueError, InvalidSpecError) as exc:
        raise UsageError(f"invalid block: {exc}") from exc
    trainer = make_trainer(args.trainer, cfg)
    dataset = make_surrogate_dataset(cfg.dataset, cfg.reduction, seed=cfg.seed)
    store = HistoryStore(cfg.encoding)
    try:
        losses, accs = run_training(spec, dataset, trainer, cfg.seed, cfg.max_epochs)
    finally:
        _shutdown(trainer)
    record = store.append(store.make_record(spec, dataset.dataset_id, losses, accs, partial=False))
    print(record.to_json())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blockswarm", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("search", help="evolve a block, stack it and write run artifacts")
    s.add_argument("--config", help="JSON config mirroring SearchConfig (defaults if omitted)")
    s.add_argument("--out", required=True, help="run directory")
    s.add_argument("--seed", type=int)
    s.add_argument("--trainer", default="synthetic", help="synthetic | plugin:<command>")
    s.add_argument("--parallel", type=int)
    s.add_argument("--resume", action="store_true", help="continue from the latest checkpoint")
    s.set_defaults(func=cmd_search)

    a = sub.add_parser("analyze", help="write analysis tables for a finished run")
    a.add_argument("run_dir")
    a.add_argument("which", help=" | ".join(ANALYSES))
    a.set_defaults(func=cmd_analyze)

    e = sub.add_parser("eval-block", help="train one block with early stopping")
    e.add_argument("block", help="JSON array of growth rates")
    e.add_argument("--config")
    e.add_argument("--seed", type=int)
    e.add_argument("--trainer", default="synthetic")
    e.set_defaults(func=cmd_eval_block)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, EvaluationError, PluginError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
