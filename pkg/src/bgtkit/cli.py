"""Command-line entry point: ``bgt <command> ...``; every command emits JSON."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from importlib import resources
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import BGTError, NumericalError, ValidationError
from .game import load_dataset
from .models import ModelSpec
from .properties import (
    bottleneck_pair,
    dominance_response_curve,
    other_responsiveness_probe,
    theorem31_emulation_check,
)
from .stats import DEFAULT_RESAMPLES, PairedLosses, comparison_row, paired_differences
from .synth import SynthSpec, generate
from .training import GRIDS, PAPER_EPOCHS, TrainConfig, TrainResult, replicate_splits

log = logging.getLogger("bgtkit")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


def load_schema(name: str) -> dict:
    """One of the JSON schemas shipped in ``bgtkit/schemas``."""
    return json.loads(resources.files("bgtkit").joinpath("schemas", f"{name}.json").read_text())


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None


def _emit(doc, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("BGT_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ValidationError(f"BGT_SEED must be an integer, got {env!r}") from None


# model specs ------------------------------------------------------------------------


def _model_spec(args) -> ModelSpec:
    """Spec file first, then any explicit flags on top."""
    doc = _read_json(args.spec) if args.spec else {}
    for flag, key in (("level0", "level0"), ("strategic", "strategic"), ("max_level", "max_level"),
                      ("potentials", "potentials"), ("name", "name")):
        value = getattr(args, flag)
        if value is not None:
            doc[key] = value
    if args.layers is not None:
        doc["layers"] = [int(w) for w in args.layers.split(",") if w]
    return ModelSpec.from_dict(doc)


def _train_config(args, spec: ModelSpec, seed: int) -> TrainConfig:
    config = TrainConfig.from_dict(dict(spec.train))
    config = replace(config, seed=seed)
    if args.paper_epochs:
        config = replace(config, epochs=PAPER_EPOCHS)
    if args.epochs is not None:
        config = replace(config, epochs=args.epochs)
    if args.lr is not None:
        config = replace(config, lr=args.lr)
    if getattr(args, "l1", None) is not None:
        config = replace(config, l1=args.l1)
    if getattr(args, "dropout", None) is not None:
        config = replace(config, dropout=args.dropout)
    return config


def _result_doc(spec: ModelSpec, runs: list[TrainResult]) -> dict:
    return {"model": spec.label, "spec": spec.to_dict(), "runs": [r.to_dict() for r in runs]}


def _load_results(path) -> tuple[str, list[TrainResult]]:
    doc = _read_json(path)
    if "runs" not in doc or not doc["runs"]:
        raise ValidationError(f"{path}: result file has no runs")
    return doc.get("model", Path(path).stem), [TrainResult.from_dict(r) for r in doc["runs"]]


# commands -----------------------------------------------------------------------------


def cmd_ingest(args) -> dict:
    return load_dataset(args.path, standardize_payoffs=not args.raw).summary()


def cmd_synth(args) -> dict:
    doc = _read_json(args.spec) if args.spec else {}
    for key in ("games", "n", "m", "observations", "precision", "poisson_rate", "payoffs"):
        value = getattr(args, key)
        if value is not None:
            doc[key] = value
    spec = SynthSpec.from_dict(doc)
    data, _ = generate(spec, _seed(args))
    _emit(data, args.out)
    return {"games": spec.games, "records": len(data["observations"]), "out": args.out}


def _fit(args, grid) -> dict:
    spec = _model_spec(args)
    seed = _seed(args)
    config = _train_config(args, spec, seed)
    dataset = load_dataset(args.data)
    runs = replicate_splits(
        spec, dataset, args.splits, split_seed=args.split_seed if args.split_seed is not None else seed,
        config=config, grid=grid, jobs=args.jobs,
    )
    doc = _result_doc(spec, runs)
    if args.out:
        _emit(doc, args.out)
    return {
        "model": spec.label,
        "splits": len(runs),
        "mean_test_loss": _mean([r.test_loss for r in runs]),
        "out": args.out,
    }


def cmd_train(args) -> dict:
    return _fit(args, None)


def cmd_sweep(args) -> dict:
    return _fit(args, GRIDS[args.grid])


def _mean(values):
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def _paired_test_losses(runs: list[TrainResult], ref_runs: list[TrainResult], name: str) -> PairedLosses:
    ref = {r.split_id: r.test_loss for r in ref_runs}
    own = {r.split_id: r.test_loss for r in runs}
    shared = [s for s in own if s in ref]
    if not shared:
        raise ValidationError(f"{name} shares no splits with the reference")
    if any(own[s] is None or ref[s] is None for s in shared):
        raise ValidationError(f"{name}: every paired split needs a test loss")
    return PairedLosses([own[s] for s in shared], [ref[s] for s in shared])


def _difference_rows(results: dict, reference: str, level: float, resamples: int, seed: int) -> list[dict]:
    if reference not in results:
        raise ValidationError(f"reference {reference!r} is not among the results {sorted(results)}")
    rows = []
    for name, runs in results.items():
        if name == reference:
            continue
        diffs = paired_differences(_paired_test_losses(runs, results[reference], name))
        if diffs.size < 2:
            raise ValidationError(f"{name}: need at least two shared splits for an interval")
        row = comparison_row(name, diffs, resamples, seed)
        tag = "95" if level == 0.95 else "68"
        row["excludes_zero"] = bool(row[f"lo{tag}"] > 0 or row[f"hi{tag}"] < 0)
        rows.append(row)
    return rows


def _gather(paths: str) -> dict:
    """Result runs keyed by file stem, in command-line order."""
    results = {}
    for path in [p for p in paths.split(",") if p]:
        stem = Path(path).stem
        if stem in results:
            raise ValidationError(f"result name {stem!r} given twice")
        results[stem] = _load_results(path)[1]
    if not results:
        raise ValidationError("no result files given")
    return results


def _resolve_reference(results: dict, reference: str) -> str:
    # accept a file stem, a path or a model label
    stem = Path(reference).stem
    if stem in results:
        return stem
    for name, runs in results.items():
        if runs[0].spec.label == reference:
            return name
    return reference


def cmd_compare(args) -> dict:
    if args.level not in (0.68, 0.95):
        raise ValidationError("--level must be 0.68 or 0.95")
    results = _gather(args.results)
    rows = _difference_rows(results, _resolve_reference(results, args.reference), args.level,
                            args.resamples, _seed(args))
    doc = {"reference": args.reference, "level": args.level, "rows": rows}
    _emit(doc, args.out)
    return doc


def cmd_report(args) -> dict:
    results = _gather(args.results)
    absolute = []
    for name, runs in results.items():
        absolute.append({
            "model": name,
            "label": runs[0].spec.label,
            "n_splits": len(runs),
            "mean_train_loss": _mean([r.train_loss for r in runs]),
            "mean_val_loss": _mean([r.val_loss for r in runs]),
            "mean_test_loss": _mean([r.test_loss for r in runs]),
        })
    doc = {"absolute": absolute}
    if args.reference:
        doc["reference"] = args.reference
        doc["differences"] = _difference_rows(results, _resolve_reference(results, args.reference), 0.95,
                                              args.resamples, _seed(args))
    _emit(doc, args.out)
    return doc


def cmd_probe(args) -> dict:
    seed = _seed(args)
    if args.check == "theorem31":
        dev = theorem31_emulation_check(args.trials, 10.0, 0.1, False, seed)
        return {"check": "theorem31", "max_deviation": dev, "passed": dev < 1e-9}
    _, runs = _load_results(args.model)
    model = runs[0].model
    if args.check == "dominance":
        zetas = [1.0, 5.0, 20.0]
        curve = dominance_response_curve(model, (args.n, args.n), zetas, args.trials, seed)
        return {"check": "dominance", "zetas": zetas, "min_dominant_prob": curve.tolist()}
    if args.check == "other":
        responsive, witnesses = other_responsiveness_probe(model, args.trials, seed)
        return {"check": "other", "other_responsive": responsive, "n_witnesses": len(witnesses)}
    enet = model.enet()
    if enet is None:
        raise ValidationError("the bottleneck check needs an ElementaryNet level-0 model")
    out = []
    for k, phi in enumerate(enet.potentials):
        theta = phi.coefficients()
        if theta[0] == 0.0 or theta[1] == 0.0:
            out.append({"potential": k, "kind": phi.kind, "applicable": False})
            continue
        for b in (1.0, 10.0, 100.0):
            g, g2 = bottleneck_pair(theta, b)
            p, p2 = model(g), model(g2)
            out.append({
                "potential": k,
                "kind": phi.kind,
                "applicable": True,
                "b": b,
                "max_output_gap": float(np.max(np.abs(p - p2))),
                "min_dominant_prob": float(min(p[1], p2[0])),
            })
    return {"check": "bottleneck", "pairs": out}


def cmd_verify_theorem31(args) -> dict:
    start = time.perf_counter()
    dev = theorem31_emulation_check(args.trials, args.cmax, args.cgap, args.negative, _seed(args))
    return {
        "negative": args.negative,
        "cmax": args.cmax,
        "cgap": args.cgap,
        "trials": args.trials,
        "max_deviation": dev,
        "passed": dev < 1e-9,
        "seconds": time.perf_counter() - start,
    }


# parser ---------------------------------------------------------------------------------


def _model_flags(p):
    p.add_argument("--spec", help="model spec JSON (level0, strategic, max_level, layers, potentials, train)")
    p.add_argument("--data", required=True, help="dataset JSON")
    p.add_argument("--level0", help="uniform, a heuristic name, gamenet or enet")
    p.add_argument("--strategic", help="none, qch_poisson or qch_hist")
    p.add_argument("--max-level", dest="max_level", type=int, help="highest reasoning level K")
    p.add_argument("--layers", help="comma-separated hidden widths, e.g. 50 or 50,50")
    p.add_argument("--potentials", help="learned:K, fixed4 or a comma list such as own,sum")
    p.add_argument("--name", help="label for the model in reports")
    p.add_argument("--epochs", type=int, help="override the number of Adam steps")
    p.add_argument("--paper-epochs", action="store_true", help="train for the long schedule")
    p.add_argument("--lr", type=float, help="Adam learning rate")
    p.add_argument("--splits", type=int, default=1, help="number of random train/val/test splits")
    p.add_argument("--split-seed", dest="split_seed", type=int, help="seed of the first split (default: --seed)")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for sweep runs")
    p.add_argument("--out", help="write the result JSON here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bgt", description="Behavioral game theory models: fit, compare, probe.")
    parser.add_argument("--seed", type=int, default=None, help="random seed (falls back to $BGT_SEED, then 0)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a dataset and summarize it per source")
    p.add_argument("path")
    p.add_argument("--raw", action="store_true", help="skip payoff standardization")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="simulate a dataset from a teacher model")
    p.add_argument("--spec", help="generator spec JSON (model, games, n, m, observations, precision, ...)")
    p.add_argument("--games", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--observations", type=int)
    p.add_argument("--precision", type=float)
    p.add_argument("--poisson-rate", dest="poisson_rate", type=float)
    p.add_argument("--payoffs", choices=("normal", "uniform_int"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one configuration on each split")
    _model_flags(p)
    p.add_argument("--l1", type=float, help="L1 coefficient on weight matrices")
    p.add_argument("--dropout", type=float, help="channel dropout rate")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="grid over L1 and dropout, keep the best on validation")
    _model_flags(p)
    p.add_argument("--grid", choices=sorted(GRIDS), default="enet")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="paired-difference BCa intervals against a reference")
    p.add_argument("--results", required=True, help="comma-separated result files")
    p.add_argument("--reference", required=True, help="reference result (file stem or path)")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--resamples", type=int, default=DEFAULT_RESAMPLES)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="absolute losses plus optional paired differences")
    p.add_argument("--results", required=True, help="comma-separated result files")
    p.add_argument("--reference")
    p.add_argument("--resamples", type=int, default=DEFAULT_RESAMPLES)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("probe", help="numerical strategic-behavior probes on a trained model")
    p.add_argument("--model", help="result JSON (first run is probed)")
    p.add_argument("--check", required=True, choices=("dominance", "other", "theorem31", "bottleneck"))
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--n", type=int, default=3, help="action count for dominance games")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("verify-theorem31", help="check the QBR-to-maxmax feature-layer construction")
    p.add_argument("--cmax", type=float, default=10.0)
    p.add_argument("--cgap", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--negative", action="store_true", help="allow negative payoffs")
    p.set_defaults(func=cmd_verify_theorem31)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "probe" and args.check != "theorem31" and not args.model:
        parser.error("--model is required for this check")
    try:
        result = args.func(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (BGTError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.command not in ("compare", "report"):
        _emit(result, None)
    elif getattr(args, "out", None):
        print(json.dumps({"out": args.out}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
