"""Command-line entry point.

stdout carries primary results, stderr diagnostics. Exit codes: 0 ok,
1 runtime failure, 2 usage error. Every random choice is governed by an
explicit --seed flag whose default is 0, never wall-clock.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .engine import ScoringConfig, seamcam_score
from .errors import SeamcamError
from .pipeline import (
    SCORE_CSV_COLUMNS,
    batch_score,
    candidate_set_from_dict,
    gen_synth_instance,
    iter_bundle_stream,
    load_bundle,
    score_csv_row,
    select_hard_negative,
)
from .stats import (
    StudyPair,
    VoteRecord,
    agreement_accuracy,
    attach_votes,
    bootstrap_ci,
    mcnemar_cc,
    per_species_accuracy,
    spearman_rho,
    wilson_interval,
)
from .sweep import (
    SWEEP_CSV_COLUMNS,
    SweepGrid,
    load_sweep_dataset,
    staged_sweep,
    sweep_csv_row,
)

DEFAULT_TAU_ALPHA_GRID = "0.05,0.15,0.30,0.50,0.70,0.80,0.85,0.90,0.95"
DEFAULT_TAU_BETA_GRID = "0.01,0.05,0.10,0.15,0.20,0.25,0.30,0.35,0.40"
DEFAULT_K_GRID = "1,3,5,7,10,12"


def _scoring_config(args) -> ScoringConfig:
    return ScoringConfig(tau_alpha=args.tau_alpha, tau_beta=args.tau_beta, k_max=args.k_max)


def _add_config_flags(parser):
    parser.add_argument("--tau-alpha", type=float, default=0.50, help="text-alignment gate")
    parser.add_argument("--tau-beta", type=float, default=0.10, help="confidence gate")
    parser.add_argument("--k-max", type=int, default=7, help="proposal cap before enumeration")


def _collect_bundles(path: Path):
    if path.is_dir():
        bundles = []
        for child in sorted(path.iterdir()):
            if child.suffix == ".jsonl":
                bundles.extend(iter_bundle_stream(child))
            elif child.suffix in (".json", ".bundle"):
                bundles.append(load_bundle(child))
        return bundles
    if path.suffix == ".jsonl":
        return list(iter_bundle_stream(path))
    return [load_bundle(path)]


def _read_floats(path: str) -> list[float]:
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    return [float(tok) for tok in text.split()]


def _load_scores_csv(path: str, column: str) -> dict[str, float]:
    scores = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            scores[row["image_id"]] = float(row[column])
    return scores


def _joined_pairs(args) -> tuple[list[StudyPair], int]:
    """Load pairs + votes + one metric's scores; returns (pairs with scores
    attached, count of pairs dropped for missing scores)."""
    pairs = [
        StudyPair.from_dict(json.loads(line))
        for line in Path(args.pairs).read_text().splitlines()
        if line.strip()
    ]
    votes = [
        VoteRecord.from_dict(json.loads(line))
        for line in Path(args.votes).read_text().splitlines()
        if line.strip()
    ]
    attach_votes(pairs, votes, min_catch_accuracy=args.min_catch_accuracy)
    scores = _load_scores_csv(args.scores, args.score_column)
    scored, missing = [], 0
    for pair in pairs:
        if pair.image_a in scores and pair.image_b in scores:
            pair.metric_scores[args.metric] = (scores[pair.image_a], scores[pair.image_b])
            scored.append(pair)
        else:
            missing += 1
    return scored, missing


def cmd_score(args) -> int:
    bundle = load_bundle(args.bundle)
    result = seamcam_score(bundle.to_request(), _scoring_config(args))
    line = {"image_id": bundle.image_id, "category": bundle.category}
    line.update(result.to_dict())
    print(json.dumps(line, sort_keys=True))
    return 0


def cmd_batch(args) -> int:
    bundles = _collect_bundles(Path(args.in_path))
    outcomes = batch_score(bundles, _scoring_config(args), workers=args.workers)
    by_id = {o.image_id: o for o in outcomes}
    failures = 0
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCORE_CSV_COLUMNS)
        for bundle in bundles:
            outcome = by_id[bundle.image_id]
            if outcome.error is not None:
                failures += 1
                print(f"{outcome.image_id}: {outcome.error}", file=sys.stderr)
                continue
            writer.writerow(score_csv_row(outcome))
    print(f"scored={len(bundles) - failures} failed={failures} out={args.out}")
    return 0


def cmd_sweep(args) -> int:
    dataset = load_sweep_dataset(args.pairs)
    grid = SweepGrid(
        tau_alpha_values=tuple(float(v) for v in args.tau_alpha_grid.split(",")),
        tau_beta_values=tuple(float(v) for v in args.tau_beta_grid.split(",")),
        k_values=tuple(int(v) for v in args.k_grid.split(",")),
        stage1_k=args.stage1_k,
    )
    staged_sweep(dataset, grid)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_COLUMNS)
        for cell in grid.cells():
            writer.writerow(sweep_csv_row(cell))
    print(
        f"best_tau_alpha={grid.best_tau_alpha} best_tau_beta={grid.best_tau_beta} "
        f"cells={len(grid.cells())} out={args.out}"
    )
    return 0


def cmd_analyze_accuracy(args) -> int:
    pairs, missing = _joined_pairs(args)
    res = agreement_accuracy(pairs, args.metric, min_responses=args.min_responses)
    print(
        f"accuracy={res.accuracy:.4f} evaluable={res.evaluable} correct={res.correct} "
        f"undecidable={res.undecidable} excluded_majority={res.excluded_majority} "
        f"missing_scores={missing}"
    )
    return 0


def cmd_analyze_mcnemar(args) -> int:
    chi2, p = mcnemar_cc(args.n01, args.n10)
    print(f"chi2={chi2:.2f} p={p:.4e} n01={args.n01} n10={args.n10}")
    return 0


def cmd_analyze_wilson(args) -> int:
    lo, hi = wilson_interval(args.k, args.n, z=args.z)
    print(f"lo={lo:.9f} hi={hi:.9f} k={args.k} n={args.n}")
    return 0


def cmd_analyze_bootstrap(args) -> int:
    indicators = [int(v) for v in _read_floats(args.input)]
    lo, hi = bootstrap_ci(indicators, resamples=args.resamples, seed=args.seed)
    print(f"lo={lo!r} hi={hi!r} n={len(indicators)} resamples={args.resamples} seed={args.seed}")
    return 0


def cmd_analyze_spearman(args) -> int:
    rho = spearman_rho(_read_floats(args.x), _read_floats(args.y))
    print(f"rho={rho:+.6f}")
    return 0


def cmd_analyze_per_species(args) -> int:
    pairs, _ = _joined_pairs(args)
    rows = per_species_accuracy(pairs, args.metric, min_responses=args.min_responses)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(["species", "accuracy", "wilson_lo", "wilson_hi", "n"])
        for row in rows:
            writer.writerow(
                [row.species, repr(row.accuracy), repr(row.wilson_lo), repr(row.wilson_hi), row.n]
            )
    finally:
        if args.out:
            out.close()
    return 0


def cmd_synth(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    master = np.random.default_rng(args.seed)
    bundles_path = out_dir / "bundles.jsonl"
    oracle_path = out_dir / "oracle.csv"
    with bundles_path.open("w") as bfh, oracle_path.open("w", newline="") as ofh:
        writer = csv.writer(ofh)
        writer.writerow(
            [
                "image_id",
                "seed",
                "oracle_detectability",
                "oracle_intersection_px",
                "oracle_union_px",
                "oracle_kept_count",
            ]
        )
        for _ in range(args.count):
            inst = gen_synth_instance(
                seed=int(master.integers(0, 2**63)),
                height=args.height,
                width=args.width,
                n_gt=int(master.integers(1, args.max_gt + 1)),
                n_prop=int(master.integers(0, args.max_props + 1)),
            )
            bfh.write(json.dumps(inst.to_bundle().to_dict(), sort_keys=True) + "\n")
            writer.writerow(
                [
                    inst.image_id,
                    inst.seed,
                    repr(inst.oracle_detectability),
                    inst.oracle_intersection_px,
                    inst.oracle_union_px,
                    inst.oracle_kept_count,
                ]
            )
    print(f"instances={args.count} bundles={bundles_path} oracle={oracle_path}")
    return 0


def cmd_prefpairs(args) -> int:
    count = 0
    with open(args.in_path) as ifh, open(args.out, "w") as ofh:
        for lineno, line in enumerate(ifh, start=1):
            line = line.strip()
            if not line:
                continue
            cset = candidate_set_from_dict(json.loads(line), where=f"{args.in_path}: line {lineno}")
            pair = select_hard_negative(cset)
            ofh.write(json.dumps(pair.to_dict(), sort_keys=True) + "\n")
            count += 1
    print(f"pairs={count} out={args.out}")
    return 0


def cmd_serve(args) -> int:
    from .service import run_service

    run_service(args.config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seamcam", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score one bundle file")
    p.add_argument("--bundle", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("batch", help="score a stream/directory of bundles to CSV")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    _add_config_flags(p)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("sweep", help="staged threshold/K search over labeled pairs")
    p.add_argument("--pairs", required=True, help="JSONL sweep dataset")
    p.add_argument("--out", required=True, help="grid CSV")
    p.add_argument("--stage1-k", type=int, default=12)
    p.add_argument("--tau-alpha-grid", default=DEFAULT_TAU_ALPHA_GRID)
    p.add_argument("--tau-beta-grid", default=DEFAULT_TAU_BETA_GRID)
    p.add_argument("--k-grid", default=DEFAULT_K_GRID)
    p.set_defaults(func=cmd_sweep)

    analyze = sub.add_parser("analyze", help="2AFC study statistics")
    asub = analyze.add_subparsers(dest="analysis", required=True)

    def add_study_inputs(sp):
        sp.add_argument("--pairs", required=True)
        sp.add_argument("--votes", required=True)
        sp.add_argument("--scores", required=True)
        sp.add_argument("--metric", required=True)
        sp.add_argument("--score-column", default="score")
        sp.add_argument("--min-catch-accuracy", type=float, default=1.0)
        sp.add_argument("--min-responses", type=int, default=3)

    p = asub.add_parser("accuracy", help="agreement with the human majority")
    add_study_inputs(p)
    p.set_defaults(func=cmd_analyze_accuracy)

    p = asub.add_parser("mcnemar", help="continuity-corrected paired test")
    p.add_argument("--n01", type=int, required=True)
    p.add_argument("--n10", type=int, required=True)
    p.set_defaults(func=cmd_analyze_mcnemar)

    p = asub.add_parser("wilson", help="binomial score interval")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--z", type=float, default=1.959964)
    p.set_defaults(func=cmd_analyze_wilson)

    p = asub.add_parser("bootstrap", help="percentile bootstrap of a 0/1 mean")
    p.add_argument("--input", required=True, help="file of 0/1 values, or - for stdin")
    p.add_argument("--resamples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_analyze_bootstrap)

    p = asub.add_parser("spearman", help="rank correlation of two vectors")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.set_defaults(func=cmd_analyze_spearman)

    p = asub.add_parser("per-species", help="per-species accuracy with Wilson bounds")
    add_study_inputs(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_analyze_per_species)

    p = sub.add_parser("synth", help="seeded synthetic bundles with brute-force oracle")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--max-gt", type=int, default=3)
    p.add_argument("--max-props", type=int, default=8)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prefpairs", help="hard-negative preference pairs from scored candidates")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prefpairs)

    p = sub.add_parser("serve", help="run the 2AFC collection service")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SeamcamError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
