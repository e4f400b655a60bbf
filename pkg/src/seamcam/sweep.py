"""Staged hyperparameter search over re-scoreable study pairs.

Stage 1 fixes the proposal cap and fills a (tau_alpha, tau_beta) accuracy
grid; stage 2 fixes the best thresholds and sweeps the cap, recording
agreement accuracy and mean engine latency per cell. Bundles carry raw
(ungated) proposals, so every cell re-applies gating offline.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .engine import ScoringConfig, seamcam_score
from .errors import InsufficientData, ParseError
from .pipeline import ProposalBundle, bundle_from_dict
from .stats import predict_harder


@dataclass(frozen=True)
class SweepPairObs:
    """One human-labeled pair with both sides' raw proposal bundles."""

    pair_id: str
    species: str
    majority: str  # "a" | "b"
    bundle_a: ProposalBundle
    bundle_b: ProposalBundle


@dataclass(frozen=True)
class SweepCell:
    stage: int
    tau_alpha: float
    tau_beta: float
    k: int
    accuracy: float | None  # None when no pair was evaluable
    evaluable: int
    undecidable: int
    mean_latency_s: float


@dataclass
class SweepGrid:
    """Search axes plus, after staged_sweep, per-cell results."""

    tau_alpha_values: tuple[float, ...]
    tau_beta_values: tuple[float, ...]
    k_values: tuple[int, ...]
    stage1_k: int = 12
    stage1_cells: list[SweepCell] = field(default_factory=list)
    stage2_cells: list[SweepCell] = field(default_factory=list)
    best_tau_alpha: float | None = None
    best_tau_beta: float | None = None

    def cells(self) -> list[SweepCell]:
        return [*self.stage1_cells, *self.stage2_cells]


def _evaluate_cell(
    dataset: list[SweepPairObs], config: ScoringConfig, stage: int
) -> SweepCell:
    evaluable = 0
    correct = 0
    undecidable = 0
    latency = 0.0
    calls = 0
    for obs in dataset:
        scores = []
        for bundle in (obs.bundle_a, obs.bundle_b):
            start = time.perf_counter()
            result = seamcam_score(bundle.to_request(), config)
            latency += time.perf_counter() - start
            calls += 1
            scores.append(result.score)
        pred = predict_harder(scores[0], scores[1])
        if pred == "undecidable":
            undecidable += 1
            continue
        evaluable += 1
        if pred == obs.majority:
            correct += 1
    return SweepCell(
        stage=stage,
        tau_alpha=config.tau_alpha,
        tau_beta=config.tau_beta,
        k=config.k_max,
        accuracy=None if evaluable == 0 else correct / evaluable,
        evaluable=evaluable,
        undecidable=undecidable,
        mean_latency_s=latency / calls if calls else 0.0,
    )


def staged_sweep(dataset: list[SweepPairObs], grid: SweepGrid) -> SweepGrid:
    """Fill the grid in two stages and return it.

    Cells with zero evaluable pairs (every prediction undecidable, e.g.
    impossible thresholds gating out everything) record accuracy=None
    with the undecidable count, rather than failing the sweep.
    """
    usable = [obs for obs in dataset if obs.majority in ("a", "b")]
    if not usable:
        raise InsufficientData("no pairs with a decided human majority")

    grid.stage1_cells = []
    for ta in grid.tau_alpha_values:
        for tb in grid.tau_beta_values:
            config = ScoringConfig(tau_alpha=ta, tau_beta=tb, k_max=grid.stage1_k)
            grid.stage1_cells.append(_evaluate_cell(usable, config, stage=1))

    # best thresholds: highest accuracy, ties to earliest grid cell
    best = max(
        grid.stage1_cells,
        key=lambda c: c.accuracy if c.accuracy is not None else -1.0,
    )
    grid.best_tau_alpha = best.tau_alpha
    grid.best_tau_beta = best.tau_beta

    grid.stage2_cells = []
    for k in grid.k_values:
        config = ScoringConfig(tau_alpha=best.tau_alpha, tau_beta=best.tau_beta, k_max=k)
        grid.stage2_cells.append(_evaluate_cell(usable, config, stage=2))
    return grid


SWEEP_CSV_COLUMNS = (
    "stage",
    "tau_alpha",
    "tau_beta",
    "k",
    "accuracy",
    "evaluable",
    "undecidable",
    "mean_latency_s",
)


def sweep_csv_row(cell: SweepCell) -> list[str]:
    return [
        str(cell.stage),
        repr(cell.tau_alpha),
        repr(cell.tau_beta),
        str(cell.k),
        "" if cell.accuracy is None else repr(cell.accuracy),
        str(cell.evaluable),
        str(cell.undecidable),
        repr(cell.mean_latency_s),
    ]


def load_sweep_dataset(path: str | Path) -> list[SweepPairObs]:
    """Read the JSONL sweep dataset: pair metadata, human majority, and a
    raw bundle per side."""
    out = []
    path = Path(path)
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}: line {lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{where}: {exc.msg}") from exc
            try:
                majority = str(obj["majority"])
                out.append(
                    SweepPairObs(
                        pair_id=str(obj["pair_id"]),
                        species=str(obj.get("species", "")),
                        majority=majority,
                        bundle_a=bundle_from_dict(obj["bundle_a"], f"{where}: bundle_a"),
                        bundle_b=bundle_from_dict(obj["bundle_b"], f"{where}: bundle_b"),
                    )
                )
            except KeyError as exc:
                raise ParseError(f"{where}: missing field {exc}") from exc
    return out


def save_sweep_dataset(dataset: list[SweepPairObs], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for obs in dataset:
            fh.write(
                json.dumps(
                    {
                        "pair_id": obs.pair_id,
                        "species": obs.species,
                        "majority": obs.majority,
                        "bundle_a": obs.bundle_a.to_dict(),
                        "bundle_b": obs.bundle_b.to_dict(),
                    },
                    sort_keys=True,
                )
                + "\n"
            )
