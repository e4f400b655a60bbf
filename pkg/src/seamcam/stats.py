"""2AFC study analysis: vote aggregation, agreement accuracy, and the
paired/interval statistics used to compare metrics against human judgments.

Canonical sides are "a" and "b" throughout; the collection service maps
raw left/right clicks back to canonical sides before anything lands here.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

from .errors import (
    DegenerateTable,
    EmptyInput,
    InvalidCounts,
    LengthMismatch,
    NoEvaluablePairs,
    ZeroVariance,
)

# two-sided 95% normal quantile, fixed to 6 decimals for reproducibility
Z_95 = 1.959964


@dataclass(frozen=True)
class VoteRecord:
    """One forced choice by one participant, in canonical a/b space."""

    pair_id: str
    participant_id: str
    choice: str  # "a" | "b"
    is_catch: bool = False
    catch_expected: str | None = None  # "a" | "b" | None

    def __post_init__(self):
        if self.choice not in ("a", "b"):
            raise ValueError(f"choice must be 'a' or 'b', got {self.choice!r}")
        if self.is_catch != (self.catch_expected is not None):
            raise ValueError("catch_expected must be set exactly when is_catch is true")

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "participant_id": self.participant_id,
            "choice": self.choice,
            "is_catch": self.is_catch,
            "catch_expected": self.catch_expected,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VoteRecord":
        return cls(
            pair_id=str(d["pair_id"]),
            participant_id=str(d["participant_id"]),
            choice=str(d["choice"]),
            is_catch=bool(d.get("is_catch", False)),
            catch_expected=d.get("catch_expected"),
        )


@dataclass
class StudyPair:
    """One comparison: two images, votes, derived majority, metric scores."""

    pair_id: str
    image_a: str
    image_b: str
    species: str = ""
    votes: list[VoteRecord] = field(default_factory=list)
    majority: str | None = None  # "a" | "b" | "tie" | "insufficient"
    metric_scores: dict[str, tuple[float, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "image_a": self.image_a,
            "image_b": self.image_b,
            "species": self.species,
            "votes": [v.to_dict() for v in self.votes],
            "majority": self.majority,
            "metric_scores": {k: list(v) for k, v in self.metric_scores.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StudyPair":
        return cls(
            pair_id=str(d["pair_id"]),
            image_a=str(d["image_a"]),
            image_b=str(d["image_b"]),
            species=str(d.get("species", "")),
            votes=[VoteRecord.from_dict(v) for v in d.get("votes", [])],
            majority=d.get("majority"),
            metric_scores={
                k: (float(v[0]), float(v[1])) for k, v in d.get("metric_scores", {}).items()
            },
        )


@dataclass(frozen=True)
class ContingencyCounts:
    """Paired agreement table between two metrics over evaluable pairs."""

    n00: int  # both disagreed with humans
    n01: int  # only metric 1 agreed
    n10: int  # only metric 2 agreed
    n11: int  # both agreed

    def __post_init__(self):
        if min(self.n00, self.n01, self.n10, self.n11) < 0:
            raise InvalidCounts("negative contingency count")

    @property
    def total(self) -> int:
        return self.n00 + self.n01 + self.n10 + self.n11


@dataclass(frozen=True)
class AccuracyResult:
    accuracy: float
    evaluable: int
    correct: int
    undecidable: int
    excluded_majority: int


def filter_participants(
    votes: list[VoteRecord], min_catch_accuracy: float = 1.0
) -> tuple[list[str], list[str]]:
    """Split participants into (retained, excluded) by catch-trial accuracy.

    A participant is excluded iff their catch accuracy is strictly below
    the threshold; with the default 1.0 any single failure excludes.
    Participants with no catch trials are retained vacuously.
    """
    catch_ok: dict[str, list[bool]] = defaultdict(list)
    seen: set[str] = set()
    for v in votes:
        seen.add(v.participant_id)
        if v.is_catch:
            catch_ok[v.participant_id].append(v.choice == v.catch_expected)
    retained, excluded = [], []
    for pid in sorted(seen):
        results = catch_ok.get(pid)
        if results and sum(results) / len(results) < min_catch_accuracy:
            excluded.append(pid)
        else:
            retained.append(pid)
    return retained, excluded


def aggregate_majority(pair: StudyPair, min_responses: int = 3) -> str:
    """Majority label over the pair's non-catch votes.

    Returns "insufficient" below min_responses valid votes and "tie" on an
    exact split; both statuses are excluded from accuracy downstream.
    """
    counts = {"a": 0, "b": 0}
    for v in pair.votes:
        if not v.is_catch:
            counts[v.choice] += 1
    total = counts["a"] + counts["b"]
    if total < min_responses:
        return "insufficient"
    if counts["a"] == counts["b"]:
        return "tie"
    return "a" if counts["a"] > counts["b"] else "b"


def predict_harder(score_a: float, score_b: float) -> str:
    """Metric-side prediction: the higher-scoring image is the harder one."""
    if score_a > score_b:
        return "a"
    if score_b > score_a:
        return "b"
    return "undecidable"


def agreement_accuracy(
    pairs: list[StudyPair],
    metric: str,
    min_responses: int = 3,
    half_credit: bool = False,
) -> AccuracyResult:
    """Proportion of evaluable pairs where the metric matches the human majority.

    A pair is evaluable when its majority is decided (not tie/insufficient)
    and the metric's prediction is decided (no exact score tie). Undecided
    predictions are excluded from the denominator and reported as a count;
    half_credit instead counts each one as half right (never used in
    acceptance runs).
    """
    evaluable = 0
    correct = 0.0
    undecidable = 0
    excluded_majority = 0
    for pair in pairs:
        majority = pair.majority
        if majority is None:
            majority = aggregate_majority(pair, min_responses)
        if majority not in ("a", "b"):
            excluded_majority += 1
            continue
        score_a, score_b = pair.metric_scores[metric]
        pred = predict_harder(score_a, score_b)
        if pred == "undecidable":
            undecidable += 1
            if half_credit:
                evaluable += 1
                correct += 0.5
            continue
        evaluable += 1
        if pred == majority:
            correct += 1
    if evaluable == 0:
        raise NoEvaluablePairs(f"no evaluable pairs for metric {metric!r}")
    return AccuracyResult(
        accuracy=correct / evaluable,
        evaluable=evaluable,
        correct=int(correct) if not half_credit else correct,
        undecidable=undecidable,
        excluded_majority=excluded_majority,
    )


def mcnemar_cc(n01: int, n10: int) -> tuple[float, float]:
    """Continuity-corrected McNemar statistic and its 1-dof p-value.

    chi2 = (|n01 - n10| - 1)^2 / (n01 + n10); the survival function of a
    chi-square with one degree of freedom is erfc(sqrt(chi2 / 2)), so no
    lookup tables are involved.
    """
    if n01 < 0 or n10 < 0:
        raise InvalidCounts("negative discordant count")
    if n01 + n10 == 0:
        raise DegenerateTable("no discordant pairs")
    chi2 = (abs(n01 - n10) - 1) ** 2 / (n01 + n10)
    p = math.erfc(math.sqrt(chi2 / 2.0))
    return chi2, p


def wilson_interval(k: int, n: int, z: float = Z_95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0 or k < 0 or k > n:
        raise InvalidCounts(f"need 0 <= k <= n, n > 0; got k={k}, n={n}")
    p = k / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom
    # the closed form pins these endpoints exactly; avoid rounding drift
    lo = 0.0 if k == 0 else max(0.0, center - half)
    hi = 1.0 if k == n else min(1.0, center + half)
    return lo, hi


_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Deterministic 64-bit splitmix stream used for bootstrap resampling.

    state_{i+1} = state_i + 0x9E3779B97F4A7C15 (mod 2^64); the output is
    the finalizer of that state (xor-shift/multiply twice, final
    xor-shift 31). Indices are drawn as next_u64() % n; identical seeds
    give byte-identical draws on every platform.
    """

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_below(self, n: int) -> int:
        return self.next_u64() % n


def _percentile_sorted(sorted_values: list[float], q: float) -> float:
    """Linear interpolation between closest ranks on a pre-sorted list."""
    pos = q * (len(sorted_values) - 1)
    lo = math.floor(pos)
    hi = math.ceil(pos)
    if lo == hi:
        return sorted_values[lo]
    frac = pos - lo
    return sorted_values[lo] + (sorted_values[hi] - sorted_values[lo]) * frac


def bootstrap_ci(
    indicators: list[int], resamples: int = 10000, seed: int = 0
) -> tuple[float, float]:
    """Percentile bootstrap (2.5/97.5) of the mean of 0/1 indicators.

    Resampling indices come from the documented SplitMix64 stream, so the
    interval is a pure function of (indicators, resamples, seed).
    """
    if not indicators:
        raise EmptyInput("no indicators to resample")
    n = len(indicators)
    rng = SplitMix64(seed)
    means = []
    for _ in range(resamples):
        total = 0
        for _ in range(n):
            total += indicators[rng.next_below(n)]
        means.append(total / n)
    means.sort()
    return _percentile_sorted(means, 0.025), _percentile_sorted(means, 0.975)


def _average_ranks(values: list[float]) -> list[float]:
    n = len(values)
    order = sorted(range(n), key=lambda i: values[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for t in range(i, j + 1):
            ranks[order[t]] = mean_rank
        i = j + 1
    return ranks


def spearman_rho(x: list[float], y: list[float]) -> float:
    """Spearman rank correlation: Pearson on average ranks (ties share the
    mean rank)."""
    if len(x) != len(y) or len(x) < 2:
        raise LengthMismatch(f"need equal lengths >= 2, got {len(x)} and {len(y)}")
    rx = _average_ranks(list(x))
    ry = _average_ranks(list(y))
    n = len(rx)
    mx = sum(rx) / n
    my = sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    if vx == 0.0 or vy == 0.0:
        raise ZeroVariance("constant rank vector")
    return cov / math.sqrt(vx * vy)


@dataclass(frozen=True)
class SpeciesRow:
    species: str
    accuracy: float
    wilson_lo: float
    wilson_hi: float
    n: int


def per_species_accuracy(
    pairs: list[StudyPair],
    metric: str,
    min_responses: int = 3,
    z: float = Z_95,
) -> list[SpeciesRow]:
    """Agreement accuracy per species with Wilson bounds; species with no
    evaluable pairs are omitted. Rows sorted by species label."""
    hits: dict[str, int] = defaultdict(int)
    totals: dict[str, int] = defaultdict(int)
    for pair in pairs:
        majority = pair.majority
        if majority is None:
            majority = aggregate_majority(pair, min_responses)
        if majority not in ("a", "b"):
            continue
        pred = predict_harder(*pair.metric_scores[metric])
        if pred == "undecidable":
            continue
        totals[pair.species] += 1
        if pred == majority:
            hits[pair.species] += 1
    rows = []
    for species in sorted(totals):
        n = totals[species]
        k = hits[species]
        lo, hi = wilson_interval(k, n, z)
        rows.append(SpeciesRow(species, k / n, lo, hi, n))
    return rows


def contingency_between(
    pairs: list[StudyPair], metric_1: str, metric_2: str, min_responses: int = 3
) -> ContingencyCounts:
    """Build the paired agreement table over pairs where both metrics and
    the majority are decided."""
    n00 = n01 = n10 = n11 = 0
    for pair in pairs:
        majority = pair.majority
        if majority is None:
            majority = aggregate_majority(pair, min_responses)
        if majority not in ("a", "b"):
            continue
        p1 = predict_harder(*pair.metric_scores[metric_1])
        p2 = predict_harder(*pair.metric_scores[metric_2])
        if p1 == "undecidable" or p2 == "undecidable":
            continue
        ok1 = p1 == majority
        ok2 = p2 == majority
        if ok1 and ok2:
            n11 += 1
        elif ok1:
            n01 += 1
        elif ok2:
            n10 += 1
        else:
            n00 += 1
    return ContingencyCounts(n00=n00, n01=n01, n10=n10, n11=n11)


def attach_votes(
    pairs: list[StudyPair],
    votes: list[VoteRecord],
    min_catch_accuracy: float = 1.0,
) -> list[StudyPair]:
    """Join a vote file onto pair skeletons: drop excluded participants'
    votes and catch trials, then group the rest by pair id."""
    _, excluded = filter_participants(votes, min_catch_accuracy)
    dropped = set(excluded)
    by_pair: dict[str, list[VoteRecord]] = defaultdict(list)
    for v in votes:
        if v.is_catch or v.participant_id in dropped:
            continue
        by_pair[v.pair_id].append(v)
    for pair in pairs:
        pair.votes = by_pair.get(pair.pair_id, [])
        pair.majority = None
    return pairs
