"""Vote collection service: randomized trial serving, catch-trial
injection, durable vote persistence, and export to the analysis formats.

The append-only vote log is the single source of truth; session plans are
pure functions of (seed base, participant id), so a restarted process
reconstructs every session exactly from config plus log.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pydantic as _pydantic

from .errors import (
    DuplicateVote,
    ParseError,
    SessionComplete,
    UnknownParticipant,
    UnknownTrial,
)
from .stats import StudyPair, VoteRecord


@dataclass(frozen=True)
class PairEntry:
    pair_id: str
    image_a: str
    image_b: str
    species: str = ""


@dataclass(frozen=True)
class CatchEntry:
    """Attention check: a pair with an obvious answer, supplied at study
    setup. expected is the canonical side of the correct (harder) image."""

    pair_id: str
    image_a: str
    image_b: str
    expected: str  # "a" | "b"


@dataclass(frozen=True)
class StudyConfig:
    pairs_manifest: str
    vote_log: str
    trials_per_participant: int
    catch_manifest: str | None = None
    catch_rate: float = 0.0
    session_seed_base: int = 0
    port: int = 8000
    static_dir: str | None = None
    participants: tuple[str, ...] | None = None  # None = open enrollment

    @classmethod
    def from_file(cls, path: str | Path) -> "StudyConfig":
        obj = json.loads(Path(path).read_text())
        try:
            return cls(
                pairs_manifest=str(obj["pairs_manifest"]),
                vote_log=str(obj["vote_log"]),
                trials_per_participant=int(obj["trials_per_participant"]),
                catch_manifest=obj.get("catch_manifest"),
                catch_rate=float(obj.get("catch_rate", 0.0)),
                session_seed_base=int(obj.get("session_seed_base", 0)),
                port=int(obj.get("port", 8000)),
                static_dir=obj.get("static_dir"),
                participants=tuple(obj["participants"]) if obj.get("participants") else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: {exc}") from exc


def load_pairs_manifest(path: str | Path) -> list[PairEntry]:
    entries = []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                entries.append(
                    PairEntry(
                        pair_id=str(obj["pair_id"]),
                        image_a=str(obj["image_a"]),
                        image_b=str(obj["image_b"]),
                        species=str(obj.get("species", "")),
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
    return entries


def load_catch_manifest(path: str | Path) -> list[CatchEntry]:
    entries = []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                expected = str(obj["expected"])
                if expected not in ("a", "b"):
                    raise ParseError(f"{path}: line {lineno}: expected must be 'a' or 'b'")
                entries.append(
                    CatchEntry(
                        pair_id=str(obj["pair_id"]),
                        image_a=str(obj["image_a"]),
                        image_b=str(obj["image_b"]),
                        expected=expected,
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
    return entries


@dataclass(frozen=True)
class PlannedTrial:
    trial_id: str
    participant_id: str
    index: int
    pair_id: str
    image_a: str
    image_b: str
    swap: bool  # True: left shows image_b
    is_catch: bool
    catch_expected: str | None

    @property
    def left_image(self) -> str:
        return self.image_b if self.swap else self.image_a

    @property
    def right_image(self) -> str:
        return self.image_a if self.swap else self.image_b

    def canonical_choice(self, raw: str) -> str:
        """Map a left/right click back to the canonical a/b side."""
        if raw not in ("left", "right"):
            raise ValueError(f"choice must be 'left' or 'right', got {raw!r}")
        if self.swap:
            return "b" if raw == "left" else "a"
        return "a" if raw == "left" else "b"


def session_seed(seed_base: int, participant_id: str) -> int:
    digest = hashlib.sha256(f"{seed_base}:{participant_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def build_session_plan(
    participant_id: str,
    pairs: list[PairEntry],
    catches: list[CatchEntry],
    trials_per_participant: int,
    catch_rate: float,
    seed_base: int,
) -> list[PlannedTrial]:
    """Deterministic trial sequence for one participant.

    Draw order from the session generator is fixed: real-pair permutation,
    catch picks, catch positions, then one swap bit per trial. Each real
    pair is served at most once; the session shrinks if the manifest is
    smaller than the requested trial count.
    """
    rng = np.random.default_rng(session_seed(seed_base, participant_id))
    total = trials_per_participant
    n_catch = int(round(catch_rate * total)) if catches else 0
    n_real = min(total - n_catch, len(pairs))
    total = n_real + n_catch

    real_order = rng.permutation(len(pairs))[:n_real]
    catch_picks = rng.integers(0, len(catches), size=n_catch) if n_catch else []
    catch_positions = set(
        int(p) for p in (rng.choice(total, size=n_catch, replace=False) if n_catch else [])
    )
    swaps = rng.integers(0, 2, size=total)

    plan: list[PlannedTrial] = []
    real_iter = iter(real_order)
    catch_iter = iter(catch_picks)
    for index in range(total):
        if index in catch_positions:
            entry = catches[int(next(catch_iter))]
            pair_id, image_a, image_b = entry.pair_id, entry.image_a, entry.image_b
            is_catch, expected = True, entry.expected
        else:
            pair = pairs[int(next(real_iter))]
            pair_id, image_a, image_b = pair.pair_id, pair.image_a, pair.image_b
            is_catch, expected = False, None
        plan.append(
            PlannedTrial(
                trial_id=f"{participant_id}:{index}",
                participant_id=participant_id,
                index=index,
                pair_id=pair_id,
                image_a=image_a,
                image_b=image_b,
                swap=bool(swaps[index]),
                is_catch=is_catch,
                catch_expected=expected,
            )
        )
    return plan


class VoteLog:
    """Append-only JSONL log; every append is flushed and fsynced before
    the caller acknowledges anything."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.entries: list[dict] = []
        if self.path.exists():
            with self.path.open() as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self.entries.append(json.loads(line))
        self._fh = self.path.open("a")

    def append(self, entry: dict) -> None:
        self._fh.write(json.dumps(entry, sort_keys=True) + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())
        self.entries.append(entry)

    def close(self) -> None:
        self._fh.close()


class StudyService:
    """Session bookkeeping over the deterministic plans and the vote log.

    A vote is accepted only for the first unanswered trial of its session,
    which is exactly the trial next_trial() returns; earlier indices are
    duplicates and later ones were never issued.
    """

    def __init__(self, config: StudyConfig):
        self.config = config
        self.pairs = load_pairs_manifest(config.pairs_manifest)
        self.catches = (
            load_catch_manifest(config.catch_manifest) if config.catch_manifest else []
        )
        if config.catch_rate > 0 and not self.catches:
            raise ParseError("catch_rate > 0 requires a catch manifest")
        self.log = VoteLog(config.vote_log)
        self._plans: dict[str, list[PlannedTrial]] = {}
        self._answered: dict[str, int] = {}
        for entry in self.log.entries:
            pid = entry["participant_id"]
            self._answered[pid] = self._answered.get(pid, 0) + 1
        self._lock = threading.Lock()

    def plan_for(self, participant_id: str) -> list[PlannedTrial]:
        if self.config.participants is not None and participant_id not in self.config.participants:
            raise UnknownParticipant(participant_id)
        if participant_id not in self._plans:
            self._plans[participant_id] = build_session_plan(
                participant_id,
                self.pairs,
                self.catches,
                self.config.trials_per_participant,
                self.config.catch_rate,
                self.config.session_seed_base,
            )
        return self._plans[participant_id]

    def next_trial(self, participant_id: str) -> PlannedTrial:
        with self._lock:
            plan = self.plan_for(participant_id)
            answered = self._answered.get(participant_id, 0)
            if answered >= len(plan):
                raise SessionComplete(f"{participant_id} answered all {len(plan)} trials")
            return plan[answered]

    def record_vote(self, trial_id: str, choice: str, response_ms: float | None = None) -> dict:
        pid, sep, index_str = trial_id.rpartition(":")
        if not sep or not index_str.isdigit():
            raise UnknownTrial(trial_id)
        index = int(index_str)
        with self._lock:
            try:
                plan = self.plan_for(pid)
            except UnknownParticipant:
                raise UnknownTrial(trial_id) from None
            if index >= len(plan):
                raise UnknownTrial(trial_id)
            answered = self._answered.get(pid, 0)
            if index < answered:
                raise DuplicateVote(trial_id)
            if index > answered:
                raise UnknownTrial(f"{trial_id} was never issued")
            trial = plan[index]
            entry = {
                "trial_id": trial_id,
                "participant_id": pid,
                "index": index,
                "pair_id": trial.pair_id,
                "choice_raw": choice,
                "choice": trial.canonical_choice(choice),
                "is_catch": trial.is_catch,
                "catch_expected": trial.catch_expected,
                "response_ms": response_ms,
                "recorded_at": time.time(),
            }
            # durability before acknowledgement
            self.log.append(entry)
            self._answered[pid] = answered + 1
            return {"ok": True, "trial_id": trial_id, "answered": answered + 1}

    def completed_count(self, participant_id: str) -> int:
        return self._answered.get(participant_id, 0)

    def export(self) -> tuple[list[VoteRecord], list[StudyPair]]:
        """Acknowledged votes in log order plus skeletons for every real
        pair that received a vote. Idempotent: no timestamps leak out."""
        votes = [
            VoteRecord(
                pair_id=e["pair_id"],
                participant_id=e["participant_id"],
                choice=e["choice"],
                is_catch=e["is_catch"],
                catch_expected=e.get("catch_expected"),
            )
            for e in self.log.entries
        ]
        voted_pairs = {v.pair_id for v in votes if not v.is_catch}
        meta = {p.pair_id: p for p in self.pairs}
        skeletons = [
            StudyPair(
                pair_id=pid,
                image_a=meta[pid].image_a,
                image_b=meta[pid].image_b,
                species=meta[pid].species,
            )
            for pid in sorted(voted_pairs)
            if pid in meta
        ]
        return votes, skeletons

    def export_text(self) -> tuple[str, str]:
        votes, skeletons = self.export()
        votes_jsonl = "".join(json.dumps(v.to_dict(), sort_keys=True) + "\n" for v in votes)
        pairs_jsonl = "".join(json.dumps(p.to_dict(), sort_keys=True) + "\n" for p in skeletons)
        return votes_jsonl, pairs_jsonl

    def write_export(self, out_dir: str | Path) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        votes_jsonl, pairs_jsonl = self.export_text()
        votes_path = out / "votes.jsonl"
        pairs_path = out / "pairs.jsonl"
        votes_path.write_text(votes_jsonl)
        pairs_path.write_text(pairs_jsonl)
        return votes_path, pairs_path


class VoteBody(_pydantic.BaseModel):
    trial_id: str
    choice: str
    response_ms: float | None = None


def create_app(service: StudyService):
    """FastAPI app over a StudyService; catch status and pair metadata are
    withheld from trial payloads."""
    from fastapi import FastAPI
    from fastapi.responses import JSONResponse

    app = FastAPI(title="2AFC study service")

    @app.get("/api/session/{participant_id}/trial")
    def get_trial(participant_id: str):
        try:
            trial = service.next_trial(participant_id)
        except UnknownParticipant:
            return JSONResponse({"error": "unknown_participant"}, status_code=404)
        except SessionComplete:
            return {
                "done": True,
                "completed": service.completed_count(participant_id),
            }
        return {
            "done": False,
            "trial_id": trial.trial_id,
            "left_image": trial.left_image,
            "right_image": trial.right_image,
            "index": trial.index,
            "total": len(service.plan_for(participant_id)),
        }

    @app.post("/api/vote")
    def post_vote(body: VoteBody):
        if body.choice not in ("left", "right"):
            return JSONResponse({"error": "bad_choice"}, status_code=422)
        try:
            return service.record_vote(body.trial_id, body.choice, body.response_ms)
        except DuplicateVote:
            return JSONResponse({"error": "duplicate_vote"}, status_code=409)
        except UnknownTrial:
            return JSONResponse({"error": "unknown_trial"}, status_code=404)

    @app.get("/api/export")
    def get_export():
        votes, pairs = service.export()
        return {
            "votes": [v.to_dict() for v in votes],
            "pairs": [p.to_dict() for p in pairs],
            "vote_count": len(votes),
        }

    if service.config.static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=service.config.static_dir, html=True), name="static")

    return app


def run_service(config_path: str | Path) -> None:
    import uvicorn

    config = StudyConfig.from_file(config_path)
    service = StudyService(config)
    app = create_app(service)
    uvicorn.run(app, host="127.0.0.1", port=config.port, log_level="warning")
