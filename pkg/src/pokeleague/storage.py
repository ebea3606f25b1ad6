"""Append-only match logs and bit-exact replay.

Each match writes one JSONL file.  Records carry a "kind" discriminator:
"meta" (seeds, teams, config), "decision" (prompt, raw response, parsed
decision, rationale), and "events" (engine events with pre/post state
digests).  Replay re-runs the engine over the logged actions and checks
every digest, so any nondeterminism or corruption is pinpointed to a
turn.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .dex import Dex
from .engine import Action, BattleState, init_battle, resolve_replacements, resolve_turn

SCHEMA_VERSION = "1.0"

PHASE_TEAM_SELECT = "TeamSelect"
PHASE_BATTLE = "Battle"
PHASE_FORCED_REPLACE = "ForcedReplace"

EVENTS_INIT = "init"
EVENTS_TURN = "turn"
EVENTS_REPLACE = "replace"


class StorageError(Exception):
    pass


class IncompleteLog(StorageError):
    pass


class DigestMismatch(StorageError):
    def __init__(self, turn: int, detail: str = ""):
        self.turn = turn
        super().__init__(f"replay diverged at turn {turn}" + (f": {detail}" if detail else ""))


def canonical_json(obj: object) -> str:
    """Stable serialization used for digests and byte-equality checks."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def state_digest(state: BattleState) -> str:
    """64-bit digest of the canonical state serialization."""
    raw = canonical_json(state.to_dict()).encode("utf-8")
    return hashlib.sha256(raw).hexdigest()[:16]


class MatchLog:
    """One writer per match: JSON objects, one per line, flushed on append."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = open(self.path, "w", encoding="utf-8")

    def append(self, record: dict) -> None:
        if self._handle is None:
            raise StorageError(f"log {self.path} is closed")
        self._handle.write(json.dumps(record, ensure_ascii=False) + "\n")
        self._handle.flush()

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def __enter__(self) -> "MatchLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


# ---------------------------------------------------------------------------
# record builders
# ---------------------------------------------------------------------------

def meta_record(
    *,
    match_id: str,
    tournament_id: str,
    seed: int,
    turn_limit: int,
    dex_fingerprint: str,
    agents: dict[str, str],
    teams: dict[str, list[int]],
    team_names: dict[str, list[str]],
    initial_digest: str,
    config: dict | None = None,
    provider_params: dict | None = None,
) -> dict:
    return {
        "kind": "meta",
        "schema_version": SCHEMA_VERSION,
        "match_id": match_id,
        "tournament_id": tournament_id,
        "seed": seed,
        "turn_limit": turn_limit,
        "dex_fingerprint": dex_fingerprint,
        "agents": agents,
        "teams": teams,
        "team_names": team_names,
        "initial_digest": initial_digest,
        "config": config or {},
        "provider_params": provider_params or {},
        "ts": time.time(),
    }


def decision_record(
    *,
    match_id: str,
    turn: int,
    agent_id: str,
    side: int,
    phase: str,
    decision: dict,
    reasoning: str,
    fallback_used: bool = False,
    exchanges: list[dict] | None = None,
    errors: list[str] | None = None,
    context: dict | None = None,
) -> dict:
    return {
        "kind": "decision",
        "match_id": match_id,
        "turn": turn,
        "agent_id": agent_id,
        "side": side,
        "phase": phase,
        "decision": decision,
        "reasoning": reasoning,
        "fallback_used": fallback_used,
        "exchanges": exchanges or [],
        "errors": errors or [],
        "context": context,
        "ts": time.time(),
    }


def events_record(
    *,
    match_id: str,
    turn: int,
    phase: str,
    events: list[dict],
    pre_digest: str | None,
    post_digest: str,
) -> dict:
    return {
        "kind": "events",
        "match_id": match_id,
        "turn": turn,
        "phase": phase,
        "events": events,
        "pre_digest": pre_digest,
        "post_digest": post_digest,
    }


# ---------------------------------------------------------------------------
# reading and replay
# ---------------------------------------------------------------------------

def read_log(path: str | Path) -> list[dict]:
    """Parse a match log, rejecting unknown schema major versions."""
    records = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise StorageError(f"{path}:{line_no}: invalid JSON: {exc}")
    if not records or records[0].get("kind") != "meta":
        raise StorageError(f"{path}: first record must be meta")
    version = str(records[0].get("schema_version", ""))
    major = version.split(".")[0]
    if major != SCHEMA_VERSION.split(".")[0]:
        raise StorageError(f"{path}: unsupported log schema version {version!r}")
    return records


@dataclass
class ReplayResult:
    final_state: BattleState
    winner_side: int
    winner_agent: str
    turns: int


def replay_walk(records: list[dict], dex: Dex) -> Iterator[tuple[dict, BattleState]]:
    """Re-run the engine over a log, yielding (record, state before record).

    Digests are verified as the walk progresses; any divergence raises
    DigestMismatch with the offending turn.  The recomputed event lists
    must also match the logged ones byte for byte.
    """
    meta = records[0]
    state, init_events = init_battle(
        dex,
        meta["team_names"]["a"],
        meta["team_names"]["b"],
        meta["seed"],
        meta["turn_limit"],
    )
    pending_actions: dict[int, Action] = {}
    pending_replacements: dict[int, Action] = {}

    for record in records[1:]:
        yield record, state
        kind = record.get("kind")
        if kind == "decision":
            if record["phase"] == PHASE_TEAM_SELECT:
                continue
            action = Action.from_dict(record["decision"]["action"])
            if record["phase"] == PHASE_FORCED_REPLACE:
                pending_replacements[record["side"]] = action
            else:
                pending_actions[record["side"]] = action
        elif kind == "events":
            turn = record["turn"]
            if record["phase"] == EVENTS_INIT:
                recomputed = init_events
            elif record["phase"] == EVENTS_TURN:
                if set(pending_actions) != {0, 1}:
                    raise IncompleteLog(f"turn {turn}: missing battle decisions")
                if record["pre_digest"] != state_digest(state):
                    raise DigestMismatch(turn, "pre-state digest")
                state, recomputed = resolve_turn(
                    state, pending_actions[0], pending_actions[1], dex)
                pending_actions = {}
            elif record["phase"] == EVENTS_REPLACE:
                if not pending_replacements:
                    raise IncompleteLog(f"turn {turn}: missing replacement decisions")
                if record["pre_digest"] != state_digest(state):
                    raise DigestMismatch(turn, "pre-state digest")
                state, recomputed = resolve_replacements(state, pending_replacements, dex)
                pending_replacements = {}
            else:
                raise StorageError(f"unknown events phase {record['phase']!r}")
            if record["post_digest"] != state_digest(state):
                raise DigestMismatch(turn, "post-state digest")
            if canonical_json(record["events"]) != canonical_json(recomputed):
                raise DigestMismatch(turn, "event payload")
    yield {"kind": "end"}, state


def replay(path: str | Path, dex: Dex, expected_dex_fingerprint: str | None = None) -> ReplayResult:
    """Verify a complete log turn by turn and return the recomputed result."""
    records = read_log(path)
    meta = records[0]
    if expected_dex_fingerprint is not None and meta["dex_fingerprint"] != expected_dex_fingerprint:
        raise StorageError(
            f"dex fingerprint mismatch: log has {meta['dex_fingerprint']}, "
            f"current dex is {expected_dex_fingerprint}")
    state: BattleState | None = None
    for _record, walked_state in replay_walk(records, dex):
        state = walked_state
    assert state is not None
    if not state.ended:
        raise IncompleteLog(f"{path}: log ends before BattleEnded")
    winner_side = state.winner
    winner_agent = meta["agents"]["a" if winner_side == 0 else "b"]
    return ReplayResult(
        final_state=state,
        winner_side=winner_side,
        winner_agent=winner_agent,
        turns=state.turn_number - 1,
    )
