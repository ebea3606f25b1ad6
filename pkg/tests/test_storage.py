"""JSONL logging, digests, and replay verification."""

import json

import pytest

from pokeleague.agents import GreedyAgent, RandomAgent
from pokeleague.league import LeagueConfig, MatchRunner
from pokeleague.storage import (
    DigestMismatch, IncompleteLog, MatchLog, StorageError, canonical_json,
    decision_record, meta_record, read_log, replay, state_digest,
)


@pytest.fixture()
def match_log(dex, bundled_fingerprint, tmp_path):
    """A complete greedy-vs-random match log on disk."""
    runner = MatchRunner(dex, LeagueConfig(), tmp_path, bundled_fingerprint)
    result = runner.run_match(
        GreedyAgent("greedy", dex), RandomAgent("random", 7), seed=42, match_id="m0")
    return tmp_path / "m0.jsonl", result


def test_append_read_roundtrip(tmp_path):
    path = tmp_path / "log.jsonl"
    record = decision_record(
        match_id="m", turn=3, agent_id="a", side=0, phase="Battle",
        decision={"action": {"type": "attack", "move_index": 1}},
        reasoning="because", context={"own_hp_percent": 55})
    with MatchLog(path) as log:
        log.append(meta_record(
            match_id="m", tournament_id="t", seed=1, turn_limit=500,
            dex_fingerprint="f", agents={"a": "x", "b": "y"},
            teams={"a": [0, 1, 2, 3, 4, 5], "b": [6, 7, 8, 9, 10, 11]},
            team_names={"a": [], "b": []}, initial_digest="d"))
        log.append(record)
    records = read_log(path)
    assert len(records) == 2
    assert records[1] == json.loads(json.dumps(record))  # structurally identical


def test_one_json_object_per_line(tmp_path):
    path = tmp_path / "log.jsonl"
    with MatchLog(path) as log:
        log.append({"kind": "meta", "schema_version": "1.0"})
        log.append({"kind": "events", "events": []})
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    for line in lines:
        json.loads(line)


def test_append_after_close_raises(tmp_path):
    log = MatchLog(tmp_path / "log.jsonl")
    log.append({"kind": "meta", "schema_version": "1.0"})
    log.close()
    with pytest.raises(StorageError):
        log.append({"kind": "events"})


def test_reader_rejects_unknown_major_version(tmp_path):
    path = tmp_path / "log.jsonl"
    with MatchLog(path) as log:
        log.append({"kind": "meta", "schema_version": "2.0"})
    with pytest.raises(StorageError):
        read_log(path)


def test_reader_accepts_same_major_newer_minor(tmp_path):
    path = tmp_path / "log.jsonl"
    with MatchLog(path) as log:
        log.append({"kind": "meta", "schema_version": "1.7"})
    assert read_log(path)[0]["schema_version"] == "1.7"


def test_reader_requires_meta_first(tmp_path):
    path = tmp_path / "log.jsonl"
    with MatchLog(path) as log:
        log.append({"kind": "events", "events": []})
    with pytest.raises(StorageError):
        read_log(path)


def test_canonical_json_is_key_sorted():
    assert canonical_json({"b": 1, "a": 2}) == '{"a":2,"b":1}'


def test_state_digest_sensitive_to_state(dex):
    from pokeleague.engine import init_battle

    team = ["Jolteon", "Snorlax", "Swampert", "Gengar", "Metagross", "Salamence"]
    other = ["Gyarados", "Tyranitar", "Blissey", "Zapdos", "Heracross", "Lapras"]
    state, _ = init_battle(dex, team, other, seed=1)
    digest = state_digest(state)
    assert len(digest) == 16
    assert digest == state_digest(state.clone())
    mutated = state.clone()
    mutated.sides[0].team[0].current_hp -= 1
    assert state_digest(mutated) != digest


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------

def test_replay_fixpoint(dex, bundled_fingerprint, match_log):
    path, result = match_log
    outcome = replay(path, dex, expected_dex_fingerprint=bundled_fingerprint)
    assert outcome.winner_agent == result.winner
    assert outcome.turns == result.turn_count


def test_replay_detects_truncation(dex, match_log, tmp_path):
    path, _ = match_log
    lines = path.read_text(encoding="utf-8").splitlines()
    truncated = tmp_path / "truncated.jsonl"
    truncated.write_text("\n".join(lines[:-4]) + "\n", encoding="utf-8")
    with pytest.raises(IncompleteLog):
        replay(truncated, dex)


def test_replay_detects_flipped_damage(dex, match_log, tmp_path):
    path, _ = match_log
    records = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
    flipped_turn = None
    for record in records:
        if record["kind"] != "events":
            continue
        for event in record["events"]:
            if event["kind"] == "Damage":
                event["amount"] += 1
                flipped_turn = record["turn"]
                break
        if flipped_turn is not None:
            break
    assert flipped_turn is not None
    corrupted = tmp_path / "corrupted.jsonl"
    corrupted.write_text(
        "\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")
    with pytest.raises(DigestMismatch) as excinfo:
        replay(corrupted, dex)
    assert excinfo.value.turn == flipped_turn


def test_replay_detects_tampered_digest(dex, match_log, tmp_path):
    path, _ = match_log
    records = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
    for record in records:
        if record["kind"] == "events" and record["phase"] == "turn":
            record["post_digest"] = "0" * 16
            bad_turn = record["turn"]
            break
    tampered = tmp_path / "tampered.jsonl"
    tampered.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")
    with pytest.raises(DigestMismatch) as excinfo:
        replay(tampered, dex)
    assert excinfo.value.turn == bad_turn


def test_replay_checks_dex_fingerprint(dex, match_log):
    path, _ = match_log
    with pytest.raises(StorageError):
        replay(path, dex, expected_dex_fingerprint="deadbeefdeadbeef")


def test_digest_chain_links_consecutive_records(match_log):
    path, _ = match_log
    records = read_log(path)
    event_records = [r for r in records if r["kind"] == "events"]
    for previous, current in zip(event_records, event_records[1:]):
        assert previous["post_digest"] == current["pre_digest"] or current["phase"] == "init"
