"""Bridge between agents and LLM chat providers.

Renders battle views and draft pools into prompts, calls
OpenAI-compatible / Anthropic / Gemini chat endpoints, and parses the
JSON decisions back out of whatever prose or markdown fencing the model
wrapped them in.  Malformed output triggers a bounded repair loop; after
that the league falls back to a canonical decision.

Prompts are pure functions of their inputs and are covered by golden
tests, so any wording change is a deliberate, reviewed diff.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import requests

from .agents import PoolEntry, TeamPick, AgentDecision, TEAM_SIZE
from .dex import Dex, MoveDef
from .engine import Action, BattleView

SYSTEM_PREAMBLE = (
    "You are a competitive Pokémon battle assistant. Follow the instructions "
    "and respond with only the requested JSON object."
)

PROVIDER_OPENAI = "openai_compatible"
PROVIDER_ANTHROPIC = "anthropic"
PROVIDER_GEMINI = "gemini"
PROVIDERS = (PROVIDER_OPENAI, PROVIDER_ANTHROPIC, PROVIDER_GEMINI)


# ---------------------------------------------------------------------------
# errors
# ---------------------------------------------------------------------------

class ParseError(Exception):
    """A model response that cannot be turned into a valid decision."""

    kind = "parse_error"

    def __init__(self, detail: str = ""):
        self.detail = detail
        super().__init__(f"{self.kind}: {detail}" if detail else self.kind)


class NoJsonFound(ParseError):
    kind = "no_json_found"


class WrongArity(ParseError):
    kind = "wrong_arity"

    def __init__(self, count: int):
        self.count = count
        super().__init__(f"expected {TEAM_SIZE} team indices, got {count}")


class IndexOutOfRange(ParseError):
    kind = "index_out_of_range"

    def __init__(self, index: object):
        self.index = index
        super().__init__(f"index {index!r} is outside the pool")


class DuplicateIndex(ParseError):
    kind = "duplicate_index"

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"index {index} appears more than once")


class UnknownActionType(ParseError):
    kind = "unknown_action_type"


class IllegalAction(ParseError):
    kind = "illegal_action"


class GatewayError(Exception):
    """Transport-level failure talking to a provider."""


class AuthError(GatewayError):
    pass


class RequestTimeout(GatewayError):
    pass


class RateLimited(GatewayError):
    pass


class ProviderError(GatewayError):
    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body
        super().__init__(f"provider returned {status}: {body[:200]}")


class AgentFailure(Exception):
    """An LLM agent exhausted its repair attempts (or transport retries)."""

    def __init__(self, trace: "DecisionTrace", message: str = "agent could not produce a valid decision"):
        self.trace = trace
        super().__init__(message)


# ---------------------------------------------------------------------------
# configuration and audit records
# ---------------------------------------------------------------------------

@dataclass
class ProviderConfig:
    provider: str
    endpoint: str
    model: str
    api_key_env: str
    temperature: float = 0.7
    max_tokens: int = 1024
    timeout_s: float = 60.0
    max_retries: int = 2
    backoff_ms: int = 250
    max_repair_attempts: int = 3
    rate_capacity: int = 0  # 0 disables the token bucket
    rate_refill_per_s: float = 0.0

    def __post_init__(self):
        if self.provider not in PROVIDERS:
            raise ValueError(f"unknown provider {self.provider!r}, expected one of {PROVIDERS}")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @staticmethod
    def from_dict(raw: dict) -> "ProviderConfig":
        return ProviderConfig(**raw)

    def to_dict(self) -> dict:
        return {
            "provider": self.provider, "endpoint": self.endpoint, "model": self.model,
            "api_key_env": self.api_key_env, "temperature": self.temperature,
            "max_tokens": self.max_tokens, "timeout_s": self.timeout_s,
            "max_retries": self.max_retries, "backoff_ms": self.backoff_ms,
            "max_repair_attempts": self.max_repair_attempts,
        }


@dataclass
class RawExchange:
    """One verbatim prompt/response round trip, kept in full for audit."""

    prompt: str
    response_text: str
    latency_ms: float
    attempt: int
    parse_outcome: str | None = None

    def to_dict(self) -> dict:
        return {
            "prompt": self.prompt,
            "response_text": self.response_text,
            "latency_ms": self.latency_ms,
            "attempt": self.attempt,
            "parse_outcome": self.parse_outcome,
        }


@dataclass
class DecisionTrace:
    """Everything that happened while producing one decision."""

    exchanges: list[RawExchange] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    fallback_used: bool = False


# ---------------------------------------------------------------------------
# prompt rendering
# ---------------------------------------------------------------------------

def _format_stats(stats: dict[str, int]) -> str:
    return (f"HP {stats['hp']}, Atk {stats['atk']}, Def {stats['def']}, "
            f"SpA {stats['spa']}, SpD {stats['spd']}, Spe {stats['spe']}")


def build_team_prompt(pool: Sequence[PoolEntry]) -> str:
    """Draft instructions, the numbered pool, and the JSON shape to return."""
    if not pool:
        raise ValueError("pool must be non-empty")
    lines = [
        "Select 6 Pokémon from the list below. Consider type coverage, "
        "weaknesses, and synergy. Provide a brief explanation for your team "
        "composition.",
        "",
    ]
    for entry in pool:
        types = "/".join(entry.types)
        moves = ", ".join(entry.moves)
        lines.append(f"{entry.index}. {entry.name} ({types}) | "
                     f"{_format_stats(entry.base_stats)} | Moves: {moves}")
    lines += [
        "",
        'Respond with only a JSON object with keys "team" (a list of 6 '
        'distinct indices from the list above) and "reasoning" (a brief '
        'explanation), e.g. {"team": [0, 1, 2, 3, 4, 5], "reasoning": "..."}.',
    ]
    return "\n".join(lines)


def _status_text(status: str | None) -> str:
    return status if status is not None else "Healthy"


def _describe_move(move: MoveDef) -> str:
    if not move.is_damaging:
        detail = "status move"
    else:
        detail = f"power {move.power}"
    if move.accuracy is None:
        return f"{move.name} ({move.move_type}, {detail}, never misses)"
    return f"{move.name} ({move.move_type}, {detail}, accuracy {move.accuracy})"


def build_battle_prompt(
    view: BattleView,
    legal: Sequence[Action],
    dex: Dex,
    history: Sequence[str] = (),
) -> str:
    """Battle state, the legal actions, and the JSON shape to return."""
    if not legal:
        raise ValueError("legal action set must be non-empty")
    own = view.own_active
    opp = view.opponent_active
    lines = [
        f"You are in a battle. Your active Pokémon: {own.species} "
        f"(HP: {own.hp_percent}%, Status: {_status_text(own.status)}).",
        f"Opponent's active Pokémon: {opp.species} "
        f"(HP: {opp.hp_percent}%, Status: {_status_text(opp.status)}).",
        f"Weather: {view.weather or 'None'}. Turn: {view.turn_number}.",
        "Opponent's revealed Pokémon: " + ", ".join(view.opponent_revealed) + ".",
        "",
        "Your team:",
    ]
    for member in view.own_team:
        marker = " [active]" if member.active else ""
        state = "fainted" if member.fainted else (
            f"HP: {member.hp_percent}%, Status: {_status_text(member.status)}")
        lines.append(f"- {member.index}: {member.species} ({state}){marker}")
    if history:
        lines += ["", "Previous turns:"]
        lines += [f"- {entry}" for entry in history]
    attacks = [a for a in legal if a.is_attack]
    switches = [a for a in legal if not a.is_attack]
    lines += ["", "Legal actions:"]
    if attacks:
        lines.append("Attacks:")
        for action in attacks:
            move = dex.moves[own.moves[action.index]]
            lines.append(f"- move_index {action.index}: {_describe_move(move)}")
    if switches:
        lines.append("Switches:")
        for action in switches:
            member = view.own_team[action.index]
            lines.append(f"- team_index {action.index}: {member.species} "
                         f"(HP: {member.hp_percent}%)")
    lines += [
        "",
        "What do you do? Choose a move or switch, and explain your reasoning.",
        'Respond with only a JSON object with keys "action" and "reasoning". '
        'For an attack use {"action": {"type": "attack", "move_index": N}, '
        '"reasoning": "..."}; for a switch use {"action": {"type": "switch", '
        '"team_index": N}, "reasoning": "..."}.',
    ]
    return "\n".join(lines)


def repair_prompt(original: str, error: ParseError) -> str:
    """Original prompt plus the machine error, asking for bare JSON."""
    return (f"{original}\n\nYour previous response was invalid: {error}. "
            "Respond with only the JSON object.")


# ---------------------------------------------------------------------------
# response parsing
# ---------------------------------------------------------------------------

def extract_first_json(raw: str) -> dict:
    """First JSON object found in the text, however it is wrapped.

    Models routinely wrap their JSON in prose or markdown fences; this
    scans for balanced top-level braces and accepts the first substring
    that parses.  Literal newlines inside strings are tolerated
    (strict=False) since models frequently emit them.
    """
    start = raw.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for pos in range(start, len(raw)):
            ch = raw[pos]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
            elif ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    candidate = raw[start:pos + 1]
                    try:
                        obj = json.loads(candidate, strict=False)
                    except json.JSONDecodeError:
                        break
                    if isinstance(obj, dict):
                        return obj
                    break
        start = raw.find("{", start + 1)
    raise NoJsonFound("no JSON object in response")


def _reasoning_of(obj: dict) -> str:
    reasoning = obj.get("reasoning", "")
    return reasoning if isinstance(reasoning, str) else json.dumps(reasoning)


def parse_team_response(raw: str, pool_size: int) -> tuple[TeamPick, str]:
    """Extract a 6-index team pick; any defect raises a specific ParseError."""
    obj = extract_first_json(raw)
    team = obj.get("team")
    if not isinstance(team, list):
        raise WrongArity(0)
    if len(team) != TEAM_SIZE:
        raise WrongArity(len(team))
    indices: list[int] = []
    for item in team:
        if isinstance(item, bool) or not isinstance(item, int):
            raise IndexOutOfRange(item)
        if not 0 <= item < pool_size:
            raise IndexOutOfRange(item)
        if item in indices:
            raise DuplicateIndex(item)
        indices.append(item)
    return TeamPick(tuple(indices)), _reasoning_of(obj)


def parse_action_response(raw: str, legal: Sequence[Action]) -> tuple[Action, str]:
    """Extract an action and check it against the legal set."""
    if not legal:
        raise ValueError("legal action set must be non-empty")
    obj = extract_first_json(raw)
    payload = obj.get("action")
    if not isinstance(payload, dict):
        raise UnknownActionType(f"missing or non-object 'action': {payload!r}")
    action_type = payload.get("type")
    if action_type == "attack":
        index = payload.get("move_index")
        if isinstance(index, bool) or not isinstance(index, int):
            raise IllegalAction(f"attack without integer move_index: {index!r}")
        action = Action.attack(index)
    elif action_type == "switch":
        index = payload.get("team_index")
        if isinstance(index, bool) or not isinstance(index, int):
            raise IllegalAction(f"switch without integer team_index: {index!r}")
        action = Action.switch(index)
    else:
        raise UnknownActionType(f"unknown action type {action_type!r}")
    if action not in legal:
        raise IllegalAction(f"{action} is not in the legal action set")
    return action, _reasoning_of(obj)


def render_action_json(action: Action, reasoning: str = "") -> str:
    """The documented response shape for an action (round-trip helper)."""
    return json.dumps({"action": action.to_dict(), "reasoning": reasoning})


def render_team_json(team: TeamPick, reasoning: str = "") -> str:
    return json.dumps({"team": list(team.indices), "reasoning": reasoning})


# ---------------------------------------------------------------------------
# provider transport
# ---------------------------------------------------------------------------

class TokenBucket:
    """Simple thread-safe token bucket: capacity tokens, refill per second."""

    def __init__(self, capacity: int, refill_per_s: float, clock=time.monotonic, sleep=time.sleep):
        self.capacity = capacity
        self.refill_per_s = refill_per_s
        self._tokens = float(capacity)
        self._updated = clock()
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._updated) * self.refill_per_s)
                self._updated = now
                if self._tokens >= 1:
                    self._tokens -= 1
                    return
                wait = (1 - self._tokens) / self.refill_per_s if self.refill_per_s > 0 else 0.05
            self._sleep(wait)


_buckets: dict[tuple[str, str], TokenBucket] = {}
_buckets_lock = threading.Lock()


def _bucket_for(config: ProviderConfig) -> TokenBucket | None:
    if config.rate_capacity <= 0:
        return None
    key = (config.provider, config.endpoint)
    with _buckets_lock:
        if key not in _buckets:
            _buckets[key] = TokenBucket(config.rate_capacity, config.rate_refill_per_s)
        return _buckets[key]


def _build_request(config: ProviderConfig, api_key: str, prompt: str) -> tuple[str, dict, dict]:
    if config.provider == PROVIDER_OPENAI:
        url = config.endpoint
        headers = {"Authorization": f"Bearer {api_key}", "Content-Type": "application/json"}
        body = {
            "model": config.model,
            "messages": [
                {"role": "system", "content": SYSTEM_PREAMBLE},
                {"role": "user", "content": prompt},
            ],
            "temperature": config.temperature,
            "max_tokens": config.max_tokens,
        }
    elif config.provider == PROVIDER_ANTHROPIC:
        url = config.endpoint
        headers = {"x-api-key": api_key, "anthropic-version": "2023-06-01",
                   "Content-Type": "application/json"}
        body = {
            "model": config.model,
            "system": SYSTEM_PREAMBLE,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": config.temperature,
            "max_tokens": config.max_tokens,
        }
    else:  # gemini
        url = f"{config.endpoint}?key={api_key}"
        headers = {"Content-Type": "application/json"}
        body = {
            "system_instruction": {"parts": [{"text": SYSTEM_PREAMBLE}]},
            "contents": [{"role": "user", "parts": [{"text": prompt}]}],
            "generationConfig": {
                "temperature": config.temperature,
                "maxOutputTokens": config.max_tokens,
            },
        }
    return url, headers, body


def _extract_text(provider: str, payload: dict) -> str:
    try:
        if provider == PROVIDER_OPENAI:
            return payload["choices"][0]["message"]["content"]
        if provider == PROVIDER_ANTHROPIC:
            return payload["content"][0]["text"]
        return payload["candidates"][0]["content"]["parts"][0]["text"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ProviderError(200, f"unexpected response shape: {exc}")


def _requests_transport(url: str, headers: dict, body: dict, timeout: float) -> tuple[int, object]:
    try:
        response = requests.post(url, headers=headers, json=body, timeout=timeout)
    except requests.Timeout as exc:
        raise RequestTimeout(str(exc))
    except requests.RequestException as exc:
        raise ProviderError(0, str(exc))
    try:
        payload = response.json()
    except ValueError:
        payload = response.text
    return response.status_code, payload


Transport = Callable[[str, dict, dict, float], tuple[int, object]]


def complete(
    config: ProviderConfig,
    prompt: str,
    *,
    transport: Transport | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> RawExchange:
    """One chat round trip with retries and exponential backoff.

    Retries transport failures, 429s, and 5xx responses up to
    config.max_retries times; 401/403 raise AuthError immediately, as
    does a missing API key (before any network traffic).
    """
    api_key = os.environ.get(config.api_key_env, "")
    if not api_key:
        raise AuthError(f"environment variable {config.api_key_env} is not set")
    bucket = _bucket_for(config)
    send = transport or _requests_transport
    url, headers, body = _build_request(config, api_key, prompt)
    started = time.monotonic()
    last_error: GatewayError | None = None
    for attempt in range(1, config.max_retries + 2):
        if bucket is not None:
            bucket.acquire()
        try:
            status, payload = send(url, headers, body, config.timeout_s)
        except RequestTimeout as exc:
            last_error = exc
        except GatewayError as exc:
            last_error = exc
        else:
            if status == 200:
                text = _extract_text(config.provider, payload if isinstance(payload, dict) else {})
                latency = (time.monotonic() - started) * 1000
                return RawExchange(prompt=prompt, response_text=text,
                                   latency_ms=latency, attempt=attempt)
            if status in (401, 403):
                raise AuthError(f"provider rejected credentials (HTTP {status})")
            body_text = payload if isinstance(payload, str) else json.dumps(payload)
            if status == 429:
                last_error = RateLimited(f"rate limited (HTTP 429): {body_text[:200]}")
            elif 500 <= status < 600 or status == 0:
                last_error = ProviderError(status, body_text)
            else:
                raise ProviderError(status, body_text)
        if attempt <= config.max_retries:
            sleep(config.backoff_ms * (2 ** (attempt - 1)) / 1000.0)
    assert last_error is not None
    raise last_error


# ---------------------------------------------------------------------------
# the LLM-backed agent (and its offline stand-in)
# ---------------------------------------------------------------------------

Completer = Callable[[str, str], RawExchange]


class LlmAgent:
    """Agent whose decisions come from a chat provider via the prompt protocol.

    Invalid responses trigger up to max_repair_attempts re-prompts that
    quote the machine error; after that AgentFailure propagates so the
    league can apply its fallback decision.
    """

    def __init__(
        self,
        agent_id: str,
        config: ProviderConfig,
        dex: Dex,
        completer: Completer | None = None,
        include_history: bool = False,
    ):
        self.agent_id = agent_id
        self.config = config
        self.dex = dex
        self.include_history = include_history
        self._completer = completer or self._provider_completer
        self._history: list[str] = []
        self.last_trace = DecisionTrace()

    def _provider_completer(self, prompt: str, kind: str) -> RawExchange:
        return complete(self.config, prompt)

    def _decide(self, prompt: str, kind: str, parse):
        trace = DecisionTrace()
        self.last_trace = trace
        current = prompt
        for _ in range(1 + self.config.max_repair_attempts):
            exchange = self._completer(current, kind)
            trace.exchanges.append(exchange)
            try:
                value, reasoning = parse(exchange.response_text)
            except ParseError as err:
                exchange.parse_outcome = err.kind
                trace.errors.append(str(err))
                current = repair_prompt(prompt, err)
                continue
            exchange.parse_outcome = "success"
            return value, reasoning
        raise AgentFailure(trace)

    def select_team(self, pool: Sequence[PoolEntry]) -> AgentDecision:
        prompt = build_team_prompt(pool)
        team, reasoning = self._decide(
            prompt, "team", lambda raw: parse_team_response(raw, len(pool)))
        return AgentDecision(team=team, reasoning=reasoning)

    def choose_action(self, view: BattleView, legal: Sequence[Action]) -> AgentDecision:
        history = tuple(self._history[-10:]) if self.include_history else ()
        prompt = build_battle_prompt(view, legal, self.dex, history)
        action, reasoning = self._decide(
            prompt, "action", lambda raw: parse_action_response(raw, legal))
        if self.include_history:
            self._history.append(
                f"Turn {view.turn_number}: {view.own_active.species} chose {action} "
                f"vs {view.opponent_active.species}")
        return AgentDecision(action=action, reasoning=reasoning)


class ScriptCompleter:
    """Canned responses from a JSON script, cycling per decision kind.

    Script shape: {"team": ["raw response", ...], "action": [...]}.
    Used by mock entrants so end-to-end runs never touch the network.
    """

    def __init__(self, script: dict[str, list[str]]):
        self.script = script
        self._cursor = {"team": 0, "action": 0}

    @staticmethod
    def from_file(path: str) -> "ScriptCompleter":
        with open(path, encoding="utf-8") as handle:
            return ScriptCompleter(json.load(handle))

    def __call__(self, prompt: str, kind: str) -> RawExchange:
        responses = self.script.get(kind) or ['{}']
        text = responses[self._cursor[kind] % len(responses)]
        self._cursor[kind] += 1
        return RawExchange(prompt=prompt, response_text=text, latency_ms=0.0, attempt=1)


def make_mock_agent(agent_id: str, script_path: str, dex: Dex) -> LlmAgent:
    """LLM agent wired to a canned-response script instead of a provider."""
    config = ProviderConfig(
        provider=PROVIDER_OPENAI, endpoint="mock://script", model="mock",
        api_key_env="POKELEAGUE_MOCK_KEY")
    return LlmAgent(agent_id, config, dex, completer=ScriptCompleter.from_file(script_path))
