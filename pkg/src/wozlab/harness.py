"""Scripted Operator and Wizard agents driving full sessions through the
wire protocol, for end-to-end tests and desk-scale corpus generation.

Agents exchange encoded envelopes with the service core exactly as a browser
would over the socket, validate everything the server sends (sequence gaps,
role privacy, unknown types) and run on a virtual clock, so a six-minute
game takes milliseconds and is deterministic given the seeds.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import protocol
from .clock import VirtualClock
from .errors import ProtocolViolation
from .logstore import submit_questionnaire
from .scenario import Scenario, load_scenario_file
from .service import ServiceConfig, WozService
from .session import seeded_token_source

# Fixed virtual epoch: 2020-03-01T00:00:00Z. Keeps log paths and timestamps
# reproducible across runs.
HARNESS_EPOCH = 1583020800.0

OPERATOR_PHRASES = (
    "ok",
    "sounds good",
    "yes please",
    "go ahead",
    "what do you suggest?",
    "use the quad copter",
    "send husky 1",
    "try husky 2",
    "can you give me an update?",
    "how much time do we have left?",
)

WIZARD_FREE_TEXTS = ("on it", "one moment please", "checking the sensors now")


class GoldenScriptError(ProtocolViolation):
    """The golden replay hit a step whose action was not available."""


@dataclass
class ScriptStep:
    at: float  # seconds after game start
    kind: str  # "action" | "free_text" | "chat"
    action: str = ""
    slots: dict = field(default_factory=dict)
    text: str = ""


# The reference emergency flow: greeting, alert, PA announcement, emergency
# shutdown, UAV inspection, hose resolution, damage assessment. Timed so the
# alert lands at 4:56 remaining and the time-left update at 3:08.
GOLDEN_WIZARD_SCRIPT = [
    ScriptStep(2, "action", "intro_hello"),
    ScriptStep(8, "action", "request_attention"),
    ScriptStep(64, "action", "inform_alert_emergency"),
    ScriptStep(70, "action", "request_pa_announcement"),
    ScriptStep(80, "action", "action_performed"),
    ScriptStep(84, "action", "inform_activate_emergency_shutdown"),
    ScriptStep(94, "action", "request_robot_type"),
    ScriptStep(150, "action", "inform_moving", {"robot": "quad copter 1"}),
    ScriptStep(150, "action", "inform_robot_eta"),
    ScriptStep(172, "action", "inform_time_left"),
    ScriptStep(175, "action", "inform_arrival"),
    ScriptStep(185, "action", "inform_inspection"),
    ScriptStep(198, "action", "inform_emergency_status"),
    ScriptStep(202, "action", "request_robot_emergency"),
    ScriptStep(214, "action", "inform_moving", {"robot": "husky 1"}),
    ScriptStep(214, "action", "inform_robot_eta"),
    ScriptStep(230, "action", "inform_robot_progress"),
    ScriptStep(245, "action", "inform_arrival"),
    ScriptStep(250, "action", "inform_extinguish_hose"),
    ScriptStep(258, "action", "inform_working_status"),
    ScriptStep(274, "action", "inform_emergency_resolved"),
    ScriptStep(278, "action", "inform_congratulate"),
    ScriptStep(286, "action", "request_robot_damage"),
    ScriptStep(296, "action", "inform_moving", {"robot": "husky 2"}),
    ScriptStep(326, "action", "inform_arrival"),
    ScriptStep(330, "action", "inform_assess_damage"),
    ScriptStep(348, "action", "inform_damage_report"),
    ScriptStep(352, "action", "inform_all_clear"),
    ScriptStep(356, "action", "inform_goodbye"),
]

GOLDEN_OPERATOR_SCRIPT = [
    ScriptStep(14, "chat", text="Hi Fred, I am here"),
    ScriptStep(67, "chat", text="Ok what do you suggest we do first"),
    ScriptStep(76, "chat", text="Yes that sounds good"),
    ScriptStep(88, "chat", text="Ok"),
    ScriptStep(100, "chat", text="I would like to use the quad copter 1"),
    ScriptStep(180, "chat", text="Is Quad copter indicating what the problem is?"),
    ScriptStep(208, "chat", text="Let's send husky 1 with the fire hose"),
    ScriptStep(282, "chat", text="Great work! Can we check the damage?"),
    ScriptStep(292, "chat", text="Please send husky 2"),
]


# --------------------------------------------------------------------------
# policies


class Policy:
    """Decides what an agent does next; the AgentClient does the protocol."""

    name = "policy"

    def bind(self, rng: random.Random) -> None:
        self.rng = rng

    def next_at(self, agent: "AgentClient") -> Optional[float]:
        """Absolute instant of the next act, or None to stay quiet."""
        return None

    def act(self, agent: "AgentClient") -> None:
        pass

    def questionnaire(self, resolved: bool) -> Optional[list[int]]:
        return None


class GoldenPolicy(Policy):
    """Replays the reference transcript with exact virtual timings.

    Strict mode treats an unavailable scripted act as a failure (the
    regression contract); lenient mode retries it every few seconds, which
    is how the script behaves against an uncooperative partner.
    """

    RETRY_S = 5.0

    def __init__(self, script: list[ScriptStep], strict: bool = True):
        self.script = script
        self.strict = strict
        self.index = 0
        self._retry_at = None

    def next_at(self, agent):
        if agent.game_t0 is None or self.index >= len(self.script):
            return None
        at = agent.game_t0 + self.script[self.index].at
        if self._retry_at is not None:
            at = max(at, self._retry_at)
        return at

    def act(self, agent):
        step = self.script[self.index]
        if step.kind == "chat":
            agent.send("chat", {"text": step.text})
        elif step.kind == "free_text":
            agent.send("free_text", {"text": step.text})
        else:
            if not any(o["id"] == step.action for o in agent.options):
                if self.strict:
                    raise GoldenScriptError(
                        f"golden step '{step.action}' at t+{step.at} not in advertised "
                        f"options {[o['id'] for o in agent.options]}"
                    )
                self._retry_at = agent.now() + self.RETRY_S
                return
            agent.send("wizard_action", {"action": step.action, "slots": step.slots})
        self.index += 1
        self._retry_at = None

    def questionnaire(self, resolved):
        return [6, 6, 3, 5] if resolved else [3, 3, 4, 4]


class GoldenWizard(GoldenPolicy):
    name = "golden_wizard"

    def __init__(self, strict: bool = True):
        super().__init__(GOLDEN_WIZARD_SCRIPT, strict=strict)


class GoldenOperator(GoldenPolicy):
    name = "golden_operator"

    def __init__(self):
        super().__init__(GOLDEN_OPERATOR_SCRIPT)


class RandomValidWizard(Policy):
    """Picks uniformly among the currently advertised options, preferring
    task options over the ever-present global shortcuts the way a worker
    trying to make progress would.

    Only ever submits actions present in the latest action_options envelope;
    occasionally types a free-text message or asks for a hint.
    """

    name = "random_wizard"

    def __init__(
        self,
        think_range=(2.0, 15.0),
        p_free_text=0.05,
        p_hint=0.05,
        p_prefer_task=0.8,
    ):
        self.think_range = think_range
        self.p_free_text = p_free_text
        self.p_hint = p_hint
        self.p_prefer_task = p_prefer_task
        self._next = None

    def next_at(self, agent):
        if agent.game_t0 is None:
            return None
        if self._next is None or self._next < agent.now():
            base = max(agent.now(), agent.game_t0)
            self._next = base + self.rng.uniform(*self.think_range)
        return self._next

    def act(self, agent):
        self._next = None
        roll = self.rng.random()
        if roll < self.p_free_text:
            agent.send("free_text", {"text": self.rng.choice(WIZARD_FREE_TEXTS)})
            return
        if roll < self.p_free_text + self.p_hint:
            agent.send("hint_request", {})
            return
        if not agent.options:
            return
        pool = agent.options
        task_options = [o for o in pool if not o.get("global")]
        if task_options and self.rng.random() < self.p_prefer_task:
            pool = task_options
        option = self.rng.choice(pool)
        slots = {}
        for name, choices in (option.get("slots") or {}).items():
            if choices:
                slots[name] = self.rng.choice(choices)
        agent.send("wizard_action", {"action": option["id"], "slots": slots})

    def questionnaire(self, resolved):
        base = [self.rng.randint(2, 6) for _ in range(4)]
        if resolved:
            base = [min(7, b + self.rng.randint(0, 2)) for b in base]
        return base


class RandomOperator(Policy):
    """Sends short canned messages at random intervals."""

    name = "random_operator"

    def __init__(self, think_range=(8.0, 25.0)):
        self.think_range = think_range
        self._next = None

    def next_at(self, agent):
        if agent.game_t0 is None:
            return None
        if self._next is None or self._next < agent.now():
            base = max(agent.now(), agent.game_t0)
            self._next = base + self.rng.uniform(*self.think_range)
        return self._next

    def act(self, agent):
        self._next = None
        agent.send("chat", {"text": self.rng.choice(OPERATOR_PHRASES)})

    def questionnaire(self, resolved):
        base = [self.rng.randint(2, 6) for _ in range(4)]
        if resolved:
            base = [min(7, b + self.rng.randint(0, 2)) for b in base]
        return base


class IdlePolicy(Policy):
    """Never acts. An idle wizard rides the session to the evacuation."""

    name = "idle"


class StubbornOperator(Policy):
    """Never answers: locked states stay locked until the deadline."""

    name = "stubborn_operator"


# --------------------------------------------------------------------------
# agent client


class AgentClient:
    """One scripted participant: sends/receives encoded envelopes and
    validates the server side of the protocol as it goes."""

    def __init__(self, service: WozService, policy: Policy, clock: VirtualClock, seed: int):
        self.service = service
        self.policy = policy
        self.clock = clock
        self.rng = random.Random(seed)
        policy.bind(self.rng)

        self.cid = service.open_connection()
        self.seq = 0
        self.expected_seq = 0
        self.received: list[protocol.Envelope] = []
        self.role: Optional[str] = None
        self.session: Optional[str] = None
        self.participant: Optional[str] = None
        self.options: list[dict] = []
        self.game_t0: Optional[float] = None
        self.ended = False
        self.token: Optional[str] = None
        self.end_payload: Optional[dict] = None
        self.notices: list[dict] = []
        self.chat: list[dict] = []
        self.ready_sent = False

    def now(self) -> float:
        return self.clock.now()

    def send(self, type_: str, payload: dict) -> None:
        env = protocol.Envelope(
            type=type_, seq=self.seq, ts=self.now(), payload=payload, session=self.session
        )
        self.seq += 1
        self.service.handle_text(self.cid, protocol.encode(env))

    def drain(self) -> list[protocol.Envelope]:
        """Receive, validate and absorb everything the server queued for us."""
        new = []
        for text in self.service.poll(self.cid):
            env = protocol.decode(text)  # raises DecodeError on illegal envelopes
            if env.seq != self.expected_seq:
                raise ProtocolViolation(
                    f"{self.policy.name}: seq gap (got {env.seq}, expected {self.expected_seq})"
                )
            self.expected_seq += 1
            if self.role == "operator" and env.type in protocol.WIZARD_ONLY_TYPES:
                raise ProtocolViolation(
                    f"server sent wizard-only '{env.type}' to the operator connection"
                )
            self._absorb(env)
            self.received.append(env)
            new.append(env)
        return new

    def _absorb(self, env: protocol.Envelope) -> None:
        if env.type == "role_assigned":
            self.role = env.payload["role"]
            self.session = env.payload["session"]
            self.participant = env.payload.get("participant")
        elif env.type == "instructions" and not self.ready_sent:
            self.ready_sent = True
            self.send("ready", {})
        elif env.type == "action_options":
            self.options = env.payload["options"]
        elif env.type == "timer":
            if self.game_t0 is None and env.payload.get("phase") == "playing":
                self.game_t0 = env.ts
        elif env.type == "chat":
            self.chat.append(env.payload)
        elif env.type == "notice":
            self.notices.append(env.payload)
        elif env.type == "session_end":
            self.ended = True
            self.token = env.payload["token"]
            self.end_payload = env.payload

    def error_notices(self) -> list[dict]:
        return [n for n in self.notices if n.get("level") == "error"]


# --------------------------------------------------------------------------
# session runner


@dataclass
class RunResult:
    session_id: str
    log_path: Path
    log: dict
    operator: AgentClient
    wizard: AgentClient

    @property
    def outcome(self) -> dict:
        return self.log["outcome"]


def make_service(
    scenario: Scenario,
    log_dir: str | Path,
    seed: int,
    clock: Optional[VirtualClock] = None,
    lobby_timeout_s: float = 300.0,
) -> tuple[WozService, VirtualClock]:
    clock = clock or VirtualClock(HARNESS_EPOCH)
    config = ServiceConfig(
        log_dir=str(log_dir),
        seed=seed,
        lobby_timeout_s=lobby_timeout_s,
    )
    service = WozService(
        scenario, config, clock, token_source=seeded_token_source(seed)
    )
    return service, clock


def run_session(
    scenario: Scenario,
    operator_policy: Policy,
    wizard_policy: Policy,
    log_dir: str | Path,
    seed: int = 0,
    tick_step: float = 1.0,
    max_virtual_s: float = 3600.0,
    submit_questionnaires: bool = True,
) -> RunResult:
    """Drive one full session (join, pair, instructions, game, close) through
    the wire protocol on a virtual clock. Deterministic given the seed."""
    service, clock = make_service(scenario, log_dir, seed)
    operator = AgentClient(service, operator_policy, clock, seed=seed * 1000003 + 1)
    wizard = AgentClient(service, wizard_policy, clock, seed=seed * 1000003 + 2)

    # Queue order fixes roles: first join becomes the Operator.
    operator.send("join", {})
    operator.drain()
    wizard.send("join", {})
    operator.drain()
    wizard.drain()
    if operator.role != "operator" or wizard.role != "wizard":
        raise ProtocolViolation(
            f"unexpected role assignment: {operator.role}/{wizard.role}"
        )

    start = clock.now()
    next_tick = start + tick_step
    heartbeat_s = service.config.heartbeat_s
    next_ping = {0: start + heartbeat_s, 1: start + heartbeat_s}
    while not (operator.ended and wizard.ended):
        if clock.now() - start > max_virtual_s:
            raise ProtocolViolation("session did not close within the virtual budget")

        due: list[tuple[float, int, str]] = [(next_tick, 4, "tick")]
        wiz_at = wizard.policy.next_at(wizard)
        if wiz_at is not None and not wizard.ended:
            due.append((max(wiz_at, clock.now()), 0, "wizard"))
        op_at = operator.policy.next_at(operator)
        if op_at is not None and not operator.ended:
            due.append((max(op_at, clock.now()), 1, "operator"))
        # Real clients heartbeat; scripted ones do too, or the server would
        # (correctly) treat a quiet policy as a dead connection.
        if not operator.ended:
            due.append((next_ping[1], 2, "ping_op"))
        if not wizard.ended:
            due.append((next_ping[0], 3, "ping_wiz"))

        at, _, what = min(due)
        clock.set_to(at)
        if what == "tick":
            service.tick()
            next_tick += tick_step
        elif what == "wizard":
            wizard.policy.act(wizard)
        elif what == "operator":
            operator.policy.act(operator)
        elif what == "ping_op":
            operator.send("ping", {})
            next_ping[1] = at + heartbeat_s
        else:
            wizard.send("ping", {})
            next_ping[0] = at + heartbeat_s
        operator.drain()
        wizard.drain()

    session_id = operator.session or wizard.session
    log_path = service.session_log_path(session_id)
    if log_path is None:
        raise ProtocolViolation(f"no finalized log for session {session_id}")

    if submit_questionnaires:
        answers = operator.policy.questionnaire(
            bool(operator.end_payload and operator.end_payload.get("resolved"))
        )
        if answers and operator.token:
            submit_questionnaire(log_dir, operator.token, answers)

    log = json.loads(log_path.read_text(encoding="utf-8"))
    return RunResult(
        session_id=session_id,
        log_path=log_path,
        log=log,
        operator=operator,
        wizard=wizard,
    )


POLICY_PAIRS = {
    "golden": lambda: (GoldenOperator(), GoldenWizard()),
    "random": lambda: (RandomOperator(), RandomValidWizard()),
    "idle": lambda: (RandomOperator(), IdlePolicy()),
    "stubborn": lambda: (StubbornOperator(), GoldenWizard(strict=False)),
}


# --------------------------------------------------------------------------
# log replay validation


class ReplayError(ProtocolViolation):
    """A logged transition fails re-validation against the scenario."""


def replay_validate(scenario: Scenario, log: dict) -> int:
    """Re-validate a finalized log against the scenario.

    Rebuilds the FSM position and the world from the event stream and checks
    that every accepted wizard option was in the gated available set at its
    submission instant, that logged state chains match, and that every
    logged milestone is reproduced by re-simulation. Returns the number of
    wizard options validated.
    """
    from . import fsm
    from .fsm import WorldCommand
    from .world import WorldState

    graph = scenario.graph
    pos = None
    world = None
    fired: list = []
    validated = 0

    for i, ev in enumerate(log["events"]):
        ts = ev["ts"]
        kind = ev["kind"]
        if kind == "phase" and ev.get("to") == "playing":
            world = WorldState(scenario.world, start=ts)
            pos = fsm.initial_position(graph)
            continue
        if world is None:
            continue
        # The live scheduler ticks on a one-second grid and equal-time client
        # events are processed before the tick, so replay advances the world
        # to the last grid instant strictly before the event. Milestones are
        # the tick's own output and carry its exact time.
        if kind == "milestone":
            fired.extend(world.tick(ts))
        else:
            grid = float(math.ceil(ts) - 1) if ts == int(ts) else float(math.floor(ts))
            if grid > world._last_tick:
                fired.extend(world.tick(grid))

        if kind == "chat":
            pos = fsm.clear_lock(pos)
        elif kind == "wizard_option":
            act = ev["dialogue_act"]
            if ev["fsm_state_before"] != pos.current_state:
                raise ReplayError(
                    f"events[{i}]: logged state {ev['fsm_state_before']!r} != "
                    f"replayed {pos.current_state!r}"
                )
            available = {o.id for o in fsm.available_actions(graph, pos, world)}
            if act not in available:
                raise ReplayError(
                    f"events[{i}]: act '{act}' was not available in "
                    f"{pos.current_state!r} at t={ts}"
                )
            option = graph.option(act)
            if not option.is_self_loop:
                target = graph.states[option.target_state]
                pos = fsm.FsmPosition(
                    current_state=option.target_state,
                    lock_active=target.lock is not None,
                    pending_authorization=target.lock.description if target.lock else None,
                )
            if ev["fsm_state_after"] != pos.current_state:
                raise ReplayError(
                    f"events[{i}]: logged target {ev['fsm_state_after']!r} != "
                    f"replayed {pos.current_state!r}"
                )
            validated += 1
        elif kind == "wizard_free_text":
            if ev["fsm_state_before"] != pos.current_state or (
                ev["fsm_state_after"] != pos.current_state
            ):
                raise ReplayError(f"events[{i}]: free text moved the FSM")
        elif kind == "world_command":
            cmd = WorldCommand(**ev["command"])
            _task, instant = world.execute_command(cmd, ev.get("slots", {}), ts)
            fired.extend(instant)
        elif kind == "milestone":
            if not fired:
                raise ReplayError(
                    f"events[{i}]: logged milestone '{ev['event_id']}' not "
                    "reproduced by re-simulation"
                )
            expected = fired.pop(0)
            if expected.id != ev["event_id"]:
                raise ReplayError(
                    f"events[{i}]: milestone order mismatch "
                    f"({expected.id!r} != {ev['event_id']!r})"
                )
    if fired:
        raise ReplayError(f"re-simulation produced unlogged milestones: {[e.id for e in fired]}")
    return validated


def generate_corpus(
    n: int,
    seed: int,
    out_dir: str | Path,
    scenario: Optional[Scenario] = None,
    policy_mix: tuple[str, ...] = ("random",),
    scenario_path: Optional[str] = None,
) -> list[RunResult]:
    """Run ``n`` sessions (virtual clock, accelerated) into one log directory.

    The resulting directory is a valid analysis input; determinism follows
    from the per-session derived seeds.
    """
    if scenario is None:
        if scenario_path is None:
            raise ValueError("need a scenario or a scenario_path")
        scenario = load_scenario_file(scenario_path)
    results = []
    for i in range(n):
        name = policy_mix[i % len(policy_mix)]
        op_policy, wiz_policy = POLICY_PAIRS[name]()
        results.append(
            run_session(
                scenario,
                op_policy,
                wiz_policy,
                log_dir=out_dir,
                seed=seed * 10007 + i,
            )
        )
    return results
