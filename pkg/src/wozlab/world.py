"""Timed emergency-response world: robots, tasks, milestones, countdown.

The world takes instants as parameters (no hidden clock) so tests can drive
a virtual timeline. State is owned by one session; commands and ticks are
serialized by the orchestrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

from .errors import (
    AfterDeadline,
    CapabilityMismatch,
    ClockWentBackwards,
    ConfigError,
    NotAtLocation,
    RobotBusy,
)
from .fsm import WorldCommand


class RobotKind(str, Enum):
    HUSKY = "husky"
    QUADCOPTER = "quadcopter"


class Capability(str, Enum):
    INSPECT = "inspect"
    EXTINGUISH_HOSE = "extinguish_hose"
    EXTINGUISH_SPRINKLER = "extinguish_sprinkler"
    OPEN_VALVE = "open_valve"
    ASSESS_DAMAGE = "assess_damage"


# Any of these completing at the emergency site puts the emergency out.
RESOLVING_CAPABILITIES = {
    Capability.EXTINGUISH_HOSE,
    Capability.EXTINGUISH_SPRINKLER,
    Capability.OPEN_VALVE,
}

MOVE_ACTION = "move"


class RobotStatus(str, Enum):
    IDLE = "idle"
    MOVING = "moving"
    WORKING = "working"


class EmergencyStage(str, Enum):
    LATENT = "latent"
    LOCATED = "located"
    RESOLVED = "resolved"
    ASSESSED = "assessed"
    EVACUATED = "evacuated"


_STAGE_RANK = {
    EmergencyStage.LATENT: 0,
    EmergencyStage.LOCATED: 1,
    EmergencyStage.RESOLVED: 2,
    EmergencyStage.ASSESSED: 3,
}


class MilestoneKind(str, Enum):
    ROBOT_ARRIVED = "robot_arrived"
    WORK_COMPLETED = "work_completed"
    EMERGENCY_LOCATED = "emergency_located"
    EMERGENCY_RESOLVED = "emergency_resolved"
    DAMAGE_ASSESSED = "damage_assessed"
    TIMER_WARNING = "timer_warning"
    EVACUATION = "evacuation"
    SITE_EVENT = "site_event"


@dataclass
class Robot:
    id: str
    kind: RobotKind
    capabilities: frozenset[Capability]
    location: str
    status: RobotStatus = RobotStatus.IDLE


@dataclass(frozen=True)
class RobotTask:
    robot: str
    action: str  # MOVE_ACTION or a Capability value
    target: str
    started_at: float
    duration: float
    completion_event: "MilestoneEvent"


@dataclass(frozen=True)
class MilestoneEvent:
    id: str
    kind: MilestoneKind
    narration: str
    media_ref: Optional[str] = None


DEFAULT_NARRATIONS = {
    MilestoneKind.ROBOT_ARRIVED: "{robot} has reached {location}.",
    MilestoneKind.WORK_COMPLETED: "{robot} has finished working at {location}.",
    MilestoneKind.EMERGENCY_LOCATED: "{robot} has found a major fire in {emergency_detail}.",
    MilestoneKind.EMERGENCY_RESOLVED: "The fire at {location} has been put out.",
    MilestoneKind.DAMAGE_ASSESSED: "Damage assessment of {location} is complete.",
    MilestoneKind.TIMER_WARNING: "Warning: {remaining} left before mandatory evacuation.",
    MilestoneKind.EVACUATION: "Time is up. The platform is being evacuated.",
}


@dataclass(frozen=True)
class WorldConfig:
    robots: tuple[Robot, ...]
    locations: tuple[str, ...]
    emergency_location: str
    emergency_detail: str
    # durations[action][robot kind] -> seconds; action is "move" or a capability
    durations: Mapping[str, Mapping[RobotKind, float]]
    time_limit_s: float = 360.0
    timer_warnings_s: tuple[float, ...] = (60.0,)
    media: Mapping[str, str] = field(default_factory=dict)
    narrations: Mapping[str, str] = field(default_factory=dict)
    allow_cancel: bool = False

    def duration_for(self, action: str, kind: RobotKind) -> float:
        try:
            return float(self.durations[action][kind])
        except KeyError:
            raise ConfigError(f"no duration configured for ({kind.value}, {action})")


def format_mmss(seconds: float) -> str:
    s = max(0, int(seconds))
    return f"{s // 60}:{s % 60:02d}"


class WorldState:
    """Mutable per-session world. Single-writer by contract."""

    def __init__(self, config: WorldConfig, start: float):
        if not config.robots:
            raise ConfigError("scenario declares no robots")
        if config.emergency_location not in config.locations:
            raise ConfigError(
                f"emergency location '{config.emergency_location}' is not a known location"
            )
        self.config = config
        self.robots: dict[str, Robot] = {
            r.id: Robot(r.id, r.kind, r.capabilities, r.location) for r in config.robots
        }
        self.started_at = start
        self.deadline = start + config.time_limit_s
        self.active_task: Optional[RobotTask] = None
        self.last_task: Optional[RobotTask] = None
        self.milestones_fired: list[MilestoneEvent] = []
        self.evacuated = False
        self._furthest = EmergencyStage.LATENT
        self._last_tick = start
        self._task_seq = 0
        # ascending; pop() takes the largest still-pending threshold first
        self._warnings_pending = sorted(
            w for w in config.timer_warnings_s if 0 < w < config.time_limit_s
        )
        self._site_events_fired: set[str] = set()

    # --- views used by the FSM gating --------------------------------------

    @property
    def has_active_task(self) -> bool:
        return self.active_task is not None

    def emergency_reached(self, stage: str) -> bool:
        return _STAGE_RANK[self._furthest] >= _STAGE_RANK[EmergencyStage(stage)]

    def emergency_stage_is(self, stage: str) -> bool:
        return self.status is EmergencyStage(stage)

    def context_robot_can(self, capability: str) -> bool:
        robot = self.context_robot
        return robot is not None and Capability(capability) in robot.capabilities

    @property
    def status(self) -> EmergencyStage:
        return EmergencyStage.EVACUATED if self.evacuated else self._furthest

    @property
    def context_robot(self) -> Optional[Robot]:
        task = self.active_task or self.last_task
        return self.robots.get(task.robot) if task else None

    # --- session context slots ---------------------------------------------

    def context_slots(self, now: float) -> dict[str, str]:
        """Slot values resolvable from the live world (robot names, timers)."""
        slots: dict[str, str] = {
            "location": self.config.emergency_location,
            "emergency_detail": self.config.emergency_detail,
            "time_left": format_mmss(self.remaining_time(now)),
        }
        task = self.active_task or self.last_task
        if task:
            slots["robot"] = task.robot
            slots["location"] = task.target
        if self.active_task:
            slots["eta_s"] = str(
                max(0, math.ceil(self.active_task.started_at + self.active_task.duration - now))
            )
        return slots

    # --- commands ------------------------------------------------------------

    def start_robot_action(
        self, robot_id: str, action: str, target: str, now: float
    ) -> RobotTask:
        """Dispatch one robot. Enforces the single-active-robot safety rule."""
        if self.active_task is not None:
            raise RobotBusy(
                f"robot '{self.active_task.robot}' is already active; "
                "only one robot may act at a time"
            )
        if now >= self.deadline:
            raise AfterDeadline("the countdown has expired")
        robot = self.robots.get(robot_id)
        if robot is None:
            raise ConfigError(f"unknown robot '{robot_id}'")
        if robot.status is not RobotStatus.IDLE:
            raise RobotBusy(f"robot '{robot_id}' is not idle")
        if target not in self.config.locations:
            raise ConfigError(f"unknown location '{target}'")

        if action == MOVE_ACTION:
            robot.status = RobotStatus.MOVING
        else:
            cap = Capability(action)
            if cap not in robot.capabilities:
                raise CapabilityMismatch(
                    f"robot '{robot_id}' cannot perform '{action}'"
                )
            if robot.location != target:
                raise NotAtLocation(
                    f"robot '{robot_id}' is at '{robot.location}', not '{target}'"
                )
            robot.status = RobotStatus.WORKING

        duration = self.config.duration_for(action, robot.kind)
        self._task_seq += 1
        task = RobotTask(
            robot=robot_id,
            action=action,
            target=target,
            started_at=now,
            duration=duration,
            completion_event=self._completion_event(robot, action, target),
        )
        self.active_task = task
        return task

    def cancel_active_task(self) -> None:
        """Recall a moving robot. Disabled unless the scenario opts in."""
        if not self.config.allow_cancel:
            raise ConfigError("task cancellation is disabled in this scenario")
        task = self.active_task
        if task is None:
            return
        robot = self.robots[task.robot]
        if robot.status is not RobotStatus.MOVING:
            raise RobotBusy("only a moving robot can be recalled")
        robot.status = RobotStatus.IDLE
        self.active_task = None

    def execute_command(self, cmd: WorldCommand, slots: Mapping[str, str], now: float):
        """Run one FSM side effect. Returns (RobotTask | None, [instant events])."""
        if cmd.kind == "move_robot":
            robot = slots.get("robot")
            if robot is None:
                raise ConfigError("move_robot command without a robot slot")
            target = slots.get("location", self.config.emergency_location)
            return self.start_robot_action(robot, MOVE_ACTION, target, now), []
        if cmd.kind == "start_work":
            robot_id = slots.get("robot")
            if robot_id is None:
                task = None
            else:
                robot = self.robots.get(robot_id)
                task = self.start_robot_action(
                    robot_id, cmd.action, robot.location if robot else "", now
                )
            return task, []
        if cmd.kind == "site_event":
            return None, self._fire_site_event(cmd.event, now)
        raise ConfigError(f"unknown world command '{cmd.kind}'")

    def _fire_site_event(self, event_name: str, now: float) -> list[MilestoneEvent]:
        # Repeating a site action (second PA announcement) does not re-fire its milestone.
        if event_name in self._site_events_fired:
            return []
        self._site_events_fired.add(event_name)
        ev = MilestoneEvent(
            id=f"site:{event_name}",
            kind=MilestoneKind.SITE_EVENT,
            narration=self._narration(f"site:{event_name}", default=event_name.replace("_", " ")),
            media_ref=self.config.media.get(f"site:{event_name}"),
        )
        self.milestones_fired.append(ev)
        return [ev]

    # --- time ---------------------------------------------------------------

    def tick(self, now: float) -> list[MilestoneEvent]:
        """Advance to ``now``: complete due tasks, fire due one-shot events."""
        if now < self._last_tick:
            raise ClockWentBackwards(f"tick at {now} after {self._last_tick}")
        self._last_tick = now
        fired: list[MilestoneEvent] = []

        task = self.active_task
        if task and now >= task.started_at + task.duration:
            fired.append(self._complete_task(task))

        remaining = self.remaining_time(now)
        while self._warnings_pending and remaining <= self._warnings_pending[-1]:
            threshold = self._warnings_pending.pop()
            if now >= self.deadline:
                continue  # deadline beat the warning; evacuation covers it
            ev = MilestoneEvent(
                id=f"timer_warning_{int(threshold)}",
                kind=MilestoneKind.TIMER_WARNING,
                narration=self._narration(
                    MilestoneKind.TIMER_WARNING.value,
                    remaining=format_mmss(threshold),
                ),
                media_ref=self.config.media.get(MilestoneKind.TIMER_WARNING.value),
            )
            self.milestones_fired.append(ev)
            fired.append(ev)

        if (
            now >= self.deadline
            and not self.evacuated
            and not self.emergency_reached(EmergencyStage.RESOLVED.value)
        ):
            self.evacuated = True
            ev = MilestoneEvent(
                id="evacuation",
                kind=MilestoneKind.EVACUATION,
                narration=self._narration(MilestoneKind.EVACUATION.value),
                media_ref=self.config.media.get(MilestoneKind.EVACUATION.value),
            )
            self.milestones_fired.append(ev)
            fired.append(ev)

        return fired

    def _complete_task(self, task: RobotTask) -> MilestoneEvent:
        robot = self.robots[task.robot]
        robot.status = RobotStatus.IDLE
        if task.action == MOVE_ACTION:
            robot.location = task.target
        self.active_task = None
        self.last_task = task

        event = task.completion_event
        if event.kind is MilestoneKind.EMERGENCY_LOCATED:
            self._advance(EmergencyStage.LOCATED)
        elif event.kind is MilestoneKind.EMERGENCY_RESOLVED:
            self._advance(EmergencyStage.RESOLVED)
        elif event.kind is MilestoneKind.DAMAGE_ASSESSED:
            self._advance(EmergencyStage.ASSESSED)
        self.milestones_fired.append(event)
        return event

    def _advance(self, stage: EmergencyStage) -> None:
        if _STAGE_RANK[stage] > _STAGE_RANK[self._furthest]:
            self._furthest = stage

    def _completion_event(self, robot: Robot, action: str, target: str) -> MilestoneEvent:
        """The milestone this task will fire. Decided at dispatch: the single
        active task rule means no other command can change the stage meanwhile."""
        self_id = self._task_seq
        slots = {
            "robot": robot.id,
            "location": target,
            "emergency_detail": self.config.emergency_detail,
        }
        at_emergency = target == self.config.emergency_location
        if action == MOVE_ACTION:
            kind = MilestoneKind.ROBOT_ARRIVED
        elif (
            action == Capability.INSPECT.value
            and at_emergency
            and self._furthest is EmergencyStage.LATENT
        ):
            kind = MilestoneKind.EMERGENCY_LOCATED
        elif (
            Capability(action) in RESOLVING_CAPABILITIES
            and at_emergency
            and self._furthest is EmergencyStage.LOCATED
        ):
            kind = MilestoneKind.EMERGENCY_RESOLVED
        elif (
            action == Capability.ASSESS_DAMAGE.value
            and at_emergency
            and self._furthest is EmergencyStage.RESOLVED
        ):
            kind = MilestoneKind.DAMAGE_ASSESSED
        else:
            kind = MilestoneKind.WORK_COMPLETED
        media = self.config.media.get(f"{kind.value}.{robot.kind.value}") or self.config.media.get(
            kind.value
        )
        return MilestoneEvent(
            id=f"{kind.value}:{self_id}" if kind in (MilestoneKind.ROBOT_ARRIVED, MilestoneKind.WORK_COMPLETED) else kind.value,
            kind=kind,
            narration=self._narration(kind.value, **slots),
            media_ref=media,
        )

    def _narration(self, key: str, default: str | None = None, **slots: str) -> str:
        template = self.config.narrations.get(key)
        if template is None:
            try:
                template = DEFAULT_NARRATIONS[MilestoneKind(key)]
            except (ValueError, KeyError):
                template = default or key
        out = template
        for name, value in slots.items():
            out = out.replace("{" + name + "}", str(value))
        return out

    def remaining_time(self, now: float) -> float:
        return max(0.0, self.deadline - now)

    def progress(self) -> dict[str, bool]:
        return {
            "located": self.emergency_reached(EmergencyStage.LOCATED.value),
            "resolved": self.emergency_reached(EmergencyStage.RESOLVED.value),
            "assessed": self.emergency_reached(EmergencyStage.ASSESSED.value),
            "evacuated": self.evacuated,
        }

    def snapshot(self, now: float) -> dict:
        """Compact JSON-ready view stored with each world command in the log."""
        return {
            "t": round(now - self.started_at, 3),
            "emergency": self.status.value,
            "robots": {
                rid: {"status": r.status.value, "location": r.location}
                for rid, r in sorted(self.robots.items())
            },
            "active_task": (
                {
                    "robot": self.active_task.robot,
                    "action": self.active_task.action,
                    "target": self.active_task.target,
                    "ends_at": round(
                        self.active_task.started_at + self.active_task.duration
                        - self.started_at,
                        3,
                    ),
                }
                if self.active_task
                else None
            ),
        }


def init_world(config: WorldConfig, start: float) -> WorldState:
    return WorldState(config, start)
