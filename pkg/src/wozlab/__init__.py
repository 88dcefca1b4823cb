"""wozlab: self-hostable Wizard-of-Oz dialogue collection platform.

An FSM-driven wizard interface pairs two participants, constrains the wizard
to context-valid dialogue actions, simulates a timed emergency-response
world, logs complete dialogues and ships the corpus analysis pipeline.
"""

from .clock import VirtualClock, WallClock
from .fsm import (
    ActionKind,
    ActionOption,
    DAType,
    DialogueGraph,
    DialogueState,
    FsmPosition,
    TransitionResult,
    apply_action,
    available_actions,
    initial_position,
    record_free_text,
    suggest_hint,
)
from .scenario import Scenario, load_scenario, load_scenario_file
from .service import ServiceConfig, WozService
from .session import (
    CloseReason,
    Phase,
    RewardConfig,
    Role,
    Session,
    SessionOutcome,
    compute_reward_cents,
    generate_token,
)
from .world import (
    Capability,
    EmergencyStage,
    MilestoneEvent,
    Robot,
    RobotKind,
    WorldConfig,
    WorldState,
    init_world,
)

__version__ = "0.1.0"

__all__ = [
    "ActionKind",
    "ActionOption",
    "Capability",
    "CloseReason",
    "DAType",
    "DialogueGraph",
    "DialogueState",
    "EmergencyStage",
    "FsmPosition",
    "MilestoneEvent",
    "Phase",
    "RewardConfig",
    "Robot",
    "RobotKind",
    "Role",
    "Scenario",
    "ServiceConfig",
    "Session",
    "SessionOutcome",
    "TransitionResult",
    "VirtualClock",
    "WallClock",
    "WorldConfig",
    "WorldState",
    "WozService",
    "apply_action",
    "available_actions",
    "compute_reward_cents",
    "generate_token",
    "init_world",
    "initial_position",
    "load_scenario",
    "load_scenario_file",
    "record_free_text",
    "suggest_hint",
]
