"""Exception hierarchy shared across the package.

Errors that point at a location in a config document or wire message
carry a ``path`` attribute (e.g. ``dialogue.states.intro.options[2].target``).
"""

from __future__ import annotations


class WozError(Exception):
    """Base class for all package errors."""


class ParseError(WozError):
    """Scenario or config document is not syntactically valid."""


class ValidationError(WozError):
    """Document parsed but violates a structural invariant."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class ConfigError(WozError):
    """World/service configuration is unusable (no robots, bad location, ...)."""


# --- dialogue FSM ---------------------------------------------------------

class ActionUnavailable(WozError):
    """Submitted action is not in the currently gated option set."""

    def __init__(self, action_id: str, state: str):
        super().__init__(f"action '{action_id}' is not available in state '{state}'")
        self.action_id = action_id
        self.state = state


class MissingSlot(WozError):
    def __init__(self, name: str):
        super().__init__(f"required slot '{name}' is not bound")
        self.name = name


class EmptyMessage(WozError):
    """Free-text message is empty after trimming."""


class NoActionsAvailable(WozError):
    """Hint requested but no action is currently available."""


# --- world simulation -----------------------------------------------------

class RobotBusy(WozError):
    """Another robot is already performing an action."""


class CapabilityMismatch(WozError):
    """Robot was ordered to perform an action outside its capability set."""


class NotAtLocation(WozError):
    """Robot must be at the target location to start this action."""


class AfterDeadline(WozError):
    """Command arrived after the session deadline."""


class ClockWentBackwards(WozError):
    """tick() was called with an instant earlier than the last one."""


# --- session orchestration ------------------------------------------------

class DuplicateJoin(WozError):
    """Participant is already queued or in a session."""


class NotBothReady(WozError):
    """Game start requested before both participants acknowledged instructions."""


class WrongPhase(WozError):
    """Operation not legal in the session's current phase."""


class AlreadyClosed(WozError):
    """Session was already closed."""


class UnknownToken(WozError):
    """No session log carries this completion token."""


class AlreadySubmitted(WozError):
    """Questionnaire for this token was already submitted."""


class OutOfRange(WozError):
    """Questionnaire answer outside the 1-7 scale."""


# --- wire protocol --------------------------------------------------------

class DecodeError(WozError):
    """Wire message failed to decode; ``path`` names the offending field."""

    def __init__(self, path: str, message: str = ""):
        super().__init__(f"{path}: {message}" if message else path)
        self.path = path


class ProtocolViolation(WozError):
    """Peer sent an envelope that is illegal at this point in the protocol."""


# --- storage and analysis -------------------------------------------------

class StorageError(WozError):
    """Log could not be persisted."""


class EmptyCorpus(WozError):
    """Analysis requested over a corpus with no dialogues."""


class UnmappedDialogueAct(WozError):
    def __init__(self, act_id: str):
        super().__init__(f"dialogue act '{act_id}' has no type mapping")
        self.act_id = act_id


class DegenerateInput(WozError):
    """Statistic undefined for constant input."""


class EmptySample(WozError):
    """Statistical test requires non-empty samples."""
