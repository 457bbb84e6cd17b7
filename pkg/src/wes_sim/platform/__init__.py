"""Deterministic social-platform substrate."""

from .core import (
    DROPPED,
    NO_FAULTS,
    OK,
    ActionOutcome,
    FaultConfig,
    MessageHandle,
    apply_action,
    can_view,
    get_message,
    observe,
    replay,
    visible_events,
)
from .errors import (
    AlreadyFetched,
    InvalidAction,
    IsolationViolation,
    NotRecipient,
    PlatformError,
    PrivacyDenied,
    UnknownEntity,
)
from .hashing import PartitionWatcher, canonical_partition, canonical_state, partition_hash, world_hash
from .model import *  # noqa: F401,F403
