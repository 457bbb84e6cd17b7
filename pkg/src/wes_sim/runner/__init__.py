"""Episode execution: scripts, the virtual-time loop, the monitor and training."""

from .engine import EpisodeResult, VirtualClock, make_policy, next_bot, objective_reached, run_script
from .monitor import Monitor, NonMonotoneTick, record_metric
from .scenarios import SCENARIOS, data_script, isolation_script, privacy_script, scammer_script, with_mechanism
from .script import (
    BUILTIN_METRICS,
    BotSpec,
    Episodes,
    Objective,
    PolicySpec,
    Results,
    RosterEntry,
    Script,
    ScriptInvalid,
    Steps,
    Time,
    UnknownPredicate,
    resolve_roster,
)
from .training import TrainingResult, evaluate_policy, frozen, initial_policy, learner_role, random_baseline, train_policy
