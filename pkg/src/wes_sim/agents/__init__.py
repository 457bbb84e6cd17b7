"""Bot behaviour: memory, state features, policies, actuators and rewards."""

from .actuators import ROLES, build_action, observation_plan
from .features import N_STATES, StateFeatures, bucket, featurize
from .memory import BotMemory
from .policies import (
    QLEARNING,
    SARSA,
    EmptyRepertoire,
    Policy,
    QPolicy,
    RandomPolicy,
    RLParams,
    RuleBasedPolicy,
    dump_policy,
    load_policy,
    parse_policy,
    save_policy,
    select_action,
    update_policy,
)
from .rewards import (
    C_DENIED,
    REWARD_IDS,
    RewardTracker,
    data_acquisition_reward,
    make_tracker,
    normal_user_utility,
    privacy_violation_reward,
    scammer_reward,
    should_see,
)
