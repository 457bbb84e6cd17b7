"""Ready-made scripts for the integrity and privacy use cases."""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

from ..agents.policies import RLParams
from ..graphgen import GraphSpec, GroupSpec, PreferentialAttachment
from ..mechanism import MechanismParams
from ..platform.model import BotClass, Origin
from .script import Objective, PolicySpec, RosterEntry, Script, Time

SCAMMER_TICKS = 12


def scammer_script(
    graph_seed: int = 0,
    *,
    n_users: int = 100,
    n_vulnerable: int = 5,
    n_normal: int = 10,
    ticks: int = SCAMMER_TICKS,
    scammer_policy: Optional[PolicySpec] = None,
    mechanism: Optional[MechanismParams] = None,
    rl: RLParams = RLParams(),
) -> Script:
    """One learning scammer, rule-based vulnerable targets and normal users."""
    graph = GraphSpec(
        n_users=n_users,
        model=PreferentialAttachment(3),
        n_vulnerable=n_vulnerable,
        bad_actors=1,
        seed=graph_seed,
    )
    roster = (
        RosterEntry("bad_actors", "scammer", policy=scammer_policy or PolicySpec("rl", rl=rl), reward="scammer"),
        RosterEntry("vulnerable", "target", policy=PolicySpec("rule", "target", accept_prob=0.8), reward="normal"),
        RosterEntry(f"sample:{n_normal}", "normal", policy=PolicySpec("rule", "normal"), reward="normal"),
    )
    return Script(
        graph=graph,
        roster=roster,
        objective=Time(ticks),
        mechanism=mechanism,
        metrics=("messages_sent", "requests_sent", "scam_contacts", "actions_denied"),
        max_ticks=max(ticks, 1) * 2,
        seed=graph_seed,
    )


def privacy_script(
    graph_seed: int = 0, *, n_users: int = 60, n_breakers: int = 1, n_normal: int = 20, ticks: int = 20,
    objective: Optional[Objective] = None,
) -> Script:
    """Privacy-breaking bots probing a graph with mixed profile policies."""
    graph = GraphSpec(
        n_users=n_users,
        model=PreferentialAttachment(2),
        groups=GroupSpec(3, 0.2),
        profile_privacy=(0.4, 0.4, 0.2),
        seed=graph_seed,
    )
    roster = (
        RosterEntry(f"sample:{n_breakers}", "privacy_breaker", BotClass.READ_ONLY, reward="privacy"),
        RosterEntry(f"sample:{n_normal}", "normal", policy=PolicySpec("rule", "normal"), reward="normal"),
    )
    return Script(graph=graph, roster=roster, objective=objective or Time(ticks), max_ticks=ticks * 2, seed=graph_seed)


def data_script(graph_seed: int = 0, *, n_users: int = 60, n_bots: int = 3, ticks: int = 20) -> Script:
    """Data-acquiring bots competing to observe as many entities as possible."""
    graph = GraphSpec(n_users=n_users, model=PreferentialAttachment(2), profile_privacy=(0.5, 0.3, 0.2), seed=graph_seed)
    roster = (RosterEntry(f"sample:{n_bots}", "data_acquirer", BotClass.READ_ONLY, reward="data"),)
    return Script(graph=graph, roster=roster, objective=Time(ticks), max_ticks=ticks * 2, seed=graph_seed)


def isolation_script(graph_seed: int = 0, *, n_users: int = 80, n_protected: int = 20, ticks: int = 20) -> Script:
    """Synthetic bots of every class beside a protected community of real-user replays."""
    graph = GraphSpec(n_users=n_users, model=PreferentialAttachment(2), n_protected=n_protected, seed=graph_seed)
    roster = (
        RosterEntry("protected", "replay", policy=PolicySpec("rule", "normal"), origin=Origin.REAL_USER),
        RosterEntry("sample:5", "explorer", BotClass.READ_ONLY),
        RosterEntry("sample:5", "explorer", BotClass.FULLY_ISOLATED),
        RosterEntry("sample:5", "normal", BotClass.WRITER, policy=PolicySpec("rule", "normal")),
    )
    return Script(graph=graph, roster=roster, objective=Time(ticks), max_ticks=ticks * 2, seed=graph_seed)


def with_mechanism(script: Script, mechanism: Optional[MechanismParams]) -> Script:
    return replace(script, mechanism=mechanism)


SCENARIOS = {
    "scammer": scammer_script,
    "privacy": privacy_script,
    "data": data_script,
    "isolation": isolation_script,
}
