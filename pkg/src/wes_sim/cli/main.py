"""``wes-sim`` command line.

Exit codes: 0 success or objective met, 1 completed with failures (oracle
fail, objective unmet), 2 invalid input.  Every output lands in ``--out``
and a ``manifest.json`` there records what is needed to rerun it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from pathlib import Path
from typing import Any, Callable, Optional

from pydantic import BaseModel, ValidationError

from .. import __version__
from ..agents.policies import dump_policy, load_policy
from ..graphgen import degree_stats, generate
from ..mechanism import GENOME_BOUNDS
from ..optimize import CoevolutionConfig, MechanismEvaluator, coevolve, pareto_json, run_nsga2
from ..optimize.evaluate import default_workers
from ..platform.hashing import world_hash
from ..platform.model import WorldState
from ..runner.engine import run_script
from ..runner.script import Episodes, Script
from ..runner.training import frozen, learner_role, train_policy
from ..seeding import split_seed
from ..socialtest import DegenerateBaseline, ab_test, inject_fault
from .config import DOCUMENTS

EXIT_OK, EXIT_FAILED, EXIT_INVALID = 0, 1, 2


class InvalidInput(Exception):
    pass


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def world_snapshot(world: WorldState) -> dict[str, Any]:
    return {
        "world_hash": world_hash(world),
        "users": [
            {"id": u.id, "partition": u.partition.value, "vulnerable": u.vulnerable,
             "bad_actor": u.bad_actor, "policy": world.policies[u.id].value}
            for u in sorted(world.users.values(), key=lambda u: u.id)
        ],
        "edges": [list(e) for e in world.edges()],
        "groups": [
            {"id": g.id, "partition": g.partition.value, "policy": world.policies[g.id].value,
             "members": sorted(world.members[g.id])}
            for g in sorted(world.groups.values(), key=lambda g: g.id)
        ],
    }


def _dumps(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


# --- loading -----------------------------------------------------------------------


def load_document(command: str, path: str, seed: Optional[int]) -> BaseModel:
    """Parse a config (or a manifest of an earlier run) for ``command``."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read config {path}: {exc}") from exc
    base_dir = Path(path).resolve().parent
    if isinstance(raw, dict) and "subcommand" in raw and "config" in raw:
        if raw["subcommand"] != command:
            raise InvalidInput(f"manifest is for {raw['subcommand']!r}, not {command!r}")
        raw = raw["config"]
    try:
        doc = DOCUMENTS[command].model_validate(raw)
    except ValidationError as exc:
        raise InvalidInput(str(exc)) from exc
    updates: dict[str, Any] = {}
    if seed is not None and "seed" in type(doc).model_fields:
        updates["seed"] = seed
    policy = getattr(doc, "policy", None)
    if policy:
        updates["policy"] = str((base_dir / policy).resolve())
    return doc.model_copy(update=updates) if updates else doc


def _build(fn: Callable[[], Any]) -> Any:
    try:
        return fn()
    except (ValueError, KeyError, TypeError) as exc:
        raise InvalidInput(str(exc)) from exc


def _rl_policies(script: Script, doc, episodes: int, seed: int):
    """The learning role's frozen policy (loaded or freshly trained), if any."""
    try:
        role = learner_role(script)
    except ValueError:
        return {}, None
    if getattr(doc, "policy", None):
        policy = load_policy(doc.policy)
    else:
        policy = train_policy(script, episodes, split_seed(seed, "train")).policy
    return {role: frozen(policy)}, policy


# --- subcommands -------------------------------------------------------------------
# Each returns a prepared closure so that every input is validated before the
# output directory is touched.


def prepare_gen_graph(doc, workers):
    spec = _build(doc.graph.build)

    def execute(out: Path):
        world = generate(spec)
        stats = degree_stats(world)
        write_atomic(out / "world.json", _dumps(world_snapshot(world)))
        write_atomic(out / "degree_stats.json", _dumps({
            "min": stats.min, "max": stats.max, "mean": stats.mean,
            "histogram": {str(k): v for k, v in stats.histogram.items()},
        }))
        return EXIT_OK, ["world.json", "degree_stats.json"]

    return execute


def _episode_files(out: Path, prefix: str, result) -> list[str]:
    write_atomic(out / f"{prefix}events.jsonl", result.log_jsonl())
    write_atomic(out / f"{prefix}metrics.csv", result.metrics_csv())
    write_atomic(out / f"{prefix}summary.json", result.summary_json())
    return [f"{prefix}events.jsonl", f"{prefix}metrics.csv", f"{prefix}summary.json"]


def prepare_run(doc, workers):
    script = _build(doc.script.build)
    seed = doc.seed if doc.seed is not None else script.seed

    def execute(out: Path):
        if isinstance(script.objective, Episodes):
            files = []
            for i in range(script.objective.count):
                result = run_script(script, split_seed(seed, "episode", i))
                files += _episode_files(out, f"episode-{i:03d}/", result)
            return EXIT_OK, files
        result = run_script(script, seed)
        return (EXIT_OK if result.objective_reached else EXIT_FAILED), _episode_files(out, "", result)

    return execute


def prepare_train(doc, workers):
    script = _build(doc.script.build)
    _build(lambda: learner_role(script))
    warm = _build(lambda: load_policy(doc.policy)) if doc.policy else None
    if doc.episodes < 0:
        raise InvalidInput("episodes must be non-negative")

    def execute(out: Path):
        result = train_policy(script, doc.episodes, doc.seed, policy=warm)
        write_atomic(out / "policy.csv", dump_policy(result.policy))
        write_atomic(out / "reward_curve.csv", result.curve_csv())
        return EXIT_OK, ["policy.csv", "reward_curve.csv"]

    return execute


def prepare_optimize(doc, workers):
    script = _build(doc.script.build)
    space = _build(doc.space.build)
    if doc.policy:
        _build(lambda: load_policy(doc.policy))

    def execute(out: Path):
        policies, policy = _rl_policies(script, doc, doc.train_episodes, doc.seed)
        seeds = tuple(split_seed(doc.seed, "eval", i) for i in range(doc.eval_seeds))
        evaluator = MechanismEvaluator(script, policies, seeds, space, workers)
        result = run_nsga2(space, evaluator, population=doc.population, generations=doc.generations,
                           seed=split_seed(doc.seed, "nsga2"))
        write_atomic(out / "pareto.json", pareto_json(result.front, space, seeds))
        files = ["pareto.json"]
        if policy is not None and not doc.policy:
            write_atomic(out / "policy.csv", dump_policy(policy))
            files.append("policy.csv")
        return EXIT_OK, files

    return execute


def prepare_coevolve(doc, workers):
    script = _build(doc.script.build)
    space = _build(doc.space.build)
    config = CoevolutionConfig(doc.rounds, doc.generations, doc.retrain_episodes, doc.population, doc.seeds_per_eval, space)
    _build(config.validate)
    _build(lambda: learner_role(script))
    warm = _build(lambda: load_policy(doc.policy)) if doc.policy else None

    def execute(out: Path):
        result = coevolve(config, script, seed=doc.seed, policy=warm,
                          pretrain_episodes=doc.pretrain_episodes, workers=workers)
        write_atomic(out / "history.csv", result.history_csv())
        write_atomic(out / "policy.csv", dump_policy(result.policy))
        return EXIT_OK, ["history.csv", "policy.csv"]

    return execute


def prepare_abtest(doc, workers):
    script = _build(doc.script.build)
    mech_a = _build(doc.mechanism_a.build) if doc.mechanism_a else None
    mech_b = _build(doc.mechanism_b.build) if doc.mechanism_b else None
    specs = [_build(o.build) for o in doc.oracles]
    script_b = _build(lambda: inject_fault(script, doc.fault_b)) if doc.fault_b else None

    def execute(out: Path):
        policies, _ = _rl_policies(script, doc, doc.train_episodes, doc.seed)
        try:
            report = ab_test(script, mech_a, mech_b, doc.n, specs, seed=doc.seed, policies=policies, script_b=script_b)
        except DegenerateBaseline as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FAILED, []
        write_atomic(out / "report.json", report.to_json())
        return (EXIT_OK if report.passed else EXIT_FAILED), ["report.json"]

    return execute


PREPARE = {
    "gen-graph": prepare_gen_graph,
    "run": prepare_run,
    "train": prepare_train,
    "optimize": prepare_optimize,
    "coevolve": prepare_coevolve,
    "abtest": prepare_abtest,
}


def write_schemas(out: Path) -> list[str]:
    files = []
    for name, model in DOCUMENTS.items():
        write_atomic(out / f"{name}.schema.json", _dumps(model.model_json_schema()))
        files.append(f"{name}.schema.json")
    bounds = [{"index": i, "gene": g.name, "low": g.low, "high": g.high, "inverted": g.inverted}
              for i, g in enumerate(GENOME_BOUNDS)]
    write_atomic(out / "genome_bounds.json", _dumps(bounds))
    return files + ["genome_bounds.json"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wes-sim", description="Desk-scale web-enabled simulation toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "gen-graph": "generate a synthetic social graph",
        "run": "run one scripted episode",
        "train": "train the script's learning bots",
        "optimize": "NSGA-II search over mechanism parameters",
        "coevolve": "alternate mechanism search and bad-actor retraining",
        "abtest": "compare two mechanisms with metric oracles",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="config document, or a manifest.json to rerun")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: $WES_SIM_WORKERS, else CPU count)")
        if name == "train":
            p.add_argument("--episodes", type=int, default=None, help="training episodes (overrides the config)")
    p = sub.add_parser("schema", help="write the config JSON schemas and genome bounds")
    p.add_argument("--out", required=True)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    if args.command == "schema":
        write_schemas(out)
        return EXIT_OK
    workers = args.workers if args.workers is not None else default_workers()
    try:
        if workers < 1:
            raise InvalidInput("--workers must be at least 1")
        doc = load_document(args.command, args.config, args.seed)
        if args.command == "train" and args.episodes is not None:
            doc = doc.model_copy(update={"episodes": args.episodes})
        execute = PREPARE[args.command](doc, workers)
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    start = time.perf_counter()
    out.mkdir(parents=True, exist_ok=True)
    code, files = execute(out)
    manifest = {
        "subcommand": args.command,
        "config": doc.model_dump(mode="json"),
        "seed": getattr(doc, "seed", None),
        "version": __version__,
        "outputs": files,
        "wall_clock_seconds": round(time.perf_counter() - start, 3),
    }
    write_atomic(out / "manifest.json", _dumps(manifest))
    return code


if __name__ == "__main__":
    sys.exit(main())
