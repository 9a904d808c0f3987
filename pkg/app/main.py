#!/usr/bin/env python3
# app/main.py
"""
The command-line entry point for the random-action-set simulation toolkit.

Each subcommand reads an experiment document (or falls back to a scripted
default), runs one family of simulations or checks, and writes a report in
JSON or CSV. Reports go to stdout and to the output directory; logs go to
stderr and the log file.

Exit codes: 0 all checks passed, 1 a check failed, 2 configuration error,
3 a resource budget was exceeded or the result is inconclusive.
"""

# The config_service MUST be the very first import to ensure logging is
# configured before any other modules attempt to log.
try:
    from app.services import config
except ImportError:
    # This might happen if script is not run as a module. Provide a helpful error.
    import sys
    print("FATAL: Could not import services. Please run this script as a module: `python -m app.main`", file=sys.stderr)
    sys.exit(1)

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

# Now that logging is configured, we can safely import other modules.
from app.services import report_service
from app import seeding
from app.branching import (
    MbpKernel,
    accepted_offspring,
    extinction_iteration,
    extinction_profile,
    fearn_criterion,
    mbp_kernel_check,
    mbp_recurrence_probe,
    normalized_growth_probe,
    offspring_from_cardinality,
    offspring_from_pmf,
    simulate_bpve_batch,
)
from app.distmodel import DiscreteLaw, cardinality_law, law_moments, z_for_confidence
from app.estimators import (
    DEFAULT_Z,
    conditional_power_identity_check,
    complementarity_check,
    estimate_omniscient,
    estimate_strategy_success,
    horizon_ladder,
    shift_value_sequence,
    value_ordering,
)
from app.exceptions import BudgetExceededError, ConfigError, DegenerateMeanError
from app.families import family_from_config
from app.goals import goal_from_config
from app.mdpcore import (
    check_size_matches_actions,
    check_step1,
    check_step4,
    check_step5_bound,
    check_step6_dominance,
    check_value_supermartingale,
    state_predicate_from_config,
)
from app.models.dto import CheckResult, Estimate, ExperimentConfig
from app.replication import BATTERIES, BatterySettings, condition_check, dominating_law, replicate_table2
from app.strategies import (
    one_step_maximizing_strategy,
    run_episode,
    smallest_action_strategy,
    strategy_from_config,
    trace_lines,
)
from app.treespace import DEFAULT_NODE_BUDGET, generation_sizes, sample_tree, trees_to_text

# Initialize the logger for this module.
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_BUDGET = 3

# Used when a subcommand runs without --config. The seed comes from config.yaml.
SCRIPTED_EXPERIMENTS: Dict[str, Dict[str, Any]] = {
    'sample-tree': {'family': 'example45', 'tree': {'depth': 5, 'count': 200}},
    'estimate': {'family': 'example45', 'goal': 'eventually-nonzero',
                 'strategies': ['smallest-action', 'largest-action', 'one-step-maximizing'],
                 'horizons': [4, 8, 12], 'samples': 2000},
    'omniscient': {'family': 'example45', 'goal': 'eventually-nonzero', 'horizons': [8], 'samples': 2000,
                   'omniscient': {'shift': {'t_max': 4, 'end': 8,
                                            'goal': {'name': 'always-nonzero', 'params': {'from_stage': 5}}}}},
    'mdp': {'family': 'tiny', 'goal': 'always-nonzero', 'samples': 5000,
            'mdp': {'m': 1, 't': 0, 'horizon': 3, 'predicate': 'root-nonzero',
                    'checks': ['step1', 'step4', 'step5', 'step6', 'supermartingale', 'size']}},
    'mbp': {'family': 'example45', 'samples': 100000, 'mbp': {'ys': [1, 2, 5, 20], 'probe': {'T': 200, 'trials': 200}}},
    'bpve': {'family': 'example45', 'goal': 'eventually-nonzero', 'samples': 20000, 'bpve': {'T': 12}},
    'check': {'family': 'example45', 'goal': 'eventually-nonzero',
              'check': {'which': ['lamperti', 'dominance', 'fearn', 'shift-invariance', 'time-invariance']}},
    'example': {},
    'table2': {},
}


# --- Experiment plumbing ---
def load_experiment(command: str, args: argparse.Namespace) -> ExperimentConfig:
    """The --config document, or the scripted default; --seed overrides either."""
    if args.config:
        experiment = config.load_experiment(args.config)
    else:
        data = dict(SCRIPTED_EXPERIMENTS[command])
        data['seed'] = int(config.get('defaults.seed', 20240601))
        experiment = ExperimentConfig.from_dict(data)
    if args.seed is not None:
        experiment = experiment.with_seed(args.seed)
    return experiment


def resolve_z(experiment: ExperimentConfig) -> float:
    """`tolerances.z`, else `tolerances.confidence` as a two-sided level, else config.yaml."""
    if 'z' in experiment.tolerances:
        return float(experiment.tolerances['z'])
    if 'confidence' in experiment.tolerances:
        return z_for_confidence(float(experiment.tolerances['confidence']))
    return float(config.get('tolerances.z', DEFAULT_Z))


def _family(experiment: ExperimentConfig):
    if experiment.family is None:
        raise ConfigError("This command needs a 'family'.")
    return family_from_config(experiment.family)


def _goal(experiment: ExperimentConfig):
    if experiment.goal is None:
        raise ConfigError("This command needs a 'goal'.")
    return goal_from_config(experiment.goal)


def _horizons(experiment: ExperimentConfig, default: List[int]) -> List[int]:
    return list(experiment.horizons) or default


def _option_block(options: Dict[str, Any], name: str, *required: str) -> Tuple[Dict[str, Any], List[int]]:
    """The `name` sub-mapping of a command's options and its required integer keys."""
    spec = options[name]
    if not isinstance(spec, dict):
        raise ConfigError(f"'{name}' must be a mapping, got {spec!r}.")
    missing = [key for key in required if key not in spec]
    if missing:
        raise ConfigError(f"'{name}' is missing required key(s): {missing}")
    try:
        return spec, [int(spec[key]) for key in required]
    except (TypeError, ValueError) as e:
        raise ConfigError(f"'{name}' has a non-integer value: {e}") from e


# --- Subcommands ---
def cmd_sample_tree(experiment: ExperimentConfig, args: argparse.Namespace) -> List[Any]:
    """Samples trees and compares mean generation sizes with the product of stage means."""
    family = _family(experiment)
    depth = int(experiment.tree.get('depth', 5))
    count = int(experiment.tree.get('count', experiment.samples))
    z = resolve_z(experiment)
    trees = [sample_tree(family, experiment.t0, depth, seeding.derive_seed(experiment.seed, "tree", i))
             for i in range(count)]
    if experiment.tree.get('dump', True):
        report_service.write_text(trees_to_text(trees), 'trees.txt', args.out)

    sizes = np.array([generation_sizes(tree) for tree in trees], dtype=float)
    results: List[Any] = []
    expected = 1.0
    for k in range(depth + 1):
        mean, sd = float(sizes[:, k].mean()), float(sizes[:, k].std(ddof=1)) if count > 1 else 0.0
        tolerance = max(1e-9, z * sd / np.sqrt(count))
        results.append(CheckResult(f"generation-{k}", abs(mean - expected) <= tolerance, {
            'depth': k, 'mean_size': mean, 'expected_size': expected, 'stddev': sd, 'tolerance': tolerance,
        }))
        expected *= law_moments(cardinality_law(family.at(experiment.t0 + k))).mean
    return results


def _write_traces(family, strategy, goal, horizon: int, experiment: ExperimentConfig,
                  args: argparse.Namespace) -> None:
    """Replays the first `output.traces` episodes of an estimate as JSON lines."""
    count = min(int(experiment.output.get('traces', 0)), experiment.samples)
    if count <= 0:
        return
    lines = []
    for i in range(count):
        episode = run_episode(family, strategy, goal, horizon, seeding.derive_seed(experiment.seed, "episode", i),
                              t0=experiment.t0)
        lines.append(trace_lines(episode, experiment.t0))
    report_service.write_text("".join(lines), f"traces-{strategy.name}.jsonl", args.out)


def cmd_estimate(experiment: ExperimentConfig, args: argparse.Namespace) -> List[Any]:
    if not experiment.strategies:
        raise ConfigError("'estimate' needs at least one strategy.")
    family, goal = _family(experiment), _goal(experiment)
    roster = [strategy_from_config(spec) for spec in experiment.strategies]
    horizons = _horizons(experiment, [8])
    z = resolve_z(experiment)
    results: List[Any] = []
    for strategy in roster:
        for horizon in horizons:
            results.append(estimate_strategy_success(
                family, strategy, goal, horizon, experiment.samples, experiment.seed,
                window=experiment.window, z=z, workers=args.workers, t0=experiment.t0))
        _write_traces(family, strategy, goal, max(horizons), experiment, args)
        if len(horizons) > 1:
            results.append(horizon_ladder(family, strategy, goal, horizons, experiment.samples, experiment.seed,
                                          window=experiment.window, z=z, workers=args.workers))
    return results


def cmd_omniscient(experiment: ExperimentConfig, args: argparse.Namespace) -> List[Any]:
    family, goal = _family(experiment), _goal(experiment)
    z = resolve_z(experiment)
    options = experiment.omniscient
    results: List[Any] = []
    for horizon in _horizons(experiment, [8]):
        results.append(estimate_omniscient(
            family, goal, horizon, experiment.samples, experiment.seed, window=experiment.window, z=z,
            workers=args.workers, t0=experiment.t0,
            node_budget=int(options.get("node_budget", config.get("estimators.node_budget", DEFAULT_NODE_BUDGET))),
            skip_rate_limit=float(experiment.tolerance("skip_rate_limit",
                                                       config.get("tolerances.skip_rate_limit", 0.01)))))
    if 'shift' in options:
        spec, (t_max, end) = _option_block(options, 'shift', 't_max', 'end')
        shift_goal = goal_from_config(spec['goal']) if 'goal' in spec else goal
        sequence = shift_value_sequence(family, shift_goal, t_max, end,
                                        int(spec.get('samples', experiment.samples)), experiment.seed,
                                        window=experiment.window, z=z, workers=args.workers)
        results.append(CheckResult("shift-values", sequence.passed, sequence.to_dict()))
    if 'power' in options:
        spec, (t, end) = _option_block(options, 'power', 't', 'end')
        results.append(conditional_power_identity_check(
            family, goal, t, end, int(spec.get('samples', experiment.samples)),
            experiment.seed, window=experiment.window, z=z, workers=args.workers))
    if options.get('ordering') and experiment.strategies:
        roster = [strategy_from_config(spec) for spec in experiment.strategies]
        results.append(value_ordering(family, goal, roster, _horizons(experiment, [8])[-1], experiment.samples,
                                      experiment.seed, window=experiment.window, z=z, workers=args.workers))
    if 'complementarity' in options:
        spec, _ = _option_block(options, 'complementarity')
        results.append(complementarity_check(
            family, strategy_from_config(spec.get('strategy', 'smallest-action')), goal,
            int(spec.get('horizon', 6)), experiment.samples, experiment.seed,
            window=experiment.window, z=z, workers=args.workers))
    return results


def cmd_mdp(experiment: ExperimentConfig, args: argparse.Namespace) -> List[Any]:
    family = _family(experiment)
    options = experiment.mdp
    m, t = int(options.get('m', 1)), int(options.get('t', 0))
    horizon = int(options.get('horizon', 3))
    z = resolve_z(experiment)
    roster = [strategy_from_config(spec) for spec in experiment.strategies]
    strategy = roster[0] if roster else one_step_maximizing_strategy()
    blind = next((s for s in roster if s.foresight == 0), smallest_action_strategy())
    predicate = state_predicate_from_config(options.get('predicate', 'root-nonzero'))
    occupancy = int(experiment.tolerance('min_occupancy', config.get('tolerances.min_occupancy', 100)))
    n, seed = experiment.samples, experiment.seed

    def goal():
        return _goal(experiment)

    runners: Dict[str, Callable[[], CheckResult]] = {
        'step1': lambda: check_step1(family, m, t, predicate, blind, n, seed, z=z,
                                     min_occupancy=occupancy, workers=args.workers),
        'step4': lambda: check_step4(family, m, t, predicate, strategy, n, seed, z=z,
                                     min_occupancy=occupancy, workers=args.workers),
        'step5': lambda: check_step5_bound(family, goal(), m, t, horizon, eps=float(options.get('eps', 0.5)),
                                           window_start=experiment.window),
        'step6': lambda: check_step6_dominance(family, m, dominating_law(family, int(options.get('t_max', 64))),
                                               strategy, horizon, n, seed, t=t, workers=args.workers),
        'supermartingale': lambda: check_value_supermartingale(family, goal(), m, strategy, horizon, n, seed, z=z,
                                                               t0=t, window_start=experiment.window),
        'size': lambda: check_size_matches_actions(family, horizon, n, seed, t0=t),
    }
    checks = options.get('checks', ['step1', 'step4', 'step6', 'size'])
    unknown = set(checks) - set(runners)
    if unknown:
        raise ConfigError(f"Unknown mdp checks: {sorted(unknown)}. Known: {sorted(runners)}")
    return [runners[name]() for name in checks]


def _mbp_law(experiment: ExperimentConfig) -> DiscreteLaw:
    spec = experiment.mbp.get('q')
    if spec is None:
        return dominating_law(_family(experiment), int(experiment.mbp.get('t_max', 64)))
    if isinstance(spec, dict):
        try:
            return offspring_from_pmf({int(k): float(v) for k, v in spec.items()}).at(0)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"'mbp.q' must map integers to probabilities: {e}") from e
    raise ConfigError(f"'mbp.q' must be a pmf mapping, got {spec!r}.")


def cmd_mbp(experiment: ExperimentConfig, args: argparse.Namespace) -> List[Any]:
    kernel = MbpKernel(_mbp_law(experiment))
    alpha = float(experiment.tolerance('alpha', config.get('tolerances.alpha', 0.01)))
    ys = [int(y) for y in experiment.mbp.get('ys', [1, 2, 5, 20])]
    results: List[Any] = [
        mbp_kernel_check(kernel, y, experiment.samples, seeding.derive_seed(experiment.seed, "mbp"), alpha)
        for y in ys
    ]
    probe = experiment.mbp.get('probe')
    if probe:
        results.append(mbp_recurrence_probe(kernel, int(probe.get('T', 200)), int(probe.get('trials', 200)),
                                            seeding.derive_seed(experiment.seed, "mbp-probe")))
    return results


def cmd_bpve(experiment: ExperimentConfig, args: argparse.Namespace) -> List[Any]:
    """Survival against the exact extinction iteration, Fearn's series and a growth probe."""
    family = _family(experiment)
    off = accepted_offspring(family, _goal(experiment)) if experiment.goal is not None \
        else offspring_from_cardinality(family)
    T = int(experiment.bpve.get('T', 12))
    z = resolve_z(experiment)
    t0 = experiment.t0
    rows = simulate_bpve_batch(off, t0, T, experiment.samples, experiment.seed)
    extinct = extinction_iteration(off, t0, T)
    survival = Estimate.binomial(int((rows[:, T] > 0).sum()), experiment.samples, z, experiment.seed,
                                 f"{off.name}|survival|T={T}")
    results: List[Any] = [
        CheckResult("survival", survival.agrees_with(1.0 - extinct, 1e-9), {
            'exact': 1.0 - extinct, 'estimate': survival,
            'extinction_profile': extinction_profile(off, t0, T),
        }),
    ]
    try:
        fearn = fearn_criterion(off, int(experiment.bpve.get('fearn_terms', 40)), t0)
        results.append(CheckResult("fearn", True, fearn.to_dict(), label=fearn.label))
    except DegenerateMeanError as e:
        results.append(CheckResult("fearn", True, {'note': str(e)}, label="not applicable"))
    trials = int(experiment.bpve.get('growth_trials', min(experiment.samples, 2000)))
    results.append(normalized_growth_probe(off, T, trials, seeding.derive_seed(experiment.seed, "growth"), t0=t0))
    return results


def cmd_check(experiment: ExperimentConfig, args: argparse.Namespace) -> List[Any]:
    family, goal = _family(experiment), _goal(experiment)
    which = experiment.check.get('which', ['lamperti'])
    which = [which] if isinstance(which, str) else list(which)
    expect = experiment.check.get('expect', {})
    known = {'lamperti', 'fearn', 'dominance', 'shift-invariance', 'time-invariance'}
    unknown = set(which) - known
    if unknown:
        raise ConfigError(f"Unknown checks: {sorted(unknown)}. Known: {sorted(known)}")
    t_max = int(experiment.check.get('t_max', 64))
    return [condition_check(family, goal, name, t_max, expect.get(name)) for name in which]


def _battery_settings(experiment: ExperimentConfig, args: argparse.Namespace) -> BatterySettings:
    return BatterySettings(
        seed=experiment.seed,
        n=int(config.get('estimators.battery_samples', 100_000)),
        n_search=int(config.get('estimators.battery_search_samples', 20_000)),
        z=resolve_z(experiment),
        workers=args.workers,
    )


def cmd_example(experiment: ExperimentConfig, args: argparse.Namespace) -> List[Any]:
    if args.name not in BATTERIES:
        raise ConfigError(f"Unknown example '{args.name}'. Known: {sorted(BATTERIES)}")
    return BATTERIES[args.name](_battery_settings(experiment, args))


def cmd_table2(experiment: ExperimentConfig, args: argparse.Namespace) -> List[Any]:
    table = replicate_table2(_battery_settings(experiment, args))
    return [CheckResult("summary-table", table['passed'], table, inconclusive=table['inconclusive'])]


COMMANDS: Dict[str, Callable[[ExperimentConfig, argparse.Namespace], List[Any]]] = {
    'sample-tree': cmd_sample_tree,
    'estimate': cmd_estimate,
    'omniscient': cmd_omniscient,
    'mdp': cmd_mdp,
    'mbp': cmd_mbp,
    'bpve': cmd_bpve,
    'check': cmd_check,
    'example': cmd_example,
    'table2': cmd_table2,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Simulate control problems with random action sets.")
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name in COMMANDS:
        sub = subparsers.add_parser(name)
        if name == 'example':
            sub.add_argument('name', choices=sorted(BATTERIES), help="Which worked example to replicate.")
        sub.add_argument('--config', type=Path, default=None, help="Experiment YAML document.")
        sub.add_argument('--seed', type=int, default=None, help="Overrides the experiment seed.")
        sub.add_argument('--out', type=Path, default=None, help="Report directory.")
        sub.add_argument('--workers', type=int, default=None, help="Worker threads; never changes a report.")
        sub.add_argument('--format', choices=['json', 'csv'], default=None, help="Report format.")
    return parser


def exit_code(report: Dict[str, Any]) -> int:
    if not report['passed']:
        return EXIT_FAILED
    if report['inconclusive']:
        return EXIT_BUDGET
    return EXIT_OK


def run(argv: Optional[List[str]] = None) -> int:
    """Parses arguments, runs one subcommand and returns the exit code."""
    args = build_parser().parse_args(argv)
    args.workers = args.workers if args.workers is not None else config.workers
    fmt = args.format or config.get('reports.format', 'json')
    try:
        experiment = load_experiment(args.command, args)
        out_dir = args.out or (Path(experiment.output['directory']) if 'directory' in experiment.output else None)
        args.out = out_dir
        logger.info(f"Running '{args.command}' with seed {experiment.seed} on {args.workers} worker(s).")
        results = COMMANDS[args.command](experiment, args)
        extra = {'example': args.name} if args.command == 'example' else None
        report = report_service.build(args.command, experiment, results, args.workers, extra)
        name = f"{args.command}-{args.name}" if args.command == 'example' else args.command
        report_service.write(report, name, fmt, out_dir)
        sys.stdout.write(report_service.render(report, fmt))
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except BudgetExceededError as e:
        logger.error(f"Resource budget exceeded: {e}")
        return EXIT_BUDGET
    code = exit_code(report)
    logger.info(f"'{args.command}' finished: passed={report['passed']}, "
                f"inconclusive={report['inconclusive']}, exit code {code}.")
    return code


def main():
    """Main entry point for the command-line interface."""
    logger.info("=== Random Action Set Toolkit Starting ===")
    try:
        code = run()
    except Exception as e:
        logger.critical(f"FATAL: An unhandled error occurred: {e}", exc_info=True)
        sys.exit(1)
    sys.exit(code)


if __name__ == "__main__":
    main()
