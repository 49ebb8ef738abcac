# scripts/run_ttl_agent.py
"""
This script serves as the command-line entry point of the ttl_agent package.
It exposes the TTL tools (parse, translate, check, extract), map generation,
single episodes, the BCM / complex-instruction / sub-task evaluations, A2C
training and report rendering as subcommands.

Exit codes: 0 success, 1 usage error, 2 formula/trace/map/checkpoint format
error, 3 infeasible map generation. The TTL_SEED environment variable
overrides the master seed of every seeded command.
"""

import argparse
import logging
import sys
from pathlib import Path

from ttl_agent import agents, gridworld, harness, ltl_bridge, symbolic_module, ttl_core, utils
from ttl_agent.errors import (
    CheckpointFormatError,
    InfeasibleGenerationError,
    MapFormatError,
    TraceFormatError,
    TtlError,
    TtlSyntaxError,
)

logger = logging.getLogger("ttl_agent.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FORMAT = 2
EXIT_INFEASIBLE = 3
FORMAT_ERRORS = (TtlSyntaxError, TraceFormatError, MapFormatError, CheckpointFormatError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _bool(text):
    value = text.strip().lower()
    if value in ("true", "yes", "1"):
        return True
    if value in ("false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def _emit(text, out=None):
    """Writes to `out` when given, otherwise to stdout."""
    if out:
        utils.write_text_file(out, text)
        print(f"Wrote {out}")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


# --- Commands -----------------------------------------------------------------

def cmd_parse(args):
    formula = ttl_core.parse_ttl(args.formula)
    if args.expand:
        formula = ttl_core.expand_concurrent(formula)
    print(ttl_core.render_ttl(formula))


def cmd_translate(args):
    formula = ttl_core.expand_concurrent(ttl_core.parse_ttl(args.formula))
    alphabet = args.alphabet.split(",") if args.alphabet else gridworld.CATALOG_OBJECTS
    translate = ltl_bridge.translate_tau2 if args.tau2 else ltl_bridge.translate_tau1
    print(ltl_bridge.render_ltl(translate(formula, alphabet, literal=args.literal)))


def cmd_check(args):
    formula = ttl_core.expand_concurrent(ttl_core.parse_ttl(args.formula))
    trace = ttl_core.parse_trace(utils.read_text_file(args.trace))
    satisfied = ttl_core.ttl_satisfies(trace, formula)
    print("satisfied" if satisfied else "not satisfied")


def cmd_extract(args):
    formula = ttl_core.expand_concurrent(ttl_core.parse_ttl(args.formula))
    sys.stdout.write(symbolic_module.render_matrix(symbolic_module.extract(formula)))


def cmd_gen_maps(args):
    formula = ttl_core.parse_ttl(args.formula)
    catalog = gridworld.ObjectCatalog.preset(args.split)
    out_dir = Path(args.out)
    for index in range(args.count):
        seed = utils.derive_seed(args.master_seed, "gen-maps", index)
        grid_map = gridworld.generate_map(catalog, args.which, formula, args.objects, seed)
        path = out_dir / f"map_{index:03d}.txt"
        utils.write_text_file(path, gridworld.save_map(grid_map))
        if args.plot:
            from ttl_agent import visualization

            ax = visualization.plot_map(grid_map, title=f"seed {seed}")
            ax.figure.savefig(path.with_suffix(".png"), dpi=100)
            visualization.plt.close(ax.figure)
    print(f"Wrote {args.count} maps to {out_dir}")


def cmd_run(args):
    formula = ttl_core.parse_ttl(args.formula)
    if args.map:
        grid_map = gridworld.load_map(utils.read_text_file(args.map))
    else:
        catalog = gridworld.ObjectCatalog.preset(args.split)
        seed = utils.derive_seed(args.master_seed, "run")
        grid_map = gridworld.generate_map(catalog, "test", formula, args.objects, seed)
    policy = agents.build_policy(args.agent, checkpoint=args.checkpoint, master_seed=args.master_seed)
    config = symbolic_module.EpisodeConfig(step_cap=args.step_cap, consume_wrong=args.consume_wrong)
    result = symbolic_module.run_sm(formula, grid_map, policy, config,
                                    rng=utils.derive_seed(args.master_seed, "run-agent"))
    _emit(harness.episode_log_csv(result), args.log)
    print(f"success={result.success} steps={result.steps} reward={result.total_reward:.4f}")


def _experiment_config(args, kind):
    return harness.ExperimentConfig(
        kind=kind,
        split=args.split,
        agent=args.agent,
        n_maps=args.maps,
        step_cap=args.step_cap if args.step_cap is not None else harness.DEFAULT_STEP_CAPS[kind],
        offset=args.offset,
        master_seed=args.master_seed,
        runs=args.runs,
        n_objects=args.objects,
        checkpoint=args.checkpoint,
        consume_wrong=args.consume_wrong,
        workers=args.workers,
    )


def _emit_rows(rows, out):
    csv_text, table = harness.report(rows)
    if out:
        utils.write_text_file(out, csv_text)
        print(f"Wrote {out}")
    sys.stdout.write(table)


def cmd_eval_bcm(args):
    config = _experiment_config(args, "bcm")
    _emit_rows([harness.eval_bcm(config, args.mode, args.polarity, args.choice_slot)], args.out)


def cmd_eval_complex(args):
    _emit_rows(harness.eval_complex(_experiment_config(args, "complex")), args.out)


def cmd_eval_subtasks(args):
    _emit_rows(harness.eval_subtasks(_experiment_config(args, "subtask-eval")), args.out)


def cmd_train(args):
    config = _experiment_config(args, "train")
    curve, params = harness.run_training(config, args.steps, window=args.window)
    _emit(harness.curve_csv(curve, config.offset), args.curve)
    if args.save_checkpoint:
        agents.save_checkpoint(params, args.save_checkpoint)
        print(f"Wrote {args.save_checkpoint}")
    final = f"{curve[-1].mean_reward:.4f}" if curve else "n/a"
    print(f"steps={args.steps} points={len(curve)} final_mean_reward={final}")


def cmd_report(args):
    rows = []
    for path in args.csv:
        rows += harness.rows_from_csv(utils.read_text_file(path))
    _emit_rows(rows, args.out)


# --- Parser ----------------------------------------------------------------------

def _add_seed(p):
    p.add_argument("--seed", dest="master_seed", type=int, default=0,
                   help="Master seed (overridden by the TTL_SEED environment variable).")


def _add_experiment_options(p, offset, maps):
    _add_seed(p)
    p.add_argument("--agent", choices=harness.AGENT_NAMES, default="oracle", help="Policy to evaluate.")
    p.add_argument("--checkpoint", help="A2C checkpoint for --agent a2c.")
    p.add_argument("--split", choices=sorted(gridworld.SPLIT_PRESETS), default="small",
                   help="Object split preset (size of the training split).")
    p.add_argument("--maps", type=int, default=maps, help="Maps per independent run.")
    p.add_argument("--runs", type=int, default=3, help="Independent runs.")
    p.add_argument("--objects", type=int, default=gridworld.MAX_OBJECTS, help="Objects per generated map (2-8).")
    p.add_argument("--step-cap", type=int, default=None, help="Episode step cap.")
    p.add_argument("--offset", type=int, choices=harness.OFFSETS, default=offset, help="Reported reward offset.")
    p.add_argument("--consume-wrong", type=_bool, default=True,
                   help="Whether wrong interactions consume the object (true|false).")
    p.add_argument("--workers", type=int, default=1, help="Worker processes.")
    p.add_argument("--out", help="Write the result CSV here.")


def build_parser():
    parser = _Parser(prog="ttl_agent", description="Task Temporal Logic instruction-following toolkit.")
    parser.add_argument("--verbose", action="store_true", help="Enable debug logging.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="Parse a TTL formula and print it canonically.")
    p.add_argument("formula")
    p.add_argument("--expand", action="store_true", help="Expand the concurrent operator.")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("translate", help="Translate a TTL formula to LTLf.")
    p.add_argument("formula")
    p.add_argument("--tau2", action="store_true", help="Emit tau2 instead of tau1.")
    p.add_argument("--literal", action="store_true", help="Use the literal clause-by-clause translation.")
    p.add_argument("--alphabet", help="Comma-separated propositions (default: the object catalog).")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("check", help="Check a trace file against a formula.")
    p.add_argument("formula")
    p.add_argument("trace", help="Trace file: one instant per line, comma-separated labels or '-'.")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("extract", help="Print the task matrix of a formula.")
    p.add_argument("formula")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("gen-maps", help="Generate solvable maps for a formula.")
    p.add_argument("formula")
    p.add_argument("--out", required=True, help="Output directory.")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--objects", type=int, default=gridworld.MAX_OBJECTS)
    p.add_argument("--split", choices=sorted(gridworld.SPLIT_PRESETS), default="small")
    p.add_argument("--which", choices=("train", "test"), default="test", help="Object split to draw from.")
    p.add_argument("--plot", action="store_true", help="Also save a PNG of each map.")
    _add_seed(p)
    p.set_defaults(func=cmd_gen_maps)

    p = sub.add_parser("run", help="Run one episode and print its log.")
    p.add_argument("formula")
    p.add_argument("--map", help="Map file; generated from the seed when omitted.")
    p.add_argument("--agent", choices=harness.AGENT_NAMES, default="oracle")
    p.add_argument("--checkpoint")
    p.add_argument("--split", choices=sorted(gridworld.SPLIT_PRESETS), default="small")
    p.add_argument("--objects", type=int, default=gridworld.MAX_OBJECTS)
    p.add_argument("--step-cap", type=int, default=symbolic_module.COMPLEX_STEP_CAP)
    p.add_argument("--consume-wrong", type=_bool, default=True)
    p.add_argument("--log", help="Write the episode log CSV here instead of stdout.")
    _add_seed(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval-bcm", help="Evaluate on Binary Choice Maps.")
    p.add_argument("--mode", choices=harness.BCM_MODES, default="reliable")
    p.add_argument("--polarity", choices=harness.BCM_POLARITIES, default="positive")
    p.add_argument("--choice-slot", choices=harness.CHOICE_SLOTS, default="first")
    _add_experiment_options(p, offset=10, maps=500)
    p.set_defaults(func=cmd_eval_bcm)

    p = sub.add_parser("eval-complex", help="Evaluate on the five complex instructions.")
    _add_experiment_options(p, offset=30, maps=200)
    p.set_defaults(func=cmd_eval_complex)

    p = sub.add_parser("eval-subtasks", help="Evaluate on sampled atomic sub-tasks.")
    _add_experiment_options(p, offset=10, maps=300)
    p.set_defaults(func=cmd_eval_subtasks)

    p = sub.add_parser("train", help="Train the linear A2C agent.")
    p.add_argument("--steps", type=int, required=True, help="Environment steps.")
    p.add_argument("--window", type=int, default=100, help="Episodes per curve point.")
    p.add_argument("--curve", help="Write the learning curve CSV here.")
    p.add_argument("--save-checkpoint", help="Write the trained checkpoint here.")
    _add_experiment_options(p, offset=10, maps=1)
    p.set_defaults(agent="a2c")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("report", help="Render result CSVs as one table.")
    p.add_argument("csv", nargs="+")
    p.add_argument("--out", help="Write the combined CSV here.")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    """Runs the CLI and returns its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        print(f"ERROR: {err}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exit_:
        return exit_.code or EXIT_OK

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if hasattr(args, "master_seed"):
            args.master_seed = utils.resolve_master_seed(args.master_seed)
        logger.debug("Running %s", args.command)
        args.func(args)
    except FORMAT_ERRORS as err:
        print(f"ERROR: {err}", file=sys.stderr)
        return EXIT_FORMAT
    except InfeasibleGenerationError as err:
        print(f"ERROR: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (TtlError, ValueError) as err:
        print(f"ERROR: {err}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
