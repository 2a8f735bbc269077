import argparse
import logging
import sys
from dotenv import load_dotenv

from experiments.config import EXIT_USAGE


def _add_generator_flags(parser):
    parser.add_argument(
        "--kind", default=None,
        help="Instance family: harmonic, exp-trap, benchmark-gap, ski-rental, "
             "ski-rental-mixture, random (or mssc for gen)",
    )
    parser.add_argument("--n", type=int, default=None, help="Size parameter (n or N)")
    parser.add_argument("--horizon", type=int, default=None, help="Horizon for benchmark-gap / ski rental")
    parser.add_argument("--B", type=str, default=None, help="Ski rental buy price")
    parser.add_argument("--T", type=int, default=None, help="Ski rental season end")
    parser.add_argument(
        "--t-weights", type=str, default=None,
        help='Season end distribution for ski-rental-mixture, e.g. "1:2,4:1"',
    )
    parser.add_argument("--depth", type=int, default=None, help="Tree depth (random kinds)")
    parser.add_argument("--branching", type=int, default=None, help="Max children per node (random)")
    parser.add_argument("--scale", type=int, default=None, help="Max root value (random)")
    parser.add_argument(
        "--nonincreasing", action="store_true",
        help="Random trees with nonincreasing paths",
    )
    parser.add_argument("--seed", type=int, default=0, help="Seed for random kinds (default: 0)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stopwise",
        description="Stopping policies and MSSC learners: generate instances, evaluate, and "
                    "stress-test competitive ratios",
    )
    parser.add_argument(
        "--verbose", "-v", action="store_true",
        help="Enable debug logging",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="Generate an instance file")
    _add_generator_flags(gen)
    gen.add_argument("--boxes", type=int, default=4, help="MSSC: number of boxes (default: 4)")
    gen.add_argument("--scenarios", type=int, default=5, help="MSSC: number of scenarios (default: 5)")
    gen.add_argument("--max-cost", type=int, default=1, help="MSSC: max signal price (default: 1)")
    gen.add_argument("--buying", action="store_true", help="MSSC: buying mode")
    gen.add_argument("--uniform", action="store_true", help="MSSC: uniform prior")
    gen.add_argument("-o", "--output", default=None, help="Output file (default: stdout)")

    ev = sub.add_parser("eval", help="Evaluate stopping policies on instances")
    ev.add_argument("--in", dest="inputs", nargs="+", default=None, help="Instance files")
    _add_generator_flags(ev)
    ev.add_argument("--count", type=int, default=1, help="Number of seeded random instances (default: 1)")
    ev.add_argument("--policies", default="det,rand,coin", help="Comma-separated policies (default: det,rand,coin)")
    ev.add_argument("--mc", action="store_true", help="Add Monte-Carlo estimates")
    ev.add_argument("--trials", type=int, default=None, help="Monte-Carlo trials (overrides STOPWISE_MC_TRIALS)")
    ev.add_argument(
        "--assert", dest="asserts", action="append", default=None,
        help='Ratio assertion, repeatable, e.g. "det<=2" or "ski>=2.9"',
    )
    ev.add_argument("--alpha", default=None, help="Robustness factor; evaluates perturbed trees")
    ev.add_argument("--perturb-rule", choices=("max", "random"), default="max", help="Perturbation rule")
    ev.add_argument("--perturb-scope", choices=("all", "leaves"), default="all", help="Nodes to perturb")
    ev.add_argument("--workers", type=int, default=1, help="Worker processes (default: 1)")
    ev.add_argument("--output-dir", default=None, help="Report directory (overrides STOPWISE_OUTPUT_DIR)")
    ev.add_argument("--label", default="eval", help="Experiment label and report file stem")
    ev.add_argument("--track", action="store_true", help="Track runs in MongoDB")
    ev.add_argument("--resume", action="store_true", help="Skip (instance, policy) items already completed")

    ms = sub.add_parser("mssc", help="Run a greedy MSSC learner on an instance")
    ms.add_argument("--in", dest="input", required=True, help="MSSC instance file")
    ms.add_argument("--algo", choices=("greedy", "greedy-buy"), default="greedy", help="Learner")
    ms.add_argument("--opt", action="store_true", help="Also compute the exact optimum")
    ms.add_argument("--assert-ratio", default=None, help="Fail unless cost/OPT <= this value")

    adv = sub.add_parser("adversary", help="Build an adversarial feedback instance")
    adv.add_argument("--mode", choices=("td", "buy"), default="td", help="Feedback model")
    adv.add_argument("--learner", default="greedy", help="Built-in learner to attack")
    adv.add_argument("--n", type=int, required=True, help="Number of scenarios")
    adv.add_argument("-o", "--output", default=None, help="Write the instance and report here")
    adv.add_argument("--assert-ratio", default=None, help="Fail unless the ratio is >= this value")

    val = sub.add_parser("validate", help="Validate an instance file")
    val.add_argument("--in", dest="input", required=True, help="Instance file")
    return parser


def main(argv=None):
    load_dotenv()

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    # Configure logging
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )

    from experiments import commands

    handler = {
        "gen": commands.cmd_gen,
        "eval": commands.cmd_eval,
        "mssc": commands.cmd_mssc,
        "adversary": commands.cmd_adversary,
        "validate": commands.cmd_validate,
    }[args.command]
    exit_code, summary = handler(args)

    # Print summary
    if summary is not None:
        print("\n" + "=" * 50)
        print(f"{args.command.upper()} SUMMARY")
        print("=" * 50)
        for key, value in summary.items():
            print(f"  {key}: {value}")
        print("=" * 50)
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
