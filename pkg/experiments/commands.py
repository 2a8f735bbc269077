"""
Subcommand implementations. Each command takes the parsed argparse namespace and
returns (exit_code, summary); summary is None when nothing should be printed.
"""
import json
import logging
import os
from fractions import Fraction

from evaluation.exact import as_decimal
from experiments.config import (
    EXIT_ASSERTION_FAILED,
    EXIT_OK,
    EXIT_USAGE,
    ASSERTION_TOLERANCE,
    ConfigError,
    ExperimentConfig,
    InstanceSource,
    RatioAssertion,
    mc_trials_from_env,
)
from experiments.runner import run_batch
from generators.mssc import random_mssc_instance
from generators.stopping import GeneratorSpec, canonical_kind
from model.serialization import TreeParseError, serialize, tree_from_document
from model.tree import KIND_SUPERMARTINGALE, validate_structure, validate_supermartingale
from mssc.adversary import run_adversary
from mssc.instance import instance_from_document, load_instance, save_instance, serialize_instance, validate_instance
from mssc.learners import GreedyLearner, buying_reduction, greedy_buying, greedy_time_dependent
from mssc.oracles import StateSpaceTooLarge, opt_buying, opt_time_dependent

logger = logging.getLogger(__name__)

MSSC_KIND = "mssc"
DEFAULT_BRANCHING = 3
DEFAULT_VALUE_SCALE = 100

# Proven competitive factors of the greedy learners
GREEDY_BOUNDS = {"greedy": 4, "greedy-buy": 8}

# Generator parameter name -> argparse attribute
_PARAM_FLAGS = {
    "harmonic": {"n": "n"},
    "exp_trap": {"n": "n"},
    "benchmark_gap": {"N": "n", "horizon": "horizon"},
    "ski_rental": {"B": "B", "T": "T", "horizon": "horizon"},
    "ski_rental_mixture": {"B": "B", "t_weights": "t_weights", "horizon": "horizon"},
    "random_supermartingale": {
        "depth": "depth", "max_branching": "branching", "value_scale": "scale",
        "seed": "seed", "nonincreasing": "nonincreasing",
    },
}


def parse_t_weights(text):
    """"1:2,4:1" -> {1: "2", 4: "1"}"""
    weights = {}
    for part in text.split(","):
        t, _, w = part.partition(":")
        if not w:
            raise ValueError(f"Invalid season weight {part!r}; expected T:weight")
        weights[int(t)] = str(Fraction(w.strip()))
    return weights


def generator_spec(args, seed_offset=0):
    kind = canonical_kind(args.kind)
    if kind not in _PARAM_FLAGS:
        raise ValueError(f"Unknown generator kind {args.kind!r}")
    params = {}
    for param, attr in _PARAM_FLAGS[kind].items():
        value = getattr(args, attr, None)
        if value is None or value is False:
            continue
        if attr == "t_weights":
            value = parse_t_weights(value)
        params[param] = value
    if kind == "benchmark_gap" and "horizon" not in params and "N" in params:
        params["horizon"] = params["N"]
    if kind == "random_supermartingale":
        params.setdefault("max_branching", DEFAULT_BRANCHING)
        params.setdefault("value_scale", DEFAULT_VALUE_SCALE)
        params["seed"] = (args.seed or 0) + seed_offset
    return GeneratorSpec(kind, params)


def _mssc_from_args(args):
    return random_mssc_instance(
        args.boxes, args.scenarios, args.depth if args.depth is not None else 2,
        args.seed or 0,
        max_cost=args.max_cost,
        buying=True if args.buying else None,
        uniform=args.uniform,
    )


def cmd_gen(args):
    if args.kind is None:
        logger.error("gen needs --kind")
        return EXIT_USAGE, None
    try:
        if canonical_kind(args.kind) == MSSC_KIND:
            inst = _mssc_from_args(args)
            text = serialize_instance(inst)
            summary = {"kind": MSSC_KIND, "boxes": inst.n_boxes, "scenarios": inst.n_scenarios,
                       "feedback_nodes": len(inst.feedback)}
        else:
            spec = generator_spec(args)
            tree = spec.build()
            text = serialize(tree)
            summary = {"kind": spec.kind, "instance": spec.instance_id, "nodes": len(tree),
                       "horizon": tree.horizon}
    except ValueError as e:
        logger.error(f"Cannot generate instance: {e}")
        return EXIT_USAGE, None

    if args.output is None:
        print(text)
        return EXIT_OK, None
    with open(args.output, "w", encoding="utf-8") as f:
        f.write(text)
    logger.info(f"Instance written to {args.output}")
    summary["output"] = args.output
    return EXIT_OK, summary


def _eval_sources(args):
    if args.inputs:
        return [InstanceSource(path=p) for p in args.inputs]
    if args.kind is None:
        raise ConfigError("eval needs --in files or a generator --kind")
    if canonical_kind(args.kind) in ("random_supermartingale",):
        return [InstanceSource(generator=generator_spec(args, i)) for i in range(args.count)]
    if args.count != 1:
        logger.warning(f"--count {args.count} ignored: {args.kind} instances are deterministic")
    return [InstanceSource(generator=generator_spec(args))]


def batch_exit_code(summary):
    if summary["assertion_failures"]:
        return EXIT_ASSERTION_FAILED
    if summary["failed"]:
        return EXIT_USAGE
    return EXIT_OK


def cmd_eval(args):
    try:
        trials = 0
        if args.mc:
            trials = args.trials if args.trials is not None else mc_trials_from_env()
        config = ExperimentConfig(
            sources=_eval_sources(args),
            policies=[p.strip() for p in args.policies.split(",") if p.strip()],
            label=args.label,
            trials=trials,
            seed=args.seed or 0,
            assertions=[RatioAssertion.parse(a) for a in args.asserts or []],
            alpha=args.alpha,
            perturb_rule=args.perturb_rule,
            perturb_scope=args.perturb_scope,
            workers=args.workers,
            track=args.track,
            resume=args.resume,
        )
        if args.output_dir:
            config.output_dir = args.output_dir
        if config.alpha is not None and Fraction(config.alpha) < 1:
            raise ConfigError(f"--alpha must be >= 1, got {config.alpha}")
        config.validate()
    except ValueError as e:
        logger.error(f"Invalid eval configuration: {e}")
        return EXIT_USAGE, None

    summary = run_batch(config)
    return batch_exit_code(summary), summary


def cmd_mssc(args):
    try:
        inst = load_instance(args.input)
    except (OSError, ValueError) as e:
        logger.error(f"Cannot read MSSC instance {args.input}: {e}")
        return EXIT_USAGE, None
    problems = validate_instance(inst)
    if problems:
        for problem in problems:
            logger.error(f"{args.input}: {problem}")
        return EXIT_USAGE, None

    if args.algo == "greedy-buy":
        result = greedy_buying(inst)
    elif inst.buying:
        result = buying_reduction(GreedyLearner(), inst)
    else:
        result = greedy_time_dependent(inst)

    summary = {
        "instance": os.path.basename(args.input),
        "mode": "buying" if inst.buying or args.algo == "greedy-buy" else "time-dependent",
        "learner": result.learner,
        "expected_cover_time": str(result.expected_cover_time),
        "expected_spend": str(result.expected_spend),
        "expected_cost": str(result.expected_cost),
    }
    if not args.opt:
        return EXIT_OK, summary

    try:
        if summary["mode"] == "buying":
            opt = opt_buying(inst)
        else:
            opt = opt_time_dependent(inst)
    except StateSpaceTooLarge as e:
        logger.error(f"Cannot compute the optimum: {e}")
        return EXIT_USAGE, summary
    ratio = result.expected_cost / opt
    summary["opt"] = str(opt)
    summary["ratio"] = round(float(ratio), 6)
    summary["bound"] = GREEDY_BOUNDS[args.algo]

    if args.assert_ratio is not None:
        limit = Fraction(args.assert_ratio)
        summary["assertion"] = f"ratio<={args.assert_ratio}"
        if as_decimal(ratio) > as_decimal(limit) + ASSERTION_TOLERANCE:
            logger.warning(f"Ratio {float(ratio):.6f} exceeds {args.assert_ratio}")
            summary["assertion_failed"] = True
            return EXIT_ASSERTION_FAILED, summary
    return EXIT_OK, summary


def cmd_adversary(args):
    try:
        report = run_adversary(args.mode, args.learner, args.n)
    except ValueError as e:
        logger.error(f"Cannot build adversarial instance: {e}")
        return EXIT_USAGE, None

    record = report.to_record()
    if args.output:
        save_instance(report.instance, args.output)
        with open(f"{os.path.splitext(args.output)[0]}.report.json", "w", encoding="utf-8") as f:
            json.dump(record, f, indent=1)
        record["output"] = args.output

    summary = {k: v for k, v in record.items() if k not in ("sequence", "blocks")}
    if args.assert_ratio is not None:
        summary["assertion"] = f"ratio>={args.assert_ratio}"
        if report.ratio < float(args.assert_ratio) - float(ASSERTION_TOLERANCE):
            logger.warning(f"Adversarial ratio {report.ratio:.6f} is below {args.assert_ratio}")
            summary["assertion_failed"] = True
            return EXIT_ASSERTION_FAILED, summary
    return EXIT_OK, summary


def validate_document(doc):
    """Return (kind, problems) for a parsed instance document of either kind."""
    if isinstance(doc, dict) and "boxes" in doc:
        return MSSC_KIND, validate_instance(instance_from_document(doc))
    tree = tree_from_document(doc)
    if tree.kind == KIND_SUPERMARTINGALE:
        violations = validate_supermartingale(tree)
    else:
        violations = validate_structure(tree)
    return tree.kind, [f"node {v.node_id}: {v.kind} ({v.detail})" for v in violations]


def cmd_validate(args):
    try:
        with open(args.input, "r", encoding="utf-8") as f:
            doc = json.load(f)
        kind, problems = validate_document(doc)
    except (OSError, json.JSONDecodeError, TreeParseError) as e:
        logger.error(f"Cannot parse {args.input}: {e}")
        return EXIT_USAGE, None

    for problem in problems:
        print(f"{args.input}: {problem}")
    summary = {"instance": args.input, "kind": kind, "violations": len(problems)}
    return (EXIT_ASSERTION_FAILED if problems else EXIT_OK), summary
