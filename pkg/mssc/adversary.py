"""
Adversarial feedback against deterministic learners.

Both constructions use n singleton scenarios (box i covers only scenario i) under a
uniform prior and grow the feedback tree while simulating the learner along its
rightmost path, so every signal tells the learner only which scenarios it has not
covered yet.
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from model.tree import KIND_FEEDBACK, TreeBuilder
from mssc.instance import MsscInstance, flat_feedback, scenario_mask, singleton_scenarios, uniform_prior
from mssc.learners import (
    BUY,
    BuyUntilRevealedLearner,
    LearnerView,
    NoFeedbackLearner,
    NodeAssignmentLearner,
    check_action,
    make_learner,
    run_buying,
    run_time_dependent,
)
from mssc.oracles import StateSpaceTooLarge, opt_buying

logger = logging.getLogger(__name__)

MODE_TIME_DEPENDENT = "td"
MODE_BUYING = "buy"

# Built-in learners each construction accepts
ADVERSARY_LEARNERS = {
    MODE_TIME_DEPENDENT: ("greedy", "no-feedback"),
    MODE_BUYING: ("greedy-buy", "no-feedback"),
}


@dataclass(frozen=True)
class AdversarialInstance:
    instance: MsscInstance
    sequence: tuple  # the learner's queries along the rightmost path
    blocks: tuple = ()  # buying: queries made between consecutive purchases
    counters: tuple = ()  # learners the construction is known to lose against


def _problem(n, buying):
    """Instance without feedback, used for the learner's view while the tree grows."""
    return MsscInstance(n, singleton_scenarios(n), uniform_prior(n), flat_feedback(n), buying)


def adversarial_feedback_td(learner, n):
    """
    Binary feedback tree on which the learner's query at v_i always misses.

    v_1 holds every scenario. With A_i the learner's query at v_i, the left child of
    v_i is {s_{A_i}} and the right child v_{i+1} is the rest. The counter-learner
    queries A_{n+1−i} at v_i and the revealed box at every left child.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    problem = _problem(n, buying=False)
    builder = TreeBuilder(KIND_FEEDBACK)
    remaining = list(range(n))
    node = builder.add(0, scenarios=remaining)
    spine = [node]
    queried = []
    revealed = {}
    while True:
        view = LearnerView(
            instance=problem,
            node_id=node,
            node_mask=scenario_mask(remaining),
            node_cost=1,
            can_buy=False,
            signals=tuple(spine),
            queried=tuple(queried),
            queries_since_purchase=len(queried),
        )
        action = learner.act(view)
        check_action(learner, problem, None, action, queried)
        if action == BUY:
            raise ValueError(f"{learner.name} tried to buy under time-dependent feedback")
        queried.append(action)
        if len(remaining) == 1:
            break
        total = len(remaining)
        left = builder.add(0, parent=node, prob=Fraction(1, total), scenarios=[action])
        revealed[left] = action
        remaining = [s for s in remaining if s != action]
        node = builder.add(0, parent=node, prob=Fraction(len(remaining), total), scenarios=remaining)
        spine.append(node)

    sequence = tuple(queried)
    assignment = {v: sequence[n - 1 - i] for i, v in enumerate(spine)}
    assignment.update(revealed)
    instance = MsscInstance(n, problem.scenarios, problem.prior, builder.build())
    logger.debug(f"adversarial_feedback_td({learner.name}, n={n}): sequence {sequence}")
    return AdversarialInstance(instance, sequence, counters=(NodeAssignmentLearner(assignment),))


def adversarial_feedback_buying(learner, n, *, max_purchases=None):
    """
    Unit-cost feedback tree that only ever tells the learner what is still uncovered.

    The boxes queried at v_i between two purchases form block B^i. When the learner
    buys, the scenarios of B^i are split off as singleton children and the right
    child v_{i+1} keeps the rest; the last node gets singleton children for its block.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    max_purchases = 2 * n + 1 if max_purchases is None else max_purchases
    problem = _problem(n, buying=True)
    builder = TreeBuilder(KIND_FEEDBACK)
    remaining = list(range(n))
    node = builder.add(0, scenarios=remaining)
    spine = [node]
    queried = []
    block = []
    blocks = []

    def split_block(parent, members):
        for s in block:
            builder.add(0, parent=parent, prob=Fraction(1, len(members)), scenarios=[s])

    while True:
        if all(s in block for s in remaining):
            split_block(node, remaining)
            blocks.append(len(block))
            break
        view = LearnerView(
            instance=problem,
            node_id=node,
            node_mask=scenario_mask(remaining),
            node_cost=1,
            can_buy=True,
            signals=tuple(spine),
            queried=tuple(queried),
            queries_since_purchase=len(block),
        )
        action = learner.act(view)
        check_action(learner, problem, None, action, queried)
        if action != BUY:
            block.append(action)
            queried.append(action)
            continue

        if len(blocks) >= max_purchases:
            raise RuntimeError(
                f"{learner.name} bought {len(blocks)} signals without covering every scenario")
        split_block(node, remaining)
        rest = [s for s in remaining if s not in block]
        node = builder.add(0, parent=node, prob=Fraction(len(rest), len(remaining)), scenarios=rest)
        spine.append(node)
        blocks.append(len(block))
        block = []
        remaining = rest

    instance = MsscInstance(n, problem.scenarios, problem.prior, builder.build(), buying=True)
    logger.debug(f"adversarial_feedback_buying({learner.name}, n={n}): blocks {blocks}")
    return AdversarialInstance(
        instance, tuple(queried), tuple(blocks),
        counters=(NoFeedbackLearner(), BuyUntilRevealedLearner()),
    )


def closed_form_buying_cost(blocks, n):
    """
    Closed-form cost of a learner on its own buying construction.

    (1/n)(Σ_{i=1}^n i + Σ_i n_i·i − n) with n_i the size of the i-th block: the cover
    times sum to n(n+1)/2 and a scenario of block i paid for i − 1 signals.
    """
    total = sum(range(1, n + 1)) + sum(size * i for i, size in enumerate(blocks, start=1)) - n
    return Fraction(total, n)


def miss_ratio(learner_cost, counter_cost):
    """Ratio of expected misses (cover time − 1) on both sides; 0/0 counts as 1."""
    learner_misses = learner_cost - 1
    counter_misses = counter_cost - 1
    if counter_misses == 0:
        return 1.0 if learner_misses == 0 else float("inf")
    return float(learner_misses / counter_misses)


@dataclass
class AdversaryReport:
    mode: str
    n: int
    learner: str
    learner_cost: Fraction
    counter: str
    counter_cost: Fraction
    ratio: float
    sequence: tuple
    ratio_cover_time: Optional[float] = None
    blocks: tuple = ()
    closed_form_cost: Optional[Fraction] = None
    opt: Optional[Fraction] = None
    counter_costs: dict = field(default_factory=dict)
    instance: Optional[MsscInstance] = field(default=None, repr=False)

    def to_record(self):
        record = {
            "mode": self.mode,
            "n": self.n,
            "learner": self.learner,
            "learner_cost": str(self.learner_cost),
            "counter": self.counter,
            "counter_cost": str(self.counter_cost),
            "counter_costs": {name: str(cost) for name, cost in self.counter_costs.items()},
            "ratio": self.ratio,
            "sequence": list(self.sequence),
        }
        if self.ratio_cover_time is not None:
            record["ratio_cover_time"] = self.ratio_cover_time
        if self.mode == MODE_BUYING:
            record["blocks"] = list(self.blocks)
            record["closed_form_cost"] = str(self.closed_form_cost)
        if self.opt is not None:
            record["opt"] = str(self.opt)
        return record


def run_adversary(mode, learner_name, n):
    """Build the construction against a built-in learner and cost both sides."""
    if mode not in ADVERSARY_LEARNERS:
        raise ValueError(f"Unknown adversary mode {mode!r}; expected one of {sorted(ADVERSARY_LEARNERS)}")
    if learner_name not in ADVERSARY_LEARNERS[mode]:
        raise ValueError(
            f"Learner {learner_name!r} is not supported in mode {mode!r}; "
            f"expected one of {ADVERSARY_LEARNERS[mode]}")
    learner = make_learner(learner_name)

    if mode == MODE_TIME_DEPENDENT:
        built = adversarial_feedback_td(learner, n)
        learner_cost = run_time_dependent(learner, built.instance).expected_cost
        counter_costs = {
            c.name: run_time_dependent(c, built.instance).expected_cost for c in built.counters}
    else:
        built = adversarial_feedback_buying(learner, n)
        learner_cost = run_buying(learner, built.instance).expected_cost
        counter_costs = {
            c.name: run_buying(c, built.instance).expected_cost for c in built.counters}

    counter, counter_cost = min(counter_costs.items(), key=lambda item: item[1])
    report = AdversaryReport(
        mode=mode,
        n=n,
        learner=learner_name,
        learner_cost=learner_cost,
        counter=counter,
        counter_cost=counter_cost,
        counter_costs=counter_costs,
        sequence=built.sequence,
        instance=built.instance,
        ratio=0.0,
    )
    if mode == MODE_TIME_DEPENDENT:
        report.ratio = miss_ratio(learner_cost, counter_cost)
        report.ratio_cover_time = float(learner_cost / counter_cost)
    else:
        report.ratio = float(learner_cost / counter_cost)
        report.blocks = built.blocks
        report.closed_form_cost = closed_form_buying_cost(built.blocks, n)
        try:
            report.opt = opt_buying(built.instance)
        except StateSpaceTooLarge:
            logger.info(f"Skipping exact optimum for n={n}: state space too large")
    logger.info(
        f"Adversary {mode} vs {learner_name} (n={n}): learner {float(learner_cost):.4f}, "
        f"{counter} {float(counter_cost):.4f}, ratio {report.ratio:.4f}")
    return report
