"""
Learners and per-scenario simulators for MSSC with feedback.

A learner is a deterministic callback: given a LearnerView it returns a box index
to query or BUY to purchase the next signal. Simulators walk every scenario
through the feedback tree and record a LearnerTrace.

Timing: the root is the constant signal f_0, so the first query is made at the
root. In time-dependent mode the next signal arrives after every query; at a
leaf no further information arrives and the learner stays there.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Optional

from model.transforms import normalize_costs
from mssc.instance import MsscInstance, mask_members

logger = logging.getLogger(__name__)

BUY = "buy"

ACTION_QUERY = "query"
ACTION_BUY = "buy"


class InvalidActionError(ValueError):
    """A learner emitted an action the simulator cannot execute."""

    def __init__(self, learner, scenario, action, reason):
        super().__init__(
            f"{learner}: invalid action {action!r} for scenario {scenario}: {reason}")
        self.learner = learner
        self.scenario = scenario
        self.action = action


@dataclass(frozen=True)
class LearnerView:
    """
    Everything a learner may see before its next action.

    The feedback tree itself is hidden: only the current node's id, scenario set and
    signal price are exposed. Scenario sets are bitmasks over scenario indices.
    """
    instance: MsscInstance
    node_id: int
    node_mask: int
    node_cost: int
    can_buy: bool
    signals: tuple  # node ids received so far, root first
    queried: tuple  # boxes queried so far; every outcome was 0
    queries_since_purchase: int

    @cached_property
    def covered_mask(self):
        """Scenarios ruled out by the zero outcomes observed so far."""
        mask = 0
        for b in self.queried:
            mask |= self.instance.box_masks[b]
        return mask

    @property
    def consistent_mask(self):
        return self.node_mask & ~self.covered_mask

    @property
    def consistent(self):
        """Scenarios consistent with the signals and with every zero outcome."""
        return tuple(mask_members(self.consistent_mask))

    def box_mass(self, box, mask=None):
        mask = self.consistent_mask if mask is None else mask
        return self.instance.mass(self.instance.box_masks[box] & mask)

    def greedy_box(self, mask=None):
        """Box of largest covered mass within the mask; ties to the lowest index."""
        mask = self.consistent_mask if mask is None else mask
        queried = set(self.queried)
        best, best_mass = None, Fraction(-1)
        for b in range(self.instance.n_boxes):
            if b in queried:
                continue
            m = self.box_mass(b, mask)
            if m > best_mass:
                best, best_mass = b, m
        return best


@dataclass(frozen=True)
class Step:
    action: str  # ACTION_QUERY | ACTION_BUY
    payload: int  # box queried, or feedback node reached
    outcome: Optional[int] = None  # box content for queries


@dataclass(frozen=True)
class LearnerTrace:
    scenario: int
    steps: tuple
    cover_time: int
    feedback_spend: int

    @property
    def total_cost(self):
        return self.cover_time + self.feedback_spend

    @property
    def queries(self):
        return tuple(step.payload for step in self.steps if step.action == ACTION_QUERY)


@dataclass(frozen=True)
class RunResult:
    learner: str
    traces: tuple
    expected_cover_time: Fraction
    expected_spend: Fraction

    @property
    def expected_cost(self):
        return self.expected_cover_time + self.expected_spend

    def cover_times(self):
        return {t.scenario: t.cover_time for t in self.traces}


class Learner:
    name = "learner"

    def act(self, view):
        raise NotImplementedError

    def __repr__(self):
        return f"{self.__class__.__name__}()"


class GreedyLearner(Learner):
    """Query the box covering the most consistent probability mass."""

    name = "greedy"

    def act(self, view):
        return view.greedy_box()


class GreedyBuyingLearner(Learner):
    """
    Query c greedy boxes at a node whose next signal costs c, then buy it.

    At a node without further signals keep querying greedily.
    """

    name = "greedy-buy"

    def act(self, view):
        if view.can_buy and view.queries_since_purchase >= view.node_cost:
            return BUY
        return view.greedy_box()


class ReductionLearner(Learner):
    """
    Turn a time-dependent learner into a buying learner.

    The wrapped learner takes c actions at a node whose next signal costs c, then
    the signal is bought. With the greedy learner inside this is GreedyBuyingLearner.
    """

    def __init__(self, inner):
        self.inner = inner
        self.name = f"reduction({inner.name})"

    def act(self, view):
        if view.can_buy and view.queries_since_purchase >= view.node_cost:
            return BUY
        action = self.inner.act(view)
        if action == BUY:
            raise InvalidActionError(self.inner.name, None, action, "time-dependent learners cannot buy")
        return action

    def __repr__(self):
        return f"ReductionLearner({self.inner!r})"


class NoFeedbackLearner(Learner):
    """Never buys and ignores signals: greedy on the prior conditioned on outcomes only."""

    name = "no-feedback"

    def act(self, view):
        return view.greedy_box(view.instance.all_mask & ~view.covered_mask)


class BuyUntilRevealedLearner(Learner):
    """Buy signals until one consistent scenario is left, then query greedily."""

    name = "buy-until-revealed"

    def act(self, view):
        if view.can_buy and len(view.consistent) > 1:
            return BUY
        return view.greedy_box()


class NodeAssignmentLearner(Learner):
    """Query a fixed box per feedback node; fall back to greedy where none applies."""

    name = "node-assignment"

    def __init__(self, assignment, fallback=None):
        self.assignment = dict(assignment)
        self.fallback = fallback or GreedyLearner()

    def act(self, view):
        box = self.assignment.get(view.node_id)
        if box is None or box in view.queried:
            return self.fallback.act(view)
        return box


LEARNERS = {
    "greedy": GreedyLearner,
    "greedy-buy": GreedyBuyingLearner,
    "no-feedback": NoFeedbackLearner,
    "buy-until-revealed": BuyUntilRevealedLearner,
}


def make_learner(name):
    if name not in LEARNERS:
        raise ValueError(f"Unknown learner {name!r}; expected one of {sorted(LEARNERS)}")
    return LEARNERS[name]()


def check_action(learner, inst, scenario, action, queried):
    if action == BUY:
        return
    if isinstance(action, bool) or not isinstance(action, int):
        raise InvalidActionError(learner.name, scenario, action, "action must be a box index or BUY")
    if not 0 <= action < inst.n_boxes:
        raise InvalidActionError(learner.name, scenario, action, f"box outside [0, {inst.n_boxes})")
    if action in queried:
        raise InvalidActionError(learner.name, scenario, action, "box already queried")


def _view(inst, node_id, signals, queried, since, buying):
    node = inst.feedback.node(node_id)
    return LearnerView(
        instance=inst,
        node_id=node_id,
        node_mask=inst.node_masks[node_id],
        node_cost=node.cost,
        can_buy=buying and not node.is_leaf,
        signals=tuple(signals),
        queried=tuple(queried),
        queries_since_purchase=since,
    )


def trace_scenario(learner, inst, scenario, *, buying):
    """
    Run one scenario to coverage; raises InvalidActionError on a bad action.

    The first query is made at the root, before any informative signal. On a tree
    that reveals the scenario at depth 1 greedy therefore pays 2 − 1/n, not 1.
    """
    node_id = inst.feedback.root
    signals = [node_id]
    queried = []
    steps = []
    spend = 0
    since = 0
    while True:
        action = learner.act(_view(inst, node_id, signals, queried, since, buying))
        check_action(learner, inst, scenario, action, queried)
        if action == BUY:
            node = inst.feedback.node(node_id)
            if not buying or node.is_leaf:
                raise InvalidActionError(learner.name, scenario, action, "no signal is for sale here")
            spend += node.cost
            node_id = inst.next_node(node_id, scenario)
            signals.append(node_id)
            steps.append(Step(ACTION_BUY, node_id))
            since = 0
            continue

        outcome = inst.scenarios[scenario][action]
        steps.append(Step(ACTION_QUERY, action, outcome))
        queried.append(action)
        since += 1
        if outcome == 1:
            return LearnerTrace(scenario, tuple(steps), len(queried), spend)
        if not buying:
            node_id = inst.next_node(node_id, scenario)
            signals.append(node_id)


def _run(learner, inst, buying):
    traces = tuple(
        trace_scenario(learner, inst, s, buying=buying) for s in range(inst.n_scenarios))
    cover = sum((inst.prior[t.scenario] * t.cover_time for t in traces), Fraction(0))
    spend = sum((inst.prior[t.scenario] * t.feedback_spend for t in traces), Fraction(0))
    logger.debug(f"{learner.name}: E[cover]={cover}, E[spend]={spend} over {len(traces)} scenarios")
    return RunResult(learner.name, traces, cover, spend)


def run_time_dependent(learner, inst):
    """Simulate a learner with one free signal per round. Requires unit signal costs."""
    if not inst.feedback.has_unit_costs:
        raise ValueError("time-dependent feedback needs unit costs; use time_dependent_relaxation")
    return _run(learner, inst, buying=False)


def run_buying(learner, inst):
    """Simulate a learner that decides when to pay for the next signal."""
    return _run(learner, inst, buying=True)


def greedy_time_dependent(inst):
    return run_time_dependent(GreedyLearner(), inst)


def greedy_buying(inst):
    return run_buying(GreedyBuyingLearner(), inst)


def buying_reduction(learner, inst):
    """Run a time-dependent learner on a buying instance through ReductionLearner."""
    return run_buying(ReductionLearner(learner), inst)


def time_dependent_relaxation(inst):
    """
    Free-signal instance in which each signal of cost c is received c times in a row.

    Its optimum never exceeds the buying optimum of inst.
    """
    tree = normalize_costs(inst.feedback).tree
    return MsscInstance(inst.n_boxes, inst.scenarios, inst.prior, tree, buying=False)