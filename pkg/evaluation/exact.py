"""
Exact evaluation on instance trees.

Deterministic quantities are exact Fractions. The randomized-threshold policy has
an expected cost of the form Σ qᵢ·e^{aᵢ} / (e − 1) with rational qᵢ, aᵢ, kept
symbolically in ExpSum / ClosedFormCost and evaluated with decimal on demand.
"""
import logging
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction

from model.transforms import normalize_costs
from model.tree import PathPrefix
from policies import q_estimator
from policies.stopping import (
    DETERMINISTIC_POLICIES,
    coin_probability,
    make_policy,
    run_policy,
)

logger = logging.getLogger(__name__)

DECIMAL_PRECISION = 60
CLOSED_FORM_TOLERANCE = Fraction(1, 10**12)


@dataclass(frozen=True)
class OptResult:
    value: Fraction
    stopping_nodes: frozenset
    stop_here: dict = field(compare=False, repr=False)


def _bottom_up(tree):
    return sorted(tree, key=lambda n: n.depth, reverse=True)


def opt_dp(tree):
    """
    OPT(v) = min{v, c_v + Σ Pr(u)·OPT(u)} bottom-up; leaves return their value.

    Ties break toward stopping, so the reported stopping-node set is unique.
    """
    best = {}
    stop_here = {}
    for node in _bottom_up(tree):
        if node.is_leaf:
            best[node.id] = node.value
            stop_here[node.id] = True
            continue
        cont = node.cost + sum(
            (p * best[child.id] for child, p in tree.children(node.id)), Fraction(0))
        stop_here[node.id] = node.value <= cont
        best[node.id] = node.value if stop_here[node.id] else cont

    stopping = set()
    stack = [tree.root]
    while stack:
        nid = stack.pop()
        if stop_here[nid]:
            stopping.add(nid)
        else:
            stack.extend(cid for cid, _ in tree.node(nid).children)
    return OptResult(best[tree.root], frozenset(stopping), stop_here)


def prophet_value(tree):
    """E min_i (i + X_i): the per-realization best stop, where i counts paid step costs."""
    total = Fraction(0)
    stack = [(tree.root_node, Fraction(1), 0, None)]
    while stack:
        node, prob, index, best = stack.pop()
        here = index + node.value
        best = here if best is None else min(best, here)
        if node.is_leaf:
            total += prob * best
            continue
        for child, p in tree.children(node.id):
            stack.append((child, prob * p, index + node.cost, best))
    return total


def _unit_cost(tree):
    return tree if tree.has_unit_costs else normalize_costs(tree).tree


@dataclass(frozen=True)
class PolicyCost:
    cost: Fraction
    stop_index: Fraction


def policy_traces(tree, policy_name):
    """Run a deterministic policy down every root-to-leaf path: [(probability, trace)]."""
    if policy_name not in DETERMINISTIC_POLICIES:
        raise ValueError(f"{policy_name!r} is not a deterministic policy")
    tree = _unit_cost(tree)
    return [
        (prob, run_policy(make_policy(policy_name), PathPrefix.from_nodes(path)))
        for prob, path in tree.paths()
    ]


def exact_policy_cost(tree, policy_name):
    """Exact E(i* + v_{i*}) of a deterministic policy, with E(i*) alongside."""
    cost = Fraction(0)
    index = Fraction(0)
    for prob, trace in policy_traces(tree, policy_name):
        cost += prob * trace.cost
        index += prob * trace.stop.index
    return PolicyCost(cost, index)


class ExpSum:
    """Σ q·e^a with rational q and a, kept exact until evaluated."""

    def __init__(self, terms=None):
        self.terms = {}
        for a, q in (terms or {}).items():
            self._add(Fraction(a), Fraction(q))

    def _add(self, a, q):
        if q == 0:
            return
        q = self.terms.get(a, Fraction(0)) + q
        if q == 0:
            self.terms.pop(a, None)
        else:
            self.terms[a] = q

    def add_term(self, q, a):
        self._add(Fraction(a), Fraction(q))
        return self

    def __add__(self, other):
        result = ExpSum(self.terms)
        for a, q in other.terms.items():
            result._add(a, q)
        return result

    def __eq__(self, other):
        return isinstance(other, ExpSum) and self.terms == other.terms

    def __repr__(self):
        inner = " + ".join(f"({q})·e^({a})" for a, q in sorted(self.terms.items()))
        return f"ExpSum({inner or '0'})"

    def evaluate(self, prec=DECIMAL_PRECISION):
        with localcontext() as ctx:
            ctx.prec = prec
            total = Decimal(0)
            for a, q in self.terms.items():
                exp_a = (Decimal(a.numerator) / Decimal(a.denominator)).exp()
                total += Decimal(q.numerator) / Decimal(q.denominator) * exp_a
            return +total


E_MINUS_ONE = ExpSum({1: 1, 0: -1})


@dataclass(frozen=True)
class ClosedFormCost:
    """numerator / (e − 1), numerator an ExpSum."""
    numerator: ExpSum

    def evaluate(self, prec=DECIMAL_PRECISION):
        with localcontext() as ctx:
            ctx.prec = prec
            return self.numerator.evaluate(prec) / E_MINUS_ONE.evaluate(prec)

    def __float__(self):
        return float(self.evaluate())

    def __str__(self):
        return f"{self.numerator!r} / (e - 1)"


@dataclass(frozen=True)
class RandomizedCost:
    cost: object  # Fraction for coin, ClosedFormCost for rand
    stop_index: object

    def __float__(self):
        return float(self.cost)


def _coin_cost(tree):
    # On a unit-cost tree the stop index at a node is its depth.
    cost = {}
    index = {}
    for node in _bottom_up(tree):
        here = node.depth + node.value
        if node.is_leaf:
            cost[node.id] = here
            index[node.id] = Fraction(node.depth)
            continue
        p = coin_probability(node.value)
        cont_cost = sum((q * cost[c.id] for c, q in tree.children(node.id)), Fraction(0))
        cont_index = sum((q * index[c.id] for c, q in tree.children(node.id)), Fraction(0))
        cost[node.id] = p * here + (1 - p) * cont_cost
        index[node.id] = p * node.depth + (1 - p) * cont_index
    return RandomizedCost(cost[tree.root], index[tree.root])


def rand_stop_segments(values):
    """
    Stop index of the randomized-threshold policy as a step function of ρ.

    Returns [(i, a, b)]: for ρ in (a, b] the policy stops at index i. Breakpoints are
    Q(i) clipped to [0, 1]; the last index absorbs every remaining threshold.
    """
    q = q_estimator.from_values(values)
    last = len(values) - 1
    segments = []
    one = Fraction(1)
    for i, v in enumerate(values):
        a = min(q.breakpoints[i], one)
        if a >= one:
            break
        if v == 0 or i == last:
            b = one
        else:
            b = min(q.breakpoints[i + 1], one)
        if b > a:
            segments.append((i, a, b))
        if b >= one:
            break
    return segments


def _rand_cost(tree):
    cost = ExpSum()
    index = ExpSum()
    for prob, path in tree.paths():
        values = tuple(n.value for n in path)
        for i, a, b in rand_stop_segments(values):
            weight = prob * (i + values[i])
            # ∫_a^b w·e^ρ dρ = w·(e^b − e^a)
            cost.add_term(weight, b).add_term(-weight, a)
            index.add_term(prob * i, b).add_term(-prob * i, a)
    return RandomizedCost(ClosedFormCost(cost), ClosedFormCost(index))


def exact_randomized_cost(tree, policy_name):
    """
    Exact expected cost of a randomized policy.

    coin: exact Fraction via the tree recursion over stop probabilities.
    rand: closed form Σ q·(e^b − e^a)/(e − 1) over the per-path step function of ρ.
    """
    tree = _unit_cost(tree)
    if policy_name == "coin":
        return _coin_cost(tree)
    if policy_name == "rand":
        return _rand_cost(tree)
    raise ValueError(f"{policy_name!r} is not a randomized policy")


def exact_cost(tree, policy_name):
    """Dispatch to the exact evaluator of any built-in policy."""
    if policy_name in DETERMINISTIC_POLICIES:
        return exact_policy_cost(tree, policy_name)
    return exact_randomized_cost(tree, policy_name)


def as_decimal(value, prec=DECIMAL_PRECISION):
    if isinstance(value, ClosedFormCost):
        return value.evaluate(prec)
    with localcontext() as ctx:
        ctx.prec = prec
        value = Fraction(value)
        return Decimal(value.numerator) / Decimal(value.denominator)
