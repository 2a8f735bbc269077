"""
Min-Sum-Set-Cover instances with a feedback tree.

Scenarios are 0/1 vectors over the boxes; scenario s is covered once a box b with
s[b] = 1 has been queried. The feedback tree is an InstanceTree of kind
"feedback": each node carries a scenario set, its children partition that set and
edge probabilities are the conditional prior masses. In buying mode a node's cost
is the price of the next signal.
"""
import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from model.schemas import format_rational
from model.serialization import TreeParseError, parse_rational, tree_from_document, tree_to_document
from model.tree import KIND_FEEDBACK, InstanceTree, TreeBuilder, validate_structure

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MsscInstance:
    n_boxes: int
    scenarios: tuple  # scenarios[s] = tuple of 0/1 of length n_boxes
    prior: tuple  # Fractions summing to 1
    feedback: InstanceTree
    buying: bool = False

    @property
    def n_scenarios(self):
        return len(self.scenarios)

    @cached_property
    def box_masks(self):
        """box_masks[b] = bitmask of scenarios covered by box b."""
        masks = []
        for b in range(self.n_boxes):
            mask = 0
            for s, bits in enumerate(self.scenarios):
                if bits[b]:
                    mask |= 1 << s
            masks.append(mask)
        return tuple(masks)

    @cached_property
    def node_masks(self):
        return {node.id: scenario_mask(node.scenarios or ()) for node in self.feedback}

    @cached_property
    def all_mask(self):
        return (1 << self.n_scenarios) - 1

    def covers(self, box, scenario):
        return self.scenarios[scenario][box] == 1

    @cached_property
    def _masses(self):
        return {0: Fraction(0)}

    def mass(self, mask):
        """Prior mass of a scenario bitmask."""
        if mask in self._masses:
            return self._masses[mask]
        key = mask
        total = Fraction(0)
        s = 0
        while mask:
            if mask & 1:
                total += self.prior[s]
            mask >>= 1
            s += 1
        self._masses[key] = total
        return total

    def next_node(self, node_id, scenario):
        """Child of node_id containing the scenario; a leaf repeats itself."""
        for child, _ in self.feedback.children(node_id):
            if scenario in child.scenarios:
                return child.id
        if self.feedback.node(node_id).is_leaf:
            return node_id
        raise ValueError(f"Scenario {scenario} is not in any child of feedback node {node_id}")

    def validate(self):
        """Raise ValueError listing every problem found by validate_instance."""
        problems = validate_instance(self)
        if problems:
            raise ValueError("Invalid MSSC instance: " + "; ".join(problems))
        return self


def scenario_mask(scenarios):
    mask = 0
    for s in scenarios:
        mask |= 1 << s
    return mask


def mask_members(mask):
    members = []
    s = 0
    while mask:
        if mask & 1:
            members.append(s)
        mask >>= 1
        s += 1
    return members


def feedback_tree(prior, spec):
    """
    Build a feedback tree from a nested spec.

    spec: {"scenarios": [...], "cost": c (optional), "children": [spec, ...]}.
    Edge probabilities are mass(child)/mass(parent) under the prior.
    """
    prior = [Fraction(p) for p in prior]
    builder = TreeBuilder(KIND_FEEDBACK)

    def mass(scenarios):
        return sum((prior[s] for s in scenarios), Fraction(0))

    def add(node_spec, parent, prob):
        node_id = builder.add(
            0, parent=parent, prob=prob,
            cost=node_spec.get("cost", 1),
            scenarios=node_spec["scenarios"],
        )
        parent_mass = mass(node_spec["scenarios"])
        for child in node_spec.get("children", ()):
            child_prob = mass(child["scenarios"]) / parent_mass if parent_mass else Fraction(0)
            add(child, node_id, child_prob)

    add(spec, None, None)
    return builder.build()


def flat_feedback(n_scenarios):
    """No information: a single root node holding every scenario."""
    builder = TreeBuilder(KIND_FEEDBACK)
    builder.add(0, scenarios=range(n_scenarios))
    return builder.build()


def revealing_feedback(prior, cost=1):
    """The first purchased signal reveals the scenario."""
    n = len(prior)
    return feedback_tree(prior, {
        "scenarios": list(range(n)),
        "cost": cost,
        "children": [{"scenarios": [s]} for s in range(n)],
    })


def singleton_scenarios(n):
    """n boxes and n scenarios, scenario i covered only by box i."""
    return tuple(tuple(1 if b == i else 0 for b in range(n)) for i in range(n))


def uniform_prior(n):
    return tuple(Fraction(1, n) for _ in range(n))


def validate_instance(inst):
    """Return a list of human-readable problems; empty means the instance is valid."""
    problems = []
    if inst.n_boxes < 1:
        problems.append(f"n_boxes must be >= 1, got {inst.n_boxes}")
    if not inst.scenarios:
        problems.append("instance has no scenarios")
    for s, bits in enumerate(inst.scenarios):
        if len(bits) != inst.n_boxes:
            problems.append(f"scenario {s} has {len(bits)} bits, expected {inst.n_boxes}")
        elif any(bit not in (0, 1) for bit in bits):
            problems.append(f"scenario {s} has non-binary entries")
        elif not any(bits):
            problems.append(f"scenario {s} has no one-bit and can never be covered")
    if len(inst.prior) != inst.n_scenarios:
        problems.append(f"prior has {len(inst.prior)} entries for {inst.n_scenarios} scenarios")
    elif any(p <= 0 for p in inst.prior) or sum(inst.prior) != 1:
        problems.append("prior masses must be positive and sum to 1")

    tree = inst.feedback
    if tree.kind != KIND_FEEDBACK:
        problems.append(f"feedback tree has kind {tree.kind!r}")
        return problems
    if set(tree.root_node.scenarios or ()) != set(range(inst.n_scenarios)):
        problems.append("feedback root does not contain every scenario")
    for violation in validate_structure(tree):
        problems.append(f"feedback node {violation.node_id}: {violation.kind} ({violation.detail})")
    for node in tree:
        if node.scenarios is not None and not node.scenarios:
            problems.append(f"feedback node {node.id} has an empty scenario set")
        if not inst.buying and node.cost != 1:
            problems.append(f"feedback node {node.id} has cost {node.cost} outside buying mode")
        if any(not 0 <= s < inst.n_scenarios for s in node.scenarios or ()):
            problems.append(f"feedback node {node.id} names an unknown scenario")
    if not problems and len(inst.prior) == inst.n_scenarios:
        for node in tree:
            parent_mass = inst.mass(inst.node_masks[node.id])
            for child, p in tree.children(node.id):
                if parent_mass and p != inst.mass(inst.node_masks[child.id]) / parent_mass:
                    problems.append(
                        f"feedback edge {node.id}->{child.id} probability {p} does not match the prior")
    return problems


def instance_to_document(inst):
    return {
        "boxes": inst.n_boxes,
        "scenarios": ["".join(str(bit) for bit in bits) for bits in inst.scenarios],
        "prior": [format_rational(p) for p in inst.prior],
        "buying": inst.buying,
        "feedback": tree_to_document(inst.feedback),
    }


def serialize_instance(inst):
    return json.dumps(instance_to_document(inst), indent=1)


def instance_from_document(doc, path="$"):
    if not isinstance(doc, dict):
        raise TreeParseError(path, "expected a JSON object")
    boxes = doc.get("boxes")
    if isinstance(boxes, bool) or not isinstance(boxes, int):
        raise TreeParseError(f"{path}.boxes", f"expected an integer, got {boxes!r}")

    raw_scenarios = doc.get("scenarios")
    if not isinstance(raw_scenarios, list):
        raise TreeParseError(f"{path}.scenarios", "expected a list of bit strings")
    scenarios = []
    for i, bits in enumerate(raw_scenarios):
        if not isinstance(bits, str) or set(bits) - {"0", "1"}:
            raise TreeParseError(f"{path}.scenarios[{i}]", f"expected a bit string, got {bits!r}")
        scenarios.append(tuple(int(c) for c in bits))

    raw_prior = doc.get("prior")
    if not isinstance(raw_prior, list):
        raise TreeParseError(f"{path}.prior", "expected a list of \"p/q\" strings")
    prior = tuple(parse_rational(p, f"{path}.prior[{i}]") for i, p in enumerate(raw_prior))

    buying = doc.get("buying", False)
    if not isinstance(buying, bool):
        raise TreeParseError(f"{path}.buying", f"expected a boolean, got {buying!r}")
    if "feedback" not in doc:
        raise TreeParseError(path, "missing field 'feedback'")
    tree = tree_from_document(doc["feedback"], f"{path}.feedback")
    return MsscInstance(boxes, tuple(scenarios), prior, tree, buying)


def deserialize_instance(text):
    """Parse MSSC instance text. Use MsscInstance.validate() for semantic checks."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise TreeParseError("$", f"invalid JSON: {e}")
    return instance_from_document(doc)


def load_instance(path):
    with open(path, "r", encoding="utf-8") as f:
        return deserialize_instance(f.read())


def save_instance(inst, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_instance(inst))
    logger.info(f"MSSC instance saved to {path}")
