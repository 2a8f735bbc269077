import json
import logging
from fractions import Fraction

from model.schemas import format_rational
from model.tree import InstanceTree, KINDS, Node

logger = logging.getLogger(__name__)


class TreeParseError(ValueError):
    """Malformed instance text; path points at the offending JSON element."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


def tree_to_document(tree):
    nodes = []
    for node in tree:
        doc = {
            "id": node.id,
            "value": format_rational(node.value),
            "children": [
                {"id": child_id, "prob": format_rational(p)} for child_id, p in node.children
            ],
        }
        if node.cost != 1:
            doc["cost"] = node.cost
        if node.scenarios is not None:
            doc["scenarios"] = list(node.scenarios)
        if node.virtual:
            doc["virtual"] = True
        nodes.append(doc)
    return {"kind": tree.kind, "nodes": nodes, "root": tree.root}


def serialize(tree):
    """Encode a tree as UTF-8 JSON text with rationals as "p/q" strings."""
    return json.dumps(tree_to_document(tree), indent=1)


def parse_rational(text, path):
    if not isinstance(text, str):
        raise TreeParseError(path, f"expected a \"p/q\" string, got {text!r}")
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as e:
        raise TreeParseError(path, f"invalid rational {text!r}: {e}")


def _require(doc, key, kind, path):
    if key not in doc:
        raise TreeParseError(path, f"missing field {key!r}")
    value = doc[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise TreeParseError(f"{path}.{key}", f"expected {kind.__name__}, got {value!r}")
    return value


def tree_from_document(doc, path="$"):
    if not isinstance(doc, dict):
        raise TreeParseError(path, "expected a JSON object")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise TreeParseError(f"{path}.kind", f"expected one of {KINDS}, got {kind!r}")
    root = _require(doc, "root", int, path)
    raw_nodes = _require(doc, "nodes", list, path)

    nodes = []
    ids = set()
    for i, raw in enumerate(raw_nodes):
        node_path = f"{path}.nodes[{i}]"
        if not isinstance(raw, dict):
            raise TreeParseError(node_path, "expected a JSON object")
        node_id = _require(raw, "id", int, node_path)
        if node_id in ids:
            raise TreeParseError(f"{node_path}.id", f"duplicate node id {node_id}")
        ids.add(node_id)
        value = parse_rational(raw.get("value"), f"{node_path}.value")

        children = []
        for j, child in enumerate(_require(raw, "children", list, node_path)):
            child_path = f"{node_path}.children[{j}]"
            if not isinstance(child, dict):
                raise TreeParseError(child_path, "expected a JSON object")
            child_id = _require(child, "id", int, child_path)
            prob = parse_rational(child.get("prob"), f"{child_path}.prob")
            children.append((child_id, prob))

        cost = raw.get("cost", 1)
        if isinstance(cost, bool) or not isinstance(cost, int):
            raise TreeParseError(f"{node_path}.cost", f"expected an integer, got {cost!r}")
        scenarios = raw.get("scenarios")
        if scenarios is not None:
            if not isinstance(scenarios, list) or not all(
                isinstance(s, int) and not isinstance(s, bool) for s in scenarios
            ):
                raise TreeParseError(f"{node_path}.scenarios", "expected a list of integers")
            scenarios = tuple(sorted(scenarios))
        nodes.append(Node(
            id=node_id,
            value=value,
            children=tuple(children),
            cost=cost,
            scenarios=scenarios,
            virtual=bool(raw.get("virtual", False)),
        ))

    for node in nodes:
        for child_id, _ in node.children:
            if child_id not in ids:
                raise TreeParseError(
                    f"{path}.nodes[id={node.id}].children", f"unknown child id {child_id}")
    if root not in ids:
        raise TreeParseError(f"{path}.root", f"unknown root id {root}")
    return InstanceTree(nodes, root, kind)


def deserialize(text):
    """Parse instance text. Structural validity is NOT checked here."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise TreeParseError("$", f"invalid JSON: {e}")
    tree = tree_from_document(doc)
    logger.debug(f"Deserialized {tree!r}")
    return tree


def load_tree(path):
    with open(path, "r", encoding="utf-8") as f:
        return deserialize(f.read())


def save_tree(tree, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize(tree))
    logger.info(f"Instance saved to {path}")
