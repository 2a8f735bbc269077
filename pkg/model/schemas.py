from typing import TypedDict, Optional


class ChildDocument(TypedDict):
    id: int
    prob: str  # "p/q"


class NodeDocument(TypedDict, total=False):
    """
    Schema reference for one node of a serialized instance tree.
    Used for documentation and IDE autocomplete.
    """
    id: int
    value: str  # "p/q"
    cost: Optional[int]
    scenarios: Optional[list[int]]
    virtual: Optional[bool]
    children: list[ChildDocument]


class TreeDocument(TypedDict):
    kind: str  # supermartingale | feedback
    nodes: list[NodeDocument]
    root: int


class MsscDocument(TypedDict):
    boxes: int
    scenarios: list[str]  # bit strings, box 0 first
    prior: list[str]  # "p/q"
    buying: bool  # node costs are signal prices
    feedback: TreeDocument  # kind "feedback"


def format_rational(value):
    """Serialize a Fraction as an exact "p/q" string."""
    return f"{value.numerator}/{value.denominator}"
