from typing import TypedDict, Optional
from datetime import datetime, timezone


class RunDocument(TypedDict, total=False):
    """
    Schema reference for experiment-run tracking documents.
    One document per (experiment, instance, policy) item.
    """
    item_key: str  # "<experiment>:<instance_id>:<policy>"
    experiment: str
    instance_id: str
    policy: str
    status: str  # pending | processing | completed | failed
    created_at: datetime
    updated_at: datetime
    retry_count: int
    error_log: list[str]
    result: Optional[dict]
    duration_seconds: Optional[float]


def item_key(experiment, instance_id, policy):
    return f"{experiment}:{instance_id}:{policy}"


def new_run_document(experiment, instance_id, policy):
    """Create a fresh tracking document dict with default values."""
    now = datetime.now(timezone.utc)
    return {
        "item_key": item_key(experiment, instance_id, policy),
        "experiment": experiment,
        "instance_id": instance_id,
        "policy": policy,
        "status": "pending",
        "created_at": now,
        "updated_at": now,
        "retry_count": 0,
        "error_log": [],
        "result": None,
        "duration_seconds": None,
    }
