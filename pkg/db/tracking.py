import logging
from datetime import datetime, timezone
from pymongo import ASCENDING
from db.schemas import new_run_document

logger = logging.getLogger(__name__)

# Status constants
STATUS_PENDING = "pending"
STATUS_PROCESSING = "processing"
STATUS_COMPLETED = "completed"
STATUS_FAILED = "failed"


def ensure_indexes(collection):
    """Create indexes on the tracking collection if they don't exist."""
    collection.create_index([("item_key", ASCENDING)], unique=True)
    collection.create_index([("experiment", ASCENDING), ("status", ASCENDING)])
    logger.debug(f"Indexes ensured on {collection.name}")


def get_tracking_collection(db, collection_name):
    """Return the tracking Collection with indexes ensured."""
    collection = db[collection_name]
    ensure_indexes(collection)
    return collection


def get_completed_item_keys(collection, experiment):
    """Return the set of item keys of an experiment with status == 'completed'."""
    cursor = collection.find(
        {"experiment": experiment, "status": STATUS_COMPLETED},
        {"item_key": 1, "_id": 0},
    )
    return {doc["item_key"] for doc in cursor}


def create_pending_record(collection, experiment, instance_id, policy):
    """
    Insert or update a tracking document to 'pending' status.
    Upserts on item_key so reruns are idempotent.
    """
    doc = new_run_document(experiment, instance_id, policy)
    key = doc.pop("item_key")
    for field in ("status", "updated_at"):
        doc.pop(field)
    result = collection.update_one(
        {"item_key": key},
        {
            "$set": {
                "status": STATUS_PENDING,
                "updated_at": datetime.now(timezone.utc),
            },
            "$setOnInsert": doc,
        },
        upsert=True,
    )
    if result.upserted_id:
        logger.debug(f"Created pending record {key}")
    else:
        logger.debug(f"Updated existing record {key} to pending")
    return key


def mark_processing(collection, key):
    """Set status to 'processing' and update timestamp."""
    collection.update_one(
        {"item_key": key},
        {
            "$set": {
                "status": STATUS_PROCESSING,
                "updated_at": datetime.now(timezone.utc),
            }
        },
    )


def mark_completed(collection, key, result, duration_seconds):
    """Set status to 'completed' and store the evaluation record."""
    collection.update_one(
        {"item_key": key},
        {
            "$set": {
                "status": STATUS_COMPLETED,
                "result": result,
                "duration_seconds": duration_seconds,
                "updated_at": datetime.now(timezone.utc),
            }
        },
    )


def mark_failed(collection, key, error_message):
    """
    Set status to 'failed', increment retry_count,
    push error_message into error_log array.
    """
    collection.update_one(
        {"item_key": key},
        {
            "$set": {
                "status": STATUS_FAILED,
                "updated_at": datetime.now(timezone.utc),
            },
            "$inc": {"retry_count": 1},
            "$push": {"error_log": error_message},
        },
    )


def reset_stuck_processing(collection):
    """
    Reset any records stuck in 'processing' state back to 'failed'.
    This recovers from a previous run that crashed mid-batch.
    """
    result = collection.update_many(
        {"status": STATUS_PROCESSING},
        {
            "$set": {
                "status": STATUS_FAILED,
                "updated_at": datetime.now(timezone.utc),
            },
            "$inc": {"retry_count": 1},
            "$push": {"error_log": "Interrupted: found in processing state at batch startup"},
        },
    )
    if result.modified_count:
        logger.warning(
            f"Reset {result.modified_count} stuck 'processing' record(s) to 'failed'"
        )
    else:
        logger.debug("No stuck processing records found.")
