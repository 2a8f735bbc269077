from .connection import TrackingSettings, get_tracking_db, tracking_enabled
from .tracking import (
    get_tracking_collection,
    get_completed_item_keys,
    create_pending_record,
    mark_processing,
    mark_completed,
    mark_failed,
    reset_stuck_processing,
    STATUS_PENDING,
    STATUS_PROCESSING,
    STATUS_COMPLETED,
    STATUS_FAILED,
)
