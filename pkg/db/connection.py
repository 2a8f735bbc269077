import os
import time
import logging
from dataclasses import dataclass
from typing import Optional

from pymongo import MongoClient
from pymongo.errors import ConnectionFailure

logger = logging.getLogger(__name__)

DEFAULT_TRACKING_URL = "mongodb://localhost:27017"
DEFAULT_TRACKING_DB_NAME = "stopwise_tracking"
DEFAULT_TRACKING_COLLECTION = "experiment_runs"


def _redact(uri):
    """Drop the user:password part of a MongoDB URI for logs and errors."""
    scheme, sep, rest = uri.partition("://")
    if not sep:
        return uri.rpartition("@")[2]
    return f"{scheme}://{rest.rpartition('@')[2]}"


@dataclass(frozen=True)
class TrackingSettings:
    """
    Where experiment runs are tracked, read from STOPWISE_TRACKING_* variables.

    Tracking is best-effort bookkeeping for long batches, so connecting fails fast:
    a short server-selection timeout and a few pings with a growing pause between
    them. Credentials go to MongoClient as keyword arguments, never into the URI.
    """
    url: str = DEFAULT_TRACKING_URL
    db_name: str = DEFAULT_TRACKING_DB_NAME
    collection: str = DEFAULT_TRACKING_COLLECTION
    user: Optional[str] = None
    password: Optional[str] = None
    attempts: int = 3
    backoff_seconds: float = 1.0
    timeout_ms: int = 2000

    @classmethod
    def from_env(cls):
        return cls(
            url=os.getenv("STOPWISE_TRACKING_DB_URL") or DEFAULT_TRACKING_URL,
            db_name=os.getenv("STOPWISE_TRACKING_DB_NAME", DEFAULT_TRACKING_DB_NAME),
            collection=os.getenv("STOPWISE_TRACKING_COLLECTION", DEFAULT_TRACKING_COLLECTION),
            user=os.getenv("STOPWISE_TRACKING_DB_USER") or None,
            password=os.getenv("STOPWISE_TRACKING_DB_PASSWORD") or None,
            attempts=max(1, int(os.getenv("STOPWISE_TRACKING_RETRIES", "3"))),
            timeout_ms=int(os.getenv("STOPWISE_TRACKING_TIMEOUT_MS", "2000")),
        )

    @property
    def host(self):
        return _redact(self.url)

    def client_kwargs(self):
        kwargs = {"serverSelectionTimeoutMS": self.timeout_ms}
        if self.user and self.password:
            kwargs.update(username=self.user, password=self.password)
        return kwargs


def tracking_enabled():
    """Run tracking is on when STOPWISE_TRACKING_DB_URL is set."""
    return bool(os.getenv("STOPWISE_TRACKING_DB_URL"))


def connect(settings):
    """
    Ping the tracking server until it answers; returns the MongoClient.

    Waits backoff_seconds·k before the k-th retry. Raises ConnectionFailure naming
    the redacted host once every attempt has failed.
    """
    last_error = None
    for attempt in range(settings.attempts):
        if attempt:
            time.sleep(settings.backoff_seconds * attempt)
        client = MongoClient(settings.url, **settings.client_kwargs())
        try:
            client.admin.command("ping")
        except ConnectionFailure as e:
            client.close()
            last_error = e
            logger.warning(f"Tracking DB {settings.host} not reachable "
                           f"({attempt + 1}/{settings.attempts}): {e}")
            continue
        logger.info(f"Tracking runs in {settings.host}/{settings.db_name}.{settings.collection}")
        return client
    raise ConnectionFailure(
        f"Tracking DB {settings.host} unreachable after {settings.attempts} attempt(s): {last_error}")


def get_tracking_db(settings=None):
    """Returns (MongoClient, Database) for experiment-run tracking."""
    settings = settings or TrackingSettings.from_env()
    client = connect(settings)
    return client, client[settings.db_name]
