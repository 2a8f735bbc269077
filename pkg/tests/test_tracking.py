from unittest.mock import MagicMock

import pytest
from pymongo.errors import ConnectionFailure

from db import connection
from db.schemas import item_key, new_run_document
from db.tracking import (
    STATUS_COMPLETED,
    STATUS_FAILED,
    STATUS_PENDING,
    create_pending_record,
    get_completed_item_keys,
    mark_completed,
    mark_failed,
    reset_stuck_processing,
)
from experiments import runner
from experiments.config import ExperimentConfig, InstanceSource
from generators.stopping import GeneratorSpec


def test_item_key():
    assert item_key("eval", "harmonic(n=3)", "det") == "eval:harmonic(n=3):det"


def test_new_run_document_defaults():
    doc = new_run_document("eval", "h3", "rand")
    assert doc["status"] == STATUS_PENDING
    assert doc["retry_count"] == 0
    assert doc["error_log"] == []


def test_create_pending_record_upserts():
    collection = MagicMock()
    key = create_pending_record(collection, "eval", "h3", "det")
    assert key == "eval:h3:det"
    (query, update), kwargs = collection.update_one.call_args
    assert query == {"item_key": key}
    assert update["$set"]["status"] == STATUS_PENDING
    assert "status" not in update["$setOnInsert"]
    assert kwargs["upsert"] is True


def test_mark_completed_stores_record():
    collection = MagicMock()
    mark_completed(collection, "eval:h3:det", {"ratio": 1.0}, 0.5)
    update = collection.update_one.call_args[0][1]
    assert update["$set"]["status"] == STATUS_COMPLETED
    assert update["$set"]["result"] == {"ratio": 1.0}


def test_mark_failed_counts_retries():
    collection = MagicMock()
    mark_failed(collection, "eval:h3:det", "boom")
    update = collection.update_one.call_args[0][1]
    assert update["$set"]["status"] == STATUS_FAILED
    assert update["$inc"] == {"retry_count": 1}
    assert update["$push"] == {"error_log": "boom"}


def test_reset_stuck_processing():
    collection = MagicMock()
    collection.update_many.return_value.modified_count = 2
    reset_stuck_processing(collection)
    query = collection.update_many.call_args[0][0]
    assert query == {"status": "processing"}


def test_completed_item_keys():
    collection = MagicMock()
    collection.find.return_value = [{"item_key": "eval:a:det"}, {"item_key": "eval:b:det"}]
    assert get_completed_item_keys(collection, "eval") == {"eval:a:det", "eval:b:det"}


def test_connect_backs_off_then_gives_up(monkeypatch):
    client = MagicMock()
    client.admin.command.side_effect = ConnectionFailure("refused")
    mongo = MagicMock(return_value=client)
    monkeypatch.setattr(connection, "MongoClient", mongo)
    sleep = MagicMock()
    monkeypatch.setattr(connection.time, "sleep", sleep)

    settings = connection.TrackingSettings(
        url="mongodb://user:secret@db:27017", attempts=3, backoff_seconds=0.5)
    with pytest.raises(ConnectionFailure) as excinfo:
        connection.connect(settings)
    assert [c[0][0] for c in sleep.call_args_list] == [0.5, 1.0]
    assert client.close.call_count == 3
    assert "secret" not in str(excinfo.value)
    assert "mongodb://db:27017" in str(excinfo.value)


def test_connect_returns_first_answering_client(monkeypatch):
    down, up = MagicMock(), MagicMock()
    down.admin.command.side_effect = ConnectionFailure("refused")
    monkeypatch.setattr(connection, "MongoClient", MagicMock(side_effect=[down, up]))
    monkeypatch.setattr(connection.time, "sleep", MagicMock())
    assert connection.connect(connection.TrackingSettings(attempts=2)) is up


def test_settings_from_env_pass_credentials_as_keywords(monkeypatch):
    monkeypatch.setenv("STOPWISE_TRACKING_DB_URL", "mongodb://db:27017")
    monkeypatch.setenv("STOPWISE_TRACKING_DB_USER", "u")
    monkeypatch.setenv("STOPWISE_TRACKING_DB_PASSWORD", "p")
    monkeypatch.setenv("STOPWISE_TRACKING_RETRIES", "5")
    monkeypatch.setenv("STOPWISE_TRACKING_COLLECTION", "runs")
    settings = connection.TrackingSettings.from_env()
    assert settings.url == "mongodb://db:27017"
    assert settings.attempts == 5
    assert settings.collection == "runs"
    assert settings.client_kwargs()["username"] == "u"
    assert settings.client_kwargs()["password"] == "p"
    assert connection.tracking_enabled()


def test_get_tracking_db_uses_configured_name(monkeypatch):
    client = MagicMock()
    monkeypatch.setattr(connection, "connect", MagicMock(return_value=client))
    _, db = connection.get_tracking_db(connection.TrackingSettings(db_name="lab"))
    client.__getitem__.assert_called_once_with("lab")
    assert db is client.__getitem__.return_value


def test_redact_strips_credentials():
    assert connection._redact("mongodb://a:b@h:1/x") == "mongodb://h:1/x"
    assert connection._redact("mongodb://h:1") == "mongodb://h:1"


def test_batch_runner_leaves_environment_loading_to_the_entry_script():
    assert not hasattr(runner, "load_dotenv")


class TestTrackedBatch:
    @pytest.fixture
    def tracked(self, monkeypatch):
        client, collection = MagicMock(), MagicMock()
        collection.find.return_value = []
        monkeypatch.setattr(runner, "_open_tracking", lambda config: (client, collection))
        return client, collection

    def config(self, tmp_path, **kwargs):
        sources = [InstanceSource(generator=GeneratorSpec("harmonic", {"n": n})) for n in (2, 3)]
        return ExperimentConfig(
            sources=sources, policies=["det", "ski"], output_dir=str(tmp_path), track=True, **kwargs)

    def test_items_are_tracked_to_completion(self, tracked, tmp_path):
        client, collection = tracked
        summary = runner.run_batch(self.config(tmp_path))
        assert summary["records"] == 4
        statuses = [call[0][1]["$set"]["status"] for call in collection.update_one.call_args_list]
        assert statuses.count(STATUS_COMPLETED) == 4
        client.close.assert_called_once()

    def test_resume_skips_completed_items(self, tracked, tmp_path):
        _, collection = tracked
        collection.find.return_value = [
            {"item_key": "eval:harmonic(n=2):det"},
            {"item_key": "eval:harmonic(n=2):ski"},
            {"item_key": "eval:harmonic(n=3):det"},
        ]
        summary = runner.run_batch(self.config(tmp_path, resume=True))
        assert summary["skipped_items"] == 3
        assert summary["records"] == 1

    def test_failed_instance_is_marked(self, tracked, tmp_path):
        _, collection = tracked
        config = self.config(tmp_path)
        config.sources = [InstanceSource(path=str(tmp_path / "broken.json"))]
        (tmp_path / "broken.json").write_text("{}", encoding="utf-8")
        summary = runner.run_batch(config)
        assert summary["failed"] == 1
        statuses = [call[0][1]["$set"]["status"] for call in collection.update_one.call_args_list]
        assert statuses.count(STATUS_FAILED) == 2
