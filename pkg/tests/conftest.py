import pytest


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch, tmp_path):
    """Keep reports and memo limits independent of the developer's .env."""
    monkeypatch.setenv("STOPWISE_OUTPUT_DIR", str(tmp_path / "output"))
    monkeypatch.delenv("STOPWISE_MEMO_LIMIT", raising=False)
    monkeypatch.delenv("STOPWISE_TRACKING_DB_URL", raising=False)
