import numpy as np
import pandas as pd
import pytest

from firerisk.config import load_config
from firerisk.pipeline import derive_labels, ingest_corpus, join
from firerisk.synthetic import generate_synthetic

SEED = 20240101


@pytest.fixture(scope="session")
def cfg():
    return load_config()


@pytest.fixture(scope="session")
def corpus(cfg):
    return generate_synthetic(cfg["synthetic"], SEED)


@pytest.fixture(scope="session")
def joined(corpus, cfg):
    incidents, _ = ingest_corpus(corpus, cfg)
    return join(incidents, corpus.zip_factors, corpus.county_factors, corpus.weather_hourly)


@pytest.fixture(scope="session")
def labelled(joined, corpus, cfg):
    labels, thresholds = derive_labels(joined, cfg, corpus.cpi)
    return joined, labels, thresholds


def incident_row(**over):
    row = {
        "incident_id": "A1", "state": "AL", "county_fips": "01001", "zip": "35004",
        "timestamp": "2020-03-05 14:20:00", "incident_year": "2020",
        "property_use": "1 or 2 family dwelling", "stories_above": "1", "stories_below": "0",
        "total_sqft": "1500", "detector_present": "1", "aes_present": "0",
        "ignition_cause": "unintentional", "fire_origin_location": "kitchen",
        "first_ignited_item": "cooking materials", "first_ignited_material": "fabric",
        "heat_source": "hot object", "ignition_factor": "none", "human_factor": "none",
        "primary_action": "extinguishment", "growth_factor": "none", "response_minutes": "5.5",
        "spread_code": "confined to the room of origin",
        "injuries_minor": "0", "injuries_moderate": "0", "injuries_severe": "0",
        "injuries_critical": "0", "injuries_fatal": "0",
        "property_loss_usd": "1000", "content_loss_usd": "250",
    }
    row.update(over)
    return row


@pytest.fixture
def write_incidents(tmp_path):
    def _write(rows, name="incidents.csv"):
        path = tmp_path / name
        pd.DataFrame(rows).to_csv(path, index=False)
        return path
    return _write


def separable(n=3000, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (n, 2))
    y = np.where(X[:, 0] + X[:, 1] < -0.5, 0, np.where(X[:, 0] - X[:, 1] > 0.3, 2, 1))
    return pd.DataFrame(X, columns=["a", "b"]), y


# one "criterion N: PASS|FAIL" line per acceptance check, echoed at the end of the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
