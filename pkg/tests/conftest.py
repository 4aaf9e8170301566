import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from geofair import kernels  # noqa: E402
from geofair.ordinal import ScoredTable  # noqa: E402
from geofair.synth import SynthConfig, generate_city  # noqa: E402


def square(x0, y0, size=1.0):
    return [[x0, y0], [x0 + size, y0], [x0 + size, y0 + size], [x0, y0 + size], [x0, y0]]


def feature(rid, ring, key="CODE_IRIS", **props):
    return {
        "type": "Feature",
        "properties": {key: rid, **props},
        "geometry": {"type": "Polygon", "coordinates": [ring]},
    }


def collection(*features):
    return {"type": "FeatureCollection", "features": list(features)}


@pytest.fixture
def write_json(tmp_path):
    def _write(obj, name="regions.geojson"):
        path = tmp_path / name
        path.write_text(json.dumps(obj))
        return path

    return _write


@pytest.fixture
def write_csv(tmp_path):
    def _write(text, name="obs.csv"):
        path = tmp_path / name
        path.write_text(text)
        return path

    return _write


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    return kernels.get_backend(request.param)


@pytest.fixture(scope="session")
def default_city():
    return generate_city(SynthConfig())


def scored(y, y_hat, scores=None, regions=None, K=None):
    """Hand-built ScoredTable; scores default to one-hot of y_hat."""
    y = np.asarray(y, dtype=np.int64)
    y_hat = np.asarray(y_hat, dtype=np.int64)
    if scores is None:
        K = K or int(max(y.max(), y_hat.max()))
        scores = np.eye(K)[y_hat - 1]
    scores = np.asarray(scores, dtype=np.float64)
    if regions is None:
        regions = np.array(["r"] * len(y), dtype=object)
    return ScoredTable(np.asarray(regions, dtype=object), y, y_hat, scores)


ACCEPTANCE = []


def record_acceptance(number, ok, detail):
    line = f"acceptance {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
