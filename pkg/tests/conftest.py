import numpy as np
import pytest

from ncsq.experiments import REF_A, REF_P
from ncsq.network import IIDDropout, TwoStateDropout
from ncsq.plant import build_augmented
from ncsq.synth import CostWeights, Plant, synthesize


@pytest.fixture(scope="session")
def ref_plant():
    return Plant(np.array(REF_A), np.ones(5), np.ones(5), 1.0)


@pytest.fixture(scope="session")
def ref_weights():
    return CostWeights(np.eye(5), 1.0, 5)


@pytest.fixture(scope="session")
def ref_synth(ref_plant, ref_weights):
    return synthesize(ref_plant, ref_weights)


@pytest.fixture(scope="session")
def ref_model(ref_plant, ref_synth):
    return build_augmented(ref_plant, ref_synth.K, 5)


@pytest.fixture(scope="session")
def ref_two_state():
    return TwoStateDropout(REF_P, 0.05, 0.15)


@pytest.fixture(scope="session")
def iid10():
    return IIDDropout(0.10)


def random_stable_pair(rng, n, radius=0.8):
    """Two random matrices rescaled to the given spectral radius."""
    out = []
    for _ in range(2):
        M = rng.standard_normal((n, n))
        out.append(M * radius / np.max(np.abs(np.linalg.eigvals(M))))
    return out


_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion number and summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    n, text = mark.args
    detail = "; ".join(v for k, v in item.user_properties if k == "detail")
    passed = rep.passed and _CRITERIA.get(n, (True,))[0]
    _CRITERIA[n] = (passed, text, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        passed, text, detail = _CRITERIA[n]
        line = f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {text}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
