import pytest

from csentangle.config import build_config
from csentangle.suite import random_hermitian_model, run_suite


@pytest.fixture(scope="module")
def baseline():
    return run_suite(build_config("property-suite", {}))


@pytest.fixture(scope="module")
def faulted():
    return run_suite(build_config("property-suite", {"inject_fault": "det_tangent, mode_swap"}))


def _status(report):
    return {row[1]: row[4] for row in report.rows}


def test_every_invariant_but_the_short_time_bound_passes(baseline):
    failing = {name for name, s in _status(baseline).items() if s == "FAIL"}
    # 1/sqrt(1 + 4x) has x^2 coefficient 6, above the bound of 5
    assert failing == {"short_time_law_coefficient"}
    assert not baseline.ok


def test_injected_faults_fail_their_named_checks(baseline, faulted):
    s = _status(faulted)
    assert s["det_tangent"] == "FAIL" and s["mode_swap"] == "FAIL"
    assert {k for k, v in s.items() if v == "FAIL"} == {"det_tangent", "mode_swap", "short_time_law_coefficient"}


def test_report_is_reproducible(baseline):
    again = run_suite(build_config("property-suite", {}))
    assert [r[:4] for r in again.rows if r[1] != "deterministic_csv"] == \
        [r[:4] for r in baseline.rows if r[1] != "deterministic_csv"]


def test_random_models_are_hermitian():
    import numpy as np

    rng = np.random.default_rng(1)
    for _ in range(20):
        assert random_hermitian_model(rng).is_hermitian()
