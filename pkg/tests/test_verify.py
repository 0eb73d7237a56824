from __future__ import annotations

import pytest

from vdofrac.verify import SUITES, VerifyContext, run_suites


def test_all_suites_pass():
    results = run_suites()
    assert set(results) == set(SUITES)
    failed = {name: r.details for name, r in results.items() if not r.passed}
    assert not failed


@pytest.mark.parametrize("suite", ["lemma2", "residual", "kernel", "telescoping"])
def test_fault_injection_is_detected(suite):
    results = run_suites([suite], VerifyContext(inject_fault=True))
    assert not results[suite].passed


def test_unknown_suite():
    with pytest.raises(KeyError):
        run_suites(["nope"])


def test_report_is_json_ready():
    import json

    results = run_suites(["gamma", "expr"])
    json.dumps({name: r.to_dict() for name, r in results.items()})
