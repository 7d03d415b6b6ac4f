import json

import numpy as np
import pytest

from dissim.services import ndme_cbe
from dissim.services.errors import PreconditionError
from dissim.services.verification import (
    CHECKS,
    check_bell_identities,
    check_cbe_table,
    check_depth_separation,
    check_gamma_eta,
    check_gibbs_cbe,
    check_pauli_table,
    check_product_tree,
    run_suite,
)


def test_full_suite_passes():
    report = run_suite(0)
    assert report.failed == []
    assert len(report.checks) == len(CHECKS)
    tree = next(c for c in report.checks if c.name == "pauli_product_tree")
    assert tree.details["sequences"] == 1000
    json.dumps(report.to_dict())


@pytest.mark.parametrize(
    "check",
    [check_pauli_table, check_cbe_table, check_bell_identities, check_gibbs_cbe, check_depth_separation],
)
def test_individual_checks(check):
    result = check(np.random.default_rng(1))
    assert result.passed, result.details


def test_product_tree_check_on_short_sequences():
    assert check_product_tree(np.random.default_rng(2), sequences=20, max_length=64).passed


def test_suite_is_deterministic():
    subset = [check_pauli_table, check_gamma_eta]
    assert run_suite(7, subset).to_dict() == run_suite(7, subset).to_dict()


def test_broken_table_entry_fails(monkeypatch):
    original = ndme_cbe._table_entries

    def wrong_eta():
        entries = original()
        pairs, _, q = entries["H"]
        entries["H"] = (pairs, 1.0, q)
        return entries

    monkeypatch.setattr(ndme_cbe, "_table_entries", wrong_eta)
    report = run_suite(0, [check_cbe_table, check_bell_identities])
    assert not report.passed
    assert report.failed == ["cbe_table"]
    assert not report.checks[0].details["H"]["passed"]


def test_errors_become_failed_checks():
    def check_explodes(rng):
        raise PreconditionError("boom")

    report = run_suite(0, [check_explodes, check_pauli_table])
    assert report.failed == ["explodes"]
    assert report.checks[0].details["error"]["code"] == "precondition_failed"
    assert report.checks[1].passed
