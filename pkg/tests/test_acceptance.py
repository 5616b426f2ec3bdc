"""Acceptance gate: one test per shipped criterion.

Each test invokes the corresponding check from coase_bandits.acceptance,
prints its single PASS/FAIL line, and fails with the recorded detail if
the criterion does not hold.  Run with -s to see the lines as they land.
"""

from coase_bandits.acceptance import (
    criterion_1_oracle_identity,
    criterion_2_pathwise_decomposition,
    criterion_3_welfare_breakdown,
    criterion_4_binary_search,
    criterion_5_welfare_efficiency,
    criterion_6_certificate,
    criterion_7_firm_demo,
    criterion_8_determinism,
)


def _gate(result) -> None:
    print(result.line())
    assert result.passed, result.line()


def test_criterion_1_oracle_identity():
    _gate(criterion_1_oracle_identity())


def test_criterion_2_pathwise_decomposition():
    _gate(criterion_2_pathwise_decomposition())


def test_criterion_3_welfare_breakdown():
    _gate(criterion_3_welfare_breakdown())


def test_criterion_4_binary_search():
    _gate(criterion_4_binary_search())


def test_criterion_5_welfare_efficiency():
    _gate(criterion_5_welfare_efficiency())


def test_criterion_6_certificate():
    _gate(criterion_6_certificate())


def test_criterion_7_firm_demo():
    _gate(criterion_7_firm_demo())


def test_criterion_8_determinism(tmp_path):
    _gate(criterion_8_determinism(base_dir=str(tmp_path)))
