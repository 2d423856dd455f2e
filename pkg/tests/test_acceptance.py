"""Acceptance gate: every criterion at its stated tolerance, one line each.

The whole suite runs once per session (criterion 6 consumes the double-event
monitors of criteria 1-5); each criterion then gets its own test so failures
are reported individually.
"""

import pytest

from cir_particles.acceptance import CRITERIA, run_acceptance

_NAMES = {
    1: "sum_is_cir_transition",
    2: "stationary_gamma_sum",
    3: "coupling_contraction",
    4: "collision_phase_diagram",
    5: "multiple_collision_in_zero",
    6: "no_multiple_collisions",
    7: "integrated_cir_laplace",
    8: "gradient_and_sum_identity",
    9: "coupled_cir_ordering",
    10: "determinism",
}


@pytest.fixture(scope="session")
def acceptance_results():
    results = run_acceptance()
    return {r.index: r for r in results}


def test_every_criterion_present(acceptance_results):
    assert sorted(acceptance_results) == [idx for idx, _ in CRITERIA]


@pytest.mark.parametrize("index", sorted(_NAMES))
def test_criterion(acceptance_results, index):
    result = acceptance_results[index]
    assert result.name == _NAMES[index]
    assert result.passed, f"criterion {index} ({result.name}): " + "; ".join(result.details)
