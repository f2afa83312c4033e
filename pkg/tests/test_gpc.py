from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from natocc.errors import DimensionMismatch, GapTooSmall
from natocc.fock import Determinant, enumerate_determinants
from natocc.gpc import (Constraint, borland_dennis_constraints, first_order_derivative,
                        perturbation_response, pinning_report)
from natocc.model import build_hubbard, build_many_body_matrix

from conftest import bd_pinned_state, jw_total_spin_squared, pinning_check, random_state

BD = borland_dennis_constraints()
FACET = BD.by_label("BD: 2-n1-n2-n4")
BASIS36 = enumerate_determinants(3, 3)


def test_bd_facet_values():
    assert FACET.evaluate([1, 1, 1, 0, 0, 0]) == 0
    assert FACET.evaluate([0.5] * 6) == pytest.approx(0.5)
    assert FACET.evaluate_normalized([0.5] * 6) == pytest.approx(0.25)
    assert FACET.normalization == Fraction(1, 2)
    # eigenvalues on determinants: kappa = 2 - [1] - [2] - [4] (1-based)
    assert FACET.eigenvalue(Determinant.from_occ([2, 4, 5], 6)) == 2
    assert FACET.eigenvalue(Determinant.from_occ([0, 1, 3], 6)) == -1


def test_pinning_report_sorted_and_flags():
    n = np.array([0.9, 0.85, 0.8, 0.2, 0.15, 0.1])
    rep = pinning_report(n, BD)
    assert rep.labels == sorted(rep.labels)
    pair = rep.labels.index("pair+: n1+n6-1")
    assert rep.pinned[pair]
    facet = rep.labels.index("BD: 2-n1-n2-n4")
    assert rep.distances[facet] == pytest.approx(0.05)
    assert rep.normalized[facet] == pytest.approx(0.025)
    assert not rep.quasipinned[facet]
    assert "constraints" in rep.to_dict()


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        FACET.evaluate([0.5] * 3)
    with pytest.raises(DimensionMismatch):
        FACET.evaluate([0.5] * 6, orbital_map=[0, 1])


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_pinning_theorem_pinned(seed):
    rng = np.random.default_rng(seed)
    psi, basis = bd_pinned_state(rng)
    D, norm, mean = pinning_check(psi, basis, FACET)
    assert abs(D) < 1e-10
    assert norm < 1e-8
    assert mean == pytest.approx(D, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_pinning_theorem_generic(seed):
    rng = np.random.default_rng(seed)
    psi = random_state(len(BASIS36), rng)
    D, norm, mean = pinning_check(psi, BASIS36, FACET)
    assert D > 1e-8 and norm > 1e-8
    assert mean == pytest.approx(D, abs=1e-10)


def test_pinned_response_is_quadratic(h34_basis, h34_cset):
    H = build_many_body_matrix(h34_basis, build_hubbard(4, 1.0, 0.0))
    V = build_many_body_matrix(h34_basis, build_hubbard(4, 0.0, 1.0))
    c = [x for x in h34_cset.to_constraints() if x.label.startswith("d5")][0]
    lambdas = np.logspace(-4, -2, 7)
    table = perturbation_response(H, V, c, lambdas, h34_basis)
    assert table.distance0 == pytest.approx(0.0, abs=1e-14)
    assert table.second_moment == pytest.approx(0.0, abs=1e-14)
    slope = np.polyfit(np.log(lambdas), np.log(table.distances - table.distance0), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.1)
    assert table.holds.all()


def test_random_perturbations_respect_bound(h34_basis, h34_cset, rng):
    H = build_many_body_matrix(h34_basis, build_hubbard(4, 1.0, 1.0))
    for c in h34_cset.to_constraints():
        for _ in range(10):
            A = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
            t = perturbation_response(H, 0.5 * (A + A.conj().T), c, [1e-3], h34_basis)
            assert t.holds.all()
            assert t.gamma_exact <= t.gamma_V + 1e-12
            cs = t.cauchy_schwarz
            assert cs["lhs"] <= cs["rhs"] + 1e-12
            assert cs["sum_b2"] <= cs["cov_over_gap2"] + 1e-12


def test_symmetry_expectation_is_stationary(h34_basis, rng):
    H = build_many_body_matrix(h34_basis, build_hubbard(4, 1.0, 1.0))
    S2 = jw_total_spin_squared(h34_basis)
    assert np.allclose(H @ S2, S2 @ H, atol=1e-12)
    A = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    V = 0.5 * (A + A.conj().T)
    assert abs(first_order_derivative(H, V, S2, 1e-3)) < 1e-6
    # a non-conserved observable does respond at first order
    N0 = np.diag([float(d.bits & 1) for d in h34_basis])
    assert abs(first_order_derivative(H, V, N0, 1e-3)) > 1e-3


def test_gap_too_small(h34_basis):
    H = np.zeros((6, 6))
    with pytest.raises(GapTooSmall):
        perturbation_response(H, np.eye(6), Constraint(0, (1,) * 8, "x"), [1e-3], h34_basis)
