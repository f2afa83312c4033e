from fractions import Fraction as F

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from natocc.errors import (NotSquare, OutOfSectorPolytope, SectorOverlapViolation, Singular,
                           SumRuleViolation)
from natocc.fock import Determinant, SectorLabel, enumerate_determinants, sector_filter
from natocc.rdm import one_rdm
from natocc.sector_map import (amplitudes_from_occupations, build_amplitude_map, check_sum_rules,
                               format_table, fraction_inverse, invert_map)

# Reference ordering of the six (3,4) determinants: |001>, |113>, |221>, |023>', |023>'', |023>'''
# expressed as indices into the lexicographic enumeration.
GOLDEN_ORDER = [0, 4, 5, 2, 1, 3]
GOLDEN_M = [[1, 0, 0, 1, 1, 0],
           [1, 0, 0, 0, 0, 1],
           [1, 1, 1, 0, 0, 0],
           [0, 1, 0, 0, 0, 0],
           [0, 0, 1, 0, 1, 1],
           [0, 0, 1, 1, 0, 0]]
q = F(1, 4)
# coefficients of n_{0up}, n_{0dn}, n_{1up}, n_{1dn}, n_{2up}, n_{2dn}
GOLDEN_D = [[q, q, 2 * q, -2 * q, -q, -q],
           [0, 0, 0, 1, 0, 0],
           [-q, -q, 2 * q, -2 * q, q, q],
           [q, q, -2 * q, 2 * q, -q, 3 * q],
           [2 * q, -2 * q, 0, 0, 2 * q, -2 * q],
           [-q, 3 * q, -2 * q, 2 * q, q, q]]

BD_DETS = [(0, 1, 2), (0, 3, 4), (1, 3, 5), (2, 4, 5)]
BD_RULES = [((0, 5), 1), ((1, 4), 1), ((2, 3), 1)]


def test_golden_matrix(h34_basis):
    amap = build_amplitude_map(h34_basis, 3, 4)
    assert amap.row_labels == (0, 1, 2, 3, 4, 5)
    assert not amap.includes_normalization_row
    M = [[amap.M[r][c] for c in GOLDEN_ORDER] for r in range(6)]
    assert M == GOLDEN_M


def test_golden_constraints(h34_cset):
    for j, col in enumerate(GOLDEN_ORDER):
        row = list(h34_cset.coefficients[col][:6])
        assert row == GOLDEN_D[j]
        assert all(c == 0 for c in h34_cset.coefficients[col][6:])
        assert h34_cset.constants[col] == 0
    assert h34_cset.denominator == 4


def test_inverse_matches_sympy(h34_cset):
    M = sympy.Matrix(h34_cset.amap.M)
    ref = M.inv()
    ours = [[sympy.Rational(x.numerator, x.denominator) for x in r] for r in h34_cset.inverse]
    assert sympy.Matrix(ours) == ref


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=1, max_value=6).flatmap(
    lambda n: st.lists(st.lists(st.integers(-3, 3), min_size=n, max_size=n), min_size=n, max_size=n)))
def test_fraction_inverse_against_sympy(A):
    M = sympy.Matrix(A)
    if M.det() == 0:
        with pytest.raises(Singular):
            fraction_inverse(A)
        return
    inv = fraction_inverse(A)
    ours = sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in r] for r in inv])
    assert ours == M.inv()


def test_fraction_inverse_shape():
    with pytest.raises(NotSquare):
        fraction_inverse([[1, 2, 3], [4, 5, 6]])


def _bd_map():
    dets = [Determinant.from_occ(o, 6) for o in BD_DETS]
    return build_amplitude_map(dets, sum_rules=BD_RULES)


def _on_bd_subspace(coeffs, const, expected):
    """Compare two affine functionals on the subspace n_k + n_{7-k} = 1 (exactly)."""
    pts = [(F(0), F(0), F(0)), (F(1), F(0), F(0)), (F(0), F(1), F(0)), (F(0), F(0), F(1)),
           (F(1, 3), F(2, 7), F(5, 11))]
    for a, b, c in pts:
        n = [a, b, c, 1 - c, 1 - b, 1 - a]
        lhs = sum(x * y for x, y in zip(coeffs, n)) + const
        assert lhs == expected(*n)


def test_borland_dennis_golden():
    cset = invert_map(_bd_map())
    half = F(1, 2)
    expected = [
        lambda n1, n2, n3, n4, n5, n6: half * (n1 + n2 + n3 - 1),
        lambda n1, n2, n3, n4, n5, n6: half * (n1 - n2 + 1 - n3),
        lambda n1, n2, n3, n4, n5, n6: half * (1 - n1 + n2 - n3),
        lambda n1, n2, n3, n4, n5, n6: half * (2 - n1 - n2 - n4),
    ]
    assert cset.amap.includes_normalization_row
    for j in range(4):
        _on_bd_subspace(cset.coefficients[j], cset.constants[j], expected[j])


def test_roundtrip_and_polytope(h34_cset, rng):
    for _ in range(20):
        f = rng.dirichlet(np.ones(6))
        n = h34_cset.amap.occupations(f)
        assert np.allclose(amplitudes_from_occupations(h34_cset, n), f, atol=1e-13)
    exact = [F(1, 6)] * 6
    n = [sum(F(int(h34_cset.amap.occupancy()[p, a])) * exact[a] for a in range(6)) for p in range(8)]
    assert h34_cset.evaluate_exact(n) == exact
    bad = h34_cset.amap.occupations(np.array([1.2, -0.2, 0, 0, 0, 0]))
    with pytest.raises(OutOfSectorPolytope):
        amplitudes_from_occupations(h34_cset, bad)
    with pytest.raises(SumRuleViolation):
        check_sum_rules(h34_cset.amap, np.zeros(8))


def test_single_determinant_sector():
    det = [Determinant.from_occ([0, 1], 4)]
    cset = invert_map(build_amplitude_map(det, 2, 2))
    assert cset.amap.M == ((1,),)
    assert cset.constants == (1,)


def test_error_paths():
    dets = [Determinant.from_occ(o, 8) for o in [(0, 1, 2), (0, 1, 4)]]
    with pytest.raises(SectorOverlapViolation):
        build_amplitude_map(dets, 3, 4)
    with pytest.raises(SumRuleViolation):
        build_amplitude_map([Determinant.from_occ(o, 6) for o in BD_DETS],
                            sum_rules=[((0, 1), 1)])
    # two electrons of opposite spin, zero momentum: four determinants, six free occupations
    big = sector_filter(enumerate_determinants(2, 4), SectorLabel(F(0), 0), 4)
    with pytest.raises(NotSquare) as err:
        build_amplitude_map(big, 2, 4)
    assert "pinning" in str(err.value)


def test_format_table_mentions_all_constraints(h34_cset):
    text = format_table(h34_cset)
    for j in range(1, 7):
        assert f"d{j} =" in text


def test_integer_table(h34_cset):
    table = h34_cset.integer_table()
    assert len(table) == 6 and all(len(r) == 9 for r in table)
    kappa = h34_cset.to_constraints()
    assert [c.label.split(":")[0] for c in kappa] == [f"d{j}" for j in range(1, 7)]


def test_identity_map():
    # one occupied slot per determinant plus normalization gives the identity on f
    dets = [Determinant.from_occ(o, 4) for o in [(0, 1), (2, 3)]]
    cset = invert_map(build_amplitude_map(dets, 2, 2))
    f = np.array([0.3, 0.7])
    assert np.allclose(cset.evaluate(cset.amap.occupations(f)), f)


def test_ground_state_amplitudes_from_occupations(h34_basis, h34_cset, h34_ground):
    _, psi = h34_ground
    n = np.diag(one_rdm(psi, h34_basis)).real
    assert np.allclose(amplitudes_from_occupations(h34_cset, n), np.abs(psi) ** 2, atol=1e-10)


def test_constraint_range_on_random_sector_states(h34_basis, h34_cset, rng):
    for _ in range(1000):
        psi = rng.normal(size=6) + 1j * rng.normal(size=6)
        psi /= np.linalg.norm(psi)
        d = h34_cset.evaluate(np.diag(one_rdm(psi, h34_basis)).real)
        assert d.min() >= -1e-10 and d.max() <= 1 + 1e-10
