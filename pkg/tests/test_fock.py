from fractions import Fraction
from itertools import combinations
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from natocc.errors import FockError
from natocc.fock import (Determinant, SectorLabel, SpinOrbital, annihilate, apply_excitation,
                         apply_operators, create, determinant_overlaps, enumerate_determinants,
                         sector_filter, sector_labels)

from conftest import random_unitary


def test_flat_index_roundtrip():
    for p in range(10):
        assert SpinOrbital.from_flat(p).flat == p
    assert SpinOrbital(3, 1).flat == 7
    assert str(SpinOrbital(2, 0)) == "2↑"


@pytest.mark.parametrize("N,L", [(0, 1), (1, 2), (3, 4), (4, 4), (8, 4)])
def test_enumeration_count_and_order(N, L):
    dets = enumerate_determinants(N, L)
    assert len(dets) == comb(2 * L, N)
    assert [d.occ for d in dets] == list(combinations(range(2 * L), N))


def test_enumeration_rejects_bad_counts():
    with pytest.raises(FockError):
        enumerate_determinants(5, 2)
    with pytest.raises(FockError):
        enumerate_determinants(1, 0)
    with pytest.raises(FockError):
        Determinant.from_occ([0, 0], 4)
    with pytest.raises(FockError):
        Determinant.from_occ([4], 4)


def test_quantum_numbers():
    d = Determinant.from_occ([0, 1, 2], 8)
    assert d.label() == "|0↑0↓1↑⟩"
    assert d.magnetization() == Fraction(1, 2)
    assert d.bloch_number(4) == 1
    assert d.occupation_vector().tolist() == [1, 1, 1, 0, 0, 0, 0, 0]


def test_h34_sector_contents(h34_basis):
    labels = {d.label() for d in h34_basis}
    assert labels == {"|0↑0↓1↑⟩", "|1↑1↓3↑⟩", "|1↑2↑2↓⟩",
                      "|0↑2↓3↑⟩", "|0↑2↑3↓⟩", "|0↓2↑3↑⟩"}


def test_sectors_partition_the_space():
    dets = enumerate_determinants(3, 4)
    labs = sector_labels(dets, 4)
    total = sum(len(sector_filter(dets, lab, 4)) for lab in labs)
    assert total == len(dets)
    with pytest.raises(FockError):
        SectorLabel(Fraction(1, 3), 0)


bits8 = st.integers(min_value=0, max_value=2 ** 8 - 1)
orb8 = st.integers(min_value=0, max_value=7)


def _as_vector(pairs, dim=256):
    out = np.zeros(dim)
    for res, w in pairs:
        if res is not None:
            out[res[0]] += w * res[1]
    return out


@given(bits8, orb8, orb8)
def test_canonical_anticommutator(bits, p, q):
    # {a_p, a+_q} |bits> = delta_pq |bits>
    def a(b, k):
        return annihilate(b, k)

    def ad(b, k):
        return create(b, k)

    lhs = []
    r = ad(bits, q)
    if r is not None:
        s = a(r[0], p)
        lhs.append((s, r[1]))
    r = a(bits, p)
    if r is not None:
        s = ad(r[0], q)
        lhs.append((s, r[1]))
    vec = _as_vector(lhs)
    expected = np.zeros(256)
    if p == q:
        expected[bits] = 1.0
    assert np.array_equal(vec, expected)


@given(bits8, orb8, orb8)
def test_creators_anticommute(bits, p, q):
    r1 = apply_operators(bits, [("+", p), ("+", q)])
    r2 = apply_operators(bits, [("+", q), ("+", p)])
    v = _as_vector([(r1, 1), (r2, 1)])
    assert not v.any()


def test_sign_rule_counts_orbitals_below():
    # a_2 on |0 1 2> passes two occupied orbitals
    assert annihilate(0b111, 2) == (0b011, 1)
    assert annihilate(0b111, 1) == (0b101, -1)
    assert create(0b101, 1) == (0b111, -1)
    assert annihilate(0b101, 1) is None


def test_apply_excitation():
    d = Determinant.from_occ([0, 1, 2], 8)
    new, sign = apply_excitation(d, 5, 0)
    assert new.occ == (1, 2, 5)
    assert sign == 1
    new, sign = apply_excitation(d, 3, 1)
    assert new.occ == (0, 2, 3) and sign == -1
    assert apply_excitation(d, 1, 0) is None


def test_determinant_overlaps_identity_and_unitarity(rng):
    dets = enumerate_determinants(2, 2)
    U = determinant_overlaps(np.eye(4), dets, dets)
    assert np.allclose(U, np.eye(len(dets)))
    C = random_unitary(4, rng)
    U = determinant_overlaps(C, dets, dets)
    assert np.allclose(U.conj().T @ U, np.eye(len(dets)), atol=1e-12)


def test_excitation_degree():
    a = Determinant.from_occ([0, 1, 2], 8)
    b = Determinant.from_occ([0, 4, 5], 8)
    assert a.excitation_degree(b) == 2
    assert a.excitation_degree(a) == 0
