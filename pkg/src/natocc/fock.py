"""Fock-space basis for a finite set of spin-orbitals.

Spin-orbitals are labelled by a flat index ``p = 2*k + s`` where ``k`` is the
site (or momentum) index and ``s`` is 0 for spin up and 1 for spin down.
A determinant is stored as an integer bit pattern, bit ``p`` set when the
spin-orbital ``p`` is occupied, and represents the ordered product
``a+_{p1} a+_{p2} ... |0>`` with ``p1 < p2 < ...``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import NamedTuple, Sequence

import numpy as np

from .errors import FockError

UP, DOWN = 0, 1
_ARROWS = ("↑", "↓")


class SpinOrbital(NamedTuple):
    index: int
    spin: int

    @property
    def flat(self) -> int:
        return 2 * self.index + self.spin

    @classmethod
    def from_flat(cls, p: int) -> "SpinOrbital":
        return cls(p // 2, p % 2)

    def __str__(self):
        return f"{self.index}{_ARROWS[self.spin]}"


@dataclass(frozen=True)
class Determinant:
    """Occupation bit pattern over ``norb`` spin-orbitals."""

    bits: int
    norb: int

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.norb:
            raise FockError(f"bit pattern {self.bits:b} does not fit in {self.norb} orbitals")

    @classmethod
    def from_occ(cls, occ: Sequence[int], norb: int) -> "Determinant":
        bits = 0
        for p in occ:
            if not 0 <= p < norb:
                raise FockError(f"orbital {p} outside [0, {norb})")
            if bits >> p & 1:
                raise FockError(f"orbital {p} listed twice")
            bits |= 1 << p
        return cls(bits, norb)

    @property
    def occ(self) -> tuple:
        return _occ(self.bits)

    @property
    def n_particles(self) -> int:
        return bin(self.bits).count("1")

    def is_occupied(self, p: int) -> bool:
        return bool(self.bits >> p & 1)

    def occupation_vector(self) -> np.ndarray:
        return np.array([self.bits >> p & 1 for p in range(self.norb)], dtype=float)

    def magnetization(self) -> Fraction:
        n_up = sum(1 for p in self.occ if p % 2 == UP)
        return Fraction(2 * n_up - self.n_particles, 2)

    def bloch_number(self, L: int) -> int:
        return sum(p // 2 for p in self.occ) % L

    def excitation_degree(self, other: "Determinant") -> int:
        return bin(self.bits & ~other.bits).count("1")

    def label(self) -> str:
        return "|" + "".join(str(SpinOrbital.from_flat(p)) for p in self.occ) + "⟩"

    def __str__(self):
        return self.label()


@lru_cache(maxsize=None)
def _occ(bits: int) -> tuple:
    out = []
    p = 0
    while bits:
        if bits & 1:
            out.append(p)
        bits >>= 1
        p += 1
    return tuple(out)


@dataclass(frozen=True)
class SectorLabel:
    """Magnetization ``m`` (half-integer) and total Bloch number ``T`` (mod L)."""

    m: Fraction
    T: int

    def __post_init__(self):
        m = Fraction(self.m)
        if m.denominator not in (1, 2):
            raise FockError(f"magnetization {self.m} is not a half-integer")
        object.__setattr__(self, "m", m)

    def contains(self, det: Determinant, L: int) -> bool:
        return det.magnetization() == self.m and det.bloch_number(L) == self.T % L


def enumerate_determinants(N: int, L: int) -> list[Determinant]:
    """All ``C(2L, N)`` determinants, ordered lexicographically by occupied indices."""
    if L < 1:
        raise FockError(f"need at least one site, got L={L}")
    if not 0 <= N <= 2 * L:
        raise FockError(f"cannot place N={N} fermions in {2 * L} spin-orbitals")
    norb = 2 * L
    return [Determinant.from_occ(c, norb) for c in combinations(range(norb), N)]


def sector_filter(dets: Sequence[Determinant], label: SectorLabel, L: int) -> list[Determinant]:
    return [d for d in dets if label.contains(d, L)]


def sector_labels(dets: Sequence[Determinant], L: int) -> list[SectorLabel]:
    """Distinct (m, T) labels present in ``dets``, sorted by (m, T)."""
    seen = {(d.magnetization(), d.bloch_number(L)) for d in dets}
    return [SectorLabel(m, T) for m, T in sorted(seen)]


def _sign_below(bits: int, p: int) -> int:
    return -1 if bin(bits & ((1 << p) - 1)).count("1") % 2 else 1


def annihilate(bits: int, p: int):
    """``a_p`` on a bit pattern; returns (bits, sign) or None."""
    if not bits >> p & 1:
        return None
    return bits & ~(1 << p), _sign_below(bits, p)


def create(bits: int, p: int):
    """``a+_p`` on a bit pattern; returns (bits, sign) or None."""
    if bits >> p & 1:
        return None
    return bits | (1 << p), _sign_below(bits, p)


def apply_operators(bits: int, ops):
    """Apply an operator string to a bit pattern.

    ``ops`` is written left to right as in the operator product, e.g.
    ``[("+", r), ("+", s), ("-", q), ("-", p)]`` for ``a+_r a+_s a_q a_p``;
    the rightmost operator acts first. Returns (bits, sign) or None.
    """
    sign = 1
    for kind, p in reversed(ops):
        res = create(bits, p) if kind == "+" else annihilate(bits, p)
        if res is None:
            return None
        bits, s = res
        sign *= s
    return bits, sign


def apply_excitation(det: Determinant, create: int, annihilate: int):
    """``a+_create a_annihilate |det>`` as (Determinant, sign), or None if it vanishes."""
    res = apply_operators(det.bits, [("+", create), ("-", annihilate)])
    if res is None:
        return None
    bits, sign = res
    return Determinant(bits, det.norb), sign


def determinant_overlaps(C: np.ndarray, rows: Sequence[Determinant],
                         cols: Sequence[Determinant]) -> np.ndarray:
    """Matrix ``U[i, j] = <rows_i | cols_j~>`` where ``cols`` are built from orbitals ``C``.

    Column ``k`` of ``C`` holds the expansion of the rotated orbital ``k`` in
    the reference spin-orbitals, so the rotated determinant with occupied
    slots ``A`` has the amplitude ``det(C[D, A])`` on the reference
    determinant ``D``.
    """
    C = np.asarray(C)
    U = np.zeros((len(rows), len(cols)), dtype=complex)
    for j, b in enumerate(cols):
        cocc = list(b.occ)
        for i, a in enumerate(rows):
            if a.n_particles != len(cocc):
                continue
            U[i, j] = np.linalg.det(C[np.ix_(a.occ, cocc)]) if cocc else 1.0
    return U
