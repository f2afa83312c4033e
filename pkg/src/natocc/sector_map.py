"""Symmetry-adapted map between square amplitudes and natural occupations.

Inside a symmetry sector whose determinants pairwise differ by at least two
orbitals, the one-body density matrix is diagonal in the determinants'
orbitals and each occupation is a 0/1 combination of square amplitudes,
``n = M f``. When ``M`` is square it is inverted exactly in rational
arithmetic; row ``j`` of the inverse is the symmetry-adapted constraint
``d_j(n) = f_j``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import lcm
from typing import Sequence

import numpy as np

from .errors import (NotSquare, OutOfSectorPolytope, SectorOverlapViolation, Singular,
                     SumRuleViolation)
from .fock import Determinant
from .gpc import Constraint, ConstraintSet


def fraction_inverse(A):
    """Gauss-Jordan inverse over the rationals. Raises :class:`Singular`."""
    n = len(A)
    if any(len(row) != n for row in A):
        raise NotSquare(f"cannot invert a non-square {n}x{len(A[0]) if A else 0} matrix")
    X = [[Fraction(x) for x in row] for row in A]
    Y = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if X[r][col] != 0), None)
        if pivot is None:
            raise Singular("amplitude map is singular")
        X[col], X[pivot] = X[pivot], X[col]
        Y[col], Y[pivot] = Y[pivot], Y[col]
        inv = 1 / X[col][col]
        X[col] = [x * inv for x in X[col]]
        Y[col] = [y * inv for y in Y[col]]
        for r in range(n):
            if r != col and X[r][col] != 0:
                factor = X[r][col]
                X[r] = [a - factor * b for a, b in zip(X[r], X[col])]
                Y[r] = [a - factor * b for a, b in zip(Y[r], Y[col])]
    return Y


def _rank(A) -> int:
    X = [[Fraction(x) for x in row] for row in A]
    rank, ncols = 0, len(X[0]) if X else 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(X)) if X[r][col] != 0), None)
        if pivot is None:
            continue
        X[rank], X[pivot] = X[pivot], X[rank]
        for r in range(rank + 1, len(X)):
            if X[r][col] != 0:
                factor = X[r][col] / X[rank][col]
                X[r] = [a - factor * b for a, b in zip(X[r], X[rank])]
        rank += 1
    return rank


def spin_sum_rules(dets: Sequence[Determinant]) -> list:
    """One sum rule per spin channel: ``sum_k n_{k sigma} = N_sigma``."""
    norb = dets[0].norb
    rules = []
    for spin in (0, 1):
        idx = tuple(range(spin, norb, 2))
        rules.append((idx, sum(1 for p in dets[0].occ if p % 2 == spin)))
    return rules


@dataclass(frozen=True)
class AmplitudeMap:
    """Integer matrix ``M`` with ``n[row_labels] = M f`` (plus ``sum f = 1`` when flagged)."""

    M: tuple
    row_labels: tuple
    col_labels: tuple
    sum_rules: tuple
    includes_normalization_row: bool
    eliminated: tuple = ()
    constant_rows: tuple = ()
    convention: str = "drop highest flat index per sum rule; drop rows constant over the sector"

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.M, dtype=int)

    @property
    def norb(self) -> int:
        return self.col_labels[0].norb

    def occupancy(self) -> np.ndarray:
        """Full ``norb x D`` 0/1 matrix: occupation of every slot in every determinant."""
        return np.array([[d.bits >> p & 1 for d in self.col_labels] for p in range(self.norb)],
                        dtype=float)

    def occupations(self, f) -> np.ndarray:
        return self.occupancy() @ np.asarray(f, dtype=float)


def _occupancy_rows(dets, rows):
    return [[d.bits >> p & 1 for d in dets] for p in rows]


def build_amplitude_map(sector_basis: Sequence[Determinant], N: int | None = None,
                        L: int | None = None, sum_rules=None) -> AmplitudeMap:
    """Build ``M`` for a sector.

    ``sum_rules`` defaults to one rule per spin channel. Per rule the highest
    flat index is eliminated; rows that are constant over the sector carry no
    information and are dropped; a normalization row is appended when one more
    row is needed to make ``M`` square. If the result is singular every other
    choice of eliminated indices is tried before giving up.
    """
    dets = tuple(sector_basis)
    if not dets:
        raise NotSquare("empty sector basis")
    norb = dets[0].norb
    if N is not None and any(d.n_particles != N for d in dets):
        raise NotSquare(f"sector determinants do not all carry N={N} particles")
    if L is not None and norb != 2 * L:
        raise NotSquare(f"determinants span {norb} spin-orbitals, expected {2 * L}")
    for i, a in enumerate(dets):
        for b in dets[i + 1:]:
            if a.excitation_degree(b) == 1:
                raise SectorOverlapViolation(f"{a.label()} and {b.label()} differ by a single orbital")
    rules = tuple((tuple(sorted(idx)), int(val))
                  for idx, val in (spin_sum_rules(dets) if sum_rules is None else sum_rules))
    for idx, val in rules:
        for d in dets:
            if sum(d.bits >> p & 1 for p in idx) != val:
                raise SumRuleViolation(f"{d.label()} violates sum rule {idx} = {val}")

    D = len(dets)
    constant = tuple(p for p in range(norb) if len({d.bits >> p & 1 for d in dets}) == 1)
    choices = [sorted(idx, reverse=True) for idx, _ in rules]
    last_error = None
    for elim in product(*choices):
        if len(set(elim)) < len(elim):
            continue
        rows = [p for p in range(norb) if p not in elim and p not in constant]
        M = _occupancy_rows(dets, rows)
        norm_row = False
        if len(rows) == D - 1:
            M.append([1] * D)
            norm_row = True
        if len(M) != D:
            raise NotSquare(
                f"{D} determinants but {len(rows)} independent occupations; "
                "use the structural simplification from pinning to truncate the sector",
                determinants=D, occupations=len(rows))
        if _rank(M) == D:
            return AmplitudeMap(tuple(tuple(r) for r in M), tuple(rows), dets, rules,
                                norm_row, tuple(elim), constant)
        last_error = Singular(f"amplitude map singular for eliminated indices {elim}")
    raise last_error or Singular("amplitude map is singular")


@dataclass(frozen=True)
class SymmetryConstraintSet:
    """``f_j = d_j(n) = sum_p coefficients[j][p] n_p + constants[j]`` (exact rationals)."""

    amap: AmplitudeMap
    inverse: tuple
    coefficients: tuple
    constants: tuple
    denominator: int
    row_denominators: tuple = field(default=())

    @property
    def size(self) -> int:
        return len(self.constants)

    def integer_table(self):
        """Integer numerators of ``denominator * (coefficients | constants)``."""
        Z = self.denominator
        return [[int(c * Z) for c in row] + [int(k * Z)]
                for row, k in zip(self.coefficients, self.constants)]

    def coefficient_matrix(self) -> np.ndarray:
        return np.array([[float(c) for c in row] for row in self.coefficients])

    def evaluate(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        return self.coefficient_matrix() @ n + np.array([float(k) for k in self.constants])

    def evaluate_exact(self, n) -> list:
        return [sum((c * Fraction(x) for c, x in zip(row, n)), Fraction(0)) + k
                for row, k in zip(self.coefficients, self.constants)]

    def to_constraints(self) -> ConstraintSet:
        out = []
        for j, (row, k, Z) in enumerate(zip(self.coefficients, self.constants, self.row_denominators)):
            out.append(Constraint(int(k * Z), tuple(int(c * Z) for c in row),
                                  f"d{j + 1}:{self.amap.col_labels[j].label()}",
                                  normalization=Fraction(1, Z)))
        return ConstraintSet(tuple(out), name="symmetry-adapted")


def invert_map(amap: AmplitudeMap) -> SymmetryConstraintSet:
    inv = fraction_inverse(amap.M)
    norb = amap.norb
    coeffs, consts = [], []
    for row in inv:
        c = [Fraction(0)] * norb
        for r, p in enumerate(amap.row_labels):
            c[p] = row[r]
        consts.append(row[-1] if amap.includes_normalization_row else Fraction(0))
        coeffs.append(tuple(c))
    row_den = tuple(lcm(*[x.denominator for x in c], k.denominator)
                    for c, k in zip(coeffs, consts))
    Z = lcm(*row_den)
    return SymmetryConstraintSet(amap, tuple(tuple(r) for r in inv), tuple(coeffs), tuple(consts),
                                 Z, row_den)


def check_sum_rules(amap: AmplitudeMap, n, tol=1e-10):
    n = np.asarray(n, dtype=float)
    if n.shape != (amap.norb,):
        raise SumRuleViolation(f"occupation vector has length {n.shape}, expected {amap.norb}")
    for idx, val in amap.sum_rules:
        s = n[list(idx)].sum()
        if abs(s - val) > tol:
            raise SumRuleViolation(f"sum of n over {idx} is {s!r}, expected {val}")
    for p in amap.constant_rows:
        expected = amap.col_labels[0].bits >> p & 1
        if abs(n[p] - expected) > tol:
            raise SumRuleViolation(f"n[{p}] = {n[p]!r} but every sector determinant has {expected}")


def amplitudes_from_occupations(cset: SymmetryConstraintSet, n, tol=1e-10) -> np.ndarray:
    check_sum_rules(cset.amap, n, tol)
    f = cset.evaluate(n)
    if abs(f.sum() - 1.0) > tol:
        raise OutOfSectorPolytope(f"amplitudes sum to {f.sum()!r}")
    if (f < -tol).any():
        j = int(np.argmin(f))
        raise OutOfSectorPolytope(f"d_{j + 1}(n) = {f[j]!r} is negative", index=j)
    return f


def format_table(cset: SymmetryConstraintSet) -> str:
    """Aligned text rendering of ``M``, ``M^-1`` and the constraint table."""
    amap = cset.amap
    lines = ["M (rows: " + ", ".join(_slot_name(p) for p in amap.row_labels)
             + (", norm" if amap.includes_normalization_row else "") + ")"]
    lines.append("cols: " + "  ".join(d.label() for d in amap.col_labels))
    for row in amap.M:
        lines.append("  " + " ".join(f"{x:3d}" for x in row))
    lines.append(f"M^-1 x {cset.denominator}")
    for row in cset.inverse:
        lines.append("  " + " ".join(f"{int(x * cset.denominator):4d}" for x in row))
    lines.append("constraints")
    for j, (row, k, Z) in enumerate(zip(cset.coefficients, cset.constants, cset.row_denominators)):
        terms = [f"{int(c * Z):+d} n{_slot_name(p)}" for p, c in enumerate(row) if c != 0]
        if k != 0:
            terms.append(f"{int(k * Z):+d}")
        lines.append(f"  d{j + 1} = 1/{Z} ({' '.join(terms)})")
    return "\n".join(lines)


def _slot_name(p):
    return f"{p // 2}{'↑↓'[p % 2]}"
