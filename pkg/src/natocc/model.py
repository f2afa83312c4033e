"""Hamiltonians: integral sets, Hubbard builder, Slater-Condon matrix elements.

Two-body integrals use the physicist convention ``v[p,q,r,s] = <pq|v|rs>`` so
that

    H = sum_pq h[p,q] a+_p a_q + 1/2 sum_pqrs v[p,q,r,s] a+_p a+_q a_s a_r.

Worked example (L=2, site basis, on-site U): the only nonzero two-body
entries are ``v[2j, 2j+1, 2j, 2j+1] = v[2j+1, 2j, 2j+1, 2j] = U`` for each
site ``j``, which reproduces ``U n_{j up} n_{j down}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import ModelError, NonUnitaryTransform
from .fock import Determinant, apply_operators


@dataclass(frozen=True, eq=False)
class IntegralSet:
    h: np.ndarray
    v: np.ndarray
    basis_tag: str = "reference"

    def __post_init__(self):
        h = np.asarray(self.h, dtype=complex)
        v = np.asarray(self.v, dtype=complex)
        M = h.shape[0]
        if h.shape != (M, M) or v.shape != (M, M, M, M):
            raise ModelError(f"inconsistent integral shapes {h.shape} and {v.shape}")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "v", v)

    @property
    def norb(self) -> int:
        return self.h.shape[0]

    def check_symmetries(self, tol=1e-10) -> bool:
        h, v = self.h, self.v
        return (np.allclose(h, h.conj().T, atol=tol)
                and np.allclose(v, v.transpose(2, 3, 0, 1).conj(), atol=tol)
                and np.allclose(v, v.transpose(1, 0, 3, 2), atol=tol))

    def scaled_sum(self, other: "IntegralSet", weight: float) -> "IntegralSet":
        return IntegralSet(self.h + weight * other.h, self.v + weight * other.v, self.basis_tag)


@dataclass(frozen=True)
class QuenchProtocol:
    """Piecewise-constant Hamiltonian schedule.

    ``segments`` is a list of ``(t_start, IntegralSet)`` with the first entry
    at ``t = 0``. An optional ``perturbation`` is added with weight
    ``strength`` to every segment.
    """

    segments: tuple
    perturbation: IntegralSet | None = None
    strength: float = 0.0

    def __post_init__(self):
        segs = tuple((float(t), ints) for t, ints in self.segments)
        if not segs:
            raise ModelError("a quench protocol needs at least one segment")
        if segs[0][0] != 0.0:
            raise ModelError("the first segment must start at t=0")
        starts = [t for t, _ in segs]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ModelError("segment start times must be strictly increasing")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def constant(cls, ints: IntegralSet) -> "QuenchProtocol":
        return cls(((0.0, ints),))

    def segment_index(self, t: float) -> int:
        idx = 0
        for i, (t0, _) in enumerate(self.segments):
            if t >= t0 - 1e-12:
                idx = i
        return idx

    def integrals_at(self, t: float) -> IntegralSet:
        ints = self.segments[self.segment_index(t)][1]
        if self.perturbation is not None and self.strength:
            ints = ints.scaled_sum(self.perturbation, self.strength)
        return ints


def _site_hubbard(L, t_hop, U, periodic):
    M = 2 * L
    h = np.zeros((M, M))
    bonds = [(j, j + 1) for j in range(L - 1)]
    if periodic and L > 2:
        bonds.append((L - 1, 0))
    elif periodic and L == 2:
        # both bonds of the two-site ring connect the same pair
        bonds = [(0, 1), (1, 0)]
    for i, j in bonds:
        for s in (0, 1):
            h[2 * i + s, 2 * j + s] -= t_hop
            h[2 * j + s, 2 * i + s] -= t_hop
    v = np.zeros((M, M, M, M))
    for j in range(L):
        up, dn = 2 * j, 2 * j + 1
        v[up, dn, up, dn] = U
        v[dn, up, dn, up] = U
    return h, v


def build_hubbard(L: int, t_hop: float, U: float, periodic: bool = True,
                  basis: str = "momentum") -> IntegralSet:
    """One-band Hubbard chain.

    In the momentum basis orbital ``k`` has energy ``-2 t cos(2 pi k / L)``
    and the on-site repulsion becomes the momentum-conserving scattering
    amplitude ``U/L`` between opposite spins.
    """
    if L < 2:
        raise ModelError(f"Hubbard chain needs L >= 2, got {L}")
    if basis == "site":
        h, v = _site_hubbard(L, t_hop, U, periodic)
        return IntegralSet(h, v, "site")
    if basis != "momentum":
        raise ModelError(f"unknown basis {basis!r}")
    if not periodic:
        raise ModelError("open chains have no momentum basis; use basis='site'")
    M = 2 * L
    h = np.zeros((M, M))
    for k in range(L):
        eps = -2.0 * t_hop * np.cos(2.0 * np.pi * k / L)
        h[2 * k, 2 * k] = h[2 * k + 1, 2 * k + 1] = eps
    v = np.zeros((M, M, M, M))
    for a in range(L):
        for b in range(L):
            for c in range(L):
                d = (a + b - c) % L
                for s in (0, 1):
                    v[2 * a + s, 2 * b + 1 - s, 2 * c + s, 2 * d + 1 - s] = U / L
    return IntegralSet(h, v, "momentum")


def fourier_matrix(L: int) -> np.ndarray:
    """Unitary mapping momentum spin-orbitals to site spin-orbitals (columns = momentum orbitals)."""
    F = np.zeros((2 * L, 2 * L), dtype=complex)
    for j in range(L):
        for k in range(L):
            amp = np.exp(2j * np.pi * k * j / L) / np.sqrt(L)
            F[2 * j, 2 * k] = F[2 * j + 1, 2 * k + 1] = amp
    return F


def _rotate(h, v, C):
    Cc = C.conj()
    h2 = Cc.T @ h @ C
    v2 = np.einsum("pqrs,pa->aqrs", v, Cc, optimize=True)
    v2 = np.einsum("aqrs,qb->abrs", v2, Cc, optimize=True)
    v2 = np.einsum("abrs,rc->abcs", v2, C, optimize=True)
    v2 = np.einsum("abcs,sd->abcd", v2, C, optimize=True)
    return h2, v2


def transform_integrals(ints: IntegralSet, C: np.ndarray, *, check=True, tag=None) -> IntegralSet:
    """Integrals in the orbital basis given by the columns of ``C``.

    ``h' = C^H h C`` and every index of ``v`` is contracted with ``C``
    (conjugated on the bra side).
    """
    C = np.asarray(C, dtype=complex)
    if C.shape != ints.h.shape:
        raise NonUnitaryTransform(f"orbital matrix has shape {C.shape}, expected {ints.h.shape}")
    if check:
        err = np.abs(C.conj().T @ C - np.eye(C.shape[0])).max()
        if err > 1e-10:
            raise NonUnitaryTransform(f"orbital matrix is not unitary (deviation {err:.2e})")
    h2, v2 = _rotate(ints.h, ints.v, C)
    return IntegralSet(h2, v2, tag or f"{ints.basis_tag}->rotated")


def slater_condon_element(a: Determinant, b: Determinant, ints: IntegralSet) -> complex:
    """``<a|H|b>`` by the Slater-Condon rules."""
    if a.norb != b.norb or a.norb != ints.norb:
        raise ModelError("determinants and integrals span different orbital sets")
    if a.n_particles != b.n_particles:
        return 0.0
    h, v = ints.h, ints.v
    only_a = [p for p in a.occ if not b.is_occupied(p)]
    only_b = [p for p in b.occ if not a.is_occupied(p)]
    degree = len(only_a)
    if degree == 0:
        occ = a.occ
        val = sum(h[p, p] for p in occ)
        for i, p in enumerate(occ):
            for q in occ[i + 1:]:
                val += v[p, q, p, q] - v[p, q, q, p]
        return complex(val)
    if degree == 1:
        p, r = only_a[0], only_b[0]
        _, sign = apply_operators(b.bits, [("+", p), ("-", r)])
        common = [q for q in b.occ if q != r]
        val = h[p, r] + sum(v[p, q, r, q] - v[p, q, q, r] for q in common)
        return complex(sign * val)
    if degree == 2:
        p, q = only_a
        r, s = only_b
        _, sign = apply_operators(b.bits, [("+", p), ("+", q), ("-", s), ("-", r)])
        return complex(sign * (v[p, q, r, s] - v[p, q, s, r]))
    return 0.0


def build_many_body_matrix(basis: Sequence[Determinant], ints: IntegralSet) -> np.ndarray:
    if not basis:
        raise ModelError("empty determinant basis")
    n = len(basis)
    H = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(i, n):
            H[i, j] = slater_condon_element(basis[i], basis[j], ints)
            H[j, i] = np.conj(H[i, j])
    return H


@dataclass(frozen=True, eq=False)
class SlaterCondonPlan:
    """Precomputed Slater-Condon bookkeeping for a fixed determinant basis.

    ``evaluate`` returns the same matrix as ``build_many_body_matrix`` but only
    does array indexing, which matters inside time-stepping loops.
    """

    basis: tuple
    _diag: list = field(repr=False)
    _single: list = field(repr=False)
    _double: list = field(repr=False)

    @classmethod
    def for_basis(cls, basis: Sequence[Determinant]) -> "SlaterCondonPlan":
        return _plan(tuple(basis))

    def evaluate(self, ints: IntegralSet) -> np.ndarray:
        h, v = ints.h, ints.v
        n = len(self.basis)
        H = np.zeros((n, n), dtype=complex)
        for i, occ in self._diag:
            o = np.asarray(occ)
            vv = v[np.ix_(o, o, o, o)]
            dir_ = np.einsum("pqpq->", vv)
            exc = np.einsum("pqqp->", vv)
            H[i, i] = h[o, o].sum() + 0.5 * (dir_ - exc)
        for i, j, p, r, common, sign in self._single:
            c = np.asarray(common, dtype=int)
            val = h[p, r] + (v[p, c, r, c] - v[p, c, c, r]).sum()
            H[i, j] = sign * val
            H[j, i] = np.conj(H[i, j])
        for i, j, p, q, r, s, sign in self._double:
            H[i, j] = sign * (v[p, q, r, s] - v[p, q, s, r])
            H[j, i] = np.conj(H[i, j])
        return H


@lru_cache(maxsize=64)
def _plan(basis: tuple) -> SlaterCondonPlan:
    diag, single, double = [], [], []
    for i, a in enumerate(basis):
        diag.append((i, a.occ))
        for j in range(i + 1, len(basis)):
            b = basis[j]
            only_a = [p for p in a.occ if not b.is_occupied(p)]
            only_b = [p for p in b.occ if not a.is_occupied(p)]
            if len(only_a) == 1:
                p, r = only_a[0], only_b[0]
                _, sign = apply_operators(b.bits, [("+", p), ("-", r)])
                single.append((i, j, p, r, tuple(q for q in b.occ if q != r), sign))
            elif len(only_a) == 2:
                p, q = only_a
                r, s = only_b
                _, sign = apply_operators(b.bits, [("+", p), ("+", q), ("-", s), ("-", r)])
                double.append((i, j, p, q, r, s, sign))
    return SlaterCondonPlan(basis, diag, single, double)
