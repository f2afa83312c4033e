"""Reduced density matrices, natural orbitals and their gauge.

Conventions (flat spin-orbital indices throughout):

* ``gamma[p, q] = <a+_q a_p>``, trace ``N``.
* ``Gamma[p, q, r, s] = <a+_r a+_s a_q a_p>`` (unit normalization), so that
  ``sum_q Gamma[p, q, r, q] = (N - 1) gamma[p, r]``.
* ``W[j, k] = W_PREFACTOR * sum_{q r s} <jq|v|rs> Gamma[r, s, k, q]`` in the
  natural-orbital frame, for which ``dn_k/dt = 2 Im W[k, k]``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DegenerateSpectrum, UnnormalizedState
from .fock import Determinant, apply_operators

# Frozen by scripts/calibrate_w.py against finite-difference occupation rates.
W_PREFACTOR = 1.0

DEGENERACY_TOL = 1e-8
JITTER = 1e-10
COUPLING_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class NaturalFrame:
    """Occupations, natural orbitals (columns of ``orbitals``) and accumulated gauge phases."""

    occupations: np.ndarray
    orbitals: np.ndarray
    geo_phase_accum: np.ndarray

    @classmethod
    def reference(cls, norb: int) -> "NaturalFrame":
        return cls(np.zeros(norb), np.eye(norb, dtype=complex), np.zeros(norb))

    @property
    def norb(self) -> int:
        return self.orbitals.shape[0]

    def with_orbitals(self, C) -> "NaturalFrame":
        return replace(self, orbitals=np.asarray(C, dtype=complex))

    def orthonormality_error(self) -> float:
        C = self.orbitals
        return float(np.abs(C.conj().T @ C - np.eye(C.shape[1])).max())


@lru_cache(maxsize=64)
def _one_body_table(basis: tuple):
    index = {d.bits: i for i, d in enumerate(basis)}
    norb = basis[0].norb
    rows = []
    for i, d in enumerate(basis):
        for p in d.occ:
            for q in range(norb):
                res = apply_operators(d.bits, [("+", q), ("-", p)])
                if res is None or res[0] not in index:
                    continue
                rows.append((index[res[0]], i, p, q, res[1]))
    return np.array(rows, dtype=int).reshape(-1, 5)


@lru_cache(maxsize=64)
def _two_body_table(basis: tuple):
    index = {d.bits: i for i, d in enumerate(basis)}
    norb = basis[0].norb
    rows = []
    for i, d in enumerate(basis):
        occ = d.occ
        for p in occ:
            for q in occ:
                if p == q:
                    continue
                for r in range(norb):
                    for s in range(norb):
                        if r == s:
                            continue
                        res = apply_operators(d.bits, [("+", r), ("+", s), ("-", q), ("-", p)])
                        if res is None or res[0] not in index:
                            continue
                        rows.append((index[res[0]], i, p, q, r, s, res[1]))
    return np.array(rows, dtype=int).reshape(-1, 7)


def _check_state(psi, basis, tol=1e-10):
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (len(basis),):
        raise UnnormalizedState(f"amplitude vector has shape {psi.shape}, basis has {len(basis)} entries")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > tol:
        raise UnnormalizedState(f"state norm is {norm!r}, expected 1")
    return psi


def one_rdm(psi, basis: Sequence[Determinant], *, tol=1e-10) -> np.ndarray:
    """``gamma[p, q] = <psi| a+_q a_p |psi>``.

    The basis must contain the support of ``psi``; terms leaving the basis
    carry no amplitude and are dropped.
    """
    psi = _check_state(psi, basis, tol)
    basis = tuple(basis)
    norb = basis[0].norb
    tab = _one_body_table(basis)
    gamma = np.zeros((norb, norb), dtype=complex)
    if len(tab):
        j, i, p, q, sign = tab.T
        np.add.at(gamma, (p, q), sign * psi[j].conj() * psi[i])
    return gamma


def two_rdm(psi, basis: Sequence[Determinant], *, tol=1e-10) -> np.ndarray:
    """``Gamma[p, q, r, s] = <psi| a+_r a+_s a_q a_p |psi>``."""
    psi = _check_state(psi, basis, tol)
    return _two_rdm_unchecked(psi, tuple(basis))


def _two_rdm_unchecked(psi, basis: tuple) -> np.ndarray:
    norb = basis[0].norb
    tab = _two_body_table(basis)
    G = np.zeros((norb,) * 4, dtype=complex)
    if len(tab):
        j, i, p, q, r, s, sign = tab.T
        np.add.at(G, (p, q, r, s), sign * psi[j].conj() * psi[i])
    return G


def fix_gauge(C: np.ndarray, tol=1e-12) -> np.ndarray:
    """Make the largest-magnitude component of each column real positive.

    Ties (within ``tol``) go to the lowest flat index.
    """
    C = np.array(C, dtype=complex)
    for k in range(C.shape[1]):
        mag = np.abs(C[:, k])
        idx = int(np.flatnonzero(mag >= mag.max() - tol)[0])
        C[:, k] *= np.exp(-1j * np.angle(C[idx, k]))
    return C


def _check_degeneracy(n, tol):
    order = np.sort(n)
    gaps = np.diff(order)
    if len(gaps) and gaps.min() < tol:
        i = int(np.argmin(gaps))
        raise DegenerateSpectrum(
            f"occupations {order[i]!r} and {order[i + 1]!r} differ by less than {tol:g}",
            occupations=[float(order[i]), float(order[i + 1])])


def _greedy_match(overlap: np.ndarray) -> np.ndarray:
    """``perm[k]`` = new column assigned to previous column ``k``, greedy on descending |overlap|."""
    n = overlap.shape[0]
    mag = np.abs(overlap)
    order = np.argsort(-mag, axis=None, kind="stable")
    perm = -np.ones(n, dtype=int)
    used = np.zeros(n, dtype=bool)
    for flat in order:
        k, j = divmod(int(flat), n)
        if perm[k] < 0 and not used[j]:
            perm[k] = j
            used[j] = True
    return perm


def natural_spectrum(gamma, prev: NaturalFrame | None = None, *, strict=False,
                     degeneracy_tol=DEGENERACY_TOL, jitter=False) -> NaturalFrame:
    """Diagonalize ``gamma``.

    Without ``prev`` the occupations come out descending and each orbital is
    gauge-fixed by :func:`fix_gauge`. With ``prev`` the orbitals are matched
    to the previous ones by maximal overlap and phase-aligned so that
    ``<prev_k|new_k>`` is real positive.
    """
    gamma = np.asarray(gamma, dtype=complex)
    gamma = 0.5 * (gamma + gamma.conj().T)
    if jitter:
        gamma = gamma + np.diag(JITTER * np.arange(gamma.shape[0]))
    n, C = np.linalg.eigh(gamma)
    n, C = n[::-1], C[:, ::-1]
    if strict:
        _check_degeneracy(n, degeneracy_tol)
    if prev is None:
        return NaturalFrame(n.copy(), fix_gauge(C), np.zeros(len(n)))
    ov = prev.orbitals.conj().T @ C
    perm = _greedy_match(ov)
    C = C[:, perm]
    n = n[perm]
    d = np.einsum("pk,pk->k", prev.orbitals.conj(), C)
    C = C * np.exp(-1j * np.angle(d))[None, :]
    return NaturalFrame(n.copy(), C, prev.geo_phase_accum.copy())


def occupations_in_frame(gamma, C) -> np.ndarray:
    return np.real(np.einsum("pk,pq,qk->k", np.conj(C), gamma, C))


def compute_W(Gamma, ints, frame: NaturalFrame | None = None) -> np.ndarray:
    """``W`` in the natural-orbital frame (or the reference frame when ``frame`` is None)."""
    W = W_PREFACTOR * np.einsum("aqrs,rsbq->ab", ints.v, Gamma, optimize=True)
    if frame is None:
        return W
    C = frame.orbitals
    return C.conj().T @ W @ C


def orbital_connection(h_no, W_no, n, *, degeneracy_tol=DEGENERACY_TOL, strict=True,
                       coupling_tol=COUPLING_TOL):
    """Off-diagonal ``A[j, k] = <phi_j|d phi_k/dt>`` from the natural-orbital equation.

    ``i A[j, k] = h[j, k] + (W[j, k] - conj(W[k, j])) / (n_k - n_j)`` for
    ``j != k``; the diagonal is zero (parallel-transport gauge).

    A pair with ``|n_k - n_j| < degeneracy_tol`` is singular only when its
    coupling ``W[j, k] - conj(W[k, j])`` exceeds ``coupling_tol``. Pairs whose
    coupling vanishes (typically orbitals of different symmetry) cross
    freely and contribute only ``h[j, k]``. Returns ``(A, singular_pairs)``;
    ``A`` is None when singular pairs exist and ``strict`` is set, otherwise
    singular terms are dropped.
    """
    n = np.asarray(n, dtype=float)
    M = len(n)
    num = W_no - W_no.conj().T
    den = n[None, :] - n[:, None]
    off = ~np.eye(M, dtype=bool)
    close = off & (np.abs(den) < degeneracy_tol)
    bad = close & (np.abs(num) > coupling_tol)
    pairs = [(int(j), int(k)) for j, k in zip(*np.nonzero(np.triu(bad | bad.T)))]
    if pairs and strict:
        return None, pairs
    den = np.where(close | ~off, 1.0, den)
    A = -1j * (h_no + np.where(close, 0.0, num / den))
    A[~off] = 0.0
    return A, pairs


def parallel_transport_step(frame_prev: NaturalFrame, frame_new: NaturalFrame, dt: float) -> NaturalFrame:
    """Remove the phase of ``<prev_k|new_k>`` from each new orbital and accumulate it."""
    d = np.einsum("pk,pk->k", frame_prev.orbitals.conj(), frame_new.orbitals)
    delta = np.angle(d)
    C = frame_new.orbitals * np.exp(-1j * delta)[None, :]
    return NaturalFrame(frame_new.occupations.copy(), C, frame_prev.geo_phase_accum + delta)


def transport_residual(frame_prev: NaturalFrame, frame_new: NaturalFrame, dt: float) -> float:
    """``max_k |Im <prev_k|new_k>| / dt``."""
    d = np.einsum("pk,pk->k", frame_prev.orbitals.conj(), frame_new.orbitals)
    return float(np.abs(d.imag).max() / abs(dt))
