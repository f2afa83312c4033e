"""Shared fixtures and independent oracles.

The Jordan-Wigner oracle builds fermion operators as dense matrices on the
full Fock space (basis index = occupation bit pattern) without touching the
package's determinant algebra, so Slater-Condon elements and density
matrices can be checked against brute-force operator products.
"""
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest

from natocc.fock import SectorLabel, enumerate_determinants, sector_filter
from natocc.model import IntegralSet, build_hubbard, build_many_body_matrix
from natocc.sector_map import build_amplitude_map, invert_map


@lru_cache(maxsize=8)
def jw_annihilators(M):
    """Dense ``a_p`` on the ``2**M`` Fock space."""
    dim = 2 ** M
    ops = []
    for p in range(M):
        a = np.zeros((dim, dim))
        for state in range(dim):
            if state >> p & 1:
                parity = bin(state & ((1 << p) - 1)).count("1")
                a[state ^ (1 << p), state] = (-1) ** parity
        ops.append(a)
    return tuple(ops)


def jw_hamiltonian(ints, tol=0.0):
    M = ints.norb
    a = jw_annihilators(M)
    ad = [x.T for x in a]
    H = np.zeros((2 ** M, 2 ** M), dtype=complex)
    for p, q in zip(*np.nonzero(np.abs(ints.h) > tol)):
        H += ints.h[p, q] * ad[p] @ a[q]
    for p, q, r, s in zip(*np.nonzero(np.abs(ints.v) > tol)):
        H += 0.5 * ints.v[p, q, r, s] * ad[p] @ ad[q] @ a[s] @ a[r]
    return H


def jw_embed(psi, basis):
    """Sector amplitudes -> Fock-space vector."""
    out = np.zeros(2 ** basis[0].norb, dtype=complex)
    for c, d in zip(psi, basis):
        out[d.bits] = c
    return out


def jw_rdms(psi, basis):
    M = basis[0].norb
    a = jw_annihilators(M)
    v = jw_embed(psi, basis)
    av = [x @ v for x in a]
    gamma = np.array([[np.vdot(av[q], av[p]) for q in range(M)] for p in range(M)])
    G = np.zeros((M,) * 4, dtype=complex)
    for p in range(M):
        for q in range(M):
            qp = a[q] @ av[p]
            for r in range(M):
                for s in range(M):
                    sr = a[s] @ av[r]
                    # <a+_r a+_s a_q a_p> = <a_s a_r psi | a_q a_p psi>
                    G[p, q, r, s] = np.vdot(sr, qp)
    return gamma, G


def random_integrals(M, rng, scale=1.0):
    h = rng.normal(size=(M, M)) + 1j * rng.normal(size=(M, M))
    h = 0.5 * (h + h.conj().T)
    w = rng.normal(size=(M,) * 4) + 1j * rng.normal(size=(M,) * 4)
    v = (w + w.transpose(1, 0, 3, 2) + w.transpose(2, 3, 0, 1).conj()
         + w.transpose(3, 2, 1, 0).conj()) / 4
    return IntegralSet(scale * h, scale * v, "random")


def random_state(n, rng):
    psi = rng.normal(size=n) + 1j * rng.normal(size=n)
    return psi / np.linalg.norm(psi)


def random_unitary(n, rng):
    Q, R = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return Q * (np.diag(R) / np.abs(np.diag(R)))[None, :]


@pytest.fixture(scope="session")
def h34_basis():
    return sector_filter(enumerate_determinants(3, 4), SectorLabel(Fraction(1, 2), 1), 4)


@pytest.fixture(scope="session")
def h34_cset(h34_basis):
    return invert_map(build_amplitude_map(h34_basis, 3, 4))


@pytest.fixture(scope="session")
def h34_ground(h34_basis):
    """Ground state of the U=1 chain in the (3,4) sector."""
    H = build_many_body_matrix(h34_basis, build_hubbard(4, 1.0, 1.0))
    E, X = np.linalg.eigh(H)
    return E, X[:, 0].astype(complex)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def jw_total_spin_squared(basis):
    """``S^2`` projected on ``basis`` (spin-orbital pairs ``2k``, ``2k+1``)."""
    M = basis[0].norb
    a = jw_annihilators(M)
    ad = [x.T for x in a]
    sp = sum(ad[2 * k] @ a[2 * k + 1] for k in range(M // 2))
    sz = 0.5 * sum(ad[2 * k] @ a[2 * k] - ad[2 * k + 1] @ a[2 * k + 1] for k in range(M // 2))
    S2 = sp.T @ sp + sz @ sz + sz
    idx = [d.bits for d in basis]
    return S2[np.ix_(idx, idx)]


BD_PINNED = ((0, 1, 2), (0, 3, 4), (1, 3, 5))


def bd_pinned_state(rng, gap=1e-3):
    """Random state in span{|123>, |145>, |246>} with strictly ordered occupations,
    written in a randomly rotated orbital basis. Returns (psi, basis)."""
    from natocc.fock import Determinant, determinant_overlaps
    basis = enumerate_determinants(3, 3)
    while True:
        f = rng.dirichlet(np.ones(3))
        n = np.array([f[0] + f[1], f[0] + f[2], f[0], f[1] + f[2], f[1], f[2]])
        if np.diff(n).max() < -gap:
            break
    psi = np.zeros(len(basis), dtype=complex)
    index = {d.bits: i for i, d in enumerate(basis)}
    for w, occ in zip(f, BD_PINNED):
        psi[index[Determinant.from_occ(occ, 6).bits]] = np.sqrt(w) * np.exp(2j * np.pi * rng.random())
    U = determinant_overlaps(random_unitary(6, rng), basis, basis)
    return U @ psi, basis


def pinning_check(psi, basis, constraint):
    """``(D(n), ||D^ psi||, <D^>)`` with everything evaluated in the state's natural orbitals."""
    from natocc.gpc import apply_constraint_operator, constraint_operator_expectations
    from natocc.gpc import natural_frame_state
    frame, U = natural_frame_state(psi, basis, descending=True)
    c = U.conj().T @ psi
    D = constraint.evaluate(frame.occupations)
    norm = np.linalg.norm(apply_constraint_operator(constraint, c, basis))
    mean, _ = constraint_operator_expectations(constraint, c, basis)
    return D, norm, mean


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
