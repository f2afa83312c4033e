"""Fit the prefactor of W against finite-difference occupation rates.

Evolves random states under random Hamiltonians, measures dn_k/dt with a
centered difference along the tracked natural orbitals and regresses it on
2 Im W_kk computed with a unit prefactor. The fitted slope should be 1.
"""
import argparse

import numpy as np

from natocc.fock import enumerate_determinants
from natocc.model import IntegralSet, build_many_body_matrix
from natocc.rdm import compute_W, natural_spectrum, one_rdm, two_rdm
import natocc.rdm as rdm


def random_integrals(M, rng, scale=0.5):
    h = rng.normal(size=(M, M)) + 1j * rng.normal(size=(M, M))
    h = 0.5 * (h + h.conj().T)
    w = rng.normal(size=(M,) * 4) + 1j * rng.normal(size=(M,) * 4)
    v = (w + w.transpose(1, 0, 3, 2) + w.transpose(2, 3, 0, 1).conj()
         + w.transpose(3, 2, 1, 0).conj()) / 4
    return IntegralSet(scale * h, scale * v, "random")


def sample(rng, basis, dt):
    ints = random_integrals(basis[0].norb, rng)
    E, X = np.linalg.eigh(build_many_body_matrix(basis, ints))
    psi0 = rng.normal(size=len(basis)) + 1j * rng.normal(size=len(basis))
    psi0 /= np.linalg.norm(psi0)

    def at(t):
        return X @ (np.exp(-1j * E * t) * (X.conj().T @ psi0))

    t = rng.uniform(0, 1)
    f0 = natural_spectrum(one_rdm(at(t), basis))
    fm = natural_spectrum(one_rdm(at(t - dt), basis), f0)
    fp = natural_spectrum(one_rdm(at(t + dt), basis), f0)
    ndot = (fp.occupations - fm.occupations) / (2 * dt)
    W = compute_W(two_rdm(at(t), basis), ints, f0) / rdm.W_PREFACTOR
    return 2 * np.diag(W).imag, ndot


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--dt", type=float, default=1e-4)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    basis = enumerate_determinants(3, 3)
    x, y = map(np.concatenate, zip(*(sample(rng, basis, args.dt) for _ in range(args.samples))))
    slope = float(x @ y / (x @ x))
    print(f"fitted prefactor {slope:.8f}  (frozen value {rdm.W_PREFACTOR})")
    print(f"max residual {np.abs(y - slope * x).max():.2e} over {len(x)} occupation rates")
    return slope


if __name__ == "__main__":
    main()
