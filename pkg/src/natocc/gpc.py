"""Generalized Pauli constraints, pinning and the response of pinning to perturbations."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, GapTooSmall
from .fock import Determinant, determinant_overlaps
from .rdm import NaturalFrame, natural_spectrum, one_rdm

PIN_TOL = 1e-10
QUASI_TOL = 1e-4
GAP_TOL = 1e-8


@dataclass(frozen=True)
class Constraint:
    """Affine functional ``D(n) = kappa0 + sum_i kappa[i] n[i]`` (``>= 0`` on the polytope).

    ``normalization`` rescales ``D`` to the unit-range distance, e.g. ``1/2``
    for the Borland-Dennis facet.
    """

    kappa0: int
    kappa: tuple
    label: str
    normalization: Fraction = Fraction(1)

    def _slots(self, orbital_map):
        if orbital_map is None:
            return np.arange(len(self.kappa))
        if len(orbital_map) != len(self.kappa):
            raise DimensionMismatch(
                f"orbital map has {len(orbital_map)} entries, constraint has {len(self.kappa)}")
        return np.asarray(orbital_map, dtype=int)

    def evaluate(self, n, orbital_map=None) -> float:
        n = np.asarray(n, dtype=float)
        slots = self._slots(orbital_map)
        if slots.size and slots.max() >= len(n):
            raise DimensionMismatch(f"occupation vector of length {len(n)} too short for {self.label}")
        return float(self.kappa0 + np.dot(np.asarray(self.kappa, dtype=float), n[slots]))

    def evaluate_normalized(self, n, orbital_map=None) -> float:
        return float(self.normalization) * self.evaluate(n, orbital_map)

    def eigenvalue(self, det: Determinant, orbital_map=None) -> int:
        """``kappa_alpha``: the eigenvalue of the operator ``D^`` on a determinant."""
        slots = self._slots(orbital_map)
        return self.kappa0 + sum(k * (det.bits >> int(p) & 1) for k, p in zip(self.kappa, slots))


@dataclass(frozen=True)
class ConstraintSet:
    constraints: tuple
    name: str = ""
    sector: str | None = None

    def __iter__(self):
        return iter(self.constraints)

    def __len__(self):
        return len(self.constraints)

    def __getitem__(self, i):
        return self.constraints[i]

    def by_label(self, label) -> Constraint:
        for c in self.constraints:
            if c.label == label:
                return c
        raise KeyError(label)


def borland_dennis_constraints() -> ConstraintSet:
    """Three fermions in six orbitals, occupations sorted descending (slot 0 = n_1).

    The facet ``2 - n1 - n2 - n4 >= 0``, the equalities ``n_k + n_{7-k} = 1``
    as pairs of opposite inequalities, Pauli bounds and the ordering.
    """
    def vec(**entries):
        k = [0] * 6
        for name, val in entries.items():
            k[int(name[1:]) - 1] = val
        return tuple(k)

    out = [Constraint(2, vec(n1=-1, n2=-1, n4=-1), "BD: 2-n1-n2-n4", Fraction(1, 2))]
    for k in (1, 2, 3):
        a, b = f"n{k}", f"n{7 - k}"
        out.append(Constraint(-1, vec(**{a: 1, b: 1}), f"pair+: n{k}+n{7 - k}-1"))
        out.append(Constraint(1, vec(**{a: -1, b: -1}), f"pair-: 1-n{k}-n{7 - k}"))
    for i in range(1, 7):
        out.append(Constraint(0, vec(**{f"n{i}": 1}), f"pauli-lo: n{i}"))
        out.append(Constraint(1, vec(**{f"n{i}": -1}), f"pauli-hi: 1-n{i}"))
    for i in range(1, 6):
        out.append(Constraint(0, vec(**{f"n{i}": 1, f"n{i + 1}": -1}), f"order: n{i}-n{i + 1}"))
    return ConstraintSet(tuple(out), name="borland-dennis", sector="(3,6)")


def _kappas(c: Constraint, basis, orbital_map):
    return np.array([c.eigenvalue(d, orbital_map) for d in basis], dtype=float)


def constraint_operator_expectations(c: Constraint, psi, basis: Sequence[Determinant],
                                     orbital_map=None):
    """``(<D^>, <D^2>)`` for a state expanded in natural-orbital determinants."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (len(basis),):
        raise DimensionMismatch(f"state of length {psi.size} for a basis of {len(basis)}")
    w = np.abs(psi) ** 2
    kap = _kappas(c, basis, orbital_map)
    return float(w @ kap), float(w @ kap ** 2)


def apply_constraint_operator(c: Constraint, psi, basis, orbital_map=None) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (len(basis),):
        raise DimensionMismatch(f"state of length {psi.size} for a basis of {len(basis)}")
    return _kappas(c, basis, orbital_map) * psi


@dataclass
class PinningReport:
    labels: list
    distances: np.ndarray
    normalized: np.ndarray
    pinned: np.ndarray
    quasipinned: np.ndarray
    second_moments: np.ndarray | None = None

    def to_dict(self):
        out = {"constraints": []}
        for i, lab in enumerate(self.labels):
            row = {"label": lab, "distance": float(self.distances[i]),
                   "normalized": float(self.normalized[i]),
                   "pinned": bool(self.pinned[i]), "quasipinned": bool(self.quasipinned[i])}
            if self.second_moments is not None:
                row["second_moment"] = float(self.second_moments[i])
            out["constraints"].append(row)
        return out


def pinning_report(n, cset: ConstraintSet, psi=None, basis=None, orbital_map=None, *,
                   pin_tol=PIN_TOL, quasi_tol=QUASI_TOL) -> PinningReport:
    """Distances of ``n`` to every facet, sorted by constraint label.

    When ``psi`` (in natural-orbital determinants ``basis``) is given, the
    second moments ``<D^2>`` are included.
    """
    items = sorted(cset, key=lambda c: c.label)
    dist = np.array([c.evaluate(n, orbital_map) for c in items])
    norm = np.array([float(c.normalization) * d for c, d in zip(items, dist)])
    moments = None
    if psi is not None:
        moments = np.array([constraint_operator_expectations(c, psi, basis, orbital_map)[1]
                            for c in items])
    return PinningReport([c.label for c in items], dist, norm, dist < pin_tol, dist < quasi_tol,
                         moments)


def _ground_state(H, gap_tol):
    E, X = np.linalg.eigh(H)
    gap = E[1] - E[0] if len(E) > 1 else np.inf
    if gap < gap_tol:
        raise GapTooSmall(f"spectral gap {gap:.3e} below {gap_tol:g}", gap=float(gap))
    return E, X


def natural_frame_state(psi, basis, reference: NaturalFrame | None = None, *, descending=False):
    """Natural frame of ``psi`` and the overlaps ``U`` of its determinants with ``basis``.

    Orbitals are matched to ``reference`` (the identity by default), or sorted
    by decreasing occupation when ``descending`` is set. The state in the
    natural-orbital determinants is ``U^H psi``.
    """
    basis = list(basis)
    gamma = one_rdm(psi, basis)
    if descending:
        frame = natural_spectrum(gamma)
    else:
        ref = reference if reference is not None else NaturalFrame.reference(basis[0].norb)
        frame = natural_spectrum(gamma, ref)
    U = determinant_overlaps(frame.orbitals, basis, basis)
    return frame, U


@dataclass
class ResponseTable:
    lambdas: np.ndarray
    distance0: float
    distances: np.ndarray
    distances_half: np.ndarray
    bounds: np.ndarray
    first_order: np.ndarray
    second_order: np.ndarray
    holds: np.ndarray
    first_order_ok: np.ndarray
    gap: float
    covariance: float
    gamma_V: float
    gamma_exact: float
    second_moment: float
    expectation0: float
    cauchy_schwarz: dict = field(default_factory=dict)

    def to_dict(self):
        rows = []
        for i, lam in enumerate(self.lambdas):
            rows.append({"lambda": float(lam), "distance": float(self.distances[i]),
                         "bound": float(self.bounds[i]), "first_order": float(self.first_order[i]),
                         "second_order": float(self.second_order[i]), "holds": bool(self.holds[i]),
                         "first_order_ok": bool(self.first_order_ok[i])})
        return {"distance0": self.distance0, "gap": self.gap, "covariance": self.covariance,
                "gamma_V": self.gamma_V, "gamma_exact": self.gamma_exact,
                "second_moment": self.second_moment, "rows": rows,
                "cauchy_schwarz": self.cauchy_schwarz}


def perturbation_response(H, V, c: Constraint, lambdas, basis, *, orbital_map=None,
                          reference: NaturalFrame | None = None, gap_tol=GAP_TOL) -> ResponseTable:
    """Exact response of ``D(n)`` to ``H + lambda V`` against the first-order bound.

    The bound is ``D(n_0) + 2 lambda gamma_V sqrt(<D^2>)`` with
    ``gamma_V = sqrt(Cov(V)) / E_gap``. First- and second-order coefficients
    come from two-point Richardson extrapolation on ``lambda`` and
    ``lambda/2``; the bound counts as holding when the excess stays below
    ``2 |a_2| lambda^2``.
    """
    H = np.asarray(H, dtype=complex)
    V = np.asarray(V, dtype=complex)
    basis = list(basis)
    if H.shape != (len(basis), len(basis)) or V.shape != H.shape:
        raise DimensionMismatch("H, V and basis sizes disagree")
    E, X = _ground_state(H, gap_tol)
    psi0 = X[:, 0]
    gap = float(E[1] - E[0]) if len(E) > 1 else np.inf
    frame0, U = natural_frame_state(psi0, basis, reference)
    coeffs = U.conj().T @ X
    if abs(np.linalg.norm(coeffs[:, 0]) - 1.0) > 1e-8:
        raise DimensionMismatch("basis is not closed under the natural-orbital rotation")
    kap = _kappas(c, basis, orbital_map)
    c0 = coeffs[:, 0]
    exp0 = float(np.abs(c0) ** 2 @ kap)
    second = float(np.abs(c0) ** 2 @ kap ** 2)
    d0 = c.evaluate(frame0.occupations, orbital_map)

    Vpsi = V @ psi0
    cov = float(max(np.real(np.vdot(Vpsi, Vpsi)) - np.real(np.vdot(psi0, Vpsi)) ** 2, 0.0))
    gamma_V = np.sqrt(cov) / gap if np.isfinite(gap) else 0.0
    b = (X[:, 1:].conj().T @ Vpsi) / (E[1:] - E[0])
    gamma_exact = float(np.sqrt(np.sum(np.abs(b) ** 2)))
    gamma_alpha = coeffs[:, 1:] @ b
    lhs = abs(np.sum(b * ((c0.conj() * kap) @ coeffs[:, 1:]))) ** 2
    cs = {"lhs": float(lhs), "rhs": float(np.sum(np.abs(gamma_alpha) ** 2) * second),
          "sum_b2": float(gamma_exact ** 2), "cov_over_gap2": float(cov / gap ** 2) if gap else np.inf}

    def distance(lam):
        _, Xl = np.linalg.eigh(H + lam * V)
        gam = one_rdm(Xl[:, 0], basis)
        return c.evaluate(natural_spectrum(gam, frame0).occupations, orbital_map)

    lambdas = np.asarray(lambdas, dtype=float)
    dist = np.array([distance(l) for l in lambdas])
    dist_half = np.array([distance(l / 2) for l in lambdas])
    g, gh = dist - d0, dist_half - d0
    with np.errstate(divide="ignore", invalid="ignore"):
        a1 = np.where(lambdas != 0, (4 * gh - g) / lambdas, 0.0)
        a2 = np.where(lambdas != 0, 2 * (g - 2 * gh) / lambdas ** 2, 0.0)
    slope = 2 * gamma_V * np.sqrt(second)
    bounds = d0 + slope * lambdas
    holds = g - slope * lambdas <= 2 * np.abs(a2) * lambdas ** 2 + 1e-14
    first_ok = np.abs(a1) <= slope * (1 + 1e-6) + 1e-9
    return ResponseTable(lambdas, d0, dist, dist_half, bounds, a1, a2, holds, first_ok, gap, cov,
                         float(gamma_V), gamma_exact, second, exp0, cs)


def first_order_derivative(H, V, S, lam, *, gap_tol=GAP_TOL) -> float:
    """``d<S>/d lambda`` at 0 for the ground state of ``H + lambda V`` (Richardson on central differences)."""
    H, V, S = (np.asarray(x, dtype=complex) for x in (H, V, S))
    _ground_state(H, gap_tol)

    def expect(l):
        _, X = np.linalg.eigh(H + l * V)
        psi = X[:, 0]
        return np.real(np.vdot(psi, S @ psi))

    def central(h):
        return (expect(h) - expect(-h)) / (2 * h)

    return float((4 * central(lam / 2) - central(lam)) / 3)
