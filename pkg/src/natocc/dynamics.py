"""Exact propagation and the reduced equations of motion for natural occupations.

The reduced state is ``(f, xi_dyn, C)``: square amplitudes of the sector
determinants, their dynamical phases and the parallel-transported natural
orbitals. The many-body state it stands for is

    Psi = sum_a sqrt(f_a) exp(-i theta_a) |phi_a>,
    theta_a = xi_dyn_a - sum_{k in a} g_k,

where ``g_k`` is the phase removed from orbital ``k`` when discrete
parallel transport is re-imposed after each step (zero whenever the
orbitals do not move). Projecting the Schroedinger equation on ``<phi_a|``
gives, with ``S_a = sum_b H_ab sqrt(f_a f_b) exp(i(theta_a - theta_b))``,

    df_a/dt      = 2 Im S_a,
    dxi_dyn_a/dt = Re S_a / f_a,

and the orbitals follow the natural-orbital equation with its diagonal
removed.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import (AmplitudeCollapse, DegenerateOccupations, DynamicsError, GridError,
                     GridMismatch, NatoccError, OverlapCollapse)
from .fock import Determinant, determinant_overlaps
from .model import IntegralSet, QuenchProtocol, SlaterCondonPlan, _rotate, build_many_body_matrix
from .rdm import (DEGENERACY_TOL, JITTER, NaturalFrame, _two_rdm_unchecked, compute_W, fix_gauge,
                  natural_spectrum, one_rdm, orbital_connection, parallel_transport_step)
from .sector_map import SymmetryConstraintSet

PHASE_FREEZE_TOL = 1e-12
OVERLAP_COLLAPSE = 0.1


def wrap_phase(x):
    """Map angles to (-pi, pi]."""
    x = np.asarray(x, dtype=float)
    return -((-x + np.pi) % (2 * np.pi) - np.pi)


@dataclass(frozen=True)
class TimeGrid:
    """Fixed-step grid from ``t_start`` to ``t_end`` (either direction) with step ``h > 0``."""

    t_start: float
    t_end: float
    h: float
    integrator: str = "rk4"

    def __post_init__(self):
        if not self.h > 0:
            raise GridError(f"step must be positive, got {self.h}")
        x = abs(self.t_end - self.t_start) / self.h
        if abs(x - round(x)) > 1e-12 * max(1.0, x) or round(x) < 1:
            raise GridError(f"(t_end - t_start)/h = {x!r} is not a positive integer")
        if self.integrator != "rk4":
            raise GridError(f"unknown integrator {self.integrator!r}")

    @property
    def steps(self) -> int:
        return int(round(abs(self.t_end - self.t_start) / self.h))

    @property
    def direction(self) -> float:
        return 1.0 if self.t_end >= self.t_start else -1.0

    def times(self) -> np.ndarray:
        return self.t_start + self.direction * self.h * np.arange(self.steps + 1)


@dataclass(frozen=True, eq=False)
class ReducedState:
    f: np.ndarray
    xi_dyn: np.ndarray
    frame: NaturalFrame

    def check(self, tol=1e-9):
        if (self.f < -1e-10).any():
            raise DynamicsError(f"negative square amplitude {self.f.min()!r}")
        if abs(self.f.sum() - 1.0) > tol:
            raise DynamicsError(f"square amplitudes sum to {self.f.sum()!r}")
        if self.frame.orthonormality_error() > tol:
            raise DynamicsError("orbital frame is not unitary")


@dataclass
class Trajectory:
    times: np.ndarray
    n: np.ndarray
    f: np.ndarray
    xi_dyn: np.ndarray
    xi_geo: np.ndarray
    energy: np.ndarray
    norm: np.ndarray
    distances: np.ndarray
    det_labels: list = field(default_factory=list)
    distance_labels: list = field(default_factory=list)
    frames: list | None = None
    diagnostics: dict = field(default_factory=dict)
    final_state: ReducedState | None = None

    @property
    def xi_total(self) -> np.ndarray:
        return self.xi_dyn + self.xi_geo

    # -- serialization -------------------------------------------------
    def columns(self) -> list:
        M, D, J = self.n.shape[1], self.f.shape[1], self.distances.shape[1]
        return (["t"] + [f"n_{i}" for i in range(M)] + [f"f_{i}" for i in range(D)]
                + [f"xi_dyn_{i}" for i in range(D)] + [f"xi_geo_{i}" for i in range(D)]
                + ["energy", "norm"] + [f"d_{i}" for i in range(J)])

    def rows(self):
        data = np.column_stack([self.times, self.n, self.f, self.xi_dyn, self.xi_geo,
                                self.energy, self.norm, self.distances])
        return data

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns())
            for row in self.rows():
                w.writerow([repr(float(x)) for x in row])

    def to_json(self) -> dict:
        data = self.rows()
        return {"columns": self.columns(),
                "data": [[float(x) for x in row] for row in data],
                "det_labels": list(self.det_labels),
                "distance_labels": list(self.distance_labels),
                "diagnostics": _jsonable(self.diagnostics)}

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)

    @classmethod
    def from_columns(cls, columns, data, **extra) -> "Trajectory":
        data = np.asarray(data, dtype=float).reshape(-1, len(columns))
        col = {name: i for i, name in enumerate(columns)}

        def block(prefix):
            idx = [col[c] for c in columns if c.startswith(prefix)
                   and c[len(prefix):].isdigit()]
            return data[:, idx] if idx else np.zeros((len(data), 0))

        return cls(data[:, col["t"]], block("n_"), block("f_"), block("xi_dyn_"),
                   block("xi_geo_"), data[:, col["energy"]], data[:, col["norm"]],
                   block("d_"), **extra)

    @classmethod
    def read_csv(cls, path) -> "Trajectory":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValueError(f"{path} is empty")
        return cls.from_columns(rows[0], [[float(x) for x in r] for r in rows[1:]])

    @classmethod
    def read_json(cls, path) -> "Trajectory":
        with open(path) as fh:
            obj = json.load(fh)
        return cls.from_columns(obj["columns"], obj["data"], det_labels=obj.get("det_labels", []),
                                distance_labels=obj.get("distance_labels", []))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# ----------------------------------------------------------------------------
# exact propagation
# ----------------------------------------------------------------------------

class ExactPropagator:
    """Spectral propagation through a piecewise-constant protocol."""

    def __init__(self, protocol: QuenchProtocol, basis: Sequence[Determinant]):
        self.protocol = protocol
        self.basis = list(basis)
        self._eig = {}

    def hamiltonian(self, t) -> np.ndarray:
        i = self.protocol.segment_index(t)
        return self._spectrum(i)[2]

    def _spectrum(self, i):
        if i not in self._eig:
            t0 = self.protocol.segments[i][0]
            H = build_many_body_matrix(self.basis, self.protocol.integrals_at(t0))
            E, X = np.linalg.eigh(H)
            self._eig[i] = (E, X, H)
        return self._eig[i]

    def _evolve_in(self, i, psi, dt):
        E, X, _ = self._spectrum(i)
        return X @ (np.exp(-1j * E * dt) * (X.conj().T @ psi))

    def propagate(self, psi, t0, t1):
        psi = np.asarray(psi, dtype=complex)
        starts = [t for t, _ in self.protocol.segments]
        if t1 >= t0:
            t = t0
            while t < t1:
                i = self.protocol.segment_index(t)
                t_next = min(t1, starts[i + 1]) if i + 1 < len(starts) else t1
                psi = self._evolve_in(i, psi, t_next - t)
                t = t_next
        else:
            t = t0
            while t > t1:
                i = self.protocol.segment_index(t - 1e-14 if t > starts[0] else t)
                t_next = max(t1, starts[i])
                psi = self._evolve_in(i, psi, t_next - t)
                t = t_next
        return psi


def coefficients_in_frame(psi, basis, C, dets) -> np.ndarray:
    """CI coefficients ``<phi_a|psi>`` on determinants ``dets`` built from orbitals ``C``."""
    U = determinant_overlaps(C, list(basis), list(dets))
    return U.conj().T @ np.asarray(psi, dtype=complex)


def evolve_exact(protocol: QuenchProtocol, psi0, basis: Sequence[Determinant], grid: TimeGrid,
                 cset: SymmetryConstraintSet | None = None, *, reference: NaturalFrame | None = None,
                 gauge=None, store_frames=False) -> Trajectory:
    """Exact trajectory with natural-orbital bookkeeping.

    Natural orbitals are tracked by overlap from ``reference`` (identity by
    default); the raw gauge at every step is :func:`fix_gauge` and the
    geometric phase is the accumulated discrete parallel-transport phase of
    that gauge. Phases are recorded as ``xi = xi_geo + xi_dyn`` with
    ``xi = -arg <phi_a|psi>`` in the raw gauge.

    ``gauge(t)`` optionally returns extra orbital phases ``chi_k(t)``; the raw
    orbitals become ``phi_k exp(i chi_k)``. This is a pure gauge change: the
    occupations are untouched and only the phase bookkeeping moves.
    """
    basis = list(basis)
    prop = ExactPropagator(protocol, basis)
    psi0 = np.asarray(psi0, dtype=complex)
    times = grid.times()
    norb = basis[0].norb
    dets = list(cset.amap.col_labels) if cset is not None else []
    D = len(dets)
    occ = np.array([[d.bits >> k & 1 for k in range(norb)] for d in dets], dtype=float).reshape(D, norb)
    matched = reference if reference is not None else NaturalFrame.reference(norb)
    raw_prev = None
    out = {k: [] for k in ("n", "f", "xi_dyn", "xi_geo", "energy", "norm", "dist")}
    frames = [] if store_frames else None
    ortho = 0.0
    for t in times:
        psi = prop.propagate(psi0, grid.t_start, t)
        norm = np.linalg.norm(psi)
        gamma = one_rdm(psi / norm, basis)
        matched = natural_spectrum(gamma, matched)
        C = fix_gauge(matched.orbitals)
        if gauge is not None:
            C = C * np.exp(1j * np.asarray(gauge(t), dtype=float))[None, :]
        raw = matched.with_orbitals(C)
        # the step-to-step phase of the raw gauge is the discrete connection
        if raw_prev is None:
            raw = replace(raw, geo_phase_accum=np.zeros(norb))
        else:
            step = parallel_transport_step(raw_prev, raw, grid.h)
            raw = replace(raw, geo_phase_accum=step.geo_phase_accum)
        raw_prev = raw
        ortho = max(ortho, raw.orthonormality_error())
        if store_frames:
            frames.append(raw.orbitals.copy())
        out["n"].append(matched.occupations)
        out["energy"].append(np.real(np.vdot(psi, prop.hamiltonian(t) @ psi)))
        out["norm"].append(norm)
        if D:
            c = coefficients_in_frame(psi, basis, raw.orbitals, dets)
            geo = occ @ raw.geo_phase_accum
            out["f"].append(np.abs(c) ** 2)
            out["xi_geo"].append(geo)
            out["xi_dyn"].append(wrap_phase(-np.angle(c) - geo))
            out["dist"].append(cset.evaluate(matched.occupations))
        else:
            for k in ("f", "xi_geo", "xi_dyn", "dist"):
                out[k].append(np.zeros(0))
    return Trajectory(times, np.array(out["n"]), np.array(out["f"]), np.array(out["xi_dyn"]),
                      np.array(out["xi_geo"]), np.array(out["energy"]), np.array(out["norm"]),
                      np.array(out["dist"]), [d.label() for d in dets],
                      [f"d{j + 1}" for j in range(D)], frames,
                      {"orthonormality_max": ortho, "kind": "exact"})


# ----------------------------------------------------------------------------
# reduced equations
# ----------------------------------------------------------------------------

@dataclass
class ReducedDerivative:
    df: np.ndarray
    dxi: np.ndarray
    dC: np.ndarray
    frozen: np.ndarray
    hamiltonian: np.ndarray
    W: np.ndarray
    n: np.ndarray
    amplitudes: np.ndarray


def _occupancy(dets, norb):
    return np.array([[d.bits >> k & 1 for d in dets] for k in range(norb)], dtype=float)


def reduced_rhs(state: ReducedState, ints, cset: SymmetryConstraintSet, *, strict=True,
                degeneracy_tol=DEGENERACY_TOL, phase_freeze_tol=PHASE_FREEZE_TOL,
                jitter=False, time=None) -> ReducedDerivative:
    """Right-hand side of the reduced system at one instant."""
    dets = tuple(cset.amap.col_labels)
    norb = dets[0].norb
    C = np.asarray(state.frame.orbitals, dtype=complex)
    f = np.clip(np.asarray(state.f, dtype=float), 0.0, None)
    occ = _occupancy(dets, norb)
    n = occ @ f
    theta = state.xi_dyn - occ.T @ state.frame.geo_phase_accum
    sq = np.sqrt(f)
    amp = sq * np.exp(-1j * theta)

    h_no, v_no = _rotate(ints.h, ints.v, C)
    ints_no = IntegralSet(h_no, v_no, "natural")
    H = SlaterCondonPlan.for_basis(dets).evaluate(ints_no)

    Gamma = _two_rdm_unchecked(amp / np.linalg.norm(amp), dets)
    W = compute_W(Gamma, ints_no)
    n_eff = n + JITTER * np.arange(norb) if jitter else n
    A, pairs = orbital_connection(h_no, W, n_eff, strict=strict,
                                  degeneracy_tol=0.0 if jitter else degeneracy_tol)
    if A is None:
        j, k = pairs[0]
        raise DegenerateOccupations(
            f"natural occupations n_{j} = {float(n[j])!r} and n_{k} = {float(n[k])!r} are degenerate"
            + (f" at t = {float(time)!r}" if time is not None else ""),
            time=None if time is None else float(time), pairs=pairs)
    dC = C @ A

    phase = np.exp(1j * (theta[:, None] - theta[None, :]))
    S = H * np.outer(sq, sq) * phase
    K = S.imag
    K = 0.5 * (K - K.T)
    np.fill_diagonal(K, 0.0)
    df = 2.0 * K.sum(axis=1)
    frozen = f < phase_freeze_tol
    re = S.real.sum(axis=1)
    dxi = np.where(frozen, 0.0, re / np.where(frozen, 1.0, f))
    return ReducedDerivative(df, dxi, dC, frozen, H, W, n, amp)


def polar_unitary(C) -> np.ndarray:
    U, _, Vh = np.linalg.svd(C)
    return U @ Vh


def reduced_state_from_psi(psi, basis, cset: SymmetryConstraintSet,
                           reference: NaturalFrame | None = None):
    """Project ``psi`` onto the sector ansatz in its own natural-orbital frame.

    Returns ``(state, residual)`` where ``residual = 1 - sum_a |<phi_a|psi>|^2``
    is the weight lost in the projection (zero for a state inside the sector).
    """
    basis = list(basis)
    psi = np.asarray(psi, dtype=complex)
    norb = basis[0].norb
    gamma = one_rdm(psi / np.linalg.norm(psi), basis)
    ref = reference if reference is not None else NaturalFrame.reference(norb)
    frame = natural_spectrum(gamma, ref)
    C = fix_gauge(frame.orbitals)
    dets = list(cset.amap.col_labels)
    c = coefficients_in_frame(psi, basis, C, dets)
    weight = float(np.sum(np.abs(c) ** 2))
    c = c / np.sqrt(weight)
    f = np.abs(c) ** 2
    xi = np.where(f > 0, -np.angle(c), 0.0)
    n = _occupancy(dets, norb) @ f
    return ReducedState(f, xi, NaturalFrame(n, C, np.zeros(norb))), 1.0 - weight


def _segment_boundaries_on_grid(protocol, grid):
    lo, hi = sorted((grid.t_start, grid.t_end))
    for t0, _ in protocol.segments[1:]:
        if lo < t0 < hi:
            x = abs(t0 - grid.t_start) / grid.h
            if abs(x - round(x)) > 1e-9 * max(1.0, x):
                raise GridError(f"quench at t={t0} does not fall on the time grid")


def evolve_reduced(protocol: QuenchProtocol, init: ReducedState, cset: SymmetryConstraintSet,
                   grid: TimeGrid, *, strict=True, degeneracy_tol=DEGENERACY_TOL,
                   phase_freeze_tol=PHASE_FREEZE_TOL, jitter=False, store_frames=False) -> Trajectory:
    """Fixed-step RK4 for ``(f, xi_dyn, C)``.

    After every step ``C`` is projected back to the unitary group (polar
    decomposition) and discrete parallel transport is re-imposed; the removed
    orbital phases are accumulated in the frame so that the represented state
    is unchanged.
    """
    _segment_boundaries_on_grid(protocol, grid)
    dets = list(cset.amap.col_labels)
    norb = dets[0].norb
    occ = _occupancy(dets, norb)
    times = grid.times()
    h = grid.direction * grid.h
    kw = dict(strict=strict, degeneracy_tol=degeneracy_tol, phase_freeze_tol=phase_freeze_tol,
              jitter=jitter)

    if strict and not jitter:
        n0 = np.sort(occ @ np.asarray(init.f, dtype=float))
        gaps = np.diff(n0)
        if len(gaps) and gaps.min() < degeneracy_tol:
            i = int(np.argmin(gaps))
            raise DegenerateOccupations(
                f"initial natural occupations {float(n0[i])!r} and {float(n0[i + 1])!r} are degenerate, "
                "so the initial orbital frame is not fixed by the state",
                hint="start from a state with distinct occupations or enable jitter",
                time=float(grid.t_start))

    f = np.asarray(init.f, dtype=float).copy()
    xi = np.asarray(init.xi_dyn, dtype=float).copy()
    C = np.asarray(init.frame.orbitals, dtype=complex).copy()
    acc = np.asarray(init.frame.geo_phase_accum, dtype=float).copy()

    def rhs(fv, xv, Cv, t, ints):
        st = ReducedState(fv, xv, NaturalFrame(occ @ fv, Cv, acc))
        return reduced_rhs(st, ints, cset, time=t, **kw)

    out = {k: [] for k in ("n", "f", "xi_dyn", "xi_geo", "energy", "norm", "dist")}
    frames = [] if store_frames else None
    frozen_any = np.zeros(len(dets), dtype=bool)
    diag = {"transport_residual_raw_max": 0.0, "transport_residual_max": 0.0,
            "orthonormality_max": 0.0, "sum_f_drift_max": 0.0, "sum_df_max": 0.0,
            "kind": "reduced"}

    def record(t, d1):
        amp = d1.amplitudes
        out["n"].append(occ @ f)
        out["f"].append(f.copy())
        out["xi_dyn"].append(xi.copy())
        out["xi_geo"].append(occ.T @ acc)
        out["energy"].append(float(np.real(np.vdot(amp, d1.hamiltonian @ amp))))
        out["norm"].append(float(np.sqrt(f.sum())))
        out["dist"].append(cset.evaluate(occ @ f))
        if store_frames:
            frames.append(C.copy())
        diag["sum_f_drift_max"] = max(diag["sum_f_drift_max"], abs(f.sum() - 1.0))
        diag["orthonormality_max"] = max(diag["orthonormality_max"],
                                         float(np.abs(C.conj().T @ C - np.eye(norb)).max()))

    try:
        for i, t in enumerate(times):
            ints = protocol.integrals_at(t if h > 0 else t - 1e-14)
            k1 = rhs(f, xi, C, t, ints)
            if i == 0:
                rec_ints = protocol.integrals_at(t)
                record(t, k1 if rec_ints is ints else rhs(f, xi, C, t, rec_ints))
            if i == len(times) - 1:
                break
            frozen_any |= k1.frozen
            diag["sum_df_max"] = max(diag["sum_df_max"], abs(k1.df.sum()))
            k2 = rhs(f + 0.5 * h * k1.df, xi + 0.5 * h * k1.dxi, C + 0.5 * h * k1.dC, t, ints)
            k3 = rhs(f + 0.5 * h * k2.df, xi + 0.5 * h * k2.dxi, C + 0.5 * h * k2.dC, t, ints)
            k4 = rhs(f + h * k3.df, xi + h * k3.dxi, C + h * k3.dC, t, ints)
            f = f + h / 6 * (k1.df + 2 * k2.df + 2 * k3.df + k4.df)
            xi = xi + h / 6 * (k1.dxi + 2 * k2.dxi + 2 * k3.dxi + k4.dxi)
            C_new = C + h / 6 * (k1.dC + 2 * k2.dC + 2 * k3.dC + k4.dC)
            C_new = polar_unitary(C_new)
            d = np.einsum("pk,pk->k", C.conj(), C_new)
            diag["transport_residual_raw_max"] = max(diag["transport_residual_raw_max"],
                                                     float(np.abs(d.imag).max() / grid.h))
            delta = np.angle(d)
            C_new = C_new * np.exp(-1j * delta)[None, :]
            acc = acc + delta
            d = np.einsum("pk,pk->k", C.conj(), C_new)
            diag["transport_residual_max"] = max(diag["transport_residual_max"],
                                                 float(np.abs(d.imag).max() / grid.h))
            C = C_new
            t_next = times[i + 1]
            # energy at the new point uses the Hamiltonian in force there
            record(t_next, rhs(f, xi, C, t_next, protocol.integrals_at(t_next)))
    except NatoccError as err:
        if err.context.get("time") is None:
            err.context["time"] = float(t)
        raise

    if frozen_any.any():
        warnings.warn(f"square amplitudes below {phase_freeze_tol:g} for determinants "
                      f"{[dets[j].label() for j in np.flatnonzero(frozen_any)]}; "
                      "their phase derivatives were frozen", AmplitudeCollapse)
    diag["frozen"] = [dets[j].label() for j in np.flatnonzero(frozen_any)]
    final = ReducedState(f.copy(), xi.copy(), NaturalFrame(occ @ f, C.copy(), acc.copy()))
    return Trajectory(times, np.array(out["n"]), np.array(out["f"]), np.array(out["xi_dyn"]),
                      np.array(out["xi_geo"]), np.array(out["energy"]), np.array(out["norm"]),
                      np.array(out["dist"]), [d.label() for d in dets],
                      [f"d{j + 1}" for j in range(len(dets))], frames, diag, final)


# ----------------------------------------------------------------------------
# phases and comparison
# ----------------------------------------------------------------------------

def geometric_phase(history, alpha) -> float:
    """Accumulated ``sum_steps sum_{k in alpha} arg <phi_k(t)|phi_k(t+h)>``.

    ``history`` holds orbital matrices (or frames) at successive times;
    ``alpha`` lists the orbital slots of the Slater string.
    """
    mats = [np.asarray(getattr(x, "orbitals", x)) for x in history]
    if len(mats) < 2:
        raise OverlapCollapse("need at least two orbital snapshots")
    alpha = list(alpha)
    total = 0.0
    for a, b in zip(mats, mats[1:]):
        d = np.einsum("pk,pk->k", a[:, alpha].conj(), b[:, alpha])
        if (np.abs(d) < OVERLAP_COLLAPSE).any():
            raise OverlapCollapse(f"orbital overlap {np.abs(d).min():.3f} below {OVERLAP_COLLAPSE}")
        total += float(np.angle(d).sum())
    return total


def _dev(a, b):
    if a.size == 0:
        return {"max": 0.0, "l2": 0.0}
    diff = np.abs(a - b)
    out = {"max": float(diff.max()), "l2": float(np.sqrt(np.sum(diff ** 2)))}
    if diff.ndim == 2:
        out["max_per_column"] = [float(x) for x in diff.max(axis=0)]
    return out


def compare_trajectories(a: Trajectory, b: Trajectory, refined: Trajectory | None = None) -> dict:
    """Max and L2 deviations of ``n``, ``f`` and the constraint distances.

    With ``refined`` (``b`` rerun at half the step on the same output grid)
    the report adds the observed convergence order ``log2(err_b / err_refined)``.
    """
    if a.times.shape != b.times.shape or not np.allclose(a.times, b.times, rtol=0, atol=1e-12):
        raise GridMismatch("trajectories are sampled on different time grids")
    for name in ("n", "f", "distances"):
        if getattr(a, name).shape != getattr(b, name).shape:
            raise GridMismatch(f"'{name}' blocks have different shapes")
    report = {"n": _dev(a.n, b.n), "f": _dev(a.f, b.f), "distances": _dev(a.distances, b.distances),
              "energy": _dev(a.energy, b.energy), "steps": int(len(a.times))}
    if a.xi_dyn.size and b.xi_dyn.size:
        ph = wrap_phase((a.xi_dyn + a.xi_geo) - (b.xi_dyn + b.xi_geo))
        report["phase"] = {"max": float(np.abs(ph).max())}
    if refined is not None:
        r = compare_trajectories(a, refined)
        e1, e2 = report["n"]["max"], r["n"]["max"]
        report["refined_n_max"] = e2
        report["convergence_order"] = float(np.log2(e1 / e2)) if e1 > 0 and e2 > 0 else None
    return report


def subsample(traj: Trajectory, stride: int) -> Trajectory:
    """Every ``stride``-th point of a trajectory (used to compare runs with different steps)."""
    s = slice(None, None, stride)
    return Trajectory(traj.times[s], traj.n[s], traj.f[s], traj.xi_dyn[s], traj.xi_geo[s],
                      traj.energy[s], traj.norm[s], traj.distances[s], traj.det_labels,
                      traj.distance_labels, traj.frames[s] if traj.frames else None,
                      dict(traj.diagnostics), traj.final_state)
