"""Command-line front end.

Exit codes: 0 on success, 1 on domain errors (a structured JSON error on
stderr naming the module), 2 on configuration or I/O errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .dynamics import (TimeGrid, Trajectory, compare_trajectories, evolve_exact, evolve_reduced,
                       reduced_state_from_psi, subsample)
from .errors import ConfigError, GapTooSmall, NatoccError
from .fock import Determinant, SectorLabel, enumerate_determinants, sector_filter
from .gpc import (GAP_TOL, PIN_TOL, QUASI_TOL, natural_frame_state, perturbation_response,
                  pinning_report)
from .model import QuenchProtocol, build_hubbard, build_many_body_matrix
from .rdm import DEGENERACY_TOL
from .sector_map import build_amplitude_map, format_table, invert_map

OUTPUT_ENV = "NATOCC_OUTPUT_DIR"

DEFAULTS = {
    "t_hop": 1.0, "U": 0.0, "boundary": "periodic", "basis": "momentum",
    "tolerances": {"degeneracy_tol": DEGENERACY_TOL, "phase_freeze_tol": 1e-12,
                   "pin_tol": PIN_TOL, "quasi_tol": QUASI_TOL, "gap_tol": GAP_TOL},
    "output": {"dir": ".", "prefix": "natocc", "format": "csv"},
}


def load_schema() -> dict:
    return json.loads(resources.files("natocc").joinpath("config_schema.json").read_text())


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", hint="check the path") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return validate_config(cfg)


def validate_config(cfg: dict) -> dict:
    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc
    out = dict(cfg)
    for key, val in DEFAULTS.items():
        if isinstance(val, dict):
            out[key] = {**val, **cfg.get(key, {})}
        else:
            out.setdefault(key, val)
    if out["N"] > 2 * out["L"]:
        raise ConfigError(f"N={out['N']} exceeds the {2 * out['L']} spin-orbitals")
    if "sector" in out and out["basis"] != "momentum":
        raise ConfigError("symmetry sectors are defined in the momentum basis",
                          hint="drop 'sector' or set basis to 'momentum'")
    return out


class Experiment:
    """Objects derived from a validated configuration."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.L, self.N = cfg["L"], cfg["N"]
        self.tol = cfg["tolerances"]
        dets = enumerate_determinants(self.N, self.L)
        if "sector" in cfg:
            s = cfg["sector"]
            self.label = SectorLabel(Fraction(str(s["m"])), s["T"])
            self.basis = sector_filter(dets, self.label, self.L)
            if not self.basis:
                raise ConfigError(f"sector m={s['m']}, T={s['T']} is empty for N={self.N}, L={self.L}")
        else:
            self.label = None
            self.basis = dets

    def integrals(self, U=None, t_hop=None):
        cfg = self.cfg
        return build_hubbard(self.L, cfg["t_hop"] if t_hop is None else t_hop,
                             cfg["U"] if U is None else U,
                             periodic=cfg["boundary"] == "periodic", basis=cfg["basis"])

    def hamiltonian(self, U=None, t_hop=None) -> np.ndarray:
        return build_many_body_matrix(self.basis, self.integrals(U, t_hop))

    def cset(self):
        rules = self.cfg.get("sum_rules")
        if rules is not None:
            rules = [(r["orbitals"], r["value"]) for r in rules]
        return invert_map(build_amplitude_map(self.basis, self.N, self.L, rules))

    def protocol(self) -> QuenchProtocol:
        U, t_hop = self.cfg["U"], self.cfg["t_hop"]
        segs = {0.0: self.integrals(U, t_hop)}
        for q in sorted(self.cfg.get("quench", []), key=lambda q: q["t"]):
            U, t_hop = q.get("U", U), q.get("t_hop", t_hop)
            segs[float(q["t"])] = self.integrals(U, t_hop)
        return QuenchProtocol(tuple(sorted(segs.items(), key=lambda kv: kv[0])))

    def initial_state(self) -> np.ndarray:
        init = self.cfg.get("initial", {})
        kind = init.get("kind", "ground_state")
        if kind == "determinant":
            if "occ" not in init:
                raise ConfigError("initial.kind 'determinant' needs 'occ'")
            det = Determinant.from_occ(init["occ"], 2 * self.L)
            index = {d.bits: i for i, d in enumerate(self.basis)}
            if det.bits not in index:
                raise ConfigError(f"initial determinant {det.label()} is not in the basis")
            psi = np.zeros(len(self.basis), dtype=complex)
            psi[index[det.bits]] = 1.0
            return psi
        H = self.hamiltonian(init.get("U"), init.get("t_hop"))
        E, X = np.linalg.eigh(H)
        k = init.get("index", 0) if kind == "eigenstate" else 0
        if k >= len(E):
            raise ConfigError(f"eigenstate index {k} out of range ({len(E)} states)")
        if kind == "ground_state" and len(E) > 1 and E[1] - E[0] < self.tol["gap_tol"]:
            raise GapTooSmall(f"ground state is degenerate (gap {E[1] - E[0]:.3e})",
                              hint="pick a sector with a unique ground state or use 'eigenstate'")
        return X[:, k].astype(complex)

    def grid(self) -> TimeGrid:
        dyn = self.cfg.get("dynamics")
        if dyn is None:
            raise ConfigError("this task needs a 'dynamics' block")
        return TimeGrid(dyn.get("t_start", 0.0), dyn["t_end"], dyn["h"], dyn.get("integrator", "rk4"))

    def output_dir(self) -> Path:
        d = Path(os.environ.get(OUTPUT_ENV) or self.cfg["output"]["dir"])
        try:
            d.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {d}: {exc.strerror}") from exc
        return d

    def path(self, suffix) -> Path:
        return self.output_dir() / f"{self.cfg['output']['prefix']}_{suffix}"


def _dump(obj, path=None):
    text = json.dumps(obj, indent=1, sort_keys=True, default=_default)
    if path is not None:
        try:
            Path(path).write_text(text + "\n")
        except OSError as exc:
            raise ConfigError(f"cannot write {path}: {exc.strerror}") from exc
    print(text)


def _default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _frac(x: Fraction) -> str:
    return str(x)


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------

def cmd_sector_map(exp: Experiment, args):
    cset = exp.cset()
    amap = cset.amap
    out = {
        "determinants": [d.label() for d in amap.col_labels],
        "rows": [f"n{p // 2}{'↑↓'[p % 2]}" for p in amap.row_labels]
                + (["norm"] if amap.includes_normalization_row else []),
        "M": [list(r) for r in amap.M],
        "M_inverse": [[_frac(x) for x in r] for r in cset.inverse],
        "denominator": cset.denominator,
        "constraints": [{"label": f"d{j + 1}", "determinant": amap.col_labels[j].label(),
                         "coefficients": [_frac(c) for c in row], "constant": _frac(k),
                         "integer": [int(c * Z) for c in row] + [int(k * Z)], "scale": f"1/{Z}"}
                        for j, (row, k, Z) in enumerate(zip(cset.coefficients, cset.constants,
                                                            cset.row_denominators))],
        "eliminated": list(amap.eliminated),
        "constant_rows": list(amap.constant_rows),
        "convention": amap.convention,
        "table": format_table(cset),
    }
    _dump(out, exp.path("sector_map.json"))


def _ground_summary(exp: Experiment):
    H = exp.hamiltonian()
    E, X = np.linalg.eigh(H)
    psi = X[:, 0]
    frame, U = natural_frame_state(psi, exp.basis)
    c = U.conj().T @ psi
    return E, psi, frame, c


def cmd_ground_state(exp: Experiment, args):
    E, psi, frame, c = _ground_summary(exp)
    out = {"energy": float(E[0]), "gap": float(E[1] - E[0]) if len(E) > 1 else None,
           "occupations": frame.occupations, "determinants": [d.label() for d in exp.basis],
           "square_amplitudes": np.abs(c) ** 2}
    if exp.label is not None:
        out["distances"] = exp.cset().evaluate(frame.occupations)
    _dump(out, exp.path("ground_state.json"))


def cmd_pinning(exp: Experiment, args):
    E, psi, frame, c = _ground_summary(exp)
    cons = exp.cset().to_constraints()
    rep = pinning_report(frame.occupations, cons, c, exp.basis, pin_tol=exp.tol["pin_tol"],
                         quasi_tol=exp.tol["quasi_tol"])
    out = {"energy": float(E[0]), "occupations": frame.occupations, **rep.to_dict()}
    _dump(out, exp.path("pinning.json"))


def cmd_perturb_response(exp: Experiment, args):
    pert = exp.cfg.get("perturbation", {})
    cons = exp.cset().to_constraints()
    want = pert.get("constraint", "d1")
    matches = [c for c in cons if c.label.split(":")[0] == want or c.label == want]
    if not matches:
        raise ConfigError(f"no constraint labelled {want!r}; available: {[c.label for c in cons]}")
    c = matches[0]
    H = exp.hamiltonian()
    V = build_many_body_matrix(exp.basis, exp.integrals(pert.get("U", 0.0), pert.get("t_hop", 0.0)))
    out = {"constraint": c.label}
    lambdas = pert.get("lambdas", [1e-4, 1e-3, 1e-2])
    table = perturbation_response(H, V, c, lambdas, exp.basis, gap_tol=exp.tol["gap_tol"])
    out["response"] = table.to_dict()
    g = table.distances - table.distance0
    if len(lambdas) > 1 and (g > 0).all():
        out["loglog_slope"] = float(np.polyfit(np.log(lambdas), np.log(g), 1)[0])
    rnd = pert.get("random")
    if rnd is not None:
        rng = np.random.default_rng(rnd.get("seed", 0))
        lam = rnd.get("lambda", 1e-3)
        held = 0
        count = rnd.get("count", 100)
        D = len(exp.basis)
        for _ in range(count):
            A = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
            r = perturbation_response(H, 0.5 * (A + A.conj().T), c, [lam], exp.basis,
                                      gap_tol=exp.tol["gap_tol"])
            held += bool(r.holds.all())
        out["random"] = {"count": count, "lambda": lam, "bound_holds": held}
    _dump(out, exp.path("perturb_response.json"))


def _write_trajectory(exp: Experiment, traj: Trajectory, name):
    fmt = exp.cfg["output"]["format"]
    paths = []
    try:
        if fmt in ("csv", "both"):
            p = exp.path(f"{name}.csv")
            traj.write_csv(p)
            paths.append(str(p))
        if fmt in ("json", "both"):
            p = exp.path(f"{name}.json")
            traj.write_json(p)
            paths.append(str(p))
    except OSError as exc:
        raise ConfigError(f"cannot write trajectory: {exc}") from exc
    summary = {"outputs": paths, "steps": len(traj.times) - 1,
               "norm_drift": float(np.abs(traj.norm - 1.0).max()),
               "diagnostics": traj.diagnostics}
    print(json.dumps(summary, indent=1, sort_keys=True, default=_default))


def cmd_evolve_exact(exp: Experiment, args):
    cset = exp.cset() if exp.label is not None else None
    traj = evolve_exact(exp.protocol(), exp.initial_state(), exp.basis, exp.grid(), cset)
    _write_trajectory(exp, traj, "exact")


def cmd_evolve_reduced(exp: Experiment, args):
    if exp.label is None:
        raise ConfigError("reduced dynamics needs a 'sector' block")
    dyn = exp.cfg["dynamics"] if "dynamics" in exp.cfg else {}
    cset = exp.cset()
    grid = exp.grid()
    state, residual = reduced_state_from_psi(exp.initial_state(), exp.basis, cset)
    traj = evolve_reduced(exp.protocol(), state, cset, grid, strict=dyn.get("strict", True),
                          jitter=dyn.get("perturb", False),
                          degeneracy_tol=exp.tol["degeneracy_tol"],
                          phase_freeze_tol=exp.tol["phase_freeze_tol"])
    traj.diagnostics["projection_residual"] = residual
    _write_trajectory(exp, traj, "reduced")


def cmd_compare(args):
    try:
        a = Trajectory.read_csv(args.exact)
        b = Trajectory.read_csv(args.reduced)
        r = Trajectory.read_csv(args.refined) if args.refined else None
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read trajectory: {exc}") from exc
    if r is not None and len(r.times) == 2 * len(b.times) - 1:
        # the refined run used half the step: keep every other row
        r = subsample(r, 2)
    report = compare_trajectories(a, b, r)
    out = Path(os.environ[OUTPUT_ENV]) / "compare.json" if os.environ.get(OUTPUT_ENV) else args.output
    _dump(report, out)


COMMANDS = {
    "sector-map": cmd_sector_map,
    "ground-state": cmd_ground_state,
    "pinning": cmd_pinning,
    "perturb-response": cmd_perturb_response,
    "evolve-exact": cmd_evolve_exact,
    "evolve-reduced": cmd_evolve_reduced,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="natocc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
    p = sub.add_parser("compare", help="deviation report between two trajectory CSV files")
    p.add_argument("--exact", required=True)
    p.add_argument("--reduced", required=True)
    p.add_argument("--refined", help="the reduced run at half the step, for the order estimate")
    p.add_argument("--output", help="also write the report to this file")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        if args.command == "compare":
            cmd_compare(args)
        else:
            cfg = load_config(args.config)
            COMMANDS[args.command](Experiment(cfg), args)
    except ConfigError as err:
        print(json.dumps(err.to_dict(), default=_default), file=sys.stderr)
        return 2
    except NatoccError as err:
        print(json.dumps(err.to_dict(), default=_default), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": type(exc).__name__, "module": "cli", "message": str(exc),
                          "hint": "check file paths and permissions"}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
