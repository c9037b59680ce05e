"""Batch front door: run a JSON scenario, write CSV/JSON artifacts and a manifest.

Usage::

    conicscat [COMMAND] --config scenario.json [--out DIR] [--jobs N] [--seed S]
              [--tol-overrides tol.json]

A scenario is ``{"spec_version": 1, "command": ..., "manifold": {...},
"params": {...}, "tolerances": {...}, "seed": 0, "output_dir": "..."}``; the
per-command blocks are described by :data:`SCENARIO_SCHEMA`.  Unknown keys
are rejected.  Exit status: 0 success, 1 a configured tolerance check failed,
2 schema or input error, 3 numerical failure.

The default job count comes from ``CONICSCAT_JOBS`` (1 if unset).  Tasks are
mapped over worker processes in order, so outputs do not depend on ``--jobs``.
"""

import argparse
import hashlib
import json
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import ConicScatError, DegenerateGeodesicError, ModelError
from .flow import BACKWARD, FORWARD, detect_trapping, integrate_bicharacteristic
from .geometry import MODEL_LABELS, SPEC_VERSION, PhasePoint, load_manifold, project_to_shell

COMMANDS = ("trace", "sojourn", "smatrix", "propagator", "legendrian", "validate", "trapping")
JOBS_ENV = "CONICSCAT_JOBS"

EXIT_OK, EXIT_TOLERANCE, EXIT_SCHEMA, EXIT_NUMERICAL = 0, 1, 2, 3

# ----------------------------------------------------------------------------
# schema
# ----------------------------------------------------------------------------

_VEC = {"type": "array", "items": {"type": "number"}, "minItems": 2}
_POS = {"type": "number", "exclusiveMinimum": 0}
_PHASE = {"type": "object", "properties": {"z": _VEC, "zeta": _VEC}, "required": ["z", "zeta"],
          "additionalProperties": False}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


_RANDOM = _obj({"count": {"type": "integer", "minimum": 1}, "radius": _POS})

_PARAMS = {
    "trace": _obj({"starts": {"type": "array", "items": _PHASE, "minItems": 1}, "lambda0": _POS,
                   "direction": {"enum": [FORWARD, BACKWARD, "both"]}, "R_escape": _POS, "s_max": _POS,
                   "rtol": _POS, "atol": _POS}, ["starts"]),
    "sojourn": _obj({"seeds": {"type": "array", "items": _obj({"z": _VEC, "omega": _VEC}, ["z", "omega"])},
                     "random": _RANDOM, "lambda0": _POS, "R": _POS}),
    "smatrix": _obj({"directions": {"type": "array", "minItems": 1,
                                    "items": _obj({"y_in": _VEC, "y_out": _VEC}, ["y_in", "y_out"])},
                     "lambdas": {"type": "array", "items": _POS, "minItems": 1}, "lambda0": _POS,
                     "b_max": _POS, "n_grid": {"type": "integer", "minimum": 3}},
                    ["directions", "lambdas"]),
    "propagator": _obj({"z": {"type": "array", "items": _VEC, "minItems": 1},
                        "zp": {"type": "array", "items": _VEC, "minItems": 1},
                        "times": {"type": "array", "items": _POS, "minItems": 1},
                        "order": {"enum": [0, 1]}, "check_region": {"type": "boolean"}},
                       ["z", "zp", "times"]),
    "legendrian": _obj({"lambda0": _POS,
                        "seeds": {"type": "array", "items": _PHASE, "minItems": 1},
                        "grid": {"type": "array", "minItems": 1,
                                 "items": {"type": "array", "items": {"type": "number"},
                                           "minItems": 2, "maxItems": 2}},
                        "ratio_grid": {"type": "array",
                                       "items": {"type": "array", "items": {"type": "number"},
                                                 "minItems": 2, "maxItems": 2}},
                        "ratio_R": _POS, "leaf_x0": _POS,
                        "phase_pairs": {"type": "array",
                                        "items": _obj({"z": _VEC, "zp": _VEC}, ["z", "zp"])}},
                       ["seeds", "grid"]),
    "validate": _obj({"b": {"type": "array", "items": _POS, "minItems": 1}, "lambda0": _POS}, ["b"]),
    "trapping": _obj({"lambda0": _POS, "n_seeds": {"type": "integer", "minimum": 1}, "radius": _POS,
                      "R_escape": _POS, "s_max": _POS}),
}

_TOLERANCES = {
    "trace": ["drift"],
    "sojourn": ["extrapolation_residual", "free_closed_form"],
    "smatrix": [],
    "propagator": ["free_oracle"],
    "legendrian": ["lagrangian", "ratio", "leaf", "phase_map", "energy"],
    "validate": ["relative"],
    "trapping": ["oracle_radius"],
}

SCENARIO_SCHEMA = {
    "type": "object",
    "properties": {
        "spec_version": {"const": SPEC_VERSION},
        "command": {"enum": list(COMMANDS)},
        "manifold": _obj({"spec_version": {"const": SPEC_VERSION}, "model": {"enum": list(MODEL_LABELS)},
                          "n": {"type": "integer", "minimum": 2},
                          "params": {"type": "object", "additionalProperties": {"type": ["number", "null"]}}},
                         ["model"]),
        "params": {"type": "object"},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number", "exclusiveMinimum": 0}},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "output_dir": {"type": "string"},
    },
    "required": ["command", "manifold"],
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"command": {"const": c}}},
         "then": {"properties": {"params": _PARAMS[c],
                                 "tolerances": {"propertyNames": {"enum": _TOLERANCES[c]}}}}}
        for c in COMMANDS
    ],
}


class ScenarioError(Exception):
    """Invalid scenario (exit 2)."""


def load_scenario(text, source="<config>"):
    """Parse and validate a scenario; raises :class:`ScenarioError` with a readable diagnostic."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"{source}: schema violation at {where}: {exc.message}")
    return doc


# ----------------------------------------------------------------------------
# output helpers
# ----------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_csv(path, header, rows):
    """UTF-8 CSV with LF endings and round-trip float formatting."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else None
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _gnuplot(path, csv_name, using, xlabel, ylabel, title):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"set datafile separator ','\nset key autotitle columnhead\n"
                 f"set xlabel '{xlabel}'\nset ylabel '{ylabel}'\nset title '{title}'\n"
                 f"plot '{csv_name}' using {using} with lines\n")


def _pmap(fn, items, jobs):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


class _Run:
    """Collects emitted files, checks and failures for one scenario."""

    def __init__(self, out, tolerances):
        self.out = Path(out)
        self.tol = tolerances
        self.files = []
        self.checks = {}
        self.failures = []

    def path(self, name):
        self.files.append(name)
        return self.out / name

    def check(self, name, value, default=None):
        tol = self.tol.get(name, default)
        if tol is None:
            return None
        ok = bool(np.isfinite(value) and value <= tol)
        self.checks[name] = {"value": float(value), "tol": float(tol), "passed": ok}
        return ok


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------

def _cmd_trace(m, p, run, seed, jobs):
    lam0 = p.get("lambda0", 1.0)
    dirs = [FORWARD, BACKWARD] if p.get("direction", FORWARD) == "both" else [p.get("direction", FORWARD)]
    worst = 0.0
    summary = []
    for i, st in enumerate(p["starts"]):
        for d in dirs:
            tr = integrate_bicharacteristic(PhasePoint(st["z"], st["zeta"]), m, lam0, d,
                                            R_escape=p.get("R_escape", 1e3), s_max=p.get("s_max", np.inf),
                                            rtol=p.get("rtol", 1e-10), atol=p.get("atol", 1e-10))
            name = f"trajectory_{i:03d}_{d}.csv"
            with open(run.path(name), "w", encoding="utf-8", newline="\n") as fh:
                tr.to_csv(m, fh)
            gp = name.replace(".csv", ".gp")
            _gnuplot(run.path(gp), name, "2:3", "z1", "z2", f"bicharacteristic {i} ({d})")
            worst = max(worst, tr.max_drift)
            summary.append({"start": i, "direction": d, "end_status": tr.end_status, "s_end": tr.s[-1],
                            "max_drift": tr.max_drift, "n_steps": tr.n_steps, "projected": tr.projected})
    write_json(run.path("trace.json"), {"trajectories": summary})
    run.check("drift", worst)


def _sojourn_task(args):
    m, lam0, R, res_tol, z0, omega = args
    from .sojourn import total_sojourn
    z0 = np.asarray(z0, dtype=float)
    omega = np.asarray(omega, dtype=float) / np.linalg.norm(omega)
    try:
        zeta = project_to_shell(z0, omega, m, lam0)
        ts = total_sojourn(None, PhasePoint(z0, zeta), m, lam0, R=R, residual_tol=res_tol)
    except ConicScatError as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}
    return {"y_in": ts.y_in, "y_out": ts.y_out, "nu": ts.nu_forward, "nu_backward": ts.nu_backward,
            "M": ts.M_out, "tau": ts.tau, "residual": ts.residual}


def _cmd_sojourn(m, p, run, seed, jobs):
    lam0 = p.get("lambda0", 1.0)
    n = m.n
    seeds = [(np.asarray(s["z"], float), np.asarray(s["omega"], float)) for s in p.get("seeds", [])]
    if "random" in p:
        rng = np.random.default_rng(seed)
        cnt, rad = p["random"]["count"], p["random"].get("radius", 5.0)
        for _ in range(cnt):
            seeds.append((rng.uniform(-rad, rad, n), rng.normal(size=n)))
    if not seeds:
        raise ScenarioError("sojourn needs 'seeds' or 'random'")
    for z0, om in seeds:
        if len(z0) != n or len(om) != n:
            raise ScenarioError(f"sojourn seed dimension does not match n = {n}")
    res_tol = run.tol.get("extrapolation_residual", 1e-4)
    tasks = [(m, lam0, p.get("R", 1e3), res_tol, z0, om) for z0, om in seeds]
    out = _pmap(_sojourn_task, tasks, jobs)
    header = ([f"y_in_{i}" for i in range(n)] + [f"y_out_{i}" for i in range(n)] + ["nu"]
              + [f"M_{i}" for i in range(n)] + ["tau", "nu_backward", "residuals"])
    rows, worst_free = [], 0.0
    for (z0, om), r in zip(seeds, out):
        if "error" in r:
            run.failures.append(r["error"])
            rows.append([np.nan] * len(header))
            continue
        rows.append(list(r["y_in"]) + list(r["y_out"]) + [r["nu"]] + list(r["M"])
                    + [r["tau"], r["nu_backward"], r["residual"]])
        if m.label == "flat":
            from .oracle import free_sojourn
            om_u = om / np.linalg.norm(om)
            _, nu_ex, M_ex = free_sojourn(z0, om_u, lam0)
            worst_free = max(worst_free, abs(r["nu"] - nu_ex), float(np.max(np.abs(r["M"] - M_ex))))
    write_csv(run.path("sojourn.csv"), header, rows)
    if m.label == "flat":
        run.check("free_closed_form", worst_free, 1e-8)


def _smatrix_task(args):
    m, lam0, y_in, y_out, lambdas, search = args
    from .smatrix import assemble_smatrix, find_connecting_geodesics
    try:
        geos = find_connecting_geodesics(y_in, y_out, m, lam0, **search)
        entries = []
        for lam in lambdas:
            e = assemble_smatrix(lam, y_in, y_out, m, lam0, geodesics=geos)
            entries.append({"lambda": lam, "value": e.value, "n_geodesics": e.n_geodesics,
                            "contributions": e.contributions, "labels": e.labels})
        return {"entries": entries}
    except DegenerateGeodesicError as exc:
        return {"degenerate": str(exc)}
    except ConicScatError as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}


def _cmd_smatrix(m, p, run, seed, jobs):
    lam0 = p.get("lambda0", 1.0)
    n = m.n
    search = {k: p[k] for k in ("b_max", "n_grid") if k in p}
    dirs = [(np.asarray(d["y_in"], float), np.asarray(d["y_out"], float)) for d in p["directions"]]
    for a, b in dirs:
        if len(a) != n or len(b) != n:
            raise ScenarioError(f"smatrix direction dimension does not match n = {n}")
    out = _pmap(_smatrix_task, [(m, lam0, a, b, p["lambdas"], search) for a, b in dirs], jobs)
    header = [f"y_in_{i}" for i in range(n)] + [f"y_out_{i}" for i in range(n)] + ["lambda", "re", "im",
                                                                                   "n_geodesics"]
    rows, side = [], []
    for (a, b), r in zip(dirs, out):
        a = a / np.linalg.norm(a)
        b = b / np.linalg.norm(b)
        if "error" in r:
            run.failures.append(r["error"])
        if "entries" not in r:
            # degenerate connecting set (e.g. the diagonal): flagged with n_geodesics = -1
            for lam in p["lambdas"]:
                rows.append(list(a) + list(b) + [float(lam), np.nan, np.nan, -1])
            side.append({"y_in": a, "y_out": b, "status": r.get("degenerate", r.get("error"))})
            continue
        for e in r["entries"]:
            rows.append(list(a) + list(b) + [float(e["lambda"]), e["value"].real, e["value"].imag, e["n_geodesics"]])
        side.append({"y_in": a, "y_out": b, "status": "ok", "entries": r["entries"]})
    write_csv(run.path("smatrix.csv"), header, rows)
    write_json(run.path("smatrix.json"), {"lambda0": lam0, "directions": side})
    _gnuplot(run.path("smatrix.gp"), "smatrix.csv", f"{2 * n + 1}:(sqrt(${2 * n + 2}**2+${2 * n + 3}**2))",
             "lambda", "|S|", "leading-order scattering amplitude")


def _propagator_task(args):
    m, z, zp, times, order, check_region = args
    from .errors import CausticError
    from .wkb import wkb_kernel
    out = []
    for t in times:
        try:
            k = wkb_kernel(z, zp, t, m, order=order, check_region=check_region)
            out.append((k.value, k.a0, False))
        except CausticError:
            out.append((complex(np.nan, np.nan), np.nan, True))
    return out


def _cmd_propagator(m, p, run, seed, jobs):
    n = m.n
    Z = [np.asarray(v, float) for v in p["z"]]
    ZP = [np.asarray(v, float) for v in p["zp"]]
    if any(len(v) != n for v in Z + ZP):
        raise ScenarioError(f"propagator point dimension does not match n = {n}")
    pairs = [(z, zp) for z in Z for zp in ZP]
    out = _pmap(_propagator_task, [(m, z, zp, p["times"], p.get("order", 0), p.get("check_region", True))
                                   for z, zp in pairs], jobs)
    header = [f"z_{i}" for i in range(n)] + [f"zp_{i}" for i in range(n)] + ["t", "re", "im", "a0",
                                                                             "caustic_flag"]
    rows, worst = [], 0.0
    from .oracle import free_propagator
    for (z, zp), vals in zip(pairs, out):
        for t, (v, a0, caus) in zip(p["times"], vals):
            rows.append(list(z) + list(zp) + [float(t), v.real, v.imag, a0, caus])
            if m.label == "flat" and not caus:
                worst = max(worst, abs(v - free_propagator(z, zp, t, n)))
    write_csv(run.path("propagator.csv"), header, rows)
    if m.label == "flat":
        run.check("free_oracle", worst, 1e-12)


def _cmd_legendrian(m, p, run, seed, jobs):
    from .legendrian import (check_boundary_leaf, check_boundary_ratio, check_lagrangian,
                             check_quadratic_phase_map, sample_flowout)
    lam0 = p.get("lambda0", 1.0)
    seeds = [PhasePoint(s["z"], s["zeta"]) for s in p["seeds"]]
    fo = sample_flowout(m, lam0, seeds, p["grid"])
    rep = {"n_samples": len(fo), "skipped": [s["reason"] for s in fo.skipped]}
    lag = check_lagrangian(fo)
    neg = check_lagrangian(fo, momentum_scale=1.01)
    rep["lagrangian"] = {"max_residual": lag.max_residual, "n_pairs": lag.n_pairs,
                         "negative_control": neg.max_residual}
    run.check("lagrangian", lag.max_residual, 1e-5)
    energy = max((max(abs(r) for r in s.residuals) for s in fo), default=0.0)
    rep["energy"] = energy
    run.check("energy", energy, 1e-9)
    if "ratio_grid" in p:
        big = sample_flowout(m, lam0, seeds, p["ratio_grid"], stencil=False)
        rr = check_boundary_ratio(big, ratio_R=p.get("ratio_R", 1e3))
        rep["ratio"] = {"max_defect": rr.max_defect, "n_samples": len(rr.defects),
                        "n_excluded": rr.n_excluded, "decay_rate": rr.decay_rate}
        run.check("ratio", rr.max_defect, 1e-3)
    if "leaf_x0" in p:
        lf = check_boundary_leaf(m, lam0, p["leaf_x0"])
        rep["leaf"] = {"max_defect": lf.max_defect, "energy_defect": lf.max_energy_defect, "x_max": lf.x_max}
        run.check("leaf", lf.max_defect, 5e-3)
    if p.get("phase_pairs"):
        z = np.array([q["z"] for q in p["phase_pairs"]], float)
        zp = np.array([q["zp"] for q in p["phase_pairs"]], float)
        pm = check_quadratic_phase_map(z, zp, m)
        rep["phase_map"] = {"identity_defect": pm.max_identity_defect, "gradient_defect": pm.max_gradient_defect,
                            "phase_defect": pm.max_phase_defect, "n_evaluated": pm.n_evaluated,
                            "n_excluded": pm.n_excluded}
        run.check("phase_map", pm.max_identity_defect, 1e-6)
    rep["checks"] = run.checks
    write_json(run.path("legendrian.json"), rep)


def _validate_task(args):
    m, lam0, b = args
    from .smatrix import impact_shoot
    try:
        geo = impact_shoot(np.eye(m.n)[0], b * np.eye(m.n)[1], m, lam0, sigma=False)
        return {"theta": geo.deflection(), "tau": geo.tau}
    except ConicScatError as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}


def _cmd_validate(m, p, run, seed, jobs):
    from .oracle import inverse_square_deflection, inverse_square_sojourn
    if m.label not in ("flat", "inverse-square"):
        raise ScenarioError("validate compares against central-potential oracles; use 'flat' or "
                            "'inverse-square'")
    lam0 = p.get("lambda0", 1.0)
    c = m.params.get("c", 0.0) if m.label == "inverse-square" else 0.0
    if m.label == "inverse-square" and m.params.get("eps", 0.0) != 0.0:
        raise ScenarioError("validate needs eps = 0 for the closed-form inverse-square oracle")
    out = _pmap(_validate_task, [(m, lam0, b) for b in p["b"]], jobs)
    rows, worst, report = [], 0.0, []
    for b, r in zip(p["b"], out):
        th_ex = inverse_square_deflection(b, c, lam0)
        tau_ex = inverse_square_sojourn(b, c, lam0)
        if "error" in r:
            run.failures.append(r["error"])
            rows.append([b, c, np.nan, th_ex, np.nan, tau_ex, np.nan, np.nan])
            continue
        e_th = abs(r["theta"] - th_ex) / max(abs(th_ex), 1e-300) if th_ex else abs(r["theta"])
        e_tau = abs(r["tau"] - tau_ex) / max(abs(tau_ex), 1e-300) if tau_ex else abs(r["tau"])
        worst = max(worst, e_th, e_tau)
        rows.append([b, c, r["theta"], th_ex, r["tau"], tau_ex, e_th, e_tau])
        report.append({"b": b, "theta": r["theta"], "theta_oracle": th_ex, "tau": r["tau"],
                       "tau_oracle": tau_ex, "rel_err_theta": e_th, "rel_err_tau": e_tau})
    write_csv(run.path("validate.csv"), ["b", "c", "theta", "theta_oracle", "tau", "tau_oracle",
                                         "rel_err_theta", "rel_err_tau"], rows)
    run.check("relative", worst, 1e-6)
    write_json(run.path("validate.json"), {"lambda0": lam0, "c": c, "rows": report, "checks": run.checks})


def _cmd_trapping(m, p, run, seed, jobs):
    lam0 = p.get("lambda0", 1.0)
    rep = detect_trapping(m, lam0, n_seeds=p.get("n_seeds", 1000), radius=p.get("radius", 3.0),
                          R_escape=p.get("R_escape", 50.0), s_max=p.get("s_max", 200.0), seed=seed)
    n = m.n
    header = [f"z_{i}" for i in range(n)] + [f"zeta_{i}" for i in range(n)] + ["trapped", "escaped_forward",
                                                                               "escaped_backward"]
    rows = [list(z) + list(w) + [t, ef, eb] for z, w, t, ef, eb in
            zip(rep.z, rep.zeta, rep.trapped, rep.escaped_forward, rep.escaped_backward)]
    write_csv(run.path("trapping.csv"), header, rows)
    _gnuplot(run.path("trapping.gp"), "trapping.csv", "1:2:(column('trapped'))", "z1", "z2",
             "seed positions (trapped = 1)")
    summary = rep.summary()
    if m.rotationally_symmetric:
        from .oracle import effective_potential_trapping
        orc = effective_potential_trapping(m, lam0)
        summary["oracle_stable_radii"] = orc.stable
        summary["oracle_unstable_radii"] = orc.unstable
        if rep.trapped_radius is not None and orc.stable:
            gap = min(abs(rep.trapped_radius - r) for r in orc.stable)
            summary["oracle_gap"] = gap
            run.check("oracle_radius", gap, 1e-3)
        elif bool(orc.stable) != (rep.n_trapped > 0):
            summary["oracle_mismatch"] = True
            run.checks["oracle_radius"] = {"value": None, "tol": run.tol.get("oracle_radius", 1e-3),
                                           "passed": False}
    write_json(run.path("trapping.json"), summary)


_COMMANDS = {"trace": _cmd_trace, "sojourn": _cmd_sojourn, "smatrix": _cmd_smatrix,
             "propagator": _cmd_propagator, "legendrian": _cmd_legendrian, "validate": _cmd_validate,
             "trapping": _cmd_trapping}


# ----------------------------------------------------------------------------
# driver
# ----------------------------------------------------------------------------

def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def execute_scenario(scenario, out=None, jobs=None, seed=None, tol_overrides=None):
    """Run a validated scenario dict; returns (exit_status, manifest)."""
    cmd = scenario["command"]
    out = Path(out or scenario.get("output_dir") or f"conicscat_{cmd}")
    out.mkdir(parents=True, exist_ok=True)
    tolerances = dict(scenario.get("tolerances", {}))
    if tol_overrides:
        bad = set(tol_overrides) - set(_TOLERANCES[cmd])
        if bad:
            raise ScenarioError(f"unknown tolerance keys for {cmd!r}: {sorted(bad)}")
        tolerances.update(tol_overrides)
    seed = int(scenario.get("seed", 0) if seed is None else seed)
    jobs = int(jobs if jobs is not None else os.environ.get(JOBS_ENV, 1))
    try:
        m = load_manifold(scenario["manifold"])
    except (ModelError, TypeError, ValueError) as exc:
        raise ScenarioError(f"manifold: {exc}")
    run = _Run(out, tolerances)
    t0 = time.perf_counter()
    status = EXIT_OK
    error = None
    try:
        with np.errstate(all="ignore"):
            _COMMANDS[cmd](m, scenario.get("params", {}), run, seed, jobs)
    except ScenarioError:
        raise
    except (ConicScatError, ValueError, np.linalg.LinAlgError, ArithmeticError) as exc:
        error = f"{type(exc).__name__}: {exc}"
        status = EXIT_NUMERICAL
    elapsed = time.perf_counter() - t0
    if status == EXIT_OK and run.failures:
        status = EXIT_NUMERICAL
    if status == EXIT_OK and any(not c["passed"] for c in run.checks.values()):
        status = EXIT_TOLERANCE
    manifest = {
        "tool": "conicscat", "version": __version__, "command": cmd, "seed": seed, "jobs": jobs,
        "manifold": m.spec, "tolerances": tolerances, "checks": run.checks,
        "failures": run.failures + ([error] if error else []), "exit_status": status,
        "files": {name: _sha256(out / name) for name in run.files if (out / name).exists()},
        "timings": {"total_seconds": elapsed},
        "platform": {"python": platform.python_version(), "numpy": np.__version__},
    }
    write_json(out / "manifest.json", manifest)
    return status, manifest


def build_parser():
    ap = argparse.ArgumentParser(prog="conicscat", description="Run a conicscat scenario.")
    ap.add_argument("command", nargs="?", choices=COMMANDS,
                    help="command to run; must match the scenario's 'command' when both are given")
    ap.add_argument("--config", required=True, help="scenario JSON file ('-' for stdin)")
    ap.add_argument("--out", help="output directory (default: scenario output_dir or conicscat_<command>)")
    ap.add_argument("--jobs", type=int, help=f"worker processes (default: ${JOBS_ENV} or 1)")
    ap.add_argument("--seed", type=int, help="random seed (overrides the scenario)")
    ap.add_argument("--tol-overrides", help="JSON file of tolerance overrides")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text = sys.stdin.read() if args.config == "-" else Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"conicscat: cannot read config: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        doc = json.loads(text) if text.strip() else None
    except json.JSONDecodeError:
        doc = None
    if isinstance(doc, dict) and "command" not in doc and args.command:
        doc["command"] = args.command
        text = json.dumps(doc)
    try:
        scenario = load_scenario(text, args.config)
        if args.command and scenario["command"] != args.command:
            raise ScenarioError(f"command {args.command!r} does not match scenario command "
                                f"{scenario['command']!r}")
        tol = None
        if args.tol_overrides:
            tol = load_tolerances(args.tol_overrides)
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ScenarioError("--seed must be an unsigned 64-bit integer")
        if args.jobs is not None and args.jobs < 1:
            raise ScenarioError("--jobs must be positive")
        status, manifest = execute_scenario(scenario, args.out, args.jobs, args.seed, tol)
    except ScenarioError as exc:
        print(f"conicscat: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    for name, c in manifest["checks"].items():
        print(f"{name}: {'PASS' if c['passed'] else 'FAIL'} (value {c['value']}, tol {c['tol']})")
    for f in manifest["failures"]:
        print(f"numerical failure: {f}", file=sys.stderr)
    return status


def load_tolerances(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ScenarioError(f"cannot read tolerance overrides: {exc}")
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    schema = {"type": "object", "additionalProperties": {"type": "number", "exclusiveMinimum": 0}}
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        raise ScenarioError(f"{path}: {exc.message}")
    return doc


if __name__ == "__main__":
    sys.exit(main())
