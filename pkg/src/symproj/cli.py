"""Scenario runner: ``symproj run config.json`` and one subcommand per experiment.

Exit codes: 0 when every pass flag is true, 2 when a theorem / witness /
consistency check fails, 1 on configuration or runtime errors (in which case
no output file is written).
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import bosons, circuit, metrology, spins
from .operators import (
    MAX_DENSE_DIM,
    DensityOperator,
    HilbertSpace,
    collective_spin,
    evolve,
    expectation,
    fidelity,
    pauli_on_site,
    random_density,
    random_density_in_sector,
)
from .symmetry import (
    is_supported_in_sector,
    magnetization_projector,
    parity_projector,
    sector_split,
)

log = logging.getLogger("symproj")

WORKERS_ENV = "SYMPROJ_WORKERS"

DEFAULT_TOLERANCES = {
    "theorem": 1e-8,
    "xi": 1e-6,
    "hypothesis": 1e-10,
    "parity": 1e-9,
    "fidelity": 1e-10,
    "correlation": 1e-10,
    "closed_form": 1e-8,
}

MAX_DICKE_N = 4096


class ConfigError(ValueError):
    pass


def load_schema() -> dict:
    return json.loads(resources.files("symproj").joinpath("scenario.schema.json").read_text())


# -- scenario normalization ----------------------------------------------------

def _linspace(sweep: dict) -> list:
    if "values" in sweep:
        return [float(v) for v in sweep["values"]]
    if "count" in sweep:
        return [float(i) for i in range(sweep["count"])]
    if {"start", "stop", "num"} <= sweep.keys():
        return np.linspace(sweep["start"], sweep["stop"], sweep["num"]).tolist()
    raise ConfigError("sweep needs 'values', 'count' or 'start'/'stop'/'num'")


def normalize(raw: dict) -> dict:
    """Schema-validate and fill per-experiment defaults; returns a new dict."""
    try:
        jsonschema.validate(raw, load_schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {path}: {exc.message}") from None
    sc = copy.deepcopy(raw)
    exp = sc["experiment"]
    sysd = sc["system"]
    N = sysd["N"]
    sc.setdefault("seed", 0)
    sc["tolerances"] = {**DEFAULT_TOLERANCES, **sc.get("tolerances", {})}
    prep = sc.setdefault("preparation", {"kind": _default_prep(exp)})
    sc.setdefault("generator", {"kind": "tunneling"} if sysd["kind"] == "bosons"
                  else {"kind": "collective", "axis": "z" if exp == "ramp" else "y"})
    if sysd["kind"] == "bosons":
        sc.setdefault("projector", {"kind": "boson-number"})
    else:
        sc.setdefault("projector", {"kind": "parity-x", "sector": "even"})
    sc["projector"].setdefault("sector", "even")

    allowed_systems = {
        "theorem-check": ("spins", "dicke", "bosons"),
        "oat-sweep": ("dicke", "spins"),
        "ramp": ("spins",),
        "bec": ("bosons",),
        "circuit": ("spins",),
        "witness": ("spins", "bosons"),
    }[exp]
    if sysd["kind"] not in allowed_systems:
        raise ConfigError(f"{exp} does not support system kind {sysd['kind']!r}")
    if sysd["kind"] == "spins" and 2 ** (N + (1 if exp == "circuit" else 0)) > MAX_DENSE_DIM * (2 if exp == "circuit" else 1):
        raise ConfigError(f"N={N} exceeds the dense register cap")
    if sysd["kind"] == "dicke" and N > MAX_DICKE_N:
        raise ConfigError(f"N={N} exceeds the Dicke cap {MAX_DICKE_N}")
    if sysd["kind"] == "bosons":
        if "NA" not in sysd or "NB" not in sysd:
            raise ConfigError("boson systems need NA and NB")
        try:
            u = bosons.FockUniverse(N, sysd["NA"], sysd["NB"])
        except bosons.DimensionCapError as exc:
            raise ConfigError(str(exc)) from None
        if exp in ("theorem-check", "witness") and u.dimension > MAX_DENSE_DIM:
            raise ConfigError(f"{exp} needs a dense Fock universe (dimension {u.dimension} > {MAX_DENSE_DIM})")

    if exp == "oat-sweep":
        prep.setdefault("chi", 1.0)
        if prep["kind"] != "oat":
            raise ConfigError("oat-sweep needs an oat preparation")
        sc.setdefault("sweep", {"parameter": "t", "start": 0.0,
                                "stop": math.pi * N / (2 * prep["chi"]), "num": 17})
        if N < 2:
            raise ConfigError("oat-sweep needs N >= 2")
    if exp == "ramp":
        if prep["kind"] != "ramp":
            raise ConfigError("ramp needs a ramp preparation")
        for k, v in (("model", "ising"), ("coupling", "chain"), ("J", 1.0), ("alpha", 3.0),
                     ("omega_from", 5.0), ("omega_to", 0.1), ("T", 50.0), ("steps", 500),
                     ("record_every", 10)):
            prep.setdefault(k, v)
        if "sweep" in sc:
            raise ConfigError("ramp scenarios do not take a sweep")
    if exp == "bec":
        prep.setdefault("ideal", True)
        if prep["kind"] != "bec":
            raise ConfigError("bec needs a bec preparation")
    if prep["kind"] == "random-sector":
        prep.setdefault("rank", "cycle")
    sc.setdefault("sweep", {"parameter": "replicate", "count": 1})
    sc["grid"] = _linspace(sc["sweep"])
    return sc


def _default_prep(exp: str) -> str:
    return {"theorem-check": "random-sector", "oat-sweep": "oat", "ramp": "ramp",
            "bec": "bec", "circuit": "coherent-state", "witness": "coherent-state"}[exp]


# -- building blocks -----------------------------------------------------------

def _universe(sc):
    s = sc["system"]
    return bosons.FockUniverse(s["N"], s["NA"], s["NB"])


def build_projector(sc):
    s, p = sc["system"], sc["projector"]
    N = s["N"]
    if s["kind"] == "spins":
        if p["kind"] in ("parity-x", "parity-z"):
            return parity_projector(p["kind"][-1], p["sector"], N)
        if p["kind"] == "magnetization":
            return magnetization_projector(p.get("m", 0.0), N)
    elif s["kind"] == "dicke":
        if p["kind"] == "parity-x":
            return spins.dicke_parity_projector(N, p["sector"])
    elif p["kind"] == "boson-number":
        return bosons.number_projector(_universe(sc), s["NA"])
    raise ConfigError(f"projector {p['kind']!r} unavailable for {s['kind']} systems")


def build_generator(sc):
    s, g = sc["system"], sc["generator"]
    if g["kind"] == "tunneling":
        if s["kind"] != "bosons":
            raise ConfigError("tunneling generator needs a boson system")
        return bosons.tunneling_generator(_universe(sc))
    axis = g.get("axis", "y")
    if s["kind"] == "dicke":
        return spins.dicke_operators(s["N"])["xyz".index(axis)]
    if s["kind"] == "spins":
        return collective_spin(axis, s["N"])
    raise ConfigError("collective generator needs a spin system")


def prepare_state(sc, index: int, value: float, seed: int) -> DensityOperator:
    s, prep = sc["system"], sc["preparation"]
    kind, N = prep["kind"], s["N"]
    param = sc["sweep"]["parameter"]
    rep = "dicke" if s["kind"] == "dicke" else "full"
    if kind == "coherent-state":
        return spins.coherent_spin_state(prep.get("axis", "x"), N, rep)
    if kind == "oat":
        t = value if param == "t" else prep.get("t", 0.0)
        chi = prep.get("chi", 1.0)
        if rep == "dicke":
            return spins.oat_evolve(N, chi, t, prep.get("axis", "x"))
        H = spins.build_hamiltonian(spins.oat(N, chi))
        return evolve(spins.coherent_spin_state(prep.get("axis", "x"), N), H, t)
    if kind == "random-sector":
        P = build_projector(sc)
        if param == "rank":
            rank = int(value)
        elif prep["rank"] == "cycle":
            rank = 1 + index % P.rank
        else:
            rank = prep["rank"]
        if not 1 <= rank <= P.rank:
            raise ConfigError(f"rank {rank} not in [1, {P.rank}]")
        return random_density_in_sector(P, rank, seed)
    if kind == "cat":
        return circuit.cat_state(N, prep.get("sign", "+"))
    if kind == "zero":
        return spins.coherent_spin_state("z", N)
    if kind == "classical-x":
        a = spins.coherent_spin_state("x", N).matrix
        b = spins.coherent_spin_state("-x", N).matrix
        return DensityOperator(0.5 * (a + b), HilbertSpace.spin_register(N), check_positive=False)
    if kind == "random":
        rank = int(value) if param == "rank" else prep.get("rank", 2**N)
        if rank == "cycle":
            rank = 1 + index % 2**N
        return random_density(HilbertSpace.spin_register(N), rank, seed)
    if kind == "bec":
        u = _universe(sc)
        ens = _bec_ensemble(u, prep.get("ideal", True))
        return ens.density()
    raise ConfigError(f"preparation {kind!r} not available for this experiment")


def _bec_ensemble(u, ideal: bool):
    return bosons.FockEnsemble.pure(u, bosons.bec_ket(u)) if ideal else bosons.uniform_fock_mixture(u)


# -- per-point runners ------------------------------------------------------

def _theorem_fields(rep: metrology.TheoremReport) -> dict:
    return {
        "qfi": rep.qfi, "four_G2": rep.four_G2, "four_var": rep.four_var,
        "xi_P_inv2": rep.xi_P_inv2, "sector_residual": rep.sector_residual,
        "diagonal_residual": rep.diagonal_residual,
        "complement_residual": rep.complement_residual,
    }


def _check(sc, rho, P, G):
    t = sc["tolerances"]
    return metrology.check_theorem(rho, P, G, tol=t["theorem"], xi_tol=t["xi"],
                                   hypothesis_tol=t["hypothesis"])


def point_theorem_check(sc, index, value, seed):
    rho = prepare_state(sc, index, value, seed)
    P, G = build_projector(sc), build_generator(sc)
    rep = _check(sc, rho, P, G)
    row = {"rank": _numerical_rank(rho), "purity": rho.purity(), **_theorem_fields(rep)}
    return row, rep.passed


def _numerical_rank(rho) -> int:
    return int(np.sum(np.linalg.eigvalsh(rho.matrix) > 1e-12))


def point_oat(sc, index, value, seed):
    rho = prepare_state(sc, index, value, seed)
    s = sc["system"]
    N = s["N"]
    if s["kind"] == "dicke":
        Jx, Jy, Jz = spins.dicke_operators(N)
        parity_op = spins.dicke_parity_x(N)
    else:
        Jx, Jy, Jz = (collective_spin(a, N) for a in "xyz")
        parity_op = parity_projector("x", "even", N).op * 2 - 1
    P = build_projector(sc)
    rep = _check(sc, rho, P, Jy)
    parity = expectation(rho, parity_op).real
    ok = rep.passed and abs(parity - 1.0) <= sc["tolerances"]["parity"]
    row = {"t": value if sc["sweep"]["parameter"] == "t" else sc["preparation"].get("t", 0.0),
           "parity": parity, "qfi_Jy": rep.qfi, "four_Jy2": rep.four_G2,
           "xi_P_inv2": rep.xi_P_inv2, "qfi_Jx": metrology.qfi(rho, Jx),
           "sector_residual": rep.sector_residual}
    return row, ok


def point_bec(sc, index, value, seed):
    s, prep = sc["system"], sc["preparation"]
    N, NA, NB = s["N"], s["NA"], s["NB"]
    u = _universe(sc)
    ideal = prep.get("ideal", True)
    ens = _bec_ensemble(u, ideal)
    G = bosons.tunneling_matrix(u)
    brute = bosons.brute_force_qfi(ens, G, u)
    sa = bosons.spdm(ens, u, "a")
    sb = bosons.spdm(ens, u, "b")
    closed = bosons.qfi_closed_form(sa, sb)
    GV = G @ ens.vectors
    four_G2 = 4.0 * float(np.sum(ens.weights * np.asarray(abs(GV).power(2).sum(axis=0)).ravel())
                          if hasattr(GV, "power") else np.sum(ens.weights * np.sum(np.abs(GV) ** 2, axis=0)))
    n_a, n_b = NA / N, NB / N
    f_sep = bosons.separable_bound(N, n_a, n_b)
    stat, witnessed = bosons.coherence_witness(sa, NB, N)
    tol = sc["tolerances"]["closed_form"]
    ok = abs(brute - closed) <= tol * max(1.0, closed) and abs(four_G2 - brute) <= tol * max(1.0, brute)
    row = {"NA": NA, "NB": NB, "state": "ideal" if ideal else "diagonal", "dimension": u.dimension,
           "qfi": brute, "qfi_closed": closed, "four_G2": four_G2,
           "ideal_formula": bosons.ideal_bec_qfi(N, n_a, n_b), "f_sep": f_sep,
           "entangled": brute > f_sep + metrology.CHAIN_SLACK,
           "coherence_statistic": stat, "coherence_witnessed": witnessed}
    return row, ok


def point_circuit(sc, index, value, seed):
    N = sc["system"]["N"]
    rho = prepare_state(sc, index, value, seed)
    t = sc["tolerances"]
    even, odd = circuit.parity_extraction(rho)
    split = sector_split(rho, parity_projector("z", "even", N))
    rows = []
    ok_all = True
    Js = [collective_spin(a, N) for a in "xyz"]
    for out, ref, sector in ((even, split.rho_even, "even"), (odd, split.rho_odd, "odd")):
        if out.empty or ref is None:
            same_empty = out.empty and ref is None
            ok_all &= same_empty
            rows.append({"outcome": out.outcome_bit, "probability": out.probability, "empty": True,
                         "fidelity_vs_projector": 1.0 if same_empty else 0.0})
            continue
        F = fidelity(out.post_state, ref)
        rep = _check(sc, out.post_state, parity_projector("z", sector, N), Js[0])
        ok = F >= 1 - t["fidelity"] and rep.passed
        ok_all &= ok
        rows.append({"outcome": out.outcome_bit, "probability": out.probability, "empty": False,
                     "fidelity_vs_projector": F,
                     "qfi_Jx": rep.qfi, "qfi_Jy": metrology.qfi(out.post_state, Js[1]),
                     "qfi_Jz": metrology.qfi(out.post_state, Js[2]),
                     "four_Jx2": rep.four_G2, "xi_P_inv2": rep.xi_P_inv2, "theorem_passed": rep.passed})
    corr = circuit.correlation_preservation_report(rho)
    max_delta = max((c.delta for c in corr), default=0.0)
    for r in rows:
        r["max_correlation_delta"] = max_delta
    ok_all &= max_delta <= t["correlation"]
    return rows, ok_all


def point_witness(sc, index, value, seed):
    s = sc["system"]
    rho = prepare_state(sc, index, value, seed)
    expected = sc.get("expect_entangled")
    if s["kind"] == "bosons":
        u = _universe(sc)
        G = bosons.tunneling_generator(u)
        F = metrology.qfi(rho, G)
        bound = bosons.separable_bound(s["N"], s["NA"] / s["N"], s["NB"] / s["N"])
        ent = F > bound + metrology.CHAIN_SLACK
        row = {"qfi": F, "bound": bound, "entangled": ent}
    else:
        N = s["N"]
        axis = sc["generator"].get("axis", "z")
        locs = [pauli_on_site(axis, i, N) * 0.5 for i in range(N)]
        P = build_projector(sc)
        if not is_supported_in_sector(rho, P, sc["tolerances"]["hypothesis"]).supported:
            P = None
        w = metrology.separability_witness(rho, locs, P)
        ent = w.entangled
        row = {"qfi": w.qfi, "bound": w.bound, "entangled": ent,
               "reduced_lhs": w.reduced_lhs, "reduced_rhs": w.reduced_rhs,
               "reduced_entangled": w.reduced_entangled}
    row["expected"] = expected
    return row, expected is None or ent == expected


RUNNERS = {
    "theorem-check": point_theorem_check,
    "oat-sweep": point_oat,
    "bec": point_bec,
    "circuit": point_circuit,
    "witness": point_witness,
}


def _run_point(sc, index, value):
    seed = sc["seed"] ^ index
    t0 = time.perf_counter()
    fields, ok = RUNNERS[sc["experiment"]](sc, index, value, seed)
    wall = time.perf_counter() - t0
    rows = fields if isinstance(fields, list) else [fields]
    return [_finish_row(sc, index, value, seed, r, ok, wall) for r in rows]


def _finish_row(sc, index, value, seed, fields, ok, wall, parameter=None):
    row = {"scenario": sc["name"], "index": index, "parameter": parameter or sc["sweep"]["parameter"],
           "value": value, "seed": seed}
    row.update(fields)
    row["passed"] = bool(ok)
    row.update({f"tol_{k}": v for k, v in sc["tolerances"].items()})
    row["wall_time"] = wall
    return row


def run_ramp(sc):
    prep, N = sc["preparation"], sc["system"]["N"]
    if prep["coupling"] == "chain":
        J = spins.chain_couplings(N, prep["J"])
    else:
        J = spins.power_law_couplings(N, prep["J"], prep["alpha"])
    spec = {"ising": spins.ising, "xy": spins.xy, "xxz": spins.xxz}[prep["model"]](J)
    sched = spins.RampSchedule(prep["T"], prep["steps"], prep["omega_from"], prep["omega_to"], spec)
    t0 = time.perf_counter()
    res = spins.quasi_adiabatic_ramp(sched, spins.coherent_spin_state("x", N),
                                     record_every=prep["record_every"])
    G = build_generator(sc)
    de = spins.diagonal_ensemble(res.final, res.final_hamiltonian, res.projector)
    rep_final = _check(sc, res.final, res.projector, G)
    rep_de = _check(sc, de, res.projector, G)
    wall = time.perf_counter() - t0
    tol = sc["tolerances"]["parity"]
    rows = []
    for i, st in enumerate(res.trajectory):
        fields = {"t": st.t, "omega": st.omega, "energy_density": st.energy_density,
                  "parity": st.parity, "four_Jz2": st.four_Jz2, "gs_fidelity": st.gs_fidelity}
        rows.append(_finish_row(sc, i, st.t, sc["seed"], fields, abs(st.parity - 1) <= tol,
                                wall / max(1, len(res.trajectory)), parameter="t"))
    extra = {
        "schedule": sched.to_dict(),
        "final_theorem": rep_final.to_dict(),
        "diagonal_ensemble_theorem": rep_de.to_dict(),
        "diagonal_ensemble_purity": de.purity(),
        "final_purity": res.final.purity(),
    }
    return rows, extra, rep_de.passed and rep_final.passed


def _workers(cli_value):
    if cli_value is not None:
        return max(1, cli_value)
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer") from None


def execute(sc: dict, workers: int = 1) -> tuple:
    """Run a normalized scenario. Returns (rows, summary)."""
    t0 = time.perf_counter()
    extra, extra_ok = {}, True
    if sc["experiment"] == "ramp":
        rows, extra, extra_ok = run_ramp(sc)
    else:
        grid = list(enumerate(sc["grid"]))
        if workers > 1 and len(grid) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                chunks = list(pool.map(_run_point, [sc] * len(grid), *zip(*grid)))
        else:
            chunks = [_run_point(sc, i, v) for i, v in grid]
        rows = [r for chunk in chunks for r in chunk]
    failures = [r["index"] for r in rows if not r["passed"]]
    public = {k: v for k, v in sc.items() if k != "grid"}
    summary = {
        "scenario": sc["name"],
        "experiment": sc["experiment"],
        "config": public,
        "seed": sc["seed"],
        "tolerances": sc["tolerances"],
        "rows": len(rows),
        "failed_rows": failures,
        "passed": not failures and extra_ok,
        **extra,
        "wall_time": time.perf_counter() - t0,
    }
    return rows, summary


# -- output ------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(v) else f"{float(v):.16e}"
    return str(v)


def rows_to_csv(rows: list) -> str:
    cols = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    # wall time last so that everything before it is reproducible byte for byte
    cols = [c for c in cols if c != "wall_time"] + ["wall_time"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _clean(o):
    if isinstance(o, float) and not math.isfinite(o):
        return None
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, list):
        return [_clean(v) for v in o]
    return o


def _atomic_write(path: str, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_outputs(sc, rows, summary, stdout=None) -> None:
    out = sc.get("output", {})
    csv_text = rows_to_csv(rows)
    json_text = json.dumps(_clean(json.loads(json.dumps(summary, default=_json_default))),
                           indent=2, sort_keys=True) + "\n"
    if out.get("csv"):
        _atomic_write(out["csv"], csv_text)
    else:
        (stdout or sys.stdout).write(csv_text)
    if out.get("json"):
        _atomic_write(out["json"], json_text)


def run(config, workers=None, validate_only=False, stdout=None) -> int:
    """Run a scenario given as a path or a dict; returns the process exit code."""
    try:
        if isinstance(config, dict):
            raw = config
        else:
            try:
                raw = json.loads(Path(config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {config}: {exc}") from None
        sc = normalize(raw)
        nworkers = _workers(workers)
        if validate_only:
            (stdout or sys.stdout).write(f"{sc['name']}: valid ({len(sc['grid'])} grid points)\n")
            return 0
        rows, summary = execute(sc, nworkers)
        write_outputs(sc, rows, summary, stdout)
    except ConfigError as exc:
        log.error("%s", exc)
        return 1
    except Exception as exc:  # runtime failure: report, no outputs
        log.error("run failed: %s: %s", type(exc).__name__, exc)
        return 1
    if not summary["passed"]:
        log.warning("%s: %d failing rows", sc["name"], len(summary["failed_rows"]))
        return 2
    return 0


# -- argparse front end --------------------------------------------------------

def _common(p):
    p.add_argument("--name", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", default=None, help="CSV output path (default: stdout)")
    p.add_argument("--json", default=None, help="JSON summary path")
    p.add_argument("--workers", type=int, default=None, help=f"worker processes (env {WORKERS_ENV})")
    p.add_argument("--validate-only", action="store_true")
    for tol in DEFAULT_TOLERANCES:
        p.add_argument(f"--tol-{tol.replace('_', '-')}", type=float, default=None, dest=f"tol_{tol}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="symproj", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a JSON scenario file")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--validate-only", action="store_true")

    sub.add_parser("schema", help="print the scenario JSON schema")

    p = sub.add_parser("theorem-check", help="equality chain on seeded sector states")
    p.add_argument("--N", type=int, default=4)
    p.add_argument("--system", choices=["spins", "dicke"], default="spins")
    p.add_argument("--projector", choices=["parity-x", "parity-z"], default="parity-x")
    p.add_argument("--sector", choices=["even", "odd"], default="even")
    p.add_argument("--generator", choices=["x", "y", "z"], default="y")
    p.add_argument("--rank", default="cycle", help="state rank or 'cycle'")
    p.add_argument("--seeds", type=int, default=50, help="number of seeded replicates")
    _common(p)

    p = sub.add_parser("oat-sweep", help="one-axis twisting in the Dicke sector")
    p.add_argument("--N", type=int, default=8)
    p.add_argument("--chi", type=float, default=1.0)
    p.add_argument("--points", type=int, default=17)
    p.add_argument("--t-max", type=float, default=None, help="default pi N / (2 chi)")
    _common(p)

    p = sub.add_parser("ramp", help="quasi-adiabatic field ramp and diagonal ensemble")
    p.add_argument("--N", type=int, default=6)
    p.add_argument("--model", choices=["ising", "xy", "xxz"], default="ising")
    p.add_argument("--coupling", choices=["chain", "power-law"], default="chain")
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=3.0)
    p.add_argument("--omega-from", type=float, default=5.0)
    p.add_argument("--omega-to", type=float, default=0.1)
    p.add_argument("--T", type=float, default=50.0)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--record-every", type=int, default=10)
    p.add_argument("--generator", choices=["y", "z"], default="z")
    _common(p)

    p = sub.add_parser("bec", help="tunneling QFI of two condensates")
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--NA", type=int, default=1)
    p.add_argument("--NB", type=int, default=1)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--ideal", dest="ideal", action="store_true", default=True)
    g.add_argument("--diagonal", dest="ideal", action="store_false")
    _common(p)

    p = sub.add_parser("circuit", help="CNOT-ladder parity projection")
    p.add_argument("--N", type=int, default=4)
    p.add_argument("--input", choices=["css-x", "cat", "zero", "classical-x", "random"], default="css-x")
    p.add_argument("--rank", type=int, default=None)
    _common(p)

    p = sub.add_parser("witness", help="QFI separability witness")
    p.add_argument("--N", type=int, default=4)
    p.add_argument("--state", choices=["css-x", "cat", "oat", "random-sector", "bec"], default="css-x")
    p.add_argument("--axis", choices=["x", "y", "z"], default="z")
    p.add_argument("--t", type=float, default=0.0, help="OAT time for --state oat")
    p.add_argument("--NA", type=int, default=None)
    p.add_argument("--NB", type=int, default=None)
    p.add_argument("--expect", choices=["entangled", "separable"], default=None)
    _common(p)
    return ap


def scenario_from_args(a) -> dict:
    cmd = a.command
    sc = {"name": a.name or cmd, "experiment": cmd, "seed": a.seed}
    tols = {k: getattr(a, f"tol_{k}") for k in DEFAULT_TOLERANCES if getattr(a, f"tol_{k}") is not None}
    if tols:
        sc["tolerances"] = tols
    out = {k: getattr(a, k) for k in ("csv", "json") if getattr(a, k)}
    if out:
        sc["output"] = out
    if cmd == "theorem-check":
        rank = a.rank if a.rank == "cycle" else int(a.rank)
        sc.update(system={"kind": a.system, "N": a.N},
                  preparation={"kind": "random-sector", "rank": rank},
                  projector={"kind": a.projector, "sector": a.sector},
                  generator={"kind": "collective", "axis": a.generator},
                  sweep={"parameter": "replicate", "count": a.seeds})
    elif cmd == "oat-sweep":
        t_max = a.t_max if a.t_max is not None else math.pi * a.N / (2 * a.chi)
        sc.update(system={"kind": "dicke", "N": a.N}, preparation={"kind": "oat", "chi": a.chi},
                  sweep={"parameter": "t", "start": 0.0, "stop": t_max, "num": a.points})
    elif cmd == "ramp":
        sc.update(system={"kind": "spins", "N": a.N},
                  preparation={"kind": "ramp", "model": a.model, "coupling": a.coupling, "J": a.J,
                               "alpha": a.alpha, "omega_from": a.omega_from, "omega_to": a.omega_to,
                               "T": a.T, "steps": a.steps, "record_every": a.record_every},
                  generator={"kind": "collective", "axis": a.generator})
    elif cmd == "bec":
        sc.update(system={"kind": "bosons", "N": a.N, "NA": a.NA, "NB": a.NB},
                  preparation={"kind": "bec", "ideal": a.ideal})
    elif cmd == "circuit":
        prep = {"css-x": {"kind": "coherent-state", "axis": "x"}, "cat": {"kind": "cat"},
                "zero": {"kind": "zero"}, "classical-x": {"kind": "classical-x"},
                "random": {"kind": "random"}}[a.input]
        if a.rank is not None:
            prep["rank"] = a.rank
        sc.update(system={"kind": "spins", "N": a.N}, preparation=prep)
    elif cmd == "witness":
        if a.state == "bec":
            sc.update(system={"kind": "bosons", "N": a.N, "NA": a.NA if a.NA is not None else a.N // 2,
                              "NB": a.NB if a.NB is not None else a.N // 2},
                      preparation={"kind": "bec", "ideal": True})
        else:
            prep = {"css-x": {"kind": "coherent-state", "axis": "x"}, "cat": {"kind": "cat"},
                    "oat": {"kind": "oat", "t": a.t}, "random-sector": {"kind": "random-sector"}}[a.state]
            sc.update(system={"kind": "spins", "N": a.N}, preparation=prep,
                      generator={"kind": "collective", "axis": a.axis})
        if a.expect:
            sc["expect_entangled"] = a.expect == "entangled"
    return sc


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if a.command == "schema":
        print(json.dumps(load_schema(), indent=2))
        return 0
    if a.command == "run":
        return run(a.config, a.workers, a.validate_only)
    return run(scenario_from_args(a), a.workers, a.validate_only)


if __name__ == "__main__":
    sys.exit(main())
