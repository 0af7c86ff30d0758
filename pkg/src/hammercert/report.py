"""Machine-readable reports: constants, conditions, certificates and solutions."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from . import eigen
from . import index_conditions as ic
from .config import ProblemConfig, build_problem, serialize_config
from .cone import spectral_radius
from .errors import HammerCertError, NoConvergence, SolverError
from .functionals import H2_lip_bound
from .index_conditions import ConditionResult, Quantity
from .multiplicity import Certificate, ConditionLedger, certify_eig, match_patterns
from .problem import ProblemSpec
from .solver import SolveReport, default_u0, picard_solve, shell_check

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_NONE = 3
CURVE_POINTS = 65


def num(x) -> str:
    """Decimal string with 15 significant digits (platform-independent formatting)."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".15g")


def encode(obj):
    """JSON-ready form: numbers become 15-digit strings, Quantities keep source and tol."""
    if isinstance(obj, Quantity):
        return {"value": num(obj.value), "source": obj.source, "tol": num(obj.tol)}
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return num(obj)
    if isinstance(obj, np.ndarray):
        return [encode(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    return obj


def q(value, source: str, tol: float = 0.0) -> Quantity:
    return Quantity(float(value), source, tol)


def condition_dict(r: ConditionResult) -> dict:
    return {"kind": r.kind, "rho": r.rho, "lhs": q(r.lhs, r.kind, 1e-9),
            "threshold": r.threshold, "holds": r.holds, "margin": r.margin,
            "advisory": r.advisory, "constants": r.constants, "notes": list(r.notes)}


def certificate_dict(cert: Certificate) -> dict:
    return {"pattern": cert.pattern, "solution_count": cert.solution_count,
            "shells": [s.to_dict() for s in cert.shells], "advisory": cert.advisory,
            "provenance": cert.provenance}


def config_hash(cfg: ProblemConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()


def new_document(cfg: ProblemConfig) -> dict:
    return {"tool": "hammercert", "version": __version__, "problem": cfg.name,
            "config_hash": config_hash(cfg),
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}


def _guard(block: dict, key: str, fn):
    """Store fn() under key, or the structured error when the quantity is unavailable."""
    try:
        block[key] = fn()
    except HammerCertError as exc:
        block[key] = exc.to_dict()


# ---------------------------------------------------------------------------
# constants


def constants_block(problem: ProblemSpec) -> dict:
    kernel = problem.kernel
    out: dict = {
        "c1": q(kernel.c1, "compute_c1", 1e-9),
        "c": q(problem.c, "cone constant", 0.0),
        "window": [q(problem.window[0], "declared"), q(problem.window[1], "declared")],
    }
    arg, inv_m = ic.inv_m(problem)
    argM, inv_M = ic.inv_M(problem)
    out["m"] = q(1.0 / inv_m, "m_constant", 1e-9)
    out["L2_bound"] = q(inv_m, "sup sigma", 1e-9)
    out["M(a,b)"] = q(1.0 / inv_M, "M_constant", 1e-9)
    out["inf_window_integral"] = q(inv_M, "inf int_a^b k g", 1e-9)
    M1, M2 = ic.cross_matrices(problem)
    out["M1"] = [[q(v, "build_cross_matrix", 1e-10) for v in row] for row in M1.entries]
    out["M2"] = [[q(v, "build_cross_matrix", 1e-10) for v in row] for row in M2.entries]
    out["r(M1)"] = q(spectral_radius(M1), "spectral_radius", 1e-12)
    out["r(M2)"] = q(spectral_radius(M2), "spectral_radius", 1e-12)
    c8 = ic.c8(problem)
    out["C8"] = {"holds": c8.holds, "threshold_M1": q(c8.threshold1, "1/c1", 1e-9)}
    out["int_K_phi_upper"] = [q(v, "K_phi_integral", 1e-10) for v in ic.kphi_vector(problem, "upper")]
    out["int_K_phi_lower"] = [q(v, "K_phi_integral", 1e-10) for v in ic.kphi_vector(problem, "lower")]
    for fam in ("upper", "lower"):
        _guard(out, f"resolvent_{fam}", lambda fam=fam: [
            q(v, "resolve_positive", 1e-10) for v in ic.resolvent(problem, fam).values])
    hq = H2_lip_bound(ic.psi_family(problem))
    out["H2_bound"] = q(hq, "H2_lip_bound", 1e-9)

    def spectral():
        est = eigen.L1_estimate(problem)
        t = np.linspace(0.0, 1.0, CURVE_POINTS)
        return {"r(L1)": q(est.radius, "spectral_radius_op", est.richardson_error),
                "mu(L1)": q(est.mu, "1/r(L1)", est.richardson_error * est.mu ** 2
                            if math.isfinite(est.mu) else 0.0),
                "converged": est.converged,
                "eigenfunction": {"t": t, "values": est.extend(t)}}
    _guard(out, "L1", spectral)
    out["thresholds"] = {
        "eig_1": q((1.0 - hq) / inv_m, "(1-||H2||*)/||L2||", 1e-9),
        "eig_23_strengthened": q(1.0 / inv_M, "M(a,b)", 1e-9),
    }
    return out


def run_constants(cfg: ProblemConfig, problem: ProblemSpec | None = None) -> dict:
    problem = problem or build_problem(cfg)
    doc = new_document(cfg)
    doc["constants"] = constants_block(problem)
    return doc


# ---------------------------------------------------------------------------
# conditions and certificates


def index_results(problem: ProblemSpec, rhos) -> list[ConditionResult]:
    out = []
    for rho in sorted(float(r) for r in rhos):
        for check in (ic.check_I1, ic.check_I1_strong, ic.check_I0, ic.check_I0_strong):
            out.append(check(problem, rho))
    return out


def run_check_index(cfg: ProblemConfig, rhos, problem: ProblemSpec | None = None) -> dict:
    problem = problem or build_problem(cfg)
    doc = new_document(cfg)
    doc["conditions"] = [condition_dict(r) for r in index_results(problem, rhos)]
    return doc


def certify(cfg: ProblemConfig, problem: ProblemSpec):
    """(final certificate, condition results, all certificates, eigen analysis or None)."""
    results = index_results(problem, cfg.rho)
    nonexist = ic.check_nonexistence(problem)
    ic.assert_consistent(nonexist, results)
    certs = []
    if cfg.rho:
        certs.append(match_patterns(ConditionLedger.from_results(results, problem.c)))
    analysis = None
    if cfg.limits_mode != "none":
        limits = eigen.estimate_limits(problem, cfg.limits_mode)
        analysis = eigen.check_eig_criteria(problem, limits)
        certs.append(certify_eig(problem, analysis.criteria))
    if not certs:
        certs.append(Certificate("NONE", 0, [], {"note": "no radii and no limits supplied"}))
    # most solutions first; among zero-count results prefer an informative pattern
    final = max(certs, key=lambda c: (c.solution_count, c.pattern != "NONE"))
    return final, results + list(nonexist), certs, analysis


def run_certify(cfg: ProblemConfig, problem: ProblemSpec | None = None) -> tuple[dict, int]:
    problem = problem or build_problem(cfg)
    doc = new_document(cfg)
    final, results, certs, analysis = certify(cfg, problem)
    doc["conditions"] = [condition_dict(r) for r in results]
    if analysis is not None:
        doc["eigencriteria"] = {
            "limits": {**analysis.limits.as_dict(), "source": analysis.limits.source},
            "criteria": [condition_dict(r) for r in analysis.criteria],
        }
    doc["certificate"] = certificate_dict(final)
    doc["all_certificates"] = [certificate_dict(c) for c in certs]
    return doc, (EXIT_NONE if final.pattern == "NONE" else EXIT_OK)


# ---------------------------------------------------------------------------
# solving


def write_csv(report: SolveReport, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "value"])
        for x, v in zip(report.solution.nodes, report.solution.values):
            w.writerow([num(x), num(v)])
    return path


def solve(cfg: ProblemConfig, problem: ProblemSpec, final: Certificate | None = None,
          ledger: ConditionLedger | None = None) -> tuple[SolveReport | None, dict]:
    s = cfg.solver
    shell = final.shells[0] if final is not None and final.shells else None
    u0 = s.u0 if s.u0 is not None else default_u0(shell)
    block = {"method": s.method, "u0": u0, "damping": s.damping, "tol": s.tol,
             "max_iter": s.max_iter, "nodes": s.nodes}
    try:
        report = picard_solve(problem, u0, s.damping, s.tol, s.max_iter, s.method)
    except (SolverError, NoConvergence) as exc:
        block["error"] = exc.to_dict()
        report = exc.report
        if report is None:
            return None, block
    if report.converged and ledger is not None and ledger.entries:
        report = shell_check(report, ledger)
    block.update({k: v for k, v in report.to_dict().items() if k not in ("nodes", "values")})
    block["norm"] = report.solution.sup_norm() if np.isfinite(report.solution.values).all() else math.inf
    block["solution"] = {"nodes": report.solution.nodes, "values": report.solution.values}
    return report, block


def run_solve(cfg: ProblemConfig, outdir: Path | None = None,
              problem: ProblemSpec | None = None) -> tuple[dict, int]:
    problem = problem or build_problem(cfg)
    doc = new_document(cfg)
    final, results, _, _ = certify(cfg, problem)
    ledger = ConditionLedger.from_results(results, problem.c) if cfg.rho else None
    report, block = solve(cfg, problem, final, ledger)
    if report is not None and outdir is not None:
        block["csv"] = str(write_csv(report, Path(outdir) / f"{cfg.name}_solution.csv"))
    doc["certificate"] = certificate_dict(final)
    doc["solver"] = block
    ok = report is not None and report.converged
    return doc, (EXIT_OK if ok else EXIT_NONE)


def run_report(cfg: ProblemConfig, out: Path, problem: ProblemSpec | None = None) -> tuple[dict, int]:
    """Constants, conditions, certificate and solution in one document at ``out``."""
    problem = problem or build_problem(cfg)
    doc = run_constants(cfg, problem)
    cert_doc, code = run_certify(cfg, problem)
    for key in ("conditions", "eigencriteria", "certificate", "all_certificates"):
        if key in cert_doc:
            doc[key] = cert_doc[key]
    solve_doc, _ = run_solve(cfg, Path(out).parent, problem)
    doc["solver"] = solve_doc["solver"]
    write_json(doc, Path(out))
    return doc, code


def dumps(doc: dict) -> str:
    return json.dumps(encode(doc), indent=2) + "\n"


def write_json(doc: dict, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(doc))
    return path
