"""Named verification checks and fixture sets for the `verify` command.

Each check runs one (manifold, p, property) cell of the qualitative theory at
desk scale and reports PASS/FAIL with a detail string.  The built-in "core"
set covers the full acceptance surface; custom fixture files (JSON, schema 1)
select checks with explicit parameters, e.g.

    {"schema": 1, "fixtures": [
        {"check": "classification", "family": "euclidean", "m": 3, "p": 2.0,
         "expect": {"hyperbolic": true, "complete": true, "feller": true}},
        {"check": "lambda-comparison-power", "family": "euclidean", "m": 3,
         "p": 2.0, "lam_small": 0.5, "lam_big": 1.0}]}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import analysis, classify, solver, warping

__all__ = ["CheckResult", "run_fixture", "run_fixture_set", "load_fixture_file",
           "core_fixtures", "CHECKS"]


@dataclass(frozen=True)
class CheckResult:
    index: int
    check: str
    label: str
    passed: bool
    detail: str


def _manifold(params):
    fam = params.get("family", "euclidean")
    kappa = params.get("kappa", -1.0)
    if fam == "custom":
        sigma = warping.parse_sigma(params["sigma"])
    else:
        sigma = warping.make_family(fam, kappa)
    return warping.ModelManifold(int(params.get("m", 3)), sigma)


def _label(params):
    fam = params.get("family", params.get("sigma", "euclidean"))
    return f"{fam}, m={params.get('m', 3)}, p={params.get('p', 2.0):g}"


# --- individual checks ------------------------------------------------------

def _check_classification(params):
    man = _manifold(params)
    rep = classify.classify_manifold(man, float(params["p"]))
    got = {"hyperbolic": rep.is_hyperbolic, "complete": rep.is_complete,
           "feller": rep.is_feller}
    expect = params["expect"]
    ok = all(got[k] == expect[k] for k in expect) and not rep.inconclusive
    return ok, f"got {got}"


def _check_exact_minimal(params):
    man = _manifold({"family": "euclidean", "m": 3})
    prob = solver.ExteriorProblem(man, R=1.0, p=2.0,
                                  lambda_spec=solver.LambdaSpec.power(1.0, 1.0))
    n = int(params.get("n", 2048))
    sol = solver.minimal_exterior_solution(prob, window=10.0, tol=1e-8,
                                           n_window=n)
    err = float(np.max(np.abs(sol.values - np.exp(-(sol.r - 1.0)) / sol.r)))
    tol = float(params.get("tol", 1e-4))
    return err <= tol, f"sup error {err:.3g} (tol {tol:g})"


def _check_grid_refinement(params):
    man = _manifold({"family": "euclidean", "m": 3})
    prob = solver.ExteriorProblem(man, R=1.0, p=2.0,
                                  lambda_spec=solver.LambdaSpec.power(1.0, 1.0))
    errs = []
    for n in (512, 1024, 2048):
        sol = solver.minimal_exterior_solution(prob, window=10.0, tol=1e-8,
                                               n_window=n)
        errs.append(float(np.max(np.abs(sol.values - np.exp(-(sol.r - 1.0)) / sol.r))))
    r1 = errs[0] / errs[1]
    r2 = errs[1] / errs[2]
    return (r1 >= 3.0 and r2 >= 3.0), \
        f"errors {errs[0]:.2e} -> {errs[1]:.2e} -> {errs[2]:.2e}, ratios {r1:.2f}, {r2:.2f}"


def _p_harmonic_profile(r, p, m, r0, r1):
    s = (m - 1.0) / (p - 1.0)
    if abs(s - 1.0) < 1e-12:
        return np.log(r1 / r) / np.log(r1 / r0)
    return (r ** (1 - s) - r1 ** (1 - s)) / (r0 ** (1 - s) - r1 ** (1 - s))


def _check_p_harmonic(params):
    p = float(params["p"])
    man = _manifold({"family": "euclidean", "m": 3})
    prob = solver.ExteriorProblem(man, R=1.0, p=p,
                                  lambda_spec=solver.LambdaSpec.zero())
    sol = solver.solve_annulus_bvp(prob, L=1.0, outer_value=0.0,
                                   n=int(params.get("n", 2048)))
    err = float(np.max(np.abs(sol.values - _p_harmonic_profile(sol.r, p, 3, 1.0, 2.0))))
    tol = float(params.get("tol", 1e-6))
    return err <= tol, f"sup error {err:.3g} (tol {tol:g})"


def _check_cross_validation(params):
    p = float(params["p"])
    man = _manifold({"family": "euclidean", "m": 3})
    if params.get("mode") == "p-harmonic":
        prob = solver.ExteriorProblem(man, R=1.0, p=p,
                                      lambda_spec=solver.LambdaSpec.zero())
        L = 1.0
    else:
        prob = solver.ExteriorProblem(man, R=1.0, p=p,
                                      lambda_spec=solver.LambdaSpec.power(1.0, p - 1.0))
        L = 10.0
    n = int(params.get("n", 1024))
    a = solver.solve_annulus_bvp(prob, L=L, outer_value=0.0, n=n)
    b = solver.minimize_energy(prob, L=L, outer_value=0.0, n=n)
    gap = float(np.max(np.abs(a.values - b.values)))
    return gap <= 1e-5, f"newton vs energy sup gap {gap:.3g}"


def _check_decay(params):
    man = _manifold(params)
    p = float(params["p"])
    prob = solver.ExteriorProblem(man, R=1.0, p=p,
                                  lambda_spec=solver.LambdaSpec.power(1.0, p - 1.0))
    sol = solver.minimal_exterior_solution(prob, window=40.0, tol=1e-8,
                                           n_window=int(params.get("n", 1024)))
    rep = analysis.decay_limit(sol)
    want = params["expect"]
    return rep.classification == want, \
        f"{rep.classification} (estimate {rep.limit_estimate:.3g})"


def _check_monotone_integrable(params):
    man = _manifold(params)
    p = float(params["p"])
    prob = solver.ExteriorProblem(man, R=1.0, p=p,
                                  lambda_spec=solver.LambdaSpec.power(1.0, p - 1.0))
    sol = solver.minimal_exterior_solution(prob, window=40.0, tol=1e-8,
                                           n_window=int(params.get("n", 1024)))
    rise = float(np.max(sol.derivative()))
    ok = rise <= 1e-8
    detail = [f"max du {rise:.2e}"]
    for q in (p - 1.0, p, math.inf):
        if q <= 0:
            continue
        res = analysis.lq_norm(sol, q)
        ok = ok and res.finite
        detail.append(f"L^{q:g} {res.status}")
    if params.get("q2_value") is not None:
        res = analysis.lq_norm(sol, 2.0)
        want = float(params["q2_value"])
        ok = ok and abs(res.value - want) <= float(params.get("q2_tol", 1e-3))
        detail.append(f"L^2 {res.value:.5f} vs {want:.5f}")
    return ok, "; ".join(detail)


def _exact_euclid_solution(n=2048, width=40.0):
    man = _manifold({"family": "euclidean", "m": 3})
    prob = solver.ExteriorProblem(man, R=1.0, p=2.0,
                                  lambda_spec=solver.LambdaSpec.power(1.0, 1.0))
    grid = solver.Grid.uniform(1.0, 1.0 + width, n)
    return solver.RadialSolution.from_profile(
        prob, grid, lambda r: np.exp(-(r - 1.0)) / r)


def _check_weighted_sobolev(params):
    sol = _exact_euclid_solution()
    lam, p = 1.0, 2.0
    c_ok = float(params.get("c_finite", 0.9 * (lam * p) ** (1.0 / p)))
    c_bad = float(params.get("c_divergent", 2.5))
    fine = analysis.weighted_sobolev_norm(sol, c_ok)
    coarse = analysis.weighted_sobolev_norm(sol, c_bad)
    ok = fine.finite and coarse.status == "divergent" and fine.hypothesis_met \
        and coarse.hypothesis_met is False
    return ok, (f"C={c_ok:g}: {fine.status}; C={c_bad:g}: {coarse.status}")


def _check_lambda_comparison(params):
    man = _manifold(params)
    p = float(params["p"])
    lam_s = float(params.get("lam_small", 0.5))
    lam_b = float(params.get("lam_big", 1.0))
    n = int(params.get("n", 1024))
    sols = {}
    for lam in (lam_s, lam_b):
        prob = solver.ExteriorProblem(man, R=1.0, p=p,
                                      lambda_spec=solver.LambdaSpec.power(lam, p - 1.0))
        sols[lam] = solver.minimal_exterior_solution(prob, window=10.0,
                                                     tol=1e-8, n_window=n)
    order = analysis.compare_ordering(sols[lam_b], sols[lam_s], tol=1e-6)
    power = analysis.lambda_power_comparison(sols[lam_s], sols[lam_b], tol=1e-6)
    ok = order.ok and power.ok
    return ok, (f"ordering violation {order.max_violation:.2e}; "
                f"power-trick violation {power.max_violation:.2e} ({power.detail})")


def _check_compact_support(params):
    mode = params.get("mode", "half-line")
    if mode == "half-line":
        man = warping.ModelManifold(1, warping.euclidean())
        prob = solver.ExteriorProblem(man, R=1.0, p=2.0,
                                      lambda_spec=solver.LambdaSpec.power(1.0, 0.5))
        sol = solver.minimal_exterior_solution(prob, window=10.0, tol=1e-8,
                                               n_window=int(params.get("n", 4096)))
        rep = analysis.detect_compact_support(sol)
        want = 1.0 + 2.0 * math.sqrt(3.0)
        if rep.support_radius is None:
            return False, "no support detected"
        err = abs(rep.support_radius - want)
        return err <= float(params.get("tol", 1e-3)), \
            f"support {rep.support_radius:.5f} vs {want:.5f} (err {err:.2e})"
    if mode == "sub-linear":
        man = _manifold({"family": "euclidean", "m": 3})
        prob = solver.ExteriorProblem(man, R=1.0, p=2.0,
                                      lambda_spec=solver.LambdaSpec.power(1.0, 0.5))
        sol = solver.minimal_exterior_solution(prob, window=10.0, tol=1e-8,
                                               n_window=int(params.get("n", 4096)))
        rep = analysis.detect_compact_support(sol)
        if rep.support_radius is None:
            return False, "no support detected"
        want = params.get("pinned")
        if want is None:
            return True, f"support {rep.support_radius:.5f}"
        err = abs(rep.support_radius - float(want))
        return err <= float(params.get("tol", 1e-2)), \
            f"support {rep.support_radius:.5f} vs pinned {want} (err {err:.2e})"
    # mode == "none": xi = p-1 has no compact support
    man = _manifold({"family": "euclidean", "m": 3})
    prob = solver.ExteriorProblem(man, R=1.0, p=2.0,
                                  lambda_spec=solver.LambdaSpec.power(1.0, 1.0))
    sol = solver.minimal_exterior_solution(prob, window=40.0, tol=1e-8,
                                           n_window=int(params.get("n", 2048)))
    rep = analysis.detect_compact_support(sol)
    return rep.support_radius is None, f"support {rep.support_radius}"


def _check_hypothesis_bound(params):
    man = _manifold(params)
    bound = warping.sigma_log_derivative_inf(man, float(params.get("T", 100.0)))
    want = params["expect"]  # "bounded" | "decreasing-unbounded"
    return bound.trend == want, f"min {bound.minimum:.4g}, trend {bound.trend}"


CHECKS = {
    "classification": _check_classification,
    "exact-minimal": _check_exact_minimal,
    "grid-refinement": _check_grid_refinement,
    "p-harmonic": _check_p_harmonic,
    "cross-validation": _check_cross_validation,
    "decay": _check_decay,
    "monotone-integrable": _check_monotone_integrable,
    "weighted-sobolev": _check_weighted_sobolev,
    "lambda-comparison-power": _check_lambda_comparison,
    "compact-support": _check_compact_support,
    "slope-bound": _check_hypothesis_bound,
}


def _truth_table():
    rows = []
    for fam in ("euclidean", "hyperbolic", "cusp_cubic", "flare_cubic"):
        for m in (2, 3):
            for p in (1.5, 2.0, 3.0):
                s = (m - 1) / (p - 1)
                if fam == "euclidean":
                    expect = {"hyperbolic": s > 1, "complete": True, "feller": True}
                elif fam == "hyperbolic":
                    expect = {"hyperbolic": True, "complete": True, "feller": True}
                elif fam == "cusp_cubic":
                    expect = {"hyperbolic": False, "complete": True, "feller": p >= 3}
                else:
                    expect = {"hyperbolic": True, "complete": p >= 3, "feller": True}
                rows.append({"check": "classification", "family": fam, "m": m,
                             "p": p, "expect": expect})
    return rows


def core_fixtures():
    """The acceptance-parity verification matrix (a minute or two)."""
    rows = _truth_table()
    rows.append({"check": "exact-minimal", "n": 2048})
    rows.append({"check": "grid-refinement"})
    rows += [{"check": "p-harmonic", "p": p} for p in (1.5, 3.0)]
    rows += [{"check": "cross-validation", "p": 2.0},
             {"check": "cross-validation", "p": 1.5, "mode": "p-harmonic"},
             {"check": "cross-validation", "p": 3.0, "mode": "p-harmonic"}]
    for fam, ms in (("euclidean", (2, 3)), ("hyperbolic", (3,))):
        for m in ms:
            for p in (1.5, 2.0, 3.0):
                rows.append({"check": "decay", "family": fam, "m": m, "p": p,
                             "expect": "decays-to-zero"})
    for p in (1.5, 2.0, 3.0):
        rows.append({"check": "decay", "family": "cusp_cubic", "m": 3, "p": p,
                     "expect": "positive-limit"})
    rows.append({"check": "monotone-integrable", "family": "euclidean", "m": 3,
                 "p": 2.0, "q2_value": math.sqrt(2.0 * math.pi)})
    rows.append({"check": "monotone-integrable", "family": "hyperbolic", "m": 3,
                 "p": 2.0})
    rows.append({"check": "monotone-integrable", "family": "cusp_cubic", "m": 3,
                 "p": 2.0})
    rows.append({"check": "weighted-sobolev"})
    rows.append({"check": "lambda-comparison-power", "family": "euclidean",
                 "m": 3, "p": 2.0, "lam_small": 0.5, "lam_big": 1.0})
    rows.append({"check": "lambda-comparison-power", "family": "hyperbolic",
                 "m": 3, "p": 3.0, "lam_small": 1.0, "lam_big": 8.0})
    rows.append({"check": "compact-support", "mode": "half-line"})
    rows.append({"check": "compact-support", "mode": "none"})
    rows.append({"check": "slope-bound", "family": "euclidean", "m": 3,
                 "expect": "bounded"})
    rows.append({"check": "slope-bound", "family": "cusp_cubic", "m": 3,
                 "T": 10.0, "expect": "decreasing-unbounded"})
    return rows


def smoke_fixtures():
    """A fast subset used in CLI examples and tests."""
    return [
        {"check": "classification", "family": "euclidean", "m": 3, "p": 2.0,
         "expect": {"hyperbolic": True, "complete": True, "feller": True}},
        {"check": "p-harmonic", "p": 3.0, "n": 512, "tol": 1e-5},
        {"check": "lambda-comparison-power", "family": "euclidean", "m": 3,
         "p": 2.0, "lam_small": 0.5, "lam_big": 1.0, "n": 256},
        {"check": "slope-bound", "family": "euclidean", "m": 3,
         "expect": "bounded"},
    ]


FIXTURE_SETS = {"core": core_fixtures, "smoke": smoke_fixtures}


def load_fixture_file(path):
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or data.get("schema") != 1:
        raise ValueError("fixture file must be a JSON object with schema: 1")
    rows = data.get("fixtures", [])
    if not isinstance(rows, list):
        raise ValueError("fixtures must be a list")
    return rows


def run_fixture(index, params):
    name = params.get("check")
    if name not in CHECKS:
        raise ValueError(f"unknown check {name!r} (have {sorted(CHECKS)})")
    label = _label(params) if "p" in params or "family" in params else name
    try:
        passed, detail = CHECKS[name](params)
    except Exception as e:  # noqa: BLE001 - a crashing check is a failing check
        return CheckResult(index, name, label, False, f"error: {e}")
    return CheckResult(index, name, label, bool(passed), detail)


def run_fixture_set(rows):
    return [run_fixture(i, params) for i, params in enumerate(rows)]
