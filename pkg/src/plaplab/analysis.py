"""Post-processing of radial solutions: decay limits, compact support,
integrability, and pointwise comparison relations.

Everything here works on finite windows, so statements about +infinity are
trend estimates with declared thresholds: the decay classifier separates its
regimes by three orders of magnitude (1e-6 vs 1e-3), and integrability flags
come from the growth of trailing window increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quadrature import logsumexp

__all__ = [
    "GridMismatch", "DecayReport", "SupportReport", "NormResult",
    "ComparisonResult", "decay_limit", "detect_compact_support", "lq_norm",
    "weighted_sobolev_norm", "gradient_lp_check", "compare_ordering",
    "lambda_power_comparison",
]

#: decay classification thresholds (declared constants)
_DECAY_ZERO = 1e-6
_DECAY_POSITIVE = 1e-3
#: "decreasing" means the trailing quarter lost at least half its value
_TREND_DROP = 0.5


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True)
class DecayReport:
    limit_estimate: float
    classification: str  # "decays-to-zero" | "positive-limit" | "undetermined"
    window_used: tuple
    method: str = "tail-average + Richardson extrapolation against 1/r"

    def to_dict(self):
        return {"limit_estimate": self.limit_estimate,
                "classification": self.classification,
                "window_used": list(self.window_used), "method": self.method}


def decay_limit(sol):
    """Estimate lim u at infinity from the trailing quarter of the grid.

    Averages two half-windows and removes a c/r component (first-order
    Richardson), then classifies: decays-to-zero when the estimate is below
    1e-6 with a decreasing trend, positive-limit above 1e-3 with a flat
    trend, undetermined otherwise.
    """
    r = sol.r
    u = sol.values
    R = sol.problem.R
    if (r[-1] - R) / R < 4.0:
        raise ValueError("solution window too narrow: need width >= 4 R")
    i0 = int(np.searchsorted(r, r[-1] - 0.25 * (r[-1] - R)))
    i0 = min(max(i0, 0), r.size - 8)
    rq, uq = r[i0:], u[i0:]
    mid = uq.size // 2
    a1, a2 = float(np.mean(uq[:mid])), float(np.mean(uq[mid:]))
    m1, m2 = float(np.mean(1.0 / rq[:mid])), float(np.mean(1.0 / rq[mid:]))
    est = a1 - (a1 - a2) * m1 / (m1 - m2)
    est = max(float(est), 0.0)
    u_head, u_tail = float(uq[0]), float(uq[-1])
    decreasing = u_tail <= _TREND_DROP * u_head + 1e-15
    if est < _DECAY_ZERO and decreasing:
        cls = "decays-to-zero"
    elif est > _DECAY_POSITIVE and not decreasing:
        cls = "positive-limit"
    else:
        cls = "undetermined"
    return DecayReport(limit_estimate=est, classification=cls,
                       window_used=(float(rq[0]), float(rq[-1])))


@dataclass(frozen=True)
class SupportReport:
    """support_radius is the free-boundary estimate (profile extrapolation
    where the absorption law admits one, else the threshold radius);
    threshold_radius is the first grid node from which u and its divided
    differences stay under the tolerances to the grid end."""

    support_radius: float | None
    threshold_radius: float | None
    criterion: str

    def to_dict(self):
        return {"support_radius": self.support_radius,
                "threshold_radius": self.threshold_radius,
                "criterion": self.criterion}


#: approach band (in u) over which the free-boundary shape test runs
_BAND_LO, _BAND_HI = 1e-6, 1e-3
#: a free boundary shrinks the local length scale u/|u'| by at least this
#: factor across the band; exponential decay keeps it constant
_SCALE_SHRINK = 0.5


def detect_compact_support(sol, tau_u=1e-8, tau_g=1e-8):
    """Detect a trailing dead zone: the smallest grid radius rho with
    u < tau_u and |du| < tau_g sustained from rho to the grid end (and
    covering at least 10% of the grid).

    A candidate zone is confirmed as a genuine free boundary by the shape of
    the approach: across the band u in [1e-6, 1e-3] the local length scale
    u/|u'| must shrink (it goes to zero linearly at a free boundary, but is
    constant 1/mu for exponential decay e^{-mu r}, which also dips under the
    thresholds on wide windows).  For power-law absorption with xi < p-1 the
    boundary estimate is sharpened by profile extrapolation: near the
    boundary u ~ C (s0-r)^q with q = p/(p-1-xi), so s0 = r + q u/|u'|
    pointwise, and the cell-midpoint median estimates s0 to O(h^2).
    """
    r = sol.r
    u = sol.values
    du = np.diff(u) / np.diff(r)
    n = u.size
    dead = (u[:-1] < tau_u) & (np.abs(du) < tau_g)
    idx = n - 1
    for i in range(n - 2, -1, -1):
        if dead[i]:
            idx = i
        else:
            break
    run = (n - 1) - idx
    criterion = (f"u < {tau_u:g} and |du| < {tau_g:g} sustained to the grid "
                 "end, confirmed by a shrinking length scale u/|u'|")
    if idx == n - 1 or run < max(2, int(0.1 * n)):
        return SupportReport(None, None, criterion)
    threshold = float(r[idx])
    if idx == 0:
        return SupportReport(threshold, threshold, criterion)  # u == 0 everywhere

    u_mid = 0.5 * (u[:-1] + u[1:])
    r_mid = 0.5 * (r[:-1] + r[1:])
    band = (u_mid > _BAND_LO) & (u_mid < _BAND_HI) & (du < 0)
    if band.sum() >= 3:
        scale = u_mid[band] / (-du[band])
        if float(scale[-1]) > _SCALE_SHRINK * float(scale[0]):
            return SupportReport(None, None, criterion)  # exponential-type tail
        refined = _refine_free_boundary(sol, r_mid, u_mid, du, band)
        if refined is not None:
            return SupportReport(refined, threshold, criterion)
    return SupportReport(threshold, threshold, criterion)


def _refine_free_boundary(sol, r_mid, u_mid, du, band):
    spec = sol.lambda_spec
    p = sol.p
    if spec.kind != "power" or spec.xi > p - 1.0 - 1e-9:
        return None
    q = p / (p - 1.0 - spec.xi)
    est = r_mid[band] + q * u_mid[band] / (-du[band])
    out = float(np.median(est))
    if not (sol.r[0] <= out <= sol.r[-1]):
        return None
    return out


@dataclass(frozen=True)
class NormResult:
    value: float | None
    status: str  # "finite" | "divergent" | "skipped"
    detail: str = ""
    hypothesis_met: bool | None = None

    @property
    def finite(self):
        return self.status == "finite"

    def to_dict(self):
        return {"value": self.value, "status": self.status, "detail": self.detail,
                "hypothesis_met": self.hypothesis_met}


def _tail_trend(log_blocks):
    """finite/divergent decision from four trailing block integrals."""
    finite_blocks = [b for b in log_blocks if b != -math.inf]
    if len(finite_blocks) < 2:
        return "finite"
    ratios = np.exp(np.diff(np.asarray(log_blocks)))
    return "divergent" if float(np.median(ratios)) >= 1.0 else "finite"


def _log_blocks(r, log_density, n_blocks=4):
    """Trailing-quarter window split into block log-integrals (trapezoid)."""
    i0 = int(np.searchsorted(r, r[-1] - 0.25 * (r[-1] - r[0])))
    i0 = min(max(i0, 0), r.size - n_blocks - 1)
    edges = np.linspace(i0, r.size - 1, n_blocks + 1).astype(int)
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        seg = _log_trapezoid(r[a:b + 1], log_density[a:b + 1])
        out.append(seg)
    return out


def _log_trapezoid(r, logf):
    with np.errstate(divide="ignore"):
        pieces = np.logaddexp(logf[:-1], logf[1:]) + np.log(0.5 * np.diff(r))
    return logsumexp(pieces)


def _log_u(u):
    with np.errstate(divide="ignore"):
        return np.where(u > 0, np.log(np.maximum(u, 1e-320)), -math.inf)


def _safe_exp(x):
    return math.exp(x) if x < 700.0 else math.inf


def lq_norm(sol, q):
    """(c_m int u^q sigma^{m-1} dr)^{1/q} over the solution window, with a
    trailing-trend flag; q = inf returns max u."""
    if q == math.inf:
        return NormResult(float(np.max(sol.values)), "finite", detail="sup norm")
    if q < sol.p - 1.0 - 1e-12:
        raise ValueError(f"q={q:g} below p-1={sol.p - 1:g}")
    man = sol.manifold
    r = sol.r
    lw = np.zeros_like(r) if man.m == 1 else np.asarray(man.log_weight(r), float)
    logf = q * _log_u(sol.values) + lw
    log_int = _log_trapezoid(r, logf)
    trend = _tail_trend(_log_blocks(r, logf))
    log_cm = math.log(man.sphere_area())
    value = _safe_exp((log_cm + log_int) / q) if log_int != -math.inf else 0.0
    return NormResult(value, trend,
                      detail=f"window [{r[0]:g}, {r[-1]:g}], tail trend {trend}")


def weighted_sobolev_norm(sol, C, p=None):
    """int e^{Cr} (u^p + |u'|^p) sigma^{m-1} c_m dr over the window plus a
    tail-trend flag; also reports whether C < (lam p)^{1/p}, the hypothesis
    under which the weighted norm of the minimal solution is finite."""
    if C <= 0:
        raise ValueError("weight exponent C must be positive")
    p = sol.p if p is None else p
    man = sol.manifold
    r_mid = 0.5 * (sol.r[:-1] + sol.r[1:])
    dr = np.diff(sol.r)
    u_mid = 0.5 * (sol.values[:-1] + sol.values[1:])
    du = sol.derivative()
    lw = np.zeros_like(r_mid) if man.m == 1 else np.asarray(man.log_weight(r_mid), float)
    logf = np.logaddexp(p * _log_u(u_mid), p * _log_u(np.abs(du))) + C * r_mid + lw
    log_int = logsumexp(logf + np.log(dr))
    trend = _tail_trend(_log_blocks(r_mid, logf))
    value = _safe_exp(math.log(man.sphere_area()) + log_int) \
        if log_int != -math.inf else 0.0
    hyp = None
    if sol.lambda_spec.kind == "power":
        hyp = bool(C < (sol.lambda_spec.lam * p) ** (1.0 / p))
    return NormResult(value, trend,
                      detail=f"weight exp({C:g} r), tail trend {trend}",
                      hypothesis_met=hyp)


def gradient_lp_check(sol, eps_margin=None):
    """Trend flag for int |u'|^p sigma^{m-1} over [R + eps_margin, end].

    Precondition (checked): the u-norm lq_norm(sol, p) must be finite; when
    it is not, the check is skipped with an explanation.  eps_margin defaults
    to one grid cell beyond the inner boundary.
    """
    base = lq_norm(sol, sol.p)
    if not base.finite:
        return NormResult(None, "skipped",
                          detail="u itself has a divergent p-norm trend; "
                                 "gradient bound does not apply")
    r = sol.r
    if eps_margin is None:
        eps_margin = float(r[1] - r[0])
    if eps_margin <= 0:
        raise ValueError("eps_margin must be positive")
    keep = 0.5 * (r[:-1] + r[1:]) >= r[0] + eps_margin
    if keep.sum() < 8:
        raise ValueError("margin leaves too little of the domain")
    r_mid = 0.5 * (r[:-1] + r[1:])[keep]
    du = sol.derivative()[keep]
    dr = np.diff(r)[keep]
    man = sol.manifold
    lw = np.zeros_like(r_mid) if man.m == 1 else np.asarray(man.log_weight(r_mid), float)
    logf = sol.p * _log_u(np.abs(du)) + lw
    log_int = logsumexp(logf + np.log(dr))
    trend = _tail_trend(_log_blocks(r_mid, logf))
    value = _safe_exp(math.log(man.sphere_area()) + log_int) \
        if log_int != -math.inf else 0.0
    return NormResult(value, trend, detail=f"margin {eps_margin:g}")


@dataclass(frozen=True)
class ComparisonResult:
    ok: bool
    max_violation: float
    detail: str = ""


def _overlap_nodes(u_sol, v_sol):
    lo = max(u_sol.r[0], v_sol.r[0])
    hi = min(u_sol.r[-1], v_sol.r[-1])
    if hi <= lo:
        raise GridMismatch("solution domains do not overlap")
    keep = (u_sol.r >= lo - 1e-12) & (u_sol.r <= hi + 1e-12)
    return u_sol.r[keep], u_sol.values[keep]


def compare_ordering(u_sol, v_sol, tol=1e-8):
    """True iff u <= v + tol on the common domain (v resampled by monotone
    piecewise-linear interpolation onto u's nodes); reports max(u - v)."""
    r, u = _overlap_nodes(u_sol, v_sol)
    v = v_sol(r)
    gap = float(np.max(u - v))
    return ComparisonResult(ok=gap <= tol, max_violation=gap,
                            detail=f"{r.size} common nodes")


def lambda_power_comparison(sol_small_lambda, sol_big_lambda, p=None, tol=1e-6):
    """Power-trick comparison between minimal solutions for two absorption
    coefficients lam_small < lam_big (same profile, m, p, R, unit inner data):
    with alpha = (lam_big/lam_small)^{1/(p-1)} > 1 the small-coefficient
    solution satisfies h_small^alpha <= h_big."""
    a = sol_small_lambda
    b = sol_big_lambda
    p = a.p if p is None else p
    if a.lambda_spec.kind != "power" or b.lambda_spec.kind != "power":
        raise ValueError("power comparison needs power-law absorption")
    if not math.isclose(a.p, b.p) or a.m != b.m \
            or a.manifold.sigma.text != b.manifold.sigma.text \
            or not math.isclose(a.problem.R, b.problem.R):
        raise GridMismatch("solutions come from different problems")
    lam_s, lam_b = a.lambda_spec.lam, b.lambda_spec.lam
    if lam_s > lam_b:
        raise ValueError("first argument must carry the smaller coefficient")
    alpha = (lam_b / lam_s) ** (1.0 / (p - 1.0))
    r, us = _overlap_nodes(a, b)
    ub = b(r)
    gap = float(np.max(us ** alpha - ub))
    return ComparisonResult(ok=gap <= tol, max_violation=gap,
                            detail=f"alpha={alpha:g}")
