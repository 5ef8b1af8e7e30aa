"""Log-scale adaptive quadrature and cumulative weight integrals.

Everything here works on LOG values: an integrand is supplied as a callable
returning log f(t) (with -inf for f = 0), panel sums are accumulated with
logsumexp, and results are returned as log integrals.  This lets the same
machinery handle area densities sigma^{m-1} whose linear values span
e^{+-10^30} without over- or underflow.

Panels use nested Gauss-Legendre rules (10 vs 20 nodes) for the error
estimate and bisect adaptively.  Ratios of cumulative integrals to the local
density, Q-(r) = int_0^r w / w(r) and Q+(r) = int_r^inf w / w(r), are
integrated in a frame shifted by log w(r), so the enormous common factor
cancels analytically instead of numerically.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .expr import EvalError

NEG_INF = float("-inf")

#: panel contributions this far (in log) below the running total are dropped
LOG_DROP = 46.0  # e^-46 ~ 1e-20


@lru_cache(maxsize=None)
def _gl(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, np.log(w)


def logsumexp_pair(a, b):
    return np.logaddexp(a, b)


def logsumexp(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return NEG_INF
    hi = np.max(values)
    if hi == NEG_INF:
        return NEG_INF
    return float(hi + np.log(np.sum(np.exp(values - hi))))


def _panel(logf, a, b, n):
    """log of int_a^b f(t) dt by n-point Gauss-Legendre."""
    x, logw = _gl(n)
    half = 0.5 * (b - a)
    t = a + half * (x + 1.0)
    vals = logf(t) + logw + math.log(half)
    return logsumexp(vals)


def _panel_logt(logf, la, lb, n):
    """log of int f(t) dt over t in [e^la, e^lb] via s = log t."""
    x, logw = _gl(n)
    half = 0.5 * (lb - la)
    s = la + half * (x + 1.0)
    vals = logf(np.exp(s)) + s + logw + math.log(half)
    return logsumexp(vals)


def _adaptive(panel, logf, a, b, rtol, floor_log, depth):
    coarse = panel(logf, a, b, 10)
    fine = panel(logf, a, b, 20)
    if fine == NEG_INF and coarse == NEG_INF:
        return NEG_INF
    if fine <= floor_log:
        return fine
    err = abs(math.expm1(min(coarse - fine, 700.0))) if coarse != NEG_INF else 1.0
    if err <= rtol or depth <= 0:
        return fine
    mid = 0.5 * (a + b)
    left = _adaptive(panel, logf, a, mid, rtol, floor_log, depth - 1)
    right = _adaptive(panel, logf, mid, b, rtol, floor_log, depth - 1)
    return logsumexp_pair(left, right)


def log_integral(logf, a, b, rtol=1e-12, floor_log=NEG_INF, max_depth=40):
    """log of int_a^b f dt, adaptive in linear t."""
    if not b > a:
        raise ValueError("need b > a")
    return _adaptive(_panel, logf, a, b, rtol, floor_log, max_depth)


def log_integral_logt(logf, a, b, rtol=1e-12, floor_log=NEG_INF, max_depth=20):
    """log of int_a^b f dt, adaptive in log t (for wide smooth windows, a > 0)."""
    if not (a > 0 and b > a):
        raise ValueError("need 0 < a < b")
    return _adaptive(_panel_logt, logf, math.log(a), math.log(b),
                     rtol, floor_log, max_depth)


class WeightIntegrals:
    """Cumulative integrals of the area density w = sigma^{m-1} of a manifold.

    log_ball(r)       log int_0^r w
    log_ball_ratio(r) log [ int_0^r w / w(r) ]
    log_tail_ratio(r) log [ int_r^inf w / w(r) ]  (only for decaying tails)

    The ratio forms are the quantities the completeness/Feller integrands
    need; computing them in the w(r)-shifted frame keeps them accurate when
    log w(r) itself is ~1e14 and plain subtraction would lose everything.
    """

    def __init__(self, manifold, rtol=1e-9):
        self.manifold = manifold
        self.rtol = rtol
        self._peak = None  # lazily located maximum of log w, if any

    def _logw(self, t):
        return self.manifold.log_weight(t)

    def _slope(self, t):
        return float(self.manifold.log_weight_slope(t))

    def _rtol_at(self, lw_r):
        # the shifted integrand carries ~eps*|log w| of irreducible noise;
        # asking panels to agree beyond it makes bisection run away
        noise = 16.0 * 2.3e-16 * max(abs(lw_r), 1.0)
        return max(self.rtol, noise)

    def log_ball_ratio(self, r):
        """log Q-(r) with Q-(r) = int_0^r w(t)/w(r) dt."""
        if r <= 0:
            raise ValueError("need r > 0")
        if self.manifold.m == 1:
            return math.log(r)
        lw_r = float(self._logw(r))

        def shifted(t):
            return self._logw(t) - lw_r

        rtol = self._rtol_at(lw_r)
        slope_r = self._slope(r)
        if slope_r >= 0.0:
            return self._layer_leftward(shifted, r, slope_r, rtol)
        # density already decaying at r: split at its interior peak
        t_star = self._find_peak(r)
        lw_star = float(self._logw(t_star))
        head = (lw_star - lw_r) + self._layer_leftward(
            lambda t: self._logw(t) - lw_star, t_star, 0.0, rtol)
        body = self._layer_rightward(shifted, t_star, stop_at=r, rtol=rtol)
        return logsumexp_pair(head, body)

    def log_ball(self, r):
        """log int_0^r sigma^{m-1}(t) dt."""
        if self.manifold.m == 1:
            return math.log(r)
        return float(self._logw(r)) + self.log_ball_ratio(r)

    def log_tail_ratio(self, r):
        """log Q+(r) with Q+(r) = int_r^inf w(t)/w(r) dt.

        Caller must have established that the tail volume converges (the
        density decays); raises EvalError if the layer sums fail to decay.
        """
        if r <= 0:
            raise ValueError("need r > 0")
        lw_r = float(self._logw(r))

        def shifted(t):
            return self._logw(t) - lw_r

        rtol = self._rtol_at(lw_r)
        slope_r = self._slope(r)
        if slope_r >= 0.0:
            raise EvalError(f"density not decaying at r={r:g}; tail diverges")
        return self._layer_rightward(shifted, r, stop_at=None, rtol=rtol)

    # -- layer integration: doubling windows sized by the local log-slope ----

    _DEPTH = 8

    def _layer_leftward(self, logf, edge, slope_edge, rtol):
        """log int_0^edge f with mass concentrated at the right edge."""
        w0 = min(edge, 1.0 / max(slope_edge, 1.0 / edge))
        total = NEG_INF
        tau0 = 0.0
        tau1 = w0
        while True:
            inc = log_integral(lambda t: logf(edge - t), tau0, tau1,
                               rtol=rtol, floor_log=total - LOG_DROP,
                               max_depth=self._DEPTH)
            total = logsumexp_pair(total, inc)
            if tau1 >= edge:
                return total
            if inc < total - LOG_DROP:
                return total
            tau0, tau1 = tau1, min(2.0 * tau1, edge)

    def _layer_rightward(self, logf, edge, stop_at, rtol):
        """log int_edge^stop f with mass concentrated at the left edge."""
        far = stop_at if stop_at is not None else math.inf
        slope = abs(self._slope(min(edge * (1 + 1e-9) + 1e-9, far)))
        w0 = 1.0 / max(slope, 1.0 / max(edge, 1.0))
        if stop_at is not None:
            w0 = min(w0, stop_at - edge)
            if w0 <= 0:
                return NEG_INF
        total = NEG_INF
        tau_end = math.inf if stop_at is None else stop_at - edge
        tau0 = 0.0
        tau1 = w0
        for _ in range(400):
            inc = log_integral(lambda t: logf(edge + t), tau0, tau1,
                               rtol=rtol, floor_log=total - LOG_DROP,
                               max_depth=self._DEPTH)
            total = logsumexp_pair(total, inc)
            if tau1 >= tau_end:
                return total
            if inc < total - LOG_DROP:
                return total
            tau0 = tau1
            tau1 = min(2.0 * tau1, tau_end)
        raise EvalError(f"tail integral from r={edge:g} did not settle; "
                        "density decays too slowly")

    def _find_peak(self, hi):
        """Largest zero of the log-density slope below hi (slope is positive
        near the pole because sigma'(0)=1)."""
        if self._peak is not None and self._peak < hi:
            return self._peak
        lo = 1e-8
        if self._slope(lo) <= 0:
            raise EvalError("density slope not positive near the pole")
        a, b = lo, hi
        for _ in range(200):
            mid = 0.5 * (a + b)
            if self._slope(mid) > 0:
                a = mid
            else:
                b = mid
            if b - a < 1e-12 * max(1.0, b):
                break
        self._peak = 0.5 * (a + b)
        return self._peak
