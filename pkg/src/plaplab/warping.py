"""Warping profiles sigma(t) and the rotationally symmetric manifolds they define.

A valid profile vanishes at the pole with unit slope (sigma(0)=0, sigma'(0)=1)
and is positive on (0, T_max].  Only these two pole conditions are checked:
all computations here live on exterior domains r >= R > 0, so higher-order
pole smoothness never enters any formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .expr import EvalError, ParseError

__all__ = [
    "WarpingFunction", "ModelManifold", "ValidationError",
    "ExponentialGrowth", "PowerGrowth",
    "parse_sigma", "make_family", "euclidean", "hyperbolic",
    "cusp_cubic", "flare_cubic", "FAMILIES",
    "log_sigma_pow", "sigma_log_derivative_inf", "LogDerivativeBound",
    "ParseError", "EvalError",
]

#: pole probe point and tolerances for the two pole conditions
_T_POLE = 1e-13
_TOL_SIGMA0 = 1e-12
_TOL_DSIGMA0 = 1e-9


class ValidationError(ValueError):
    """A profile violates a structural invariant; records which and where."""

    def __init__(self, invariant, at, detail):
        super().__init__(f"{invariant} violated at t={at:g}: {detail}")
        self.invariant = invariant
        self.at = at


@dataclass(frozen=True)
class ExponentialGrowth:
    """Asymptotic hint: log sigma(t) = coeff * t**power * (1 + o(1)) at infinity.

    coeff > 0 describes super-exponential flares, coeff < 0 cusps."""
    coeff: float
    power: float


@dataclass(frozen=True)
class PowerGrowth:
    """Asymptotic hint: sigma(t) ~ t**alpha at infinity."""
    alpha: float


@dataclass(frozen=True)
class WarpingFunction:
    """Immutable profile: expression tree, its exact symbolic derivative, and
    optional family tag / asymptotic hint.  Evaluation is pure and shareable."""

    text: str
    expr: ex.Node
    deriv: ex.Node
    family_tag: str | None = None
    asymptote: ExponentialGrowth | PowerGrowth | None = None

    def __call__(self, t):
        v = ex.evaluate(self.expr, t)
        _check_finite(v, t, "sigma")
        return v

    def derivative(self, t):
        v = ex.evaluate(self.deriv, t)
        _check_finite(v, t, "sigma'")
        return v

    def log_value(self, t):
        """log sigma(t); raises EvalError where sigma <= 0."""
        v = ex.log_eval(self.expr, t)
        if np.any(np.isnan(v)):
            bad = _first_bad(np.isnan(v), t)
            raise EvalError(f"sigma <= 0 (or unresolvable) at t={bad:g}")
        return v

    def log_derivative(self, t):
        """sigma'/sigma computed structurally (stable under over/underflow)."""
        v = ex.log_derivative(self.expr, t)
        _check_finite(v, t, "sigma'/sigma")
        return v


def _first_bad(mask, t):
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        return float(t)
    return float(t[np.argmax(mask)])


def _check_finite(v, t, what):
    bad = ~np.isfinite(v)
    if np.any(bad):
        raise EvalError(f"{what} not finite at t={_first_bad(bad, t):g}")


def parse_sigma(text, family_tag=None, t_max=1e3, validate=True, asymptote=None):
    """Parse a profile from DSL text and check the structural invariants.

    Raises ParseError on bad syntax, ValidationError when the profile fails
    sigma(0)=0, sigma'(0)=1 or positivity on a log-spaced probe of (0, t_max].
    """
    tree = ex.parse(text)
    wf = WarpingFunction(text=text, expr=tree, deriv=ex.differentiate(tree),
                         family_tag=family_tag, asymptote=asymptote)
    if validate:
        _validate(wf, t_max)
    return wf


def _validate(wf, t_max):
    try:
        s0 = float(ex.evaluate(wf.expr, _T_POLE))
    except Exception as e:  # noqa: BLE001 - report as validation failure
        raise ValidationError("sigma(0)=0", _T_POLE, f"evaluation failed: {e}")
    if not math.isfinite(s0) or abs(s0) > _TOL_SIGMA0:
        raise ValidationError("sigma(0)=0", _T_POLE, f"sigma={s0:g}")
    d0 = float(ex.evaluate(wf.deriv, _T_POLE))
    if not math.isfinite(d0) or abs(d0 - 1.0) > _TOL_DSIGMA0:
        raise ValidationError("sigma'(0)=1", _T_POLE, f"sigma'={d0:g}")
    probes = np.geomspace(1e-12, t_max, 256)
    vals = ex.log_eval(wf.expr, probes)
    bad = np.isnan(vals)
    if np.any(bad):
        raise ValidationError("sigma>0 on (0,T_max]", float(probes[np.argmax(bad)]),
                              "sigma <= 0")


# ---------------------------------------------------------------------------
# built-in families (chosen to span all classifier outcomes with closed-form
# antiderivatives available for oracles)

def euclidean():
    return parse_sigma("t", family_tag="euclidean",
                       asymptote=PowerGrowth(1.0))


def hyperbolic(kappa=-1.0):
    """Constant curvature kappa < 0: sigma = sinh(sqrt(-kappa) t)/sqrt(-kappa)."""
    if kappa >= 0:
        raise ValueError("hyperbolic family needs kappa < 0")
    a = math.sqrt(-kappa)
    text = "sinh(t)" if a == 1.0 else f"sinh({a!r}*t)/{a!r}"
    return parse_sigma(text, family_tag=f"hyperbolic({kappa:g})",
                       asymptote=ExponentialGrowth(a, 1.0))


def cusp_cubic():
    """Finite-volume cusp t*exp(-t^3)."""
    return parse_sigma("t*exp(-t^3)", family_tag="cusp_cubic",
                       asymptote=ExponentialGrowth(-1.0, 3.0))


def flare_cubic():
    """Super-exponential flare t*exp(t^3)."""
    return parse_sigma("t*exp(t^3)", family_tag="flare_cubic",
                       asymptote=ExponentialGrowth(1.0, 3.0))


FAMILIES = {
    "euclidean": euclidean,
    "hyperbolic": hyperbolic,
    "cusp_cubic": cusp_cubic,
    "flare_cubic": flare_cubic,
}


def make_family(name, kappa=-1.0):
    if name not in FAMILIES:
        raise ValueError(f"unknown family {name!r} (have {sorted(FAMILIES)})")
    return hyperbolic(kappa) if name == "hyperbolic" else FAMILIES[name]()


@dataclass(frozen=True)
class ModelManifold:
    """Dimension m >= 2 with a warping profile; the metric is
    dr (x) dr + sigma^2(r) g_{S^{m-1}} in polar coordinates around the pole.

    m = 1 is an auxiliary half-line mode (sigma^{m-1} == 1) used by oracles.
    """

    m: int
    sigma: WarpingFunction

    def __post_init__(self):
        if not isinstance(self.m, int) or self.m < 1:
            raise ValueError(f"dimension m must be an integer >= 1, got {self.m!r}")

    def log_weight(self, t):
        """(m-1) * log sigma(t), i.e. log of the area density sigma^{m-1}."""
        t = np.asarray(t, dtype=float)
        if self.m == 1:
            return np.zeros_like(t) if t.ndim else 0.0
        return (self.m - 1) * self.sigma.log_value(t)

    def log_weight_slope(self, t):
        """d/dt log sigma^{m-1}(t)."""
        t = np.asarray(t, dtype=float)
        if self.m == 1:
            return np.zeros_like(t) if t.ndim else 0.0
        return (self.m - 1) * self.sigma.log_derivative(t)

    def sphere_area(self):
        """Surface measure of the unit (m-1)-sphere, 2 pi^{m/2} / Gamma(m/2)."""
        return 2.0 * math.pi ** (self.m / 2.0) / math.gamma(self.m / 2.0)


def log_sigma_pow(manifold, t):
    """log of sigma^{m-1}(t) without materializing sigma^{m-1} itself.

    Safe for rapidly growing profiles where the power overflows doubles;
    products with exponential factors evaluate exactly as log u + v.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise EvalError("log_sigma_pow needs t > 0")
    return manifold.log_weight(t)


@dataclass(frozen=True)
class LogDerivativeBound:
    """Probe-grid lower bound for inf sigma'/sigma on [0, T]."""

    minimum: float
    argmin: float
    trend: str  # "bounded" | "decreasing-unbounded"

    @property
    def bounded_below(self):
        return self.trend == "bounded"


def sigma_log_derivative_inf(manifold, T, n_probe=400):
    """Estimate inf sigma'/sigma over (0, T] on a log-uniform probe grid.

    The tail-trend flag marks profiles whose ratio is still falling without a
    floor at the horizon ("decreasing-unbounded"); such profiles fail the
    hypothesis needed before any compact-support claim.
    """
    if T <= 0:
        raise ValueError("horizon T must be positive")
    probes = np.geomspace(min(1e-3, T / 1e3), T, n_probe)
    vals = manifold.sigma.log_derivative(probes)
    i = int(np.argmin(vals))
    y_end = float(vals[-1])
    y_q = float(vals[3 * n_probe // 4])
    falling = y_end < y_q - 0.05 * (abs(y_q) + 1.0)
    trend = "decreasing-unbounded" if (y_end < 0 and falling) else "bounded"
    return LogDerivativeBound(minimum=float(vals[i]), argmin=float(probes[i]),
                              trend=trend)
