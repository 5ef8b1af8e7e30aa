"""Command-line front end: classify profiles, solve exterior problems, run
verification suites, export solutions.

    plaplab classify --sigma "sinh(t)" --m 3 --p 2
    plaplab solve --family euclidean --m 3 --p 2 --lambda 1 --xi 1 --R 1 \
        --out run/solution --format json,csv,svg
    plaplab verify --fixtures core
    plaplab export --in run/solution.json --format csv --out run/solution.csv

Exit codes: 0 success with definite verdicts; 1 parse/validation/config
errors (including an empty fixture set); 2 classification completed with an
inconclusive verdict; 3 solver non-convergence; 4 verification failures.

Anything beyond the common flags goes in a JSON config file (schema: 1);
flags override config values.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

from . import analysis  # noqa: F401  (re-exported for config-driven runs)
from . import verification
from .classify import classify_manifold
from .expr import ParseError
from .solver import (ExteriorProblem, LambdaSpec, NonConvergence,
                     minimal_exterior_solution)
from .warping import (FAMILIES, ModelManifold, ValidationError, make_family,
                      parse_sigma)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INCONCLUSIVE = 2
EXIT_NONCONVERGENCE = 3
EXIT_VERIFY_FAILED = 4


@dataclass
class RunConfig:
    """Validated run parameters; every field passes through the module-level
    constructors before any computation starts."""

    family: str | None = None
    kappa: float = -1.0
    sigma: str | None = None
    m: int = 3
    p: float = 2.0
    lam: float = 1.0
    xi: float | None = None
    R: float = 1.0
    inner_value: float = 1.0
    window: float = 10.0
    n: int = 1024
    tol: float = 1e-8
    k_max: int = 12
    out: str | None = None
    formats: tuple = ("json", "csv")
    fixtures: str | None = None
    input: str | None = None

    def manifold(self):
        if self.sigma is not None:
            wf = parse_sigma(self.sigma)
        elif self.family is not None:
            wf = make_family(self.family, self.kappa)
        else:
            raise ValueError("need --sigma or --family")
        return ModelManifold(self.m, wf)

    def problem(self):
        xi = self.p - 1.0 if self.xi is None else self.xi
        spec = LambdaSpec.zero() if self.lam == 0.0 else LambdaSpec.power(self.lam, xi)
        return ExteriorProblem(self.manifold(), R=self.R, p=self.p,
                               lambda_spec=spec, inner_value=self.inner_value)


_CONFIG_KEYS = {
    "family": str, "kappa": float, "sigma": str, "m": int, "p": float,
    "lambda": float, "xi": float, "R": float, "inner_value": float,
    "window": float, "n": int, "tol": float, "k_max": int, "out": str,
    "format": str, "fixtures": str, "in": str,
}

_RENAME = {"lambda": "lam", "format": "formats", "in": "input"}


def _load_config(path):
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or data.get("schema") != 1:
        raise ValueError("config must be a JSON object with \"schema\": 1")
    out = {}
    for key, value in data.items():
        if key == "schema":
            continue
        if key not in _CONFIG_KEYS:
            raise ValueError(f"unknown config key {key!r}")
        out[_RENAME.get(key, key)] = _CONFIG_KEYS[key](value)
    return out


def _build_config(args):
    merged = {}
    if getattr(args, "config", None):
        merged.update(_load_config(args.config))
    for flag, key in [("family", "family"), ("kappa", "kappa"), ("sigma", "sigma"),
                      ("m", "m"), ("p", "p"), ("lam", "lam"), ("xi", "xi"),
                      ("R", "R"), ("inner_value", "inner_value"),
                      ("window", "window"), ("n", "n"), ("tol", "tol"),
                      ("k_max", "k_max"), ("out", "out"),
                      ("fixtures", "fixtures"), ("input", "input")]:
        val = getattr(args, flag, None)
        if val is not None:
            merged[key] = val
    if getattr(args, "format", None):
        merged["formats"] = merged.get("formats", "")
    cfg = RunConfig(**{k: v for k, v in merged.items() if k != "formats"})
    fmt = getattr(args, "format", None) or (merged.get("formats") or None)
    if fmt:
        formats = tuple(s.strip() for s in fmt.split(",") if s.strip())
        bad = set(formats) - {"json", "csv", "svg"}
        if bad:
            raise ValueError(f"unknown format(s): {sorted(bad)}")
        cfg.formats = formats
    return cfg


# ---------------------------------------------------------------------------
# output helpers

def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def render_svg(xs, ys, title, width=640, height=400):
    """Static polyline chart of (r, u); results display only."""
    margin = 50.0
    x0, x1 = float(min(xs)), float(max(xs))
    y0, y1 = float(min(ys)), float(max(ys))
    if y1 - y0 < 1e-30:
        y1 = y0 + 1.0
    sx = (width - 2 * margin) / (x1 - x0)
    sy = (height - 2 * margin) / (y1 - y0)
    pts = " ".join(f"{margin + (x - x0) * sx:.6g},{height - margin - (y - y0) * sy:.6g}"
                   for x, y in zip(xs, ys))
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        f'<text x="{width / 2:.6g}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>\n'
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>\n'
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
        f'y2="{height - margin}" stroke="black"/>\n'
        f'<text x="{margin}" y="{height - margin + 20}" font-family="sans-serif" '
        f'font-size="11">{x0:.6g}</text>\n'
        f'<text x="{width - margin}" y="{height - margin + 20}" text-anchor="end" '
        f'font-family="sans-serif" font-size="11">{x1:.6g}</text>\n'
        f'<text x="{margin - 5}" y="{height - margin}" text-anchor="end" '
        f'font-family="sans-serif" font-size="11">{y0:.6g}</text>\n'
        f'<text x="{margin - 5}" y="{margin + 4}" text-anchor="end" '
        f'font-family="sans-serif" font-size="11">{y1:.6g}</text>\n'
        f'<polyline points="{pts}" fill="none" stroke="#1f77b4" '
        f'stroke-width="1.5"/>\n</svg>\n'
    )


# ---------------------------------------------------------------------------
# commands

def cmd_classify(args):
    cfg = _build_config(args)
    man = cfg.manifold()
    report = classify_manifold(man, cfg.p)
    print(f"profile: {man.sigma.family_tag or man.sigma.text}   m={cfg.m}  p={cfg.p:g}")
    for name, verdict, note in report.summary_rows():
        print(f"  {name:28s} {verdict:8s} {note}")
    if cfg.out:
        _dump_json(report.to_dict(), cfg.out)
        print(f"report written to {cfg.out}")
    return EXIT_INCONCLUSIVE if report.inconclusive else EXIT_OK


def cmd_solve(args):
    cfg = _build_config(args)
    prob = cfg.problem()
    try:
        sol = minimal_exterior_solution(prob, window=cfg.window, tol=cfg.tol,
                                        n_window=cfg.n, k_max=cfg.k_max)
    except NonConvergence as e:
        print(f"solver failed: {e}", file=sys.stderr)
        for row in e.trace[-8:]:
            print(f"  {row}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    rep = analysis.decay_limit(sol) if (sol.r[-1] - cfg.R) / cfg.R >= 4 else None
    flags = ",".join(sol.flags) if sol.flags else "settled"
    print(f"exhaustion widths: {sol.meta.get('widths')}  [{flags}]")
    if rep is not None:
        print(f"boundary behavior: {rep.classification} "
              f"(limit estimate {rep.limit_estimate:.3g})")
    base = cfg.out or "solution"
    written = []
    formats = set(cfg.formats)
    if "svg" in formats:
        formats.add("csv")  # charts always ship with their data
    for fmt in sorted(formats):
        path = f"{base}.{fmt}"
        if fmt == "json":
            sol.to_json(path)
        elif fmt == "csv":
            sol.to_csv(path)
        else:
            with open(path, "w") as fh:
                fh.write(render_svg(sol.r, sol.values,
                                    f"u(r), p={cfg.p:g}, m={cfg.m}"))
        written.append(path)
    print("wrote " + ", ".join(written))
    return EXIT_OK


def cmd_verify(args):
    cfg = _build_config(args)
    name = cfg.fixtures or "core"
    if name in verification.FIXTURE_SETS:
        rows = verification.FIXTURE_SETS[name]()
    else:
        rows = verification.load_fixture_file(name)
    if not rows:
        print("no fixtures", file=sys.stderr)
        return EXIT_INVALID
    results = verification.run_fixture_set(rows)
    wide = max(len(r.label) for r in results)
    failures = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"[{status}] {r.check:24s} {r.label:{wide}s}  {r.detail}")
        if not r.passed:
            failures.append(r)
    print(f"{len(results) - len(failures)}/{len(results)} checks passed")
    if failures:
        print("failed checks: " + ", ".join(f"#{r.index} {r.check}" for r in failures),
              file=sys.stderr)
        return EXIT_VERIFY_FAILED
    return EXIT_OK


def cmd_export(args):
    cfg = _build_config(args)
    if not cfg.input:
        raise ValueError("export needs --in <solution.json>")
    with open(cfg.input) as fh:
        data = json.load(fh)
    if data.get("schema") != 1 or "r" not in data or "u" not in data:
        raise ValueError("input is not a schema-1 solution file")
    base = cfg.out or cfg.input.rsplit(".", 1)[0]
    written = []
    for fmt in cfg.formats:
        path = f"{base}.{fmt}" if not base.endswith(f".{fmt}") else base
        if fmt == "json":
            _dump_json(data, path)
        elif fmt == "csv":
            with open(path, "w") as fh:
                fh.write("r,u,flux\n")
                flux = data.get("flux", [0.0] * len(data["r"]))
                for r, u, f in zip(data["r"], data["u"], flux):
                    fh.write(f"{r!r},{u!r},{f!r}\n")
        else:
            with open(path, "w") as fh:
                fh.write(render_svg(data["r"], data["u"], "u(r)"))
        written.append(path)
    print("wrote " + ", ".join(written))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="plaplab",
        description="classify rotationally symmetric profiles and solve "
                    "radial exterior problems for the p-Laplacian")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, solver_opts=False):
        sp.add_argument("--sigma", help="profile expression in t, e.g. 't*exp(-t^3)'")
        sp.add_argument("--family", choices=sorted(FAMILIES),
                        help="built-in profile family")
        sp.add_argument("--kappa", type=float, help="curvature for the hyperbolic family")
        sp.add_argument("--m", type=int, help="dimension (default 3)")
        sp.add_argument("--p", type=float, help="exponent p > 1 (default 2)")
        sp.add_argument("--config", help="JSON config file (schema: 1); flags override")
        sp.add_argument("--out", help="output path (basename for solve)")
        sp.add_argument("--format", help="comma list of json,csv,svg")
        if solver_opts:
            sp.add_argument("--lambda", dest="lam", type=float,
                            help="absorption coefficient (0 = p-harmonic mode)")
            sp.add_argument("--xi", type=float, help="absorption exponent in [0, p-1]")
            sp.add_argument("--R", type=float, help="inner radius (default 1)")
            sp.add_argument("--inner-value", dest="inner_value", type=float)
            sp.add_argument("--window", type=float, help="report window width")
            sp.add_argument("--n", type=int, help="window grid intervals")
            sp.add_argument("--tol", type=float, help="exhaustion settling tolerance")
            sp.add_argument("--k-max", dest="k_max", type=int,
                            help="maximum domain doublings")

    sp = sub.add_parser("classify", help="type verdicts for a profile")
    common(sp)
    sp.set_defaults(fn=cmd_classify)

    sp = sub.add_parser("solve", help="minimal exterior solution by exhaustion")
    common(sp, solver_opts=True)
    sp.set_defaults(fn=cmd_solve)

    sp = sub.add_parser("verify", help="run a verification fixture set")
    common(sp)
    sp.add_argument("--fixtures", help="'core', 'smoke', or a fixture JSON path")
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("export", help="convert a saved solution")
    common(sp)
    sp.add_argument("--in", dest="input", help="solution JSON produced by solve")
    sp.set_defaults(fn=cmd_export)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ParseError, ValidationError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
