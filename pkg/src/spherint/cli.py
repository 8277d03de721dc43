"""``spherint`` command-line interface.

Every subcommand prints one JSON document (or CSV with ``--output csv``) to
standard output or ``--out``.  Exit status is 0 on success, 2 on invalid
input or configuration and 1 when ``verify`` finds a residual above its
tolerance.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SpherintError
from .expansion import appendix_check, coefficients, k_matrix, log_i_approx
from .freeness import LAWS, WignerConfig, additivity_check, freeness_experiment
from .hciz import hciz_exact, rank_one_exact, schur_ratio
from .montecarlo import McConfig, naive_log_i, tilted_estimate
from .spectra import (
    Spectrum,
    a_coeff,
    f_g,
    fg_identities,
    r_integral,
    r_integral_quadrature,
    solve_v,
)

SCHEMA = "spherint/1"
COMMANDS = ("expand", "mc", "hciz", "schur", "freeness", "additivity", "sweep", "verify")

VERIFY_TOLERANCES = {
    "a1": 1e-12,
    "f_identity": 1e-10,
    "g_identity": 1e-10,
    "det_k": 1e-10,
    "r_integral": 1e-8,
    "appendix_m1": 1e-10,
    "appendix_wick": 1e-8,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    spectrum_path: str | None = None
    theta: float | None = None
    n: int | None = None
    beta: int | None = None
    samples: int = 100_000
    seed: int = 0
    order: int = 1
    output: str = "json"
    out_path: str | None = None

    def __post_init__(self):
        if self.subcommand not in COMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if self.theta is not None and not math.isfinite(self.theta):
            raise ConfigError("theta must be finite")
        if self.n is not None and self.n < 1:
            raise ConfigError("--n must be positive")
        if self.beta not in (None, 1, 2):
            raise ConfigError("--beta must be 1 or 2")
        if self.samples < 100:
            raise ConfigError("--samples must be at least 100")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("--seed must be a 64-bit unsigned integer")
        if self.order not in (0, 1):
            raise ConfigError("--order must be 0 or 1")
        if self.output not in ("json", "csv"):
            raise ConfigError("--output must be json or csv")


def _parse_grid(text: str) -> np.ndarray:
    try:
        a, step, b = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError(f"--theta-grid expects A:STEP:B, got {text!r}") from None
    if step <= 0 or b < a:
        raise ConfigError("--theta-grid needs STEP > 0 and B >= A")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    # round away representation noise so 0:0.05:0.2 prints 0.15, not 0.15000000000000002
    return np.array([round(a + k * step, 12) for k in range(count)])


def _parse_list(text: str, kind=float) -> list:
    try:
        return [kind(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse list {text!r}") from None


def _load_spectrum(path: str | None, beta: int | None, n: int | None = None, flag="--spectrum") -> Spectrum:
    if path is None:
        raise ConfigError(f"{flag} is required")
    try:
        spec = Spectrum.from_file(path, beta=beta)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    if n is not None and n != spec.n:
        if n % spec.n:
            raise ConfigError(f"--n {n} is not a multiple of the spectrum length {spec.n}")
        spec = Spectrum(np.repeat(spec.eigenvalues, n // spec.n), beta=spec.beta)
    return spec


def _require_theta(cfg: RunConfig) -> float:
    if cfg.theta is None:
        raise ConfigError("--theta is required")
    return cfg.theta


def _mc_config(cfg: RunConfig) -> McConfig:
    return McConfig(samples=cfg.samples, seed=cfg.seed)


# ---------------------------------------------------------------------------
# subcommands: each returns (payload dict, csv rows or None, exit status)
# ---------------------------------------------------------------------------


def _cmd_expand(cfg, args):
    spec = _load_spectrum(cfg.spectrum_path, cfg.beta, cfg.n)
    theta = _require_theta(cfg)
    res = coefficients(spec, theta)
    payload = {"result": res.to_dict(), "N": spec.n, "order": cfg.order,
               "log_i_approx": log_i_approx(spec, theta, spec.n, cfg.order)}
    return payload, [payload["result"]], 0


def _cmd_mc(cfg, args):
    spec = _load_spectrum(cfg.spectrum_path, cfg.beta, cfg.n)
    theta = _require_theta(cfg)
    mc = _mc_config(cfg)
    if args.method == "naive":
        est = naive_log_i(spec, theta, spec.n, mc)
    else:
        est = tilted_estimate(spec, theta, spec.n, mc)
    result = {"method": args.method, "N": spec.n, "theta": theta, **est.to_dict()}
    if args.method == "tilted":
        c = coefficients(spec, theta)
        result["prediction"] = c.m0 + c.m1 / spec.n
    return {"result": result}, [result], 0


def _cmd_hciz(cfg, args):
    spec = _load_spectrum(cfg.spectrum_path, 2, cfg.n)
    if args.a_spectrum:
        a = _load_spectrum(args.a_spectrum, 2, flag="--a-spectrum")
        val = hciz_exact(a.eigenvalues, spec.eigenvalues, spec.n)
    else:
        val = rank_one_exact(_require_theta(cfg), spec.eigenvalues, spec.n)
    result = val.to_dict()
    return {"result": result}, [result], 0


def _cmd_schur(cfg, args):
    if args.mu is None or args.x is None:
        raise ConfigError("schur needs --mu and --x")
    mu = _parse_list(args.mu, int)
    x = _parse_list(args.x, float)
    result = {"mu": mu, "x": x, "ratio": schur_ratio(mu, x)}
    return {"result": result}, [{"ratio": result["ratio"]}], 0


def _cmd_freeness(cfg, args):
    spec = _load_spectrum(cfg.spectrum_path, 1)
    theta = _require_theta(cfg)
    ns = _parse_list(args.ns, int)
    rep = freeness_experiment(spec, WignerConfig(ns[0], args.law, cfg.seed), theta, ns,
                              _mc_config(cfg), repeats=args.repeats)
    return {"report": rep.to_dict()}, rep, 0


def _cmd_additivity(cfg, args):
    b = _load_spectrum(cfg.spectrum_path, 1, cfg.n)
    bt = _load_spectrum(args.spectrum_tilde or cfg.spectrum_path, 1, cfg.n, flag="--spectrum-tilde")
    rep = additivity_check(b, bt, _require_theta(cfg), _mc_config(cfg), mode=args.mode)
    return {"report": rep.to_dict()}, rep, 0


def _sweep_rows(spec: Spectrum, grid: np.ndarray) -> list:
    rows = []
    for theta in grid:
        res = coefficients(spec, float(theta))
        rows.append({"theta": float(theta), "v": res.v, "A2": res.A2, "m0": res.m0, "m1": res.m1,
                     "J": res.J, "admissible": res.admissible})
    return rows


def _cmd_sweep(cfg, args):
    spec = _load_spectrum(cfg.spectrum_path, cfg.beta, cfg.n)
    if args.theta_grid is None:
        raise ConfigError("sweep needs --theta-grid A:STEP:B")
    rows = _sweep_rows(spec, _parse_grid(args.theta_grid))
    return {"rows": rows}, rows, 0


def verify_spectrum(spec: Spectrum, theta: float) -> list:
    """Residuals of the exact identities at ``theta``; each entry is ``(name, residual, tol)``."""
    if theta == 0.0:
        raise ConfigError("verify needs theta != 0")
    twin, th = (spec.doubled(), 0.5 * theta) if spec.beta == 2 else (spec, theta)
    tp = solve_v(twin, th)
    a2 = a_coeff(twin, th, tp, 2)
    f, g = f_g(twin, th, tp)
    f_id, g_id = fg_identities(th, tp.v, a2)
    det = k_matrix(twin, th).det
    quad = r_integral_quadrature(twin, th)
    rep = appendix_check(twin, th)
    checks = [
        ("a1", tp.residual_a1),
        ("f_identity", abs(f - f_id)),
        ("g_identity", abs(g - g_id)),
        ("det_k", abs(det - a2)),
        ("r_integral", abs(r_integral(twin, th, tp) - quad)),
        ("appendix_m1", abs(rep.difference)),
        ("appendix_wick", max(abs(x) for x in rep.wick_differences.values())),
    ]
    return [(name, float(res), VERIFY_TOLERANCES[name]) for name, res in checks]


def _cmd_verify(cfg, args):
    spec = _load_spectrum(cfg.spectrum_path, cfg.beta, cfg.n)
    theta = cfg.theta if cfg.theta is not None else 0.05
    rows = [{"check": n, "residual": r, "tolerance": t, "pass": bool(r <= t)}
            for n, r, t in verify_spectrum(spec, theta)]
    ok = all(r["pass"] for r in rows)
    return {"theta": theta, "checks": rows, "pass": ok}, rows, 0 if ok else 1


HANDLERS = {
    "expand": _cmd_expand,
    "mc": _cmd_mc,
    "hciz": _cmd_hciz,
    "schur": _cmd_schur,
    "freeness": _cmd_freeness,
    "additivity": _cmd_additivity,
    "sweep": _cmd_sweep,
    "verify": _cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--spectrum", dest="spectrum_path")
    common.add_argument("--theta", type=float)
    common.add_argument("--n", type=int)
    common.add_argument("--beta", type=int, choices=(1, 2))
    common.add_argument("--samples", type=int, default=100_000)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--order", type=int, choices=(0, 1), default=1)
    common.add_argument("--output", choices=("json", "csv"), default="json")
    common.add_argument("--out", dest="out_path")

    parser = _Parser(prog="spherint", description="Rank-one spherical integrals and their expansion.")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    sub.add_parser("expand", parents=[common], help="expansion coefficients m0, m1 and J")
    p = sub.add_parser("mc", parents=[common], help="Monte Carlo estimate")
    p.add_argument("--method", choices=("naive", "tilted"), default="tilted")
    p = sub.add_parser("hciz", parents=[common], help="exact complex-case integral")
    p.add_argument("--a-spectrum", dest="a_spectrum")
    p = sub.add_parser("schur", parents=[common], help="normalized Schur polynomial")
    p.add_argument("--mu")
    p.add_argument("--x")
    p = sub.add_parser("freeness", parents=[common], help="Wigner additivity experiment")
    p.add_argument("--ns", default="32,128,512")
    p.add_argument("--law", choices=LAWS, default="gaussian")
    p.add_argument("--repeats", type=int, default=4)
    p = sub.add_parser("additivity", parents=[common], help="Haar additivity identity")
    p.add_argument("--spectrum-tilde", dest="spectrum_tilde")
    p.add_argument("--mode", choices=("single", "double"), default="single")
    p = sub.add_parser("sweep", parents=[common], help="coefficients over a theta grid")
    p.add_argument("--theta-grid", dest="theta_grid")
    sub.add_parser("verify", parents=[common], help="exact identity residuals")
    return parser


def _to_csv(rows) -> str:
    if hasattr(rows, "to_csv"):
        return rows.to_csv()
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = RunConfig(
            subcommand=args.subcommand, spectrum_path=args.spectrum_path, theta=args.theta,
            n=args.n, beta=args.beta, samples=args.samples, seed=args.seed, order=args.order,
            output=args.output, out_path=args.out_path,
        )
        payload, rows, status = HANDLERS[cfg.subcommand](cfg, args)
    except SpherintError as exc:
        print(f"spherint: error: {exc}", file=sys.stderr)
        return 2
    if cfg.output == "csv":
        text = _to_csv(rows)
    else:
        doc = {"schema": SCHEMA, "command": cfg.subcommand, **payload}
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if cfg.out_path:
        try:
            with open(cfg.out_path, "w") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"spherint: error: cannot write {cfg.out_path}: {exc.strerror}", file=sys.stderr)
            return 2
    else:
        sys.stdout.write(text)
    return status


def main() -> None:
    sys.exit(run())
