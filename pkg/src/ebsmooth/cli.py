"""Command-line front end: data ingestion, fitting, credible bands, and
Monte-Carlo scenario runs.

Every output file starts with a header line carrying the tool version, a
hash of the effective configuration, and the seed, so identical invocations
reproduce identical bytes.

Exit codes: 0 success, 2 input parse error, 3 precondition violation,
4 solver diagnostics escalated by --strict.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .credible import credible_set
from .driver import FitConfig, FitResult, fit, fit_fixed_q
from .noise_model import NoiseSpec
from .simulation import run_scenario

PARSE_ERROR = 2
PRECONDITION_ERROR = 3
STRICT_FLAG_ERROR = 4

_MISSING_TOKENS = {"", "na", "nan", "null"}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _header(config_hash: str, seed: int) -> str:
    return f"# ebsmooth {__version__} config={config_hash} seed={seed}\n"


def _write_csv(path: str, header: str, columns: list[str],
               rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(header)
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join("" if v is None else repr(float(v)) if isinstance(v, (int, float, np.floating)) and not isinstance(v, bool) else str(v) for v in row) + "\n")


def read_data_file(path: str, interpolate_missing: bool = False):
    """Parse a delimited text file with columns (t, y) or just y.

    Returns (t_or_None, y, flags).  Raises CliError with the offending line
    number on parse failures.
    """
    rows = []
    missing_rows = []
    try:
        fh = open(path)
    except OSError as exc:
        raise CliError(f"cannot open {path}: {exc}", PARSE_ERROR)
    with fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            tokens = [tok.strip() for tok in text.replace(",", " ").split()]
            values = []
            any_missing = False
            for tok in tokens:
                if tok.lower() in _MISSING_TOKENS:
                    values.append(np.nan)
                    any_missing = True
                    continue
                try:
                    v = float(tok)
                except ValueError:
                    if lineno == 1:
                        values = None  # header row
                        break
                    raise CliError(f"line {lineno}: cannot parse {tok!r}", PARSE_ERROR)
                if np.isnan(v):
                    any_missing = True
                values.append(v)
            if values is None:
                continue
            if len(values) not in (1, 2):
                raise CliError(f"line {lineno}: expected 1 or 2 columns, got {len(values)}",
                               PARSE_ERROR)
            if any_missing:
                missing_rows.append(len(rows))
            rows.append(values)
    if not rows:
        raise CliError("no data rows found", PARSE_ERROR)
    ncols = len(rows[0])
    if any(len(r) != ncols for r in rows):
        bad = next(i for i, r in enumerate(rows) if len(r) != ncols)
        raise CliError(f"inconsistent column count around data row {bad + 1}",
                       PARSE_ERROR)
    data = np.asarray(rows, dtype=float)
    flags = []
    t = None
    if ncols == 2:
        t, y = data[:, 0], data[:, 1]
    else:
        y = data[:, 0]
    if missing_rows or not np.all(np.isfinite(y)):
        if not interpolate_missing:
            raise CliError("missing values present; rerun with --interpolate-missing",
                           PRECONDITION_ERROR)
        idx = np.arange(y.size)
        ok = np.isfinite(y)
        if ok.sum() < 2:
            raise CliError("not enough observed values to interpolate",
                           PRECONDITION_ERROR)
        y = np.interp(idx, idx[ok], y[ok])
        flags.append(f"interpolated-missing:{int((~ok).sum())}")
    if t is not None:
        if np.any(~np.isfinite(t)):
            raise CliError("design column contains missing values", PRECONDITION_ERROR)
        dt = np.diff(t)
        if np.any(dt <= 0):
            raise CliError("design column must be strictly increasing",
                           PRECONDITION_ERROR)
        if dt.size and (dt.max() - dt.min()) > 1e-6 * dt.mean():
            raise CliError("design column must be equidistant (1e-6 relative)",
                           PRECONDITION_ERROR)
    return t, y, flags


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("EBSC_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError(f"EBSC_SEED={env!r} is not an integer", PARSE_ERROR)
    return 0


def _fit_config(args) -> FitConfig:
    q_set = (args.fixed_q,) if args.fixed_q else tuple(range(1, args.q_max + 1))
    return FitConfig(
        q_set=q_set,
        delta=args.delta,
        lambda_min=args.lambda_min,
        lambda_max=args.lambda_max,
        lambda_points=args.lambda_points,
        max_iter=args.max_iter,
        tol_lambda=args.tol_lambda,
        tol_rho=args.tol_rho,
    )


def cmd_fit(args) -> int:
    seed = _resolve_seed(args)
    t, y, data_flags = read_data_file(args.input, args.interpolate_missing)
    config = _fit_config(args)
    payload = {"command": "fit", "config": config.to_json(), "alpha": args.alpha,
               "L": args.L, "draws": args.draws, "input": os.path.basename(args.input)}
    chash = _config_hash(payload)
    header = _header(chash, seed)
    try:
        if args.fixed_q:
            result = fit_fixed_q(y, args.fixed_q, config)
        else:
            result = fit(y, config)
    except ValueError as exc:
        raise CliError(str(exc), PRECONDITION_ERROR)
    n = result.n
    grid = t if t is not None else np.linspace(0.0, 1.0, n)

    band_lo = band_hi = [None] * n
    if args.draws > 0:
        cs = credible_set(result, alpha=args.alpha, L=args.L,
                          num_draws=args.draws, seed=seed)
        band_lo, band_hi = cs.band_lo, cs.band_hi
    else:
        data_flags = data_flags + ["bands-skipped:draws=0"]

    outdir = args.out_dir
    os.makedirs(outdir, exist_ok=True)
    doc = result.to_json()
    doc["config"] = config.to_json()
    doc["data_flags"] = data_flags
    doc["meta"] = {"tool": f"ebsmooth {__version__}", "config_hash": chash,
                   "seed": seed}
    with open(os.path.join(outdir, "fit.json"), "w", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")
    _write_csv(os.path.join(outdir, "curve.csv"), header,
               ["t", "y", "fhat", "band_lo", "band_hi"],
               zip(grid, y, result.fhat, band_lo, band_hi))
    _write_csv(os.path.join(outdir, "spectrum.csv"), header,
               ["t", "rho_hat"], zip(grid, np.asarray(result.rho_hat.rho)))
    _write_csv(os.path.join(outdir, "autocorr.csv"), header,
               ["lag", "r_hat"], enumerate(result.r_hat))
    _write_csv(os.path.join(outdir, "tq.csv"), header,
               ["q", "t_q"], ((q, result.per_q[q].t_q) for q in sorted(result.per_q)))
    if result.flags:
        print("flags: " + "; ".join(result.flags), file=sys.stderr)
        if args.strict:
            raise CliError("solver flags present (strict mode)", STRICT_FLAG_ERROR)
    return 0


def parse_noise(text: str, sigma: float) -> NoiseSpec:
    kind, _, rest = text.partition(":")
    params = tuple(float(p) for p in rest.split(",")) if rest else ()
    aliases = {"gp": "gp_kernel"}
    kind = aliases.get(kind, kind)
    try:
        return NoiseSpec(kind=kind, params=params, sigma=sigma)
    except (ValueError, TypeError) as exc:
        raise CliError(f"invalid noise spec {text!r}: {exc}", PARSE_ERROR)


def cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    noise = parse_noise(args.noise, args.sigma)
    if args.f not in ("f1", "f2", "f3"):
        raise CliError(f"unknown function {args.f!r}", PARSE_ERROR)
    q_mode = "adaptive" if args.adaptive else args.fixed_q
    payload = {"command": "simulate", "f": args.f, "noise": noise.to_json(),
               "n": args.n, "M": args.M, "q_mode": str(q_mode)}
    chash = _config_hash(payload)
    result = run_scenario(args.f, noise, args.n, args.M, q_mode, seed,
                          workers=args.threads)
    os.makedirs(args.out_dir, exist_ok=True)
    _write_csv(os.path.join(args.out_dir, "table1_row.csv"), _header(chash, seed),
               ["function", "noise", "n", "M", "q_mode", "A_f", "A_R",
                "q_recovery", "flagged_runs"],
               [[result.function_id, args.noise, result.n, result.M, result.q_mode,
                 result.A_f, result.A_R,
                 None if result.q_recovery is None else result.q_recovery,
                 result.flagged_runs]])
    if result.flagged_runs:
        print(f"{result.flagged_runs} of {result.M} runs carried solver flags",
              file=sys.stderr)
    return 0


def cmd_credible(args) -> int:
    seed = _resolve_seed(args)
    try:
        with open(args.fit_json) as fh:
            doc = json.load(fh)
        result = FitResult.from_json(doc)
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise CliError(f"malformed fit artifact {args.fit_json}: {exc}", PARSE_ERROR)
    payload = {"command": "credible", "alpha": args.alpha, "L": args.L,
               "draws": args.draws}
    chash = _config_hash(payload)
    cs = credible_set(result, alpha=args.alpha, L=args.L, num_draws=args.draws,
                      seed=seed)
    os.makedirs(args.out_dir, exist_ok=True)
    grid = np.linspace(0.0, 1.0, result.n)
    out = {
        "alpha": cs.alpha,
        "L": cs.L,
        "radius": cs.radius,
        "s_n": cs.s_n,
        "retained": int(cs.draws.shape[0]),
        "meta": {"tool": f"ebsmooth {__version__}", "config_hash": chash,
                 "seed": seed},
        "bands": [{"t": float(t), "lo": float(lo), "hi": float(hi)}
                  for t, lo, hi in zip(grid, cs.band_lo, cs.band_hi)],
    }
    with open(os.path.join(args.out_dir, "credible.json"), "w", newline="\n") as fh:
        json.dump(out, fh, sort_keys=True, indent=1)
        fh.write("\n")
    _write_csv(os.path.join(args.out_dir, "bands.csv"), _header(chash, seed),
               ["t", "lo", "hi"], zip(grid, cs.band_lo, cs.band_hi))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ebsmooth",
        description="Spline regression with data-driven smoothing, order, and "
                    "stationary-noise correlation estimation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common_fit_flags(p):
        p.add_argument("--fixed-q", type=int, default=None, metavar="N",
                       help="fit a single penalty order instead of selecting one")
        p.add_argument("--q-max", type=int, default=6,
                       help="largest order for adaptive selection (default 6)")
        p.add_argument("--delta", type=float, default=0.05,
                       help="spectral floor of the working correlation")
        p.add_argument("--lambda-min", type=float, default=None)
        p.add_argument("--lambda-max", type=float, default=10.0)
        p.add_argument("--lambda-points", type=int, default=101)
        p.add_argument("--tol-lambda", type=float, default=1e-3)
        p.add_argument("--tol-rho", type=float, default=1e-4)
        p.add_argument("--max-iter", type=int, default=50)

    p_fit = sub.add_parser("fit", help="fit a data file and write artifacts")
    p_fit.add_argument("input")
    common_fit_flags(p_fit)
    p_fit.add_argument("--alpha", type=float, default=0.05)
    p_fit.add_argument("--L", type=float, default=1.0)
    p_fit.add_argument("--draws", type=int, default=2000,
                       help="posterior draws for the bands; 0 skips them")
    p_fit.add_argument("--seed", type=int, default=None)
    p_fit.add_argument("--threads", type=int, default=None, help=argparse.SUPPRESS)
    p_fit.add_argument("--strict", action="store_true",
                       help="exit 4 when the solver raises diagnostics")
    p_fit.add_argument("--interpolate-missing", action="store_true")
    p_fit.add_argument("--out-dir", default=".")
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", help="run a Monte-Carlo scenario")
    p_sim.add_argument("--f", required=True, help="f1 | f2 | f3")
    p_sim.add_argument("--noise", required=True,
                       help="iid | ar1:PHI | ma1:THETA | arma22:P1,P2,T1,T2 | gp")
    p_sim.add_argument("--n", type=int, default=500)
    p_sim.add_argument("--M", type=int, default=50)
    p_sim.add_argument("--sigma", type=float, default=0.33)
    group = p_sim.add_mutually_exclusive_group()
    group.add_argument("--fixed-q", type=int, default=2)
    group.add_argument("--adaptive", action="store_true")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--threads", type=int,
                       default=max(1, os.cpu_count() or 1))
    p_sim.add_argument("--out-dir", default=".")
    p_sim.set_defaults(func=cmd_simulate)

    p_cred = sub.add_parser("credible", help="credible bands from a fit.json")
    p_cred.add_argument("fit_json")
    p_cred.add_argument("--alpha", type=float, default=0.05)
    p_cred.add_argument("--L", type=float, default=1.0)
    p_cred.add_argument("--draws", type=int, default=20000)
    p_cred.add_argument("--seed", type=int, default=None)
    p_cred.add_argument("--out-dir", default=".")
    p_cred.set_defaults(func=cmd_credible)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
