"""Batch command line: measure analysis, minimization, sweeps, verification.

One command per process.  All randomness flows from a single seed that is
recorded in every output header, numeric output uses shortest round-trip
float formatting, and no output contains timestamps or absolute paths, so
reruns with identical inputs are byte-identical.

Exit codes: 0 success, 1 a requested check or run failed, 2 invalid input.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from vortexmf.blowup import (
    BlowupProfile,
    bubble_profile,
    consistency_report,
    default_fit_window,
    fit_li_line,
    fit_li_slope,
    liouville_bubble,
    mass_gamma,
    newton_potential,
    pohozaev_residual,
    radial_integral,
    rescale_profile,
)
from vortexmf.functional import Problem
from vortexmf.measure import (
    CirculationMeasure,
    alpha_min,
    lambda_bar,
    lambda_bar_residual_vanishing,
    load_measure,
    moment,
    parse_atoms_inline,
)
from vortexmf.minimize import (
    DivergedError,
    MinimizeOptions,
    MinimizeResult,
    continuation_sweep,
    detect_concentration,
    minimize,
)
from vortexmf.torus import SpectralTorus

EIGHT_PI = 8.0 * math.pi


class InputError(Exception):
    """Invalid configuration or data file; maps to exit code 2."""


@dataclasses.dataclass(frozen=True)
class RunConfig:
    measure: str | None = None
    atoms: str | None = None
    side_length: float = 1.0
    grid_n: int = 128
    lambdas: tuple[float, ...] = ()
    fractions: tuple[float, ...] = ()
    max_iters: int = 5000
    grad_tol: float = 1e-8
    step_init: float = 1.0
    armijo_c: float = 1e-4
    blowup_peak_threshold: float = 25.0
    seed: int = 0
    out: str = "runs"
    alpha: float = 1.0
    n_bins: int | None = None

    def __post_init__(self) -> None:
        if self.side_length <= 0.0:
            raise ValueError("side_length must be positive")
        n = self.grid_n
        if n < 16 or n & (n - 1):
            raise ValueError("grid_n must be a power of two, at least 16")
        if self.lambdas and self.fractions:
            raise ValueError("give either absolute couplings or fractions, not both")
        if any(lam <= 0.0 for lam in self.lambdas):
            raise ValueError("couplings must be positive")
        if any(not 0.0 < f <= 1.0 for f in self.fractions):
            raise ValueError("schedule fractions must lie in (0, 1]")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.n_bins is not None and self.n_bins <= 0:
            raise ValueError("n_bins must be positive")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


def _floats_csv(text: str) -> tuple[float, ...]:
    out = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            raise ValueError("empty entry in number list")
        out.append(float(token))
    return tuple(out)


_COERCE = {
    "measure": str,
    "atoms": str,
    "out": str,
    "side_length": float,
    "grid_n": int,
    "max_iters": int,
    "seed": int,
    "n_bins": int,
    "grad_tol": float,
    "step_init": float,
    "armijo_c": float,
    "blowup_peak_threshold": float,
    "alpha": float,
    "lambdas": _floats_csv,
    "fractions": _floats_csv,
}


def parse_config_file(path: str) -> dict[str, tuple[str, int]]:
    """Read key=value lines; '#' starts a comment.  Values stay as text."""
    entries: dict[str, tuple[str, int]] = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(str(exc)) from exc
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _COERCE:
                raise InputError(f"{path}:{lineno}: unknown key {key!r}")
            if not value:
                raise InputError(f"{path}:{lineno}: empty value for {key!r}")
            entries[key] = (value, lineno)
    return entries


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict[str, object] = {}
    if args.config:
        for key, (text, lineno) in parse_config_file(args.config).items():
            try:
                values[key] = _COERCE[key](text)
            except ValueError as exc:
                raise InputError(f"{args.config}:{lineno}: {exc}") from exc
    overrides = {
        "measure": args.measure,
        "atoms": args.atoms,
        "out": args.out,
        "seed": args.seed,
        "side_length": args.side_length,
        "grid_n": args.grid_n,
        "alpha": args.alpha,
        "grad_tol": args.grad_tol,
    }
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    for key, text in (("lambdas", args.lambdas), ("fractions", args.fractions)):
        if text is not None:
            try:
                values[key] = _floats_csv(text)
            except ValueError as exc:
                raise InputError(f"--{key}: {exc}") from exc
    try:
        return RunConfig(**values)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def resolve_measure(cfg: RunConfig) -> CirculationMeasure:
    if cfg.measure and cfg.atoms:
        raise InputError("both a measure file and inline atoms were given")
    try:
        if cfg.measure:
            return load_measure(cfg.measure)
        if cfg.atoms:
            return parse_atoms_inline(cfg.atoms)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    raise InputError("no measure given: use --measure FILE or --atoms SPEC")


def resolve_schedule(cfg: RunConfig, P: CirculationMeasure) -> list[float]:
    if cfg.lambdas:
        return list(cfg.lambdas)
    if cfg.fractions:
        bar = lambda_bar(P).lambda_bar
        if not math.isfinite(bar):
            raise InputError("extremal coupling is infinite; give absolute couplings")
        return [f * bar for f in cfg.fractions]
    raise InputError("no coupling given: set lambdas=... or fractions=...")


def make_options(cfg: RunConfig) -> MinimizeOptions:
    try:
        return MinimizeOptions(
            max_iters=cfg.max_iters,
            grad_tol=cfg.grad_tol,
            step_init=cfg.step_init,
            armijo_c=cfg.armijo_c,
            blowup_peak_threshold=cfg.blowup_peak_threshold,
            seed=cfg.seed,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _sanitize(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    if isinstance(obj, np.floating):
        return _sanitize(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def write_summary(cfg: RunConfig, payload: dict) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, "summary.json")
    text = json.dumps(_sanitize(payload), indent=2, sort_keys=True) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


def _emit(args: argparse.Namespace, payload: dict, human_lines: list[str]) -> None:
    if args.json:
        print(json.dumps(_sanitize(payload), indent=2, sort_keys=True))
    else:
        for line in human_lines:
            print(line)


def _stage_row(result: MinimizeResult, conc: tuple[int, int] | None) -> str:
    ci = "" if conc is None else str(conc[0])
    cj = "" if conc is None else str(conc[1])
    return (
        f"{result.lam!r},{result.J_value!r},{result.residual_norm!r},"
        f"{result.peak_value!r},{str(result.blown_up).lower()},{ci},{cj}"
    )


def write_stage_csv(cfg: RunConfig, k: int, result: MinimizeResult, conc) -> str:
    path = os.path.join(cfg.out, f"stage_{k}.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# seed={cfg.seed}\n")
        fh.write("lambda,J,residual_norm,max_v,blown_up,concentration_i,concentration_j\n")
        fh.write(_stage_row(result, conc) + "\n")
    return path


def write_profile_csv(cfg: RunConfig, k: int, profile: BlowupProfile, window) -> str:
    path = os.path.join(cfg.out, f"profile_{k}.csv")
    try:
        slope, intercept = fit_li_line(profile, window)
    except ValueError:
        slope, intercept = math.nan, math.nan
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# seed={cfg.seed}\n")
        fh.write(
            f"# sigma={profile.sigma!r} fitted_slope={profile.fitted_slope!r} "
            f"gamma0_reference={profile.gamma0_reference!r}\n"
        )
        fh.write("r,dw,fit_prediction\n")
        for r, dw in profile.samples:
            pred = slope * (-math.log1p(r / profile.sigma)) + intercept
            fh.write(f"{r!r},{dw!r},{pred!r}\n")
    return path


def _result_payload(result: MinimizeResult, conc) -> dict:
    return {
        "lambda": result.lam,
        "J": result.J_value,
        "residual_norm": result.residual_norm,
        "iterations": result.iterations,
        "peak_point": list(result.peak_point),
        "peak_value": result.peak_value,
        "blown_up": result.blown_up,
        "concentration": None if conc is None else list(conc),
    }


def cmd_lambda_bar(cfg: RunConfig, args: argparse.Namespace) -> int:
    P = resolve_measure(cfg)
    res = lambda_bar(P)
    nonneg = all(a >= 0.0 for a, _ in P.atoms)
    m1 = moment(P, 1)
    payload: dict = {
        "command": "lambda-bar",
        "seed": cfg.seed,
        "lambda_bar": res.lambda_bar,
        "side": res.side,
        "subset": list(res.minimizing_subset),
        "subset_atoms": [list(P.atoms[i]) for i in res.minimizing_subset],
        "moment1": m1,
        "alpha_min": alpha_min(P) if any(a >= 0.0 for a, _ in P.atoms) else None,
        "residual_vanishing_form": (
            lambda_bar_residual_vanishing(P) if nonneg and m1 > 0.0 else None
        ),
        "consistency": (
            dataclasses.asdict(consistency_report(P)) if nonneg and m1 > 0.0 else None
        ),
    }
    write_summary(cfg, payload)
    _emit(
        args,
        payload,
        [
            f"lambda_bar = {res.lambda_bar!r}",
            f"side = {res.side}",
            f"subset = {payload['subset']}",
            f"moment1 = {m1!r}",
        ],
    )
    return 0


def _run_single(cfg: RunConfig, args: argparse.Namespace, want_profile: bool) -> int:
    P = resolve_measure(cfg)
    schedule = resolve_schedule(cfg, P)
    if len(schedule) != 1:
        raise InputError("this command expects exactly one coupling")
    T = SpectralTorus(cfg.side_length, cfg.grid_n)
    opts = make_options(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    prob = Problem(T, P, schedule[0])
    trace = os.path.join(cfg.out, "trace_0.csv")
    result = minimize(prob, opts, trace_path=trace)
    conc = detect_concentration(result, T, opts.blowup_peak_threshold)
    payload: dict = {
        "command": "profile" if want_profile else "minimize",
        "seed": cfg.seed,
        "stages": [_result_payload(result, conc)],
    }
    lines = [
        f"lambda = {result.lam!r}",
        f"J = {result.J_value!r}",
        f"residual_norm = {result.residual_norm!r}",
        f"iterations = {result.iterations}",
        f"blown_up = {str(result.blown_up).lower()}",
    ]
    write_stage_csv(cfg, 0, result, conc)
    if want_profile or conc is not None:
        profile = rescale_profile(result, T, P, cfg.alpha, cfg.n_bins)
        window = default_fit_window(profile.sigma, T.side_length)
        write_profile_csv(cfg, 0, profile, window)
        payload["profile"] = {
            "sigma": profile.sigma,
            "peak_value": profile.peak_value,
            "fitted_slope": profile.fitted_slope,
            "gamma0_reference": profile.gamma0_reference,
            "alpha": cfg.alpha,
        }
        lines.append(f"sigma = {profile.sigma!r}")
        lines.append(f"fitted_slope = {profile.fitted_slope!r}")
    write_summary(cfg, payload)
    _emit(args, payload, lines)
    return 0


def cmd_minimize(cfg: RunConfig, args: argparse.Namespace) -> int:
    return _run_single(cfg, args, want_profile=False)


def cmd_profile(cfg: RunConfig, args: argparse.Namespace) -> int:
    return _run_single(cfg, args, want_profile=True)


def cmd_sweep(cfg: RunConfig, args: argparse.Namespace) -> int:
    P = resolve_measure(cfg)
    schedule = resolve_schedule(cfg, P)
    T = SpectralTorus(cfg.side_length, cfg.grid_n)
    opts = make_options(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    traces = [os.path.join(cfg.out, f"trace_{k}.csv") for k in range(len(schedule))]
    results = continuation_sweep(T, P, schedule, opts, trace_paths=traces)
    stages = []
    lines = []
    for k, result in enumerate(results):
        conc = detect_concentration(result, T, opts.blowup_peak_threshold)
        write_stage_csv(cfg, k, result, conc)
        if conc is not None:
            profile = rescale_profile(result, T, P, cfg.alpha, cfg.n_bins)
            window = default_fit_window(profile.sigma, T.side_length)
            write_profile_csv(cfg, k, profile, window)
        stages.append(_result_payload(result, conc))
        lines.append(
            f"stage {k}: lambda={result.lam!r} J={result.J_value!r} "
            f"residual={result.residual_norm!r} blown_up={str(result.blown_up).lower()}"
        )
    payload = {
        "command": "sweep",
        "seed": cfg.seed,
        "stages": stages,
        "completed_stages": len(results),
        "requested_stages": len(schedule),
    }
    write_summary(cfg, payload)
    _emit(args, payload, lines)
    return 0


def verify_checks(debug_bubble_scale: float = 1.0) -> list[dict]:
    """The oracle suite: bubble mass and PDE, concentration mass, slope
    fits, Pohozaev balance, Newton potential growth.

    ``debug_bubble_scale`` shifts the bubble fed to the Pohozaev check by
    2 log(scale); any value other than 1 breaks the equation it is
    supposed to solve and must make that check fail (negative control).
    """
    lam, mu = 8.0, 1.0
    density = lambda r: lam * math.exp(liouville_bubble(mu, lam, r))
    checks: list[dict] = []

    def add(name: str, value: float, target: float, tol: float) -> None:
        value, target = float(value), float(target)
        checks.append(
            {
                "name": name,
                "value": value,
                "target": target,
                "tolerance": tol,
                "passed": bool(abs(value - target) <= tol),
            }
        )

    mass = 2.0 * math.pi * radial_integral(lambda r: density(r) * r, 0.0, 1e6)
    add("bubble_mass", mass, EIGHT_PI, 1e-6 * EIGHT_PI)

    def pde_residual(r: float) -> float:
        h = 1e-4 * max(1.0, r)
        w = lambda s: liouville_bubble(mu, lam, s)
        d1 = (w(r + h) - w(r - h)) / (2.0 * h)
        d2 = (w(r + h) - 2.0 * w(r) + w(r - h)) / (h * h)
        return abs(d2 + d1 / r + density(r))

    worst = max(pde_residual(r) for r in np.geomspace(0.1, 100.0, 61))
    add("bubble_pde_residual", worst, 0.0, 1e-6)

    gamma = mass_gamma(density, 1e4)
    add("mass_gamma", gamma, 4.0, 1e-6)
    add("pi_gamma_sq_vs_2lambda_bar", math.pi * gamma * gamma, 2.0 * EIGHT_PI, 1e-4)

    radii = np.geomspace(1e-2, 3e4, 600)
    window = (1e2, 1e4)
    slope1 = fit_li_slope(bubble_profile(mu, lam, radii), window)
    add("li_slope_alpha_1", slope1, 4.0, 0.02 * 4.0)
    slope_half = fit_li_slope(bubble_profile(mu, lam, radii, alpha=0.5), window)
    add("li_slope_alpha_half", slope_half, 2.0, 0.02 * 2.0)

    shift = 2.0 * math.log(debug_bubble_scale)
    u = lambda r: liouville_bubble(mu, lam, r) + shift
    rep = pohozaev_residual(u, lambda r: 1.0, lambda t: lam * math.exp(t), 10.0)
    add("pohozaev_bubble", rep.relative_residual, 0.0, 1e-3)
    const = pohozaev_residual(lambda r: 0.7, lambda r: 1.0, lambda t: lam * math.exp(t), 10.0)
    add("pohozaev_constant", const.relative_residual, 0.0, 1e-12)

    fit_rs = np.geomspace(1e2, 1e4, 9)
    z_bubble = [newton_potential(density, R) for R in fit_rs]
    slope_b = float(np.polyfit(np.log(fit_rs), z_bubble, 1)[0])
    add("newton_slope_bubble", slope_b, 4.0, 0.01 * 4.0)
    disk = lambda r: 2.0 if r <= 1.0 else 0.0
    z_disk = [newton_potential(disk, R, breakpoints=[1.0]) for R in fit_rs]
    slope_d = float(np.polyfit(np.log(fit_rs), z_disk, 1)[0])
    add("newton_slope_disk", slope_d, 1.0, 0.01 * 1.0)
    return checks


def cmd_verify(cfg: RunConfig, args: argparse.Namespace) -> int:
    if args.debug_bubble_scale <= 0.0:
        raise InputError("--debug-bubble-scale must be positive")
    checks = verify_checks(args.debug_bubble_scale)
    all_passed = all(c["passed"] for c in checks)
    payload = {
        "command": "verify",
        "seed": cfg.seed,
        "checks": checks,
        "all_passed": all_passed,
    }
    write_summary(cfg, payload)
    lines = [
        f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: value={c['value']!r} "
        f"target={c['target']!r} tol={c['tolerance']:g}"
        for c in checks
    ]
    lines.append("all checks passed" if all_passed else "some checks FAILED")
    _emit(args, payload, lines)
    return 0 if all_passed else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key=value configuration file")
    common.add_argument("--measure", metavar="PATH", help="atomic measure file: alpha weight per line")
    common.add_argument("--atoms", metavar="SPEC", help="inline measure alpha:weight[,alpha:weight...]")
    common.add_argument("--out", metavar="DIR", help="output directory (default runs)")
    common.add_argument("--seed", type=int, metavar="N", help="seed for all randomness")
    common.add_argument("--json", action="store_true", help="print machine-readable JSON to stdout")
    common.add_argument("--side-length", type=float, dest="side_length", metavar="L")
    common.add_argument("--grid-n", type=int, dest="grid_n", metavar="N")
    common.add_argument("--lambdas", metavar="LIST", help="comma-separated absolute couplings")
    common.add_argument("--fractions", metavar="LIST", help="comma-separated fractions of the extremal coupling")
    common.add_argument("--alpha", type=float, metavar="A", help="circulation for profile extraction")
    common.add_argument("--grad-tol", type=float, dest="grad_tol", metavar="TOL")

    parser = argparse.ArgumentParser(
        prog="vortexmf",
        description="Point-vortex mean field toolkit: extremal couplings, "
        "free-energy minimization, concentration asymptotics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("lambda-bar", parents=[common], help="extremal coupling of a measure")
    p.set_defaults(handler=cmd_lambda_bar)
    p = sub.add_parser("minimize", parents=[common], help="minimize at one coupling")
    p.set_defaults(handler=cmd_minimize)
    p = sub.add_parser("sweep", parents=[common], help="continuation over an ascending schedule")
    p.set_defaults(handler=cmd_sweep)
    p = sub.add_parser("profile", parents=[common], help="minimize and export the peak profile")
    p.set_defaults(handler=cmd_profile)
    p = sub.add_parser("verify", parents=[common], help="run the oracle suite")
    p.add_argument(
        "--debug-bubble-scale",
        type=float,
        default=1.0,
        metavar="S",
        help="amplitude-shift the Pohozaev test bubble (negative control; != 1 must fail)",
    )
    p.set_defaults(handler=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        return args.handler(cfg, args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
