"""Radial asymptotics of concentrating fields and their quadrature oracles.

Everything here is radial: the model bubble solving -Lap(w) = lam e^w on
the plane, peak-rescaled profiles read off torus minimizers, the
logarithmic slope fit, the concentration mass, the Pohozaev balance, and
the Newton potential growth.  Quadratures run through a log-stretched
adaptive rule so integrands localized near the origin survive integration
domains spanning many decades.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from vortexmf.functional import log_partition
from vortexmf.measure import (
    CirculationMeasure,
    alpha_min,
    lambda_bar,
    lambda_bar_residual_vanishing,
    moment,
)
from vortexmf.minimize import MinimizeResult
from vortexmf.torus import Field, SpectralTorus, radial_average

QUAD_REL_TOL = 1e-10
MIN_FIT_SAMPLES = 8
DEFAULT_WINDOW = (3.0, 30.0)
SIGMA_TOL = 1e-12
PEAK_SLACK = 1e-9
FD_STEP = 1e-5
TAIL_SAFETY = 1e-3
FORMULA_MATCH_TOL = 1e-9


def radial_integral(
    fn,
    a: float,
    b: float,
    rel_tol: float = QUAD_REL_TOL,
    breakpoints=None,
) -> float:
    """Adaptive integral of fn over [a, b] after substituting u = log1p(r).

    The substitution spends quadrature nodes evenly across decades, which
    integrands localized near the origin need once b runs into the
    millions.  ``breakpoints`` lists radii where fn has kinks or jumps.
    """
    if not 0.0 <= a < b:
        raise ValueError("need 0 <= a < b")

    def g(u: float) -> float:
        r = math.expm1(u)
        return fn(r) * (1.0 + r)

    points = None
    if breakpoints is not None:
        points = sorted(math.log1p(p) for p in breakpoints if a < p < b) or None
    out = quad(
        g,
        math.log1p(a),
        math.log1p(b),
        epsabs=0.0,
        epsrel=rel_tol,
        limit=400,
        points=points,
        full_output=1,
    )
    if len(out) > 3:
        raise RuntimeError(f"radial quadrature did not converge: {out[3]}")
    return float(out[0])


def liouville_bubble(mu: float, lam: float, r):
    """Entire radial solution w(r) = log(8 mu^2 / lam) - 2 log(1 + (mu r)^2).

    Solves -Lap(w) = lam e^w on the plane; the density lam e^w carries
    total mass 8 pi for every mu.  Accepts scalar or array r.
    """
    if mu <= 0.0 or lam <= 0.0:
        raise ValueError("mu and lam must be positive")
    rr = np.asarray(r, dtype=float)
    vals = math.log(8.0 * mu * mu / lam) - 2.0 * np.log1p((mu * rr) ** 2)
    return float(vals) if rr.ndim == 0 else vals


@dataclass(frozen=True)
class BlowupProfile:
    """Peak-rescaled radial profile of a normalized field.

    ``peak_value`` is the unit-circulation normalized field w_1 at the
    peak; it sets the rescaling length sigma = e^{-peak_value/2} shared by
    the profiles of every circulation alpha read off the same minimizer.
    ``samples`` holds (r, dw) pairs, dw being the radial average of
    w_alpha(x) - w_alpha(peak), which never exceeds zero.
    """

    sigma: float
    peak_value: float
    samples: tuple[tuple[float, float], ...]
    fitted_slope: float
    gamma0_reference: float

    def __post_init__(self) -> None:
        expected = math.exp(-0.5 * self.peak_value)
        if not abs(self.sigma - expected) <= SIGMA_TOL * max(1.0, expected):
            raise ValueError("sigma does not match exp(-peak_value/2)")
        radii = [r for r, _ in self.samples]
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValueError("samples must be strictly increasing in r")
        if any(dw > PEAK_SLACK for _, dw in self.samples):
            raise ValueError("profile exceeds its own peak")

    @property
    def radii(self) -> np.ndarray:
        return np.array([r for r, _ in self.samples])

    @property
    def dw(self) -> np.ndarray:
        return np.array([d for _, d in self.samples])


def default_fit_window(sigma: float, side_length: float | None = None) -> tuple[float, float]:
    """Fit window in sigma units: [3, 30], capped at L/4 on a torus.

    Below 3 sigma the smooth core dominates; beyond L/4 periodic images
    contaminate radial averages.
    """
    hi = DEFAULT_WINDOW[1]
    if side_length is not None:
        hi = min(hi, 0.25 * side_length / sigma)
    return (DEFAULT_WINDOW[0], hi)


def _li_fit(radii: np.ndarray, dw: np.ndarray, sigma: float, window) -> tuple[float, float]:
    lo, hi = window
    if not 0.0 <= lo < hi:
        raise ValueError("need 0 <= lo < hi in the fit window")
    t = radii / sigma
    mask = (t >= lo) & (t <= hi)
    n = int(mask.sum())
    if n < MIN_FIT_SAMPLES:
        raise ValueError(
            f"fit window [{lo:g}, {hi:g}] sigma units holds {n} samples, "
            f"need at least {MIN_FIT_SAMPLES}"
        )
    x = -np.log1p(t[mask])
    slope, intercept = np.polyfit(x, dw[mask], 1)
    return float(slope), float(intercept)


def _fit_or_nan(radii: np.ndarray, dw: np.ndarray, sigma: float, window) -> float:
    try:
        return _li_fit(radii, dw, sigma, window)[0]
    except ValueError:
        return math.nan


def fit_li_line(profile: BlowupProfile, fit_window) -> tuple[float, float]:
    """Least-squares (slope, intercept) of dw against -log(1 + r/sigma).

    The window is in units of sigma.  Concentrating fields follow
    dw = -alpha gamma0 log(1 + r/sigma) + O(1) between core and far field,
    so the slope estimates alpha gamma0.
    """
    return _li_fit(profile.radii, profile.dw, profile.sigma, fit_window)


def fit_li_slope(profile: BlowupProfile, fit_window) -> float:
    """Slope part of :func:`fit_li_line`."""
    return fit_li_line(profile, fit_window)[0]


def bubble_profile(
    mu: float,
    lam: float,
    radii,
    alpha: float = 1.0,
    gamma0_reference: float = 4.0,
) -> BlowupProfile:
    """Directly sampled bubble profile (construction oracle for the fits).

    ``alpha`` scales dw the way a circulation-alpha normalized field
    would: dw_alpha = alpha (w(r) - w(0)), while sigma keeps the alpha=1
    peak scale.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    rs = np.sort(np.asarray(radii, dtype=float))
    if rs.size == 0 or rs[0] < 0.0:
        raise ValueError("radii must be nonnegative")
    peak = liouville_bubble(mu, lam, 0.0)
    dw = alpha * (liouville_bubble(mu, lam, rs) - peak)
    sigma = math.exp(-0.5 * peak)
    samples = tuple(zip(rs.tolist(), dw.tolist()))
    slope = _fit_or_nan(rs, dw, sigma, default_fit_window(sigma))
    return BlowupProfile(
        sigma=sigma,
        peak_value=peak,
        samples=samples,
        fitted_slope=slope,
        gamma0_reference=gamma0_reference,
    )


def rescale_profile(
    result: MinimizeResult,
    T: SpectralTorus,
    P: CirculationMeasure,
    alpha: float,
    n_bins: int | None = None,
) -> BlowupProfile:
    """Peak-rescaled radial profile of w_alpha around the field maximum.

    dw uses the exact relation w_alpha(x) - w_alpha(peak) =
    alpha (v(x) - v(peak)): profiles at different alpha differ by the
    factor alpha alone.  sigma comes from the unit-circulation peak value.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    vals = result.v.values
    if vals.shape != (T.grid_n, T.grid_n):
        raise ValueError("result grid does not match the torus")
    peak = result.peak_point
    if vals[peak] != vals.max():
        raise ValueError("result peak does not mark the field maximum")
    m1 = moment(P, 1, side="positive")
    if m1 <= 0.0:
        raise ValueError("measure carries no positive circulation")
    w1_peak = float(vals[peak]) - log_partition(T, result.v, 1.0)
    dw_field = Field(alpha * (vals - vals[peak]))
    bins = radial_average(T, dw_field, peak, n_bins if n_bins is not None else T.grid_n // 2)
    r = np.array([b[0] for b in bins])
    mean_dw = np.array([b[1] for b in bins])
    sigma = math.exp(-0.5 * w1_peak)
    slope = _fit_or_nan(r, mean_dw, sigma, default_fit_window(sigma, T.side_length))
    return BlowupProfile(
        sigma=sigma,
        peak_value=w1_peak,
        samples=tuple(zip(r.tolist(), mean_dw.tolist())),
        fitted_slope=slope,
        gamma0_reference=4.0 / m1,
    )


def mass_gamma(
    f_radial,
    r_max: float,
    rel_tol: float = QUAD_REL_TOL,
    breakpoints=None,
) -> float:
    """Concentration mass (1/2pi) integral of a radial plane density.

    Equals int_0^inf f(r) r dr: adaptive quadrature to r_max plus a
    power-law tail estimate calibrated on the last decade.  The density
    must be nonnegative with f r^2 decreasing across that decade, or the
    tail is declared non-convergent.
    """
    if r_max <= 0.0:
        raise ValueError("r_max must be positive")
    main = radial_integral(lambda r: f_radial(r) * r, 0.0, r_max, rel_tol, breakpoints)
    probes = np.geomspace(r_max / 10.0, r_max, 16)
    f_vals = np.array([float(f_radial(r)) for r in probes])
    if np.any(f_vals < 0.0):
        raise ValueError("density must be nonnegative")
    if f_vals[-1] == 0.0:
        return main
    fr2 = f_vals * probes * probes
    # relative slack so a tail with f r^2 constant up to rounding is
    # diagnosed by its decay exponent, not by quadrature noise
    if np.any(np.diff(fr2) > 1e-12 * np.abs(fr2[:-1])):
        raise RuntimeError("f r^2 is not decreasing over the last decade; tail not integrable")
    p_hat = math.log(f_vals[0] / f_vals[-1]) / math.log(probes[-1] / probes[0])
    if p_hat <= 2.0:
        raise RuntimeError(f"tail decay exponent {p_hat:.3f} <= 2; mass does not converge")
    return main + f_vals[-1] * r_max * r_max / (p_hat - 2.0)


@dataclass(frozen=True)
class PohozaevReport:
    """Boundary kinetic term against volume-plus-boundary potential terms."""

    lhs: float
    rhs: float
    relative_residual: float


def pohozaev_residual(
    u_radial,
    a_radial,
    big_f,
    radius: float,
    rel_tol: float = QUAD_REL_TOL,
) -> PohozaevReport:
    """Radial Pohozaev balance on the disk of the given radius.

    For u solving -Lap(u) = A(r) F'(u), the identity

      R ring(|grad u|^2 / 2 - u_r^2) = R ring(A F(u))
          - int_{B_R} [2 A F(u) + (x . grad A) F(u)]

    holds exactly (ring = boundary integral).  Both sides are reported
    with their scaled gap |lhs - rhs| / (1 + |lhs| + |rhs|).  Radial
    derivatives of u and A come from central differences, so the check is
    meaningful only for smooth inputs.
    """
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    h = FD_STEP * max(1.0, radius)
    ur = (u_radial(radius + h) - u_radial(radius - h)) / (2.0 * h)
    lhs = -math.pi * radius * radius * ur * ur

    def volume_term(r: float) -> float:
        fu = big_f(u_radial(r))
        step = FD_STEP * max(1.0, r)
        lo = max(r - step, 0.0)
        da = (a_radial(r + step) - a_radial(lo)) / (r + step - lo)
        return (2.0 * a_radial(r) * fu + fu * r * da) * r

    boundary = 2.0 * math.pi * radius * radius * a_radial(radius) * big_f(u_radial(radius))
    rhs = boundary - 2.0 * math.pi * radial_integral(volume_term, 0.0, radius, rel_tol)
    gap = abs(lhs - rhs) / (1.0 + abs(lhs) + abs(rhs))
    return PohozaevReport(lhs=lhs, rhs=rhs, relative_residual=gap)


def newton_potential(
    f_radial,
    x_abs: float,
    rho_max: float = 1e6,
    breakpoints=None,
    rel_tol: float = QUAD_REL_TOL,
) -> float:
    """Logarithmic potential z(x) = (1/2pi) int f(y) log(|x-y|/(1+|y|)) dy.

    Radial symmetry collapses the angle: the circle mean of log|x-y| over
    |y| = rho is log max(|x|, rho).  z grows like gamma log|x| with
    gamma = (1/2pi) int f whenever the density tail is integrable.
    """
    if x_abs <= 0.0:
        raise ValueError("x_abs must be positive")
    log_r = math.log(x_abs)

    def integrand(rho: float) -> float:
        if rho >= x_abs:
            angular = -math.log1p(1.0 / rho)
        else:
            angular = log_r - math.log1p(rho)
        return f_radial(rho) * rho * angular

    pts = [x_abs] + ([] if breakpoints is None else list(breakpoints))
    val = radial_integral(integrand, 0.0, rho_max, rel_tol, breakpoints=pts)
    probe = abs(f_radial(rho_max)) * rho_max * rho_max
    if probe > TAIL_SAFETY * (1.0 + abs(val)):
        raise RuntimeError("density tail too heavy at rho_max; potential tail not negligible")
    return val


@dataclass(frozen=True)
class ConsistencyReport:
    """Checks tying the extremal coupling to the circulation measure.

    For measures supported in [0, 1]: when the smallest circulation
    exceeds 1/2, the extremal coupling must take the residual-vanishing
    form 8 pi / m1^2 and the smallest circulation must exceed m1/2.
    """

    alpha_min: float
    moment1: float
    lambda_bar: float
    residual_vanishing_value: float
    alpha_min_above_half: bool
    matches_residual_vanishing: bool
    alpha_min_above_half_moment: bool


def consistency_report(P: CirculationMeasure) -> ConsistencyReport:
    """Evaluate the residual-vanishing consistency conditions for P."""
    if any(a < 0.0 for a, _ in P.atoms):
        raise ValueError("consistency report requires support in [0, 1]")
    am = alpha_min(P)
    m1 = moment(P, 1)
    lb = lambda_bar(P).lambda_bar
    rv = lambda_bar_residual_vanishing(P)
    cond_a = am > 0.5
    cond_b = abs(lb - rv) <= FORMULA_MATCH_TOL * max(1.0, rv)
    cond_c = am > 0.5 * m1
    if cond_a and not cond_b:
        raise RuntimeError(
            "alpha_min > 1/2 but the extremal coupling left the residual-vanishing form"
        )
    if cond_a and not cond_c:
        raise RuntimeError("alpha_min > 1/2 but alpha_min <= m1/2; inconsistent moments")
    return ConsistencyReport(
        alpha_min=am,
        moment1=m1,
        lambda_bar=lb,
        residual_vanishing_value=rv,
        alpha_min_above_half=cond_a,
        matches_residual_vanishing=cond_b,
        alpha_min_above_half_moment=cond_c,
    )
