"""Free energy, its gradient, dual form, and alpha-derivative identities."""

import math

import numpy as np
import pytest
from scipy.special import i0

from helpers import random_measure, random_zero_mean_field
from vortexmf import (
    Field,
    J,
    J_dual,
    Problem,
    SpectralTorus,
    el_residual,
    grad_J,
    integrate,
    log_partition,
    new_atomic,
    project_zero_mean,
    w_alpha,
)
from vortexmf.functional import dalpha_partition, dalpha_peak
from vortexmf.torus import laplacian


def zero_field(T):
    return Field(np.zeros((T.grid_n, T.grid_n)), zero_mean=True)


def test_log_partition_at_zero_field():
    T1 = SpectralTorus(1.0, 32)
    assert log_partition(T1, zero_field(T1), 0.7) == 0.0
    T2 = SpectralTorus(2.0, 32)
    assert log_partition(T2, zero_field(T2), 0.7) == pytest.approx(math.log(4.0), rel=1e-15)


def test_log_partition_overflow_guard():
    T = SpectralTorus(1.0, 16)
    spike = np.zeros((16, 16))
    spike[0, 0] = 1000.0
    v = project_zero_mean(T, Field(spike))
    with pytest.raises(OverflowError):
        log_partition(T, v, 1.0)


def test_cosine_partition_matches_bessel():
    # int e^{alpha eps cos} over the unit torus is the modified Bessel I0.
    T = SpectralTorus(1.0, 64)
    eps = 0.4
    x = np.arange(T.grid_n) * T.spacing
    vals = eps * np.cos(2.0 * math.pi * x)[:, None] * np.ones(T.grid_n)[None, :]
    v = project_zero_mean(T, Field(vals))
    for alpha in (0.3, 0.75, 1.0):
        assert log_partition(T, v, alpha) == pytest.approx(
            math.log(float(i0(alpha * eps))), abs=1e-13
        )


def test_energy_matches_bessel_closed_form():
    T = SpectralTorus(1.0, 64)
    eps = 0.25
    lam = 5.0
    x = np.arange(T.grid_n) * T.spacing
    vals = eps * np.cos(2.0 * math.pi * x)[:, None] * np.ones(T.grid_n)[None, :]
    v = project_zero_mean(T, Field(vals))
    P = new_atomic([(0.4, 0.3), (0.9, 0.7)])
    prob = Problem(T, P, lam)
    expected = eps * eps * math.pi**2 - lam * sum(
        w * math.log(float(i0(a * eps))) for a, w in P.atoms
    )
    assert J(prob, v) == pytest.approx(expected, rel=1e-12)


def test_energy_is_zero_at_zero_field():
    T = SpectralTorus(1.0, 32)
    prob = Problem(T, new_atomic([(0.5, 0.5), (-0.25, 0.5)]), 3.0)
    assert J(prob, zero_field(T)) == 0.0


def test_w_alpha_normalization():
    T = SpectralTorus(1.5, 64)
    prob = Problem(T, new_atomic([(1.0, 1.0)]), 2.0)
    rng = np.random.default_rng(2)
    v = random_zero_mean_field(T, rng)
    for alpha in (0.2, 0.6, 1.0):
        wa = w_alpha(prob, v, alpha)
        mass = integrate(T, Field(np.exp(wa.values)))
        assert mass == pytest.approx(1.0, abs=1e-10)
    w0 = w_alpha(prob, v, 0.0)
    assert np.all(w0.values == -math.log(T.volume))


def test_functional_requires_zero_mean_certificate():
    T = SpectralTorus(1.0, 32)
    prob = Problem(T, new_atomic([(1.0, 1.0)]), 2.0)
    raw = Field(np.zeros((32, 32)))
    for fn in (lambda: J(prob, raw), lambda: w_alpha(prob, raw, 0.5),
               lambda: el_residual(prob, raw), lambda: J_dual(prob, raw)):
        with pytest.raises(ValueError, match="zero-mean"):
            fn()


def test_problem_rejects_nonpositive_coupling():
    T = SpectralTorus(1.0, 32)
    with pytest.raises(ValueError):
        Problem(T, new_atomic([(1.0, 1.0)]), 0.0)
    with pytest.raises(ValueError):
        Problem(T, new_atomic([(1.0, 1.0)]), -1.0)


def test_gradient_matches_directional_finite_differences():
    T = SpectralTorus(1.0, 32)
    rng = np.random.default_rng(9)
    measures = [
        new_atomic([(1.0, 1.0)]),
        new_atomic([(0.5, 0.5), (1.0, 0.5)]),
        new_atomic([(-0.7, 0.3), (0.2, 0.3), (0.9, 0.4)]),
    ]
    h = 1e-5
    for P in measures:
        prob = Problem(T, P, 4.0)
        v = random_zero_mean_field(T, rng, amplitude=0.5)
        g = grad_J(prob, v)
        for _ in range(20):
            phi = random_zero_mean_field(T, rng)
            fd = (
                J(prob, project_zero_mean(T, Field(v.values + h * phi.values)))
                - J(prob, project_zero_mean(T, Field(v.values - h * phi.values)))
            ) / (2.0 * h)
            exact = integrate(T, Field(g.values * phi.values))
            assert fd == pytest.approx(exact, rel=1e-6, abs=1e-12)


def test_residual_vanishes_at_zero_field():
    T = SpectralTorus(1.0, 32)
    prob = Problem(T, new_atomic([(0.3, 0.4), (0.8, 0.6)]), 6.0)
    res = el_residual(prob, zero_field(T))
    assert np.all(res.values == 0.0)


def test_residual_reduces_to_laplacian_for_zero_circulation():
    # an atom at alpha = 0 contributes no nonlinearity
    T = SpectralTorus(1.0, 32)
    prob = Problem(T, new_atomic([(0.0, 1.0)]), 7.0)
    rng = np.random.default_rng(4)
    v = random_zero_mean_field(T, rng)
    res = el_residual(prob, v)
    expected = project_zero_mean(T, Field(-laplacian(T, v).values))
    assert np.array_equal(res.values, expected.values)


def test_dual_energy_agrees_at_zero_field():
    rng = np.random.default_rng(21)
    for side in (1.0, 2.0):
        T = SpectralTorus(side, 32)
        for _ in range(20):
            P = random_measure(rng, max_atoms=6, signed=False)
            prob = Problem(T, P, float(rng.uniform(0.5, 10.0)))
            v = zero_field(T)
            assert abs(J_dual(prob, v) - J(prob, v)) <= 1e-9


def test_dual_energy_rejects_negative_circulations():
    T = SpectralTorus(1.0, 32)
    prob = Problem(T, new_atomic([(-0.5, 0.5), (1.0, 0.5)]), 2.0)
    with pytest.raises(ValueError, match="support"):
        J_dual(prob, zero_field(T))


def test_alpha_derivative_at_peak_matches_closed_form():
    T = SpectralTorus(1.0, 32)
    prob = Problem(T, new_atomic([(1.0, 1.0)]), 2.0)
    rng = np.random.default_rng(13)
    v = random_zero_mean_field(T, rng)
    peak = np.unravel_index(int(np.argmax(v.values)), v.values.shape)
    for alpha in (0.3, 0.7):
        # d/dalpha w_alpha(peak) = v(peak) - int v e^{alpha v} / int e^{alpha v}
        dens = np.exp(alpha * v.values - log_partition(T, v, alpha))
        mean_v = integrate(T, Field(v.values * dens))
        oracle = float(v.values[peak]) - mean_v
        assert dalpha_peak(prob, v, peak, alpha) == pytest.approx(oracle, rel=1e-6)
        assert oracle >= -1e-8


def test_alpha_derivative_of_partition_matches_closed_form():
    T = SpectralTorus(1.0, 32)
    prob = Problem(T, new_atomic([(1.0, 1.0)]), 2.0)
    rng = np.random.default_rng(17)
    v = random_zero_mean_field(T, rng)
    for alpha in (0.2, 0.5, 0.9):
        oracle = integrate(T, Field(v.values * np.exp(alpha * v.values)))
        assert dalpha_partition(prob, v, alpha) == pytest.approx(oracle, rel=1e-6)
        assert oracle >= -1e-8


def test_alpha_derivatives_are_nonnegative_on_random_fields():
    T = SpectralTorus(1.0, 32)
    prob = Problem(T, new_atomic([(1.0, 1.0)]), 2.0)
    rng = np.random.default_rng(29)
    for _ in range(10):
        v = random_zero_mean_field(T, rng, amplitude=float(rng.uniform(0.1, 2.0)))
        peak = np.unravel_index(int(np.argmax(v.values)), v.values.shape)
        alpha = float(rng.uniform(0.1, 0.9))
        assert dalpha_peak(prob, v, peak, alpha) >= -1e-8
        assert dalpha_partition(prob, v, alpha) >= -1e-8


def test_alpha_derivative_guards():
    T = SpectralTorus(1.0, 32)
    prob = Problem(T, new_atomic([(1.0, 1.0)]), 2.0)
    rng = np.random.default_rng(31)
    v = random_zero_mean_field(T, rng)
    peak = np.unravel_index(int(np.argmax(v.values)), v.values.shape)
    not_peak = ((peak[0] + 1) % 32, peak[1])
    with pytest.raises(ValueError, match="argmax"):
        dalpha_peak(prob, v, not_peak, 0.5)
    with pytest.raises(ValueError, match="stencil"):
        dalpha_peak(prob, v, peak, 1.0)
    with pytest.raises(ValueError, match="stencil"):
        dalpha_partition(prob, v, 1e-5)
    with pytest.raises(ValueError, match="positive"):
        dalpha_partition(prob, v, 0.5, h=0.0)
