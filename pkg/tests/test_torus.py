"""Spectral torus calculus: quadrature, Poisson solves, geometry, field I/O."""

import math

import numpy as np
import pytest

from helpers import random_zero_mean_field
from vortexmf import (
    Field,
    SpectralTorus,
    dirichlet_energy,
    integrate,
    project_zero_mean,
    solve_poisson_zero_mean,
)
from vortexmf.torus import (
    gradient_inner,
    laplacian,
    load_field,
    periodic_distance,
    radial_average,
    save_field,
)


def test_grid_validation():
    with pytest.raises(ValueError):
        SpectralTorus(1.0, 100)
    with pytest.raises(ValueError):
        SpectralTorus(1.0, 8)
    with pytest.raises(ValueError):
        SpectralTorus(0.0, 32)
    with pytest.raises(ValueError):
        SpectralTorus(-2.0, 64)


def test_field_shape_and_immutability():
    with pytest.raises(ValueError):
        Field(np.zeros((4, 5)))
    with pytest.raises(ValueError):
        Field(np.zeros(16))
    f = Field(np.zeros((16, 16)))
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


def test_zero_mean_certificate_is_checked():
    with pytest.raises(ValueError, match="zero_mean"):
        Field(np.ones((16, 16)), zero_mean=True)
    g = project_zero_mean(SpectralTorus(1.0, 16), Field(np.ones((16, 16))))
    assert g.zero_mean
    assert g.values.max() == 0.0


@pytest.mark.parametrize("side", [1.0, 2.5])
def test_cosine_dirichlet_energy(side):
    # v = eps cos(2 pi x / L) has (1/2) int |grad v|^2 = eps^2 pi^2 for any L.
    T = SpectralTorus(side, 64)
    eps = 0.3
    x = np.arange(T.grid_n) * T.spacing
    vals = eps * np.cos(2.0 * math.pi * x / side)[:, None] * np.ones(T.grid_n)[None, :]
    e = dirichlet_energy(T, Field(vals))
    assert e == pytest.approx(eps * eps * math.pi**2, rel=1e-12)


def test_integrate_constant():
    T = SpectralTorus(2.5, 32)
    assert integrate(T, Field(np.full((32, 32), 3.0))) == pytest.approx(3.0 * 2.5**2, rel=1e-14)


def test_integrate_shape_mismatch():
    T = SpectralTorus(1.0, 32)
    with pytest.raises(ValueError, match="does not match"):
        integrate(T, Field(np.zeros((16, 16))))


def test_poisson_roundtrip():
    T = SpectralTorus(1.0, 128)
    rng = np.random.default_rng(3)
    u = random_zero_mean_field(T, rng)
    rhs = Field(-laplacian(T, u).values, zero_mean=True)
    back = solve_poisson_zero_mean(T, rhs)
    assert np.abs(back.values - u.values).max() <= 1e-10 * max(1.0, np.abs(u.values).max())


def test_poisson_requires_zero_mean_rhs():
    T = SpectralTorus(1.0, 32)
    with pytest.raises(ValueError, match="zero mean"):
        solve_poisson_zero_mean(T, Field(np.ones((32, 32))))


def test_dirichlet_energy_matches_weak_form():
    T = SpectralTorus(2.0, 64)
    rng = np.random.default_rng(7)
    f = random_zero_mean_field(T, rng)
    lap = laplacian(T, f)
    weak = 0.5 * integrate(T, Field(-f.values * lap.values))
    assert dirichlet_energy(T, f) == pytest.approx(weak, rel=1e-10)


def test_gradient_inner_polarization_and_symmetry():
    T = SpectralTorus(1.0, 64)
    rng = np.random.default_rng(11)
    f = random_zero_mean_field(T, rng)
    g = random_zero_mean_field(T, rng)
    assert gradient_inner(T, f, f) == pytest.approx(2.0 * dirichlet_energy(T, f), rel=1e-12)
    assert gradient_inner(T, f, g) == gradient_inner(T, g, f)
    # bilinearity against the sum
    lhs = gradient_inner(T, Field(f.values + g.values), Field(f.values + g.values))
    rhs = gradient_inner(T, f, f) + 2.0 * gradient_inner(T, f, g) + gradient_inner(T, g, g)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_periodic_distance_wraps():
    T = SpectralTorus(1.0, 32)
    d = periodic_distance(T, (0, 0))
    assert d[0, 0] == 0.0
    assert d[31, 0] == pytest.approx(T.spacing, rel=1e-15)
    assert d[0, 31] == pytest.approx(T.spacing, rel=1e-15)
    assert d[16, 0] == pytest.approx(0.5, rel=1e-15)
    with pytest.raises(ValueError):
        periodic_distance(T, (32, 0))


def test_radial_average_recovers_radial_profile():
    T = SpectralTorus(2.0, 128)
    center = (64, 64)
    r = periodic_distance(T, center)
    f = Field(np.exp(-(r**2)))
    bins = radial_average(T, f, center, 32)
    assert len(bins) >= 30
    radii = [b[0] for b in bins]
    assert radii == sorted(radii)
    assert sum(b[2] for b in bins) == int((r <= 1.0).sum())
    for mean_r, mean_v, count in bins:
        assert count > 0
        assert abs(mean_v - math.exp(-(mean_r**2))) < 0.02


def test_radial_average_rejects_bad_bins():
    T = SpectralTorus(1.0, 16)
    with pytest.raises(ValueError):
        radial_average(T, Field(np.zeros((16, 16))), (0, 0), 0)


def test_field_io_roundtrip(tmp_path):
    T = SpectralTorus(1.5, 16)
    rng = np.random.default_rng(5)
    f = Field(rng.standard_normal((16, 16)))
    path = tmp_path / "field.csv"
    save_field(str(path), T, f)
    T2, f2 = load_field(str(path))
    assert T2 == T
    assert np.array_equal(f2.values, f.values)


def test_field_io_rejects_corrupt_files(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("no header here\n")
    with pytest.raises(ValueError, match="header"):
        load_field(str(path))
    path.write_text("# torus L=1.0 n=16\n" + "0.0,1.0\n")
    with pytest.raises(ValueError, match="columns"):
        load_field(str(path))
    path.write_text("# torus L=1.0 n=16\n" + "\n".join(",".join(["0.0"] * 16) for _ in range(3)) + "\n")
    with pytest.raises(ValueError, match="rows"):
        load_field(str(path))
