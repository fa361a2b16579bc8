"""Spectral calculus on the flat torus [0, L)^2.

Fields live on a uniform n x n grid (n a power of two) and all derivatives
are computed in the discrete Fourier basis, where -Laplacian is diagonal
with eigenvalues (2 pi / L)^2 (j^2 + m^2).  Quadrature is the uniform grid
sum, which is spectrally accurate for the band-limited fields produced
here.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np

ZERO_MEAN_TOL = 1e-12


@dataclass(frozen=True)
class SpectralTorus:
    """Geometry and cached Fourier symbols for one grid resolution."""

    side_length: float
    grid_n: int

    def __post_init__(self) -> None:
        if not self.side_length > 0.0:
            raise ValueError("side_length must be positive")
        n = self.grid_n
        if n < 16 or n & (n - 1) != 0:
            raise ValueError("grid_n must be a power of two >= 16")

    @property
    def volume(self) -> float:
        return self.side_length * self.side_length

    @property
    def cell_area(self) -> float:
        return (self.side_length / self.grid_n) ** 2

    @property
    def spacing(self) -> float:
        return self.side_length / self.grid_n

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues of -Laplacian per Fourier mode; (0,0) is exactly 0."""
        k = 2.0 * math.pi / self.side_length * np.fft.fftfreq(self.grid_n, d=1.0 / self.grid_n)
        kx, ky = np.meshgrid(k, k, indexing="ij")
        return kx * kx + ky * ky

    @cached_property
    def inverse_eigenvalues(self) -> np.ndarray:
        """1/eigenvalues with the (0,0) mode mapped to 0."""
        eig = self.eigenvalues
        inv = np.zeros_like(eig)
        nonzero = eig > 0.0
        inv[nonzero] = 1.0 / eig[nonzero]
        return inv


@dataclass(frozen=True)
class Field:
    """Grid values of a scalar field; a value type, never mutated in place.

    ``zero_mean`` certifies that the grid mean vanishes to rounding; it is
    validated at construction.
    """

    values: np.ndarray
    zero_mean: bool = False

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise ValueError(f"field values must be square 2-d, got {vals.shape}")
        object.__setattr__(self, "values", vals)
        vals.setflags(write=False)
        if self.zero_mean:
            scale = max(1.0, float(np.abs(vals).max()))
            if abs(float(vals.mean())) > ZERO_MEAN_TOL * scale:
                raise ValueError("zero_mean certificate violated")


def _check(T: SpectralTorus, f: Field) -> np.ndarray:
    if f.values.shape != (T.grid_n, T.grid_n):
        raise ValueError(f"field shape {f.values.shape} does not match grid {T.grid_n}")
    return f.values


def integrate(T: SpectralTorus, f: Field) -> float:
    """Domain integral by the uniform grid rule (L/n)^2 sum."""
    return T.cell_area * float(_check(T, f).sum())


def project_zero_mean(T: SpectralTorus, f: Field) -> Field:
    """Subtract the grid mean and certify the result."""
    vals = _check(T, f)
    return Field(vals - vals.mean(), zero_mean=True)


def laplacian(T: SpectralTorus, f: Field) -> Field:
    """Spectral Laplacian; the constant mode maps to 0."""
    F = np.fft.fft2(_check(T, f))
    out = np.fft.ifft2(-T.eigenvalues * F).real
    return Field(out, zero_mean=True)


def solve_poisson_zero_mean(T: SpectralTorus, rhs: Field) -> Field:
    """Solve -Laplacian u = rhs with int u = 0.

    The right-hand side must have zero mean (the solvability condition);
    the constant mode of the solution is set to zero.
    """
    vals = _check(T, rhs)
    scale = max(1.0, float(np.abs(vals).max()))
    if abs(float(vals.mean())) > ZERO_MEAN_TOL * scale:
        raise ValueError("Poisson right-hand side must have zero mean")
    F = np.fft.fft2(vals)
    u = np.fft.ifft2(T.inverse_eigenvalues * F).real
    return Field(u, zero_mean=True)


def dirichlet_energy(T: SpectralTorus, f: Field) -> float:
    """(1/2) int |grad f|^2 by Parseval on the spectral gradient."""
    F = np.fft.fft2(_check(T, f))
    power = F.real * F.real + F.imag * F.imag
    norm = T.volume / T.grid_n**4
    return 0.5 * norm * float((T.eigenvalues * power).sum())


def gradient_inner(T: SpectralTorus, f: Field, g: Field) -> float:
    """int grad f . grad g, the bilinear form under dirichlet_energy."""
    F = np.fft.fft2(_check(T, f))
    G = np.fft.fft2(_check(T, g))
    cross = F.real * G.real + F.imag * G.imag
    norm = T.volume / T.grid_n**4
    return norm * float((T.eigenvalues * cross).sum())


def periodic_distance(T: SpectralTorus, center: tuple[int, int]) -> np.ndarray:
    """Minimum-image distance of every grid point to a grid center."""
    n = T.grid_n
    ci, cj = center
    if not (0 <= ci < n and 0 <= cj < n):
        raise ValueError(f"center {center} outside grid")
    idx = np.arange(n)
    di = ((idx - ci + n // 2) % n - n // 2) * T.spacing
    dj = ((idx - cj + n // 2) % n - n // 2) * T.spacing
    dx, dy = np.meshgrid(di, dj, indexing="ij")
    return np.hypot(dx, dy)


def radial_average(
    T: SpectralTorus,
    f: Field,
    center: tuple[int, int],
    n_bins: int,
) -> list[tuple[float, float, int]]:
    """Bin f by periodic distance to center, up to L/2.

    Returns (mean radius, mean value, count) per nonempty bin, ordered by
    radius.  Bin radii are sample means, not bin midpoints, so a radial
    function is reproduced up to in-bin variation only.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    vals = _check(T, f)
    r = periodic_distance(T, center)
    r_max = T.side_length / 2.0
    keep = r <= r_max
    rk = r[keep]
    vk = vals[keep]
    edges = np.linspace(0.0, r_max, n_bins + 1)
    which = np.clip(np.digitize(rk, edges) - 1, 0, n_bins - 1)
    counts = np.bincount(which, minlength=n_bins)
    r_sums = np.bincount(which, weights=rk, minlength=n_bins)
    v_sums = np.bincount(which, weights=vk, minlength=n_bins)
    out = []
    for b in range(n_bins):
        if counts[b] == 0:
            continue
        out.append((float(r_sums[b] / counts[b]), float(v_sums[b] / counts[b]), int(counts[b])))
    return out


_HEADER_RE = re.compile(r"^# torus L=(?P<L>[^ ]+) n=(?P<n>\d+)\s*$")


def save_field(path: str, T: SpectralTorus, f: Field) -> None:
    """Write a field as CSV, row-major, with a geometry header line."""
    vals = _check(T, f)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# torus L={T.side_length!r} n={T.grid_n}\n")
        for row in vals:
            fh.write(",".join(repr(float(x)) for x in row))
            fh.write("\n")


def load_field(path: str) -> tuple[SpectralTorus, Field]:
    """Read a field written by :func:`save_field`."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        m = _HEADER_RE.match(header)
        if m is None:
            raise ValueError(f"{path}: missing torus header, got {header.strip()!r}")
        L = float(m.group("L"))
        n = int(m.group("n"))
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            row = [float(x) for x in line.split(",")]
            if len(row) != n:
                raise ValueError(f"{path}: line {lineno}: expected {n} columns, got {len(row)}")
            rows.append(row)
    if len(rows) != n:
        raise ValueError(f"{path}: expected {n} rows, got {len(rows)}")
    T = SpectralTorus(L, n)
    return T, Field(np.array(rows))
