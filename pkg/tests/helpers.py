"""Shared test utilities: random measures and synthetic concentration fields."""

import numpy as np

from vortexmf import CirculationMeasure, Field, SpectralTorus, new_atomic, project_zero_mean
from vortexmf.minimize import MinimizeResult
from vortexmf.torus import periodic_distance


def random_measure(rng, max_atoms: int = 12, signed: bool = True, low: float = 0.05) -> CirculationMeasure:
    n = int(rng.integers(1, max_atoms + 1))
    lo = -1.0 if signed else low
    alphas = rng.uniform(lo, 1.0, size=n)
    weights = rng.uniform(0.1, 1.0, size=n)
    weights = weights / weights.sum()
    return new_atomic(list(zip(alphas.tolist(), weights.tolist())))


def random_zero_mean_field(T: SpectralTorus, rng, amplitude: float = 1.0) -> Field:
    raw = amplitude * rng.standard_normal((T.grid_n, T.grid_n))
    return project_zero_mean(T, Field(raw))


def synthetic_result(T: SpectralTorus, values: np.ndarray, lam: float = 1.0) -> MinimizeResult:
    """Wrap raw grid values as a zero-mean minimizer result (peak marked)."""
    f = project_zero_mean(T, Field(np.asarray(values, dtype=float)))
    flat = int(np.argmax(f.values))
    peak = (flat // T.grid_n, flat % T.grid_n)
    return MinimizeResult(
        v=f,
        J_value=0.0,
        residual_norm=1.0,
        iterations=0,
        lam=lam,
        peak_point=peak,
        peak_value=float(f.values[peak]),
        blown_up=True,
    )


def gaussian_bump(T: SpectralTorus, center: tuple[int, int], height: float, width: float) -> np.ndarray:
    r = periodic_distance(T, center)
    return height * np.exp(-((r / width) ** 2))
