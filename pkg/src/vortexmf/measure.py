"""Circulation measures and the extremal coupling constant.

A circulation measure is a probability measure P on [-1, 1] describing the
distribution of vortex circulations.  The coupling threshold of the mean
field free energy is

    lambda_bar(P) = inf_K  8 pi P(K) / (int_K alpha dP)^2,

the infimum running over subsets K of supp(P) lying entirely in [0, 1] or
entirely in [-1, 0]; subsets with vanishing circulation integral are
excluded.  For atomic P the infimum is a finite minimum over subsets of
atoms.  Exhaustive enumeration is exponential; empirically the minimum is
always attained on a "tail" prefix of the atoms ordered by decreasing
|alpha| within each sign, which the fast path exploits.  Both routes are
kept and must agree exactly where both run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

EIGHT_PI = 8.0 * math.pi

# Atoms closer than this in alpha are considered the same circulation value.
ALPHA_MERGE_TOL = 1e-12
# Input weights must sum to 1 within this tolerance before rescaling.
WEIGHT_SUM_TOL = 1e-9

MAX_BRUTEFORCE_ATOMS = 22


@dataclass(frozen=True)
class CirculationMeasure:
    """Atomic probability measure of circulations.

    atoms are (alpha, weight) pairs sorted by increasing alpha, with all
    alphas in [-1, 1], distinct beyond ``ALPHA_MERGE_TOL``, strictly
    positive weights, and weights summing to 1.
    """

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.atoms:
            raise ValueError("measure needs at least one atom")
        total = 0.0
        prev = None
        for alpha, weight in self.atoms:
            if not -1.0 <= alpha <= 1.0:
                raise ValueError(f"alpha {alpha} outside [-1, 1]")
            if not weight > 0.0:
                raise ValueError(f"weight {weight} not positive")
            if prev is not None and alpha - prev <= ALPHA_MERGE_TOL:
                raise ValueError("atoms must be sorted with distinct alphas")
            prev = alpha
            total += weight
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total}, expected 1")

    @property
    def alphas(self) -> np.ndarray:
        return np.array([a for a, _ in self.atoms])

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])

    def __len__(self) -> int:
        return len(self.atoms)


@dataclass(frozen=True)
class ExtremalResult:
    """Value and witness of the extremal coupling infimum.

    ``minimizing_subset`` holds indices into the measure's atom tuple; it is
    empty exactly when every candidate subset has zero circulation integral
    and ``lambda_bar`` is +infinity.  ``side`` records which sign interval
    the witness lives in.
    """

    lambda_bar: float
    minimizing_subset: tuple[int, ...]
    side: str

    def __post_init__(self) -> None:
        if self.side not in ("positive", "negative"):
            raise ValueError(f"bad side tag {self.side!r}")
        if math.isinf(self.lambda_bar) != (len(self.minimizing_subset) == 0):
            raise ValueError("empty subset iff infinite value")


@dataclass(frozen=True)
class ThresholdSolution:
    """Maximizer of int phi0 psi dP over densities 0 <= psi <= 1 with
    int psi dP = d: indicator above a threshold, fractional on the level set.
    """

    s_d: float
    c_d: float
    psi: tuple[float, ...]

    def __post_init__(self) -> None:
        if not 0.0 <= self.c_d <= 1.0:
            raise ValueError(f"c_d {self.c_d} outside [0, 1]")
        for p in self.psi:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"psi value {p} outside [0, 1]")


def new_atomic(pairs: Sequence[tuple[float, float]]) -> CirculationMeasure:
    """Build a measure from (alpha, weight) pairs.

    Validates ranges, merges atoms whose alphas coincide within
    ``ALPHA_MERGE_TOL``, and rescales weights to sum exactly 1; the raw sum
    must already be within ``WEIGHT_SUM_TOL`` of 1.
    """
    if not pairs:
        raise ValueError("measure needs at least one atom")
    for alpha, weight in pairs:
        if not -1.0 <= alpha <= 1.0:
            raise ValueError(f"alpha {alpha} outside [-1, 1]")
        if not weight > 0.0:
            raise ValueError(f"weight {weight} not positive")
    merged: list[list[float]] = []
    for alpha, weight in sorted((float(a), float(w)) for a, w in pairs):
        if merged and alpha - merged[-1][0] <= ALPHA_MERGE_TOL:
            merged[-1][1] += weight
        else:
            merged.append([alpha, weight])
    total = math.fsum(w for _, w in merged)
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise ValueError(f"weights sum to {total}, expected 1 within {WEIGHT_SUM_TOL}")
    atoms = tuple((a, w / total) for a, w in merged)
    return CirculationMeasure(atoms)


def discretize_density(
    density: Callable[[float], float],
    n_cells: int,
    lo: float = -1.0,
    hi: float = 1.0,
) -> CirculationMeasure:
    """Midpoint discretization of a nonnegative density on [lo, hi].

    Cell weights are density(midpoint) * width, normalized to total mass 1;
    zero-weight cells are dropped.
    """
    if n_cells < 1:
        raise ValueError("n_cells must be >= 1")
    if not (-1.0 <= lo < hi <= 1.0):
        raise ValueError("need -1 <= lo < hi <= 1")
    width = (hi - lo) / n_cells
    pairs = []
    for i in range(n_cells):
        mid = lo + (i + 0.5) * width
        val = float(density(mid))
        if val < 0.0:
            raise ValueError(f"density negative at {mid}")
        if val > 0.0:
            pairs.append((mid, val * width))
    if not pairs:
        raise ValueError("density integrates to zero on the interval")
    total = math.fsum(w for _, w in pairs)
    return new_atomic([(a, w / total) for a, w in pairs])


def moment(P: CirculationMeasure, k: int, side: str = "all") -> float:
    """k-th moment of P restricted to a sign interval.

    side 'positive' restricts to alpha in [0, 1], 'negative' to [-1, 0],
    'all' to the whole support.  An atom at alpha = 0 belongs to both sign
    intervals.
    """
    if k < 0:
        raise ValueError("moment order must be >= 0")
    if side == "all":
        sel = [(a, w) for a, w in P.atoms]
    elif side == "positive":
        sel = [(a, w) for a, w in P.atoms if a >= 0.0]
    elif side == "negative":
        sel = [(a, w) for a, w in P.atoms if a <= 0.0]
    else:
        raise ValueError(f"bad side {side!r}")
    return math.fsum(a**k * w for a, w in sel)


def alpha_min(P: CirculationMeasure) -> float:
    """Smallest circulation in supp(P) intersected with [0, 1]."""
    pos = [a for a, _ in P.atoms if a >= 0.0]
    if not pos:
        raise ValueError("measure has no atom in [0, 1]")
    return min(pos)


def _side_atoms(P: CirculationMeasure, side: str) -> list[tuple[float, float, int]]:
    """Atoms of one sign in decreasing |alpha| order, with original indices.

    Within a sign interval the |alpha| values are distinct, so the order is
    unambiguous.  This shared ordering makes the prefix sums of the tail
    scan bit-identical to the corresponding subset sums of the brute force.
    """
    if side == "positive":
        sel = [(a, w, i) for i, (a, w) in enumerate(P.atoms) if a >= 0.0]
    else:
        sel = [(a, w, i) for i, (a, w) in enumerate(P.atoms) if a <= 0.0]
    sel.sort(key=lambda t: -abs(t[0]))
    return sel


def _bruteforce_side(ordered: list[tuple[float, float, int]]) -> tuple[float, tuple[int, ...]]:
    """Exact minimum of 8 pi P(K) / (int_K alpha dP)^2 over all subsets.

    Subset sums are built by doubling concatenation, so the accumulation
    order for any prefix subset matches the sequential prefix sums of the
    tail scan exactly.  Among tying subsets the shortest prefix wins, then
    the lowest bitmask.
    """
    n = len(ordered)
    if n == 0:
        return math.inf, ()
    if n > MAX_BRUTEFORCE_ATOMS:
        raise ValueError(f"brute force limited to {MAX_BRUTEFORCE_ATOMS} atoms per sign")
    p = np.zeros(1)
    s = np.zeros(1)
    for alpha, weight, _ in ordered:
        p = np.concatenate([p, p + weight])
        s = np.concatenate([s, s + alpha * weight])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (EIGHT_PI * p) / (s * s)
    ratio[s == 0.0] = math.inf
    ratio[0] = math.inf
    best = float(ratio.min())
    if math.isinf(best):
        return math.inf, ()
    for j in range(1, n + 1):
        if ratio[(1 << j) - 1] == best:
            return best, tuple(idx for _, _, idx in ordered[:j])
    mask = int(np.argmin(ratio))
    return best, tuple(ordered[i][2] for i in range(n) if mask >> i & 1)


def _tailscan_side(ordered: list[tuple[float, float, int]]) -> tuple[float, tuple[int, ...]]:
    """Minimum of the subset ratio over prefixes of the |alpha|-sorted atoms."""
    best = math.inf
    best_j = 0
    p = 0.0
    s = 0.0
    for j, (alpha, weight, _) in enumerate(ordered, start=1):
        p = p + weight
        s = s + alpha * weight
        if s == 0.0:
            continue
        ratio = (EIGHT_PI * p) / (s * s)
        if ratio < best:
            best = ratio
            best_j = j
    if math.isinf(best):
        return math.inf, ()
    return best, tuple(idx for _, _, idx in ordered[:best_j])


def _combine_sides(
    pos: tuple[float, tuple[int, ...]], neg: tuple[float, tuple[int, ...]]
) -> ExtremalResult:
    # exact ties go to the positive side
    if pos[0] <= neg[0]:
        value, subset, side = pos[0], pos[1], "positive"
    else:
        value, subset, side = neg[0], neg[1], "negative"
    if math.isinf(value):
        return ExtremalResult(math.inf, (), "positive")
    return ExtremalResult(value, tuple(sorted(subset)), side)


def lambda_bar_bruteforce(P: CirculationMeasure) -> ExtremalResult:
    """Extremal coupling by exhaustive subset enumeration per sign."""
    return _combine_sides(
        _bruteforce_side(_side_atoms(P, "positive")),
        _bruteforce_side(_side_atoms(P, "negative")),
    )


def lambda_bar(P: CirculationMeasure) -> ExtremalResult:
    """Extremal coupling by the tail scan, O(n log n).

    Scans only prefixes of the atoms sorted by decreasing |alpha| within
    each sign.  Agrees with ``lambda_bar_bruteforce`` exactly on every
    instance where both run.
    """
    return _combine_sides(
        _tailscan_side(_side_atoms(P, "positive")),
        _tailscan_side(_side_atoms(P, "negative")),
    )


def lambda_bar_residual_vanishing(P: CirculationMeasure) -> float:
    """Closed form 8 pi / (int alpha dP)^2 valid when no mass escapes to
    residual subsets; requires supp(P) in [0, 1] with positive mean."""
    if any(a < 0.0 for a, _ in P.atoms):
        raise ValueError("requires support in [0, 1]")
    m1 = moment(P, 1, "positive")
    if m1 <= 0.0:
        raise ValueError("first moment must be positive")
    return EIGHT_PI / (m1 * m1)


def threshold_maximizer(P: CirculationMeasure, d: float) -> ThresholdSolution:
    """Maximize int phi0 psi dP over 0 <= psi <= 1 with int psi dP = d.

    phi0(alpha) = alpha / int beta dP.  The maximizer is the indicator of
    {phi0 > s_d} plus the fraction c_d on the level set {phi0 = s_d}, where
    s_d = inf{t : P(phi0 > t) <= d}.  Requires supp(P) in [0, 1].
    """
    if any(a < 0.0 for a, _ in P.atoms):
        raise ValueError("requires support in [0, 1]")
    if not 0.0 < d <= 1.0:
        raise ValueError(f"capacity d={d} outside (0, 1]")
    m1 = moment(P, 1, "positive")
    if m1 <= 0.0:
        raise ValueError("first moment must be positive")
    phi = [a / m1 for a, _ in P.atoms]

    # survival P(phi0 > t) exceeds d first at the threshold atom
    s_d = -math.inf
    cum = 0.0
    for j in range(len(P.atoms) - 1, -1, -1):
        cum += P.atoms[j][1]
        if cum > d:
            s_d = phi[j]
            break

    p_above = math.fsum(w for f, (_, w) in zip(phi, P.atoms) if f > s_d)
    p_level = math.fsum(w for f, (_, w) in zip(phi, P.atoms) if f == s_d)
    if p_level > 0.0:
        c_d = (d - p_above) / p_level
        c_d = min(max(c_d, 0.0), 1.0)
    else:
        c_d = 0.0
    psi = tuple(1.0 if f > s_d else (c_d if f == s_d else 0.0) for f in phi)
    return ThresholdSolution(s_d, c_d, psi)


def load_measure(path: str) -> CirculationMeasure:
    """Read a measure from text: one 'alpha weight' pair per line, blank
    lines and '#' comments ignored."""
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}: line {lineno}: expected 'alpha weight', got {raw.strip()!r}")
            try:
                alpha, weight = float(parts[0]), float(parts[1])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-numeric entry in {raw.strip()!r}") from None
            pairs.append((alpha, weight))
    if not pairs:
        raise ValueError(f"{path}: no atoms found")
    try:
        return new_atomic(pairs)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def save_measure(path: str, P: CirculationMeasure) -> None:
    """Write a measure in the text format read by :func:`load_measure`."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# alpha weight\n")
        for alpha, weight in P.atoms:
            fh.write(f"{alpha!r} {weight!r}\n")


def parse_atoms_inline(text: str) -> CirculationMeasure:
    """Parse 'alpha:weight,alpha:weight,...' used for inline configuration."""
    pairs = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            a, w = chunk.split(":")
            pairs.append((float(a), float(w)))
        except ValueError:
            raise ValueError(f"bad atom {chunk!r}, expected alpha:weight") from None
    return new_atomic(pairs)
