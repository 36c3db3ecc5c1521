"""Simplex geometry: weighting vectors, Dirichlet sampling, evaluation grids.

A weighting is a point on the probability simplex, used both to
interpolate ensemble members in weight space and to scalarize the vector
loss. Weightings are plain float64 arrays validated by
:func:`check_weighting`.
"""

import math
from dataclasses import dataclass

import numpy as np

SIMPLEX_ATOL = 1e-9


def check_weighting(alpha, dim=None):
    """Validate a simplex point; returns it as a float64 array.

    Raises ValueError if any component is negative, the components do
    not sum to 1 within ``SIMPLEX_ATOL``, or the dimension differs from
    ``dim`` when given.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.ndim != 1 or alpha.size < 1:
        raise ValueError("weighting must be a 1-D vector")
    if dim is not None and alpha.size != dim:
        raise ValueError(f"weighting has dimension {alpha.size}, expected {dim}")
    if not np.all(np.isfinite(alpha)):
        raise ValueError("weighting has non-finite components")
    if np.any(alpha < 0.0):
        raise ValueError("weighting has negative components")
    total = float(alpha.sum())
    if abs(total - 1.0) > SIMPLEX_ATOL:
        raise ValueError(f"weighting components sum to {total}, not 1")
    return alpha


@dataclass(frozen=True)
class DirichletParams:
    """Concentration parameters of a Dirichlet distribution."""

    concentration: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.concentration, dtype=np.float64)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("concentration must be a vector of length >= 2")
        if not np.all(np.isfinite(p)) or np.any(p <= 0.0):
            raise ValueError("concentration parameters must be strictly positive")
        object.__setattr__(self, "concentration", p)

    @property
    def dim(self):
        return self.concentration.size


def uniform_dirichlet(num_tasks):
    """Dir(1, ..., 1): the uniform distribution on the simplex."""
    return DirichletParams(np.ones(num_tasks))


def _standard_gamma(rng, shape):
    """One Gamma(shape, 1) variate by Marsaglia-Tsang rejection.

    Valid for every shape > 0; shapes below 1 use the boost
    Gamma(shape) = Gamma(shape + 1) * U^(1/shape).
    """
    if shape < 1.0:
        u = rng.random()
        # u == 0 would collapse the boost; probability 2^-53 but guard anyway
        while u <= 0.0:
            u = rng.random()
        return _standard_gamma(rng, shape + 1.0) * u ** (1.0 / shape)
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = rng.standard_normal()
        t = 1.0 + c * x
        if t <= 0.0:
            continue
        v = t * t * t
        u = rng.random()
        if u < 1.0 - 0.0331 * x * x * x * x:
            return d * v
        if u <= 0.0 or math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return d * v


def sample_dirichlet(params, rng):
    """Draw one weighting from Dirichlet(params).

    Draws one Gamma(p_t, 1) variate per coordinate and normalizes by the
    sum; deterministic given the generator state.
    """
    p = params.concentration
    draws = np.empty(p.size)
    while True:
        for t in range(p.size):
            draws[t] = _standard_gamma(rng, p[t])
        total = draws.sum()
        if total > 0.0:
            break
    draws /= total
    # cap accumulated rounding so the unit-sum invariant holds exactly enough
    draws /= draws.sum()
    return draws


@dataclass(frozen=True)
class SimplexGrid:
    """Equidistant barycentric grid over the simplex.

    ``points`` has one weighting per row; the row count is
    C(resolution + T - 2, T - 1) and rows are sorted lexicographically
    descending on the first coordinate, then the second, and so on.
    """

    resolution: int
    points: np.ndarray

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]


def make_grid(num_tasks, resolution):
    """Barycentric grid with step 1/(resolution-1) per coordinate.

    For two tasks this is ``resolution`` evenly spaced points on the
    segment including both vertices; the count generalizes to
    C(resolution + T - 2, T - 1).
    """
    if num_tasks < 2:
        raise ValueError("num_tasks must be >= 2")
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    steps = resolution - 1
    rows = []

    def emit(prefix, remaining, slots):
        if slots == 1:
            rows.append(prefix + [remaining])
            return
        for k in range(remaining, -1, -1):
            emit(prefix + [k], remaining - k, slots - 1)

    emit([], steps, num_tasks)
    points = np.array(rows, dtype=np.float64) / steps
    points /= points.sum(axis=1, keepdims=True)
    return SimplexGrid(resolution=resolution, points=points)
