"""Pareto dominance, front extraction and hypervolume indicators.

Hypervolume is the measure of the region dominated by a sample set
relative to a reference point: for minimization, the union of the
axis-aligned boxes spanned between each sample and the reference. Both
orientations are supported because loss-space plots measure toward a
worst-case reference while accuracy tables measure from the origin.
"""

from dataclasses import dataclass

import numpy as np

from .fileio import fmt, read_csv, write_csv
from .objectives import TOY_INIT_POINTS, ToyConfig, toy_loss, toy_loss_grid

DIRECTIONS = ("minimize", "maximize")


def _check_direction(direction):
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")


@dataclass(eq=False)
class FrontSample:
    """A loss vector, optionally tagged with the weighting that produced it."""

    losses: np.ndarray
    weighting: np.ndarray = None

    def __post_init__(self):
        self.losses = np.asarray(self.losses, dtype=np.float64)
        if not np.all(np.isfinite(self.losses)):
            raise ValueError("front sample has non-finite losses")
        if self.weighting is not None:
            self.weighting = np.asarray(self.weighting, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class HypervolumeSpec:
    reference: np.ndarray
    direction: str = "minimize"

    def __post_init__(self):
        ref = np.asarray(self.reference, dtype=np.float64)
        if not np.all(np.isfinite(ref)):
            raise ValueError("reference point must be finite")
        _check_direction(self.direction)
        object.__setattr__(self, "reference", ref)


def dominates(a, b, direction="minimize"):
    """True iff ``a`` is at least as good as ``b`` everywhere and differs."""
    _check_direction(direction)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("loss vectors must have equal length")
    if direction == "maximize":
        a, b = -a, -b
    return bool(np.all(a <= b) and np.any(a != b))


def non_dominated_mask(points, direction="minimize"):
    """Boolean mask of the non-dominated rows of an (n, T) array."""
    _check_direction(direction)
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be an (n, T) array")
    if direction == "maximize":
        points = -points
    n = points.shape[0]
    if n == 0:
        return np.zeros(0, dtype=bool)
    if points.shape[1] == 2:
        return _non_dominated_mask_2d(points)
    mask = np.ones(n, dtype=bool)
    for i in range(n):
        if not mask[i]:
            continue
        weaker = np.all(points >= points[i], axis=1) & np.any(points != points[i], axis=1)
        weaker[i] = False
        mask &= ~weaker
    return mask


def _non_dominated_mask_2d(points):
    """Sort-based filter; exact duplicates survive together."""
    uniq, inverse = np.unique(points, axis=0, return_inverse=True)
    # np.unique sorts rows lexicographically: first coordinate, then second
    best = np.minimum.accumulate(uniq[:, 1])
    keep_uniq = np.empty(uniq.shape[0], dtype=bool)
    keep_uniq[0] = True
    keep_uniq[1:] = uniq[1:, 1] < best[:-1]
    return keep_uniq[inverse]


def pareto_filter(samples, direction="minimize"):
    """Non-dominated subset of the samples, input order preserved."""
    if len(samples) == 0:
        return []
    points = np.stack([s.losses for s in samples])
    mask = non_dominated_mask(points, direction)
    return [s for s, keep in zip(samples, mask) if keep]


# ---------------------------------------------------------------------------
# hypervolume
# ---------------------------------------------------------------------------


def _as_minimize_points(samples, spec):
    """Loss matrix flipped to minimize orientation, reference likewise."""
    if len(samples) == 0:
        points = np.zeros((0, spec.reference.size))
    elif isinstance(samples, np.ndarray):
        points = np.asarray(samples, dtype=np.float64)
    else:
        points = np.stack([s.losses for s in samples])
    ref = spec.reference
    if points.shape[1] != ref.size:
        raise ValueError("sample dimension differs from the reference point")
    if spec.direction == "maximize":
        return -points, -ref
    return points, ref


def hypervolume(samples, spec):
    """Exact dominated hypervolume w.r.t. the reference point.

    Supports two objectives (sweep) and three (sweep of 2-D slices).
    Samples that do not strictly dominate the reference contribute
    nothing; an empty contributing set yields 0.
    """
    points, ref = _as_minimize_points(samples, spec)
    points = points[np.all(points < ref, axis=1)]
    if points.shape[0] == 0:
        return 0.0
    points = points[non_dominated_mask(points)]
    if ref.size == 2:
        return _hypervolume_2d(points, ref)
    if ref.size == 3:
        return _hypervolume_3d(points, ref)
    raise ValueError("exact hypervolume supports 2 or 3 objectives; use Monte Carlo")


def _hypervolume_2d(front, ref):
    """Sweep over the front sorted by the first coordinate."""
    order = np.argsort(front[:, 0])
    xs = front[order, 0]
    ys = front[order, 1]
    next_x = np.append(xs[1:], ref[0])
    return float(((next_x - xs) * (ref[1] - ys)).sum())


def _hypervolume_3d(front, ref):
    """Slice along the third coordinate, sweeping 2-D areas."""
    order = np.argsort(front[:, 2], kind="stable")
    front = front[order]
    zs = np.unique(front[:, 2])
    bounds = np.append(zs, ref[2])
    volume = 0.0
    for k, z in enumerate(zs):
        active = front[front[:, 2] <= z, :2]
        active = active[non_dominated_mask(active)]
        volume += (bounds[k + 1] - bounds[k]) * _hypervolume_2d(active, ref[:2])
    return float(volume)


def hypervolume_monte_carlo(samples, spec, num_points=1_000_000, seed=0):
    """Monte-Carlo hypervolume estimate with a standard error.

    Uniform points are drawn from the box spanned by the samples'
    componentwise best corner and the reference, using a counter-based
    generator so the estimate is reproducible under any parallel split.
    """
    points, ref = _as_minimize_points(samples, spec)
    points = points[np.all(points < ref, axis=1)]
    if points.shape[0] == 0:
        return 0.0, 0.0
    points = points[non_dominated_mask(points)]
    lower = points.min(axis=0)
    box = float(np.prod(ref - lower))
    rng = np.random.Generator(np.random.Philox(seed))
    hits = 0
    chunk = 65_536
    remaining = num_points
    while remaining > 0:
        m = min(chunk, remaining)
        u = rng.random((m, ref.size))
        draws = lower + u * (ref - lower)
        covered = np.zeros(m, dtype=bool)
        for p in points:
            covered |= np.all(draws >= p, axis=1)
        hits += int(covered.sum())
        remaining -= m
    frac = hits / num_points
    estimate = box * frac
    stderr = box * np.sqrt(max(frac * (1.0 - frac), 0.0) / num_points)
    return float(estimate), float(stderr)


# ---------------------------------------------------------------------------
# toy-problem oracle front
# ---------------------------------------------------------------------------

ORACLE_DOMAIN = (-12.0, 12.0)
ORACLE_RESOLUTION = 1201


def toy_reference_point(cfg=ToyConfig()):
    """Componentwise worst loss over the toy starting points."""
    inits = np.array([toy_loss(np.array(p), cfg) for p in TOY_INIT_POINTS])
    return inits.max(axis=0)


def oracle_front_toy(cfg=ToyConfig(), grid_resolution=ORACLE_RESOLUTION, domain=ORACLE_DOMAIN):
    """Brute-force front of the toy losses over a dense parameter grid.

    Evaluates the losses on a uniform grid over the square ``domain``
    and keeps the non-dominated image points; serves as ground truth
    for front-recovery checks.
    """
    if grid_resolution < 100:
        raise ValueError("grid_resolution must be >= 100")
    axis = np.linspace(domain[0], domain[1], grid_resolution)
    t1, t2 = np.meshgrid(axis, axis, indexing="ij")
    l1, l2 = toy_loss_grid(t1.ravel(), t2.ravel(), cfg)
    points = np.stack([l1, l2], axis=1)
    mask = non_dominated_mask(points)
    return [FrontSample(losses=p) for p in points[mask]]


def evaluate_subspace(theta_matrix, grid, objective):
    """Map a simplex grid through the ensemble to loss space.

    For each grid weighting ``a`` the objective is evaluated at the
    interpolated parameters ``a @ theta``; returns (weighting, losses)
    pairs in grid order.
    """
    theta = np.asarray(theta_matrix, dtype=np.float64)
    if grid.dim != theta.shape[0]:
        raise ValueError("grid dimension must match the member count")
    samples = []
    for alpha in grid.points:
        losses = objective.loss(alpha @ theta)
        samples.append(FrontSample(losses=np.asarray(losses), weighting=alpha))
    return samples


# ---------------------------------------------------------------------------
# front serialization
# ---------------------------------------------------------------------------


def save_front_csv(path, samples, num_members=None):
    """Write ``alpha_1..alpha_M,loss_1..loss_T`` rows, blank alphas for oracle points."""
    if not samples:
        raise ValueError("refusing to write an empty front")
    num_tasks = samples[0].losses.size
    if num_members is None:
        widths = [s.weighting.size for s in samples if s.weighting is not None]
        num_members = widths[0] if widths else 0
    header = [f"alpha_{m + 1}" for m in range(num_members)]
    header += [f"loss_{t + 1}" for t in range(num_tasks)]
    rows = []
    for s in samples:
        if s.weighting is None:
            alphas = [""] * num_members
        else:
            alphas = [fmt(a) for a in s.weighting]
        rows.append(alphas + [fmt(v) for v in s.losses])
    write_csv(path, header, rows)


def load_front_csv(path):
    header, rows = read_csv(path)
    num_members = sum(1 for h in header if h.startswith("alpha_"))
    num_tasks = sum(1 for h in header if h.startswith("loss_"))
    if num_tasks == 0 or num_members + num_tasks != len(header):
        raise ValueError(f"{path}: unexpected front header {header}")
    samples = []
    for row in rows:
        alphas = row[:num_members]
        losses = np.array([float(v) for v in row[num_members:]])
        if any(a != "" for a in alphas):
            weighting = np.array([float(a) for a in alphas])
        else:
            weighting = None
        samples.append(FrontSample(losses=losses, weighting=weighting))
    return samples
