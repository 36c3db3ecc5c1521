import numpy as np
import pytest


def central_difference(func, x, h=1e-6):
    """Gradient of a scalar function by central differences."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        grad[i] = (func(x + step) - func(x - step)) / (2.0 * h)
    return grad


def brute_force_front_mask(points, direction="minimize"):
    """Quadratic-time dominance filter used as the test oracle."""
    from paretohull.metrics import dominates

    n = points.shape[0]
    mask = np.ones(n, dtype=bool)
    for i in range(n):
        for j in range(n):
            if i != j and dominates(points[j], points[i], direction):
                mask[i] = False
                break
    return mask


def hypervolume_inclusion_exclusion(points, ref):
    """Exact dominated volume by inclusion-exclusion; minimize orientation.

    Exponential in the point count, so only usable for tiny fronts; the
    boxes span from each point to the reference and intersections are
    boxes of componentwise maxima.
    """
    from itertools import combinations

    points = [p for p in points if np.all(p < ref)]
    total = 0.0
    for k in range(1, len(points) + 1):
        for subset in combinations(points, k):
            corner = np.max(np.stack(subset), axis=0)
            total += (-1.0) ** (k + 1) * float(np.prod(ref - corner))
    return total


class QuadraticObjective:
    """T independent quadratic bowls over a shared parameter vector."""

    def __init__(self, centers):
        self.centers = np.asarray(centers, dtype=np.float64)
        self.task_count = self.centers.shape[0]

    def advance(self, step, rng):
        pass

    def loss(self, theta):
        return np.array([float(((theta - c) ** 2).sum()) for c in self.centers])

    def eval(self, theta):
        losses = self.loss(theta)
        grads = np.stack([2.0 * (theta - c) for c in self.centers])
        return losses, grads


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
