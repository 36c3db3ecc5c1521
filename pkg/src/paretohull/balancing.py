"""Loss and gradient balancing schemes.

Loss balancing divides each task loss by the magnitude of its windowed
running mean, restoring scale invariance when tasks live on different
scales. Gradient balancing rescales each task gradient to unit L2 norm
before combination.
"""

from collections import deque

import numpy as np

BALANCE_EPS = 1e-12


class LossHistory:
    """Per-task ring buffer of recent loss values.

    Single-writer state owned by one trainer; update once per step with
    the current (per-task mean) losses before normalizing.
    """

    def __init__(self, num_tasks, window):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = int(window)
        self.num_tasks = int(num_tasks)
        self._buffers = [deque(maxlen=self.window) for _ in range(self.num_tasks)]
        self.step = 0

    def update(self, losses):
        losses = np.asarray(losses, dtype=np.float64)
        if losses.shape != (self.num_tasks,):
            raise ValueError("loss vector does not match the task count")
        if not np.all(np.isfinite(losses)):
            raise ValueError("loss history refuses non-finite values")
        for buf, value in zip(self._buffers, losses):
            buf.append(float(value))
        self.step += 1

    def means(self):
        """Windowed mean per task over the values seen so far."""
        if self.step == 0:
            raise ValueError("loss history is empty")
        return np.array([sum(buf) / len(buf) for buf in self._buffers])


def normalizers(hist):
    """Positive per-task denominators |mean| + eps.

    The magnitude guards the toy losses, which cross zero on their way
    to the optimum; a signed denominator would flip the gradient there.
    """
    return np.abs(hist.means()) + BALANCE_EPS


def loss_balance(raw, hist):
    """Normalize each task loss by its windowed running-mean magnitude.

    The history must already contain the current step's value, so a
    constant loss stream normalizes to exactly 1 from the first step on.
    """
    raw = np.asarray(raw, dtype=np.float64)
    return raw / normalizers(hist)


class ScaleTracker:
    """Running per-task peak of loss magnitude.

    The trainer normalizes with this instead of the windowed mean: the
    toy losses cross zero inside local valleys, where a windowed mean
    collapses and the resulting amplification pins members to the valley
    floor. The peak can only grow, so the correction is monotone and
    settles at each task's true scale.
    """

    def __init__(self, num_tasks):
        self.peak = np.zeros(int(num_tasks))

    def update(self, losses):
        losses = np.asarray(losses, dtype=np.float64)
        if losses.shape != self.peak.shape:
            raise ValueError("loss vector does not match the task count")
        if not np.all(np.isfinite(losses)):
            raise ValueError("scale tracker refuses non-finite values")
        np.maximum(self.peak, np.abs(losses), out=self.peak)

    def normalizers(self):
        return self.peak + BALANCE_EPS


def gradient_balance(grads):
    """Rescale each task gradient row to unit L2 norm.

    Rows with norm below 1e-12 pass through unchanged: a vanished task
    gradient signals Pareto stationarity for that task, not an error.
    """
    grads = np.asarray(grads, dtype=np.float64)
    out = grads.copy()
    for row in out:
        norm = float(np.sqrt(row @ row))
        if norm >= BALANCE_EPS:
            row /= norm
    return out
