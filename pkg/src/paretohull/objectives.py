"""Differentiable vector objectives.

Two objectives are provided:

* a closed-form two-parameter, two-task toy problem whose losses are
  piecewise-smooth bump/bowl composites gated by tanh switches, with
  exact gradients from the scalar tape in :mod:`paretohull.tape`;
* a shared-bottom MLP with one softmax head per task on a synthetic
  two-task dataset, with hand-coded layer backprop for throughput.

The toy values are computed by two independent transcriptions of the
same formulas (scalar tape and vectorized numpy); the test suite holds
them against each other.
"""

from dataclasses import dataclass

import numpy as np

from .fileio import fmt, read_csv, write_csv
from .tape import Tape, maximum

# the five starting points used by the toy experiments, and the flat
# clamp that keeps the log terms total
TOY_INIT_POINTS = (
    (-8.5, 7.5),
    (0.0, 0.0),
    (9.0, 9.0),
    (-7.5, -0.5),
    (9.0, -1.0),
)
TOY_CLAMP = 5e-6


@dataclass(frozen=True)
class ToyConfig:
    """Scale applied to the first task loss; 1.0 keeps equal scales."""

    scale_c: float = 1.0

    def __post_init__(self):
        if not (self.scale_c > 0.0):
            raise ValueError("scale_c must be positive")


def toy_loss(theta, cfg=ToyConfig()):
    """Vector loss (l1, l2) of the toy problem at theta = (t1, t2)."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (2,):
        raise ValueError("toy objective takes a parameter vector of length 2")
    l1, l2 = toy_loss_grid(theta[0], theta[1], cfg)
    return np.array([float(l1), float(l2)])


def toy_loss_grid(t1, t2, cfg=ToyConfig()):
    """Vectorized toy losses over arrays of coordinates.

    Accepts scalars or equally shaped arrays; used for dense oracle
    grids where per-point tape evaluation would be too slow.
    """
    t1 = np.asarray(t1, dtype=np.float64)
    t2 = np.asarray(t2, dtype=np.float64)
    f1 = np.log(np.maximum(np.abs(0.5 * (-t1 - 7.0) - np.tanh(-t2)), TOY_CLAMP)) + 6.0
    f2 = np.log(np.maximum(np.abs(0.5 * (-t1 + 3.0) - np.tanh(-t2) + 2.0), TOY_CLAMP)) + 6.0
    g1 = ((-t1 + 7.0) ** 2 + 0.1 * (-t2 - 8.0) ** 2) / 10.0 - 20.0
    g2 = ((-t1 - 7.0) ** 2 + 0.1 * (-t2 - 8.0) ** 2) / 10.0 - 20.0
    c1 = np.maximum(np.tanh(0.5 * t2), 0.0)
    c2 = np.maximum(np.tanh(-0.5 * t2), 0.0)
    l1 = cfg.scale_c * (c1 * f1 + c2 * g1)
    l2 = c1 * f2 + c2 * g2
    return l1, l2


def _toy_tape(t1v, t2v, scale_c):
    """Build the toy expression on a fresh tape; returns (tape, t1, t2, l1, l2)."""
    tape = Tape()
    t1 = tape.var(t1v)
    t2 = tape.var(t2v)
    neg_t1 = -t1
    tanh_neg_t2 = (-t2).tanh()
    f1 = maximum(abs(0.5 * (neg_t1 - 7.0) - tanh_neg_t2), TOY_CLAMP).log() + 6.0
    f2 = maximum(abs(0.5 * (neg_t1 + 3.0) - tanh_neg_t2 + 2.0), TOY_CLAMP).log() + 6.0
    a1 = neg_t1 + 7.0
    a2 = neg_t1 - 7.0
    b = -t2 - 8.0
    b_sq = (b * b) * 0.1
    g1 = (a1 * a1 + b_sq) / 10.0 - 20.0
    g2 = (a2 * a2 + b_sq) / 10.0 - 20.0
    half_t2 = 0.5 * t2
    # constant-first max so the gate contributes no gradient at the tie
    c1 = maximum(0.0, half_t2.tanh())
    c2 = maximum(0.0, (-half_t2).tanh())
    l1 = (c1 * f1 + c2 * g1) * scale_c
    l2 = c1 * f2 + c2 * g2
    return tape, t1, t2, l1, l2


def toy_loss_and_grad(theta, cfg=ToyConfig()):
    """Losses plus exact per-task gradients, via one tape and two sweeps."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (2,):
        raise ValueError("toy objective takes a parameter vector of length 2")
    tape, t1, t2, l1, l2 = _toy_tape(theta[0], theta[1], cfg.scale_c)
    grads = np.empty((2, 2))
    grads[0] = tape.gradient(l1, (t1, t2))
    grads[1] = tape.gradient(l2, (t1, t2))
    return np.array([l1.value, l2.value]), grads


def toy_grad(theta, cfg=ToyConfig()):
    """Per-task gradient matrix (2 x 2) of the toy losses."""
    return toy_loss_and_grad(theta, cfg)[1]


class ToyObjective:
    """Toy problem behind the trainer's objective protocol."""

    def __init__(self, config=ToyConfig()):
        self.config = config
        self.task_count = 2

    def advance(self, step, rng):
        """No per-step state; the toy has no batches."""

    def loss(self, theta):
        return toy_loss(theta, self.config)

    def eval(self, theta):
        return toy_loss_and_grad(theta, self.config)


# ---------------------------------------------------------------------------
# synthetic dataset
# ---------------------------------------------------------------------------


@dataclass
class SyntheticDataset:
    """Two-task binary dataset with controllable inter-task conflict.

    Inputs are uniform in [-1, 1]^2; task t labels the half-plane of a
    direction d_t, where d_1 = (1, 0) and d_2 is rotated by
    ``conflict_angle``. At angle 0 the tasks agree everywhere; at pi/2
    they are independent.
    """

    inputs: np.ndarray
    labels: np.ndarray
    conflict_angle: float
    noise_std: float
    seed: int

    def __post_init__(self):
        if self.inputs.ndim != 2 or self.labels.ndim != 2:
            raise ValueError("inputs and labels must be 2-D")
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError("every input needs a label row for all tasks")
        if not (0.0 <= self.conflict_angle <= np.pi / 2):
            raise ValueError("conflict_angle must lie in [0, pi/2]")

    @property
    def sample_count(self):
        return self.inputs.shape[0]

    @property
    def task_count(self):
        return self.labels.shape[1]


def make_synthetic_dataset(conflict_angle, sample_count, noise_std=0.0, seed=0):
    """Deterministically generate a :class:`SyntheticDataset`."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    if noise_std < 0.0:
        raise ValueError("noise_std must be >= 0")
    rng = np.random.default_rng(seed)
    inputs = rng.uniform(-1.0, 1.0, size=(sample_count, 2))
    directions = np.array(
        [[1.0, 0.0], [np.cos(conflict_angle), np.sin(conflict_angle)]]
    )
    # noise drawn unconditionally to keep the stream layout fixed
    noise = rng.standard_normal((sample_count, 2)) * noise_std
    margins = inputs @ directions.T + noise
    labels = (margins > 0.0).astype(np.int64)
    return SyntheticDataset(
        inputs=inputs,
        labels=labels,
        conflict_angle=float(conflict_angle),
        noise_std=float(noise_std),
        seed=int(seed),
    )


def save_dataset_csv(path, dataset):
    header = ["x1", "x2"] + [f"y{t + 1}" for t in range(dataset.task_count)]
    rows = []
    for x, y in zip(dataset.inputs, dataset.labels):
        rows.append([fmt(x[0]), fmt(x[1])] + [str(int(v)) for v in y])
    write_csv(path, header, rows)


def load_dataset_csv(path, conflict_angle=0.0, noise_std=0.0, seed=0):
    """Read back a dataset CSV; generation metadata is caller-supplied."""
    header, rows = read_csv(path)
    if header[:2] != ["x1", "x2"]:
        raise ValueError(f"{path}: unexpected dataset header {header}")
    num_tasks = len(header) - 2
    inputs = np.array([[float(r[0]), float(r[1])] for r in rows])
    labels = np.array([[int(r[2 + t]) for t in range(num_tasks)] for r in rows])
    return SyntheticDataset(
        inputs=inputs,
        labels=labels,
        conflict_angle=conflict_angle,
        noise_std=noise_std,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# shared-bottom MLP with manual backprop
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MlpSpec:
    """Shared-bottom architecture: ReLU encoder plus one linear head per task."""

    input_dim: int = 2
    hidden_dims: tuple = (16,)
    task_count: int = 2
    head_dim: int = 2

    def __post_init__(self):
        if len(self.hidden_dims) < 1:
            raise ValueError("need at least one hidden layer")
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))

    def layer_dims(self):
        """Encoder (in, out) pairs followed by one head pair per task."""
        dims = [self.input_dim] + list(self.hidden_dims)
        encoder = list(zip(dims[:-1], dims[1:]))
        heads = [(self.hidden_dims[-1], self.head_dim)] * self.task_count
        return encoder, heads

    @property
    def param_count(self):
        encoder, heads = self.layer_dims()
        return sum(o * i + o for i, o in encoder + heads)


def _unpack(theta, spec):
    """Split a flat parameter vector into (W, b) views per layer."""
    encoder, heads = spec.layer_dims()
    offset = 0
    layers = []
    for i, o in encoder + heads:
        w = theta[offset : offset + o * i].reshape(o, i)
        offset += o * i
        b = theta[offset : offset + o]
        offset += o
        layers.append((w, b))
    if offset != theta.size:
        raise ValueError(f"parameter vector length {theta.size}, expected {spec.param_count}")
    n_enc = len(encoder)
    return layers[:n_enc], layers[n_enc:]


def init_mlp_params(spec, rng):
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) per layer, flat-packed."""
    encoder, heads = spec.layer_dims()
    chunks = []
    for i, o in encoder + heads:
        bound = 1.0 / np.sqrt(i)
        chunks.append(rng.uniform(-bound, bound, size=o * i))
        chunks.append(rng.uniform(-bound, bound, size=o))
    return np.concatenate(chunks)


def _forward(theta, spec, inputs):
    enc_layers, head_layers = _unpack(theta, spec)
    h = inputs
    activations = [h]
    for w, b in enc_layers:
        z = h @ w.T + b
        h = np.maximum(z, 0.0)
        activations.append(h)
    logits = [h @ w.T + b for w, b in head_layers]
    return activations, logits


def mlp_probabilities(theta, spec, inputs):
    """Per-task softmax outputs, one (batch, head_dim) array per task."""
    _, logits = _forward(np.asarray(theta, dtype=np.float64), spec, inputs)
    probs = []
    for z in logits:
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        probs.append(e / e.sum(axis=1, keepdims=True))
    return probs


def mlp_loss(theta, spec, inputs, labels):
    """Per-task mean cross-entropy without gradients."""
    probs = mlp_probabilities(theta, spec, inputs)
    n = inputs.shape[0]
    rows = np.arange(n)
    return np.array(
        [-np.log(p[rows, labels[:, t]]).mean() for t, p in enumerate(probs)]
    )


def mlp_loss_and_grad(theta, spec, inputs, labels):
    """Per-task mean cross-entropy and exact per-task gradients.

    Head parameters receive gradient only from their own task; the
    shared encoder receives each task's gradient in its own row of the
    returned (T, N) matrix.
    """
    theta = np.asarray(theta, dtype=np.float64)
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.shape[0] < 1:
        raise ValueError("batch must be non-empty")
    if theta.size != spec.param_count:
        raise ValueError(f"parameter vector length {theta.size}, expected {spec.param_count}")
    enc_layers, head_layers = _unpack(theta, spec)
    n = inputs.shape[0]
    rows = np.arange(n)

    h = inputs
    activations = [h]
    for w, b in enc_layers:
        z = h @ w.T + b
        h = np.maximum(z, 0.0)
        activations.append(h)

    losses = np.empty(spec.task_count)
    grads = np.zeros((spec.task_count, theta.size))
    enc_size = sum(w.size + b.size for w, b in enc_layers)
    head_size = head_layers[0][0].size + head_layers[0][1].size

    for t, (w_head, b_head) in enumerate(head_layers):
        z = h @ w_head.T + b_head
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        probs = e / e.sum(axis=1, keepdims=True)
        losses[t] = -np.log(probs[rows, labels[:, t]]).mean()

        dlogits = probs.copy()
        dlogits[rows, labels[:, t]] -= 1.0
        dlogits /= n
        gt = grads[t]
        off = enc_size + t * head_size
        gt[off : off + w_head.size] = (dlogits.T @ h).ravel()
        gt[off + w_head.size : off + head_size] = dlogits.sum(axis=0)

        dh = dlogits @ w_head
        off = enc_size
        for (w, b), h_in, h_out in zip(
            reversed(enc_layers), reversed(activations[:-1]), reversed(activations[1:])
        ):
            dz = dh * (h_out > 0.0)
            off -= w.size + b.size
            gt[off : off + w.size] = (dz.T @ h_in).ravel()
            gt[off + w.size : off + w.size + b.size] = dz.sum(axis=0)
            dh = dz @ w
    return losses, grads


def mlp_accuracies(theta, spec, dataset):
    """Per-task classification accuracy over the full dataset."""
    _, logits = _forward(np.asarray(theta, dtype=np.float64), spec, dataset.inputs)
    return np.array(
        [
            float((z.argmax(axis=1) == dataset.labels[:, t]).mean())
            for t, z in enumerate(logits)
        ]
    )


class MlpTaskObjective:
    """Shared-bottom MLP on a synthetic dataset, behind the trainer protocol.

    ``eval`` differentiates on the current minibatch (re-drawn by
    ``advance`` each step when ``batch_size`` is set); ``loss`` and
    ``accuracies`` always use the full dataset.
    """

    def __init__(self, spec, dataset, batch_size=None):
        if dataset.task_count != spec.task_count:
            raise ValueError("dataset and architecture disagree on the task count")
        self.spec = spec
        self.dataset = dataset
        self.batch_size = batch_size
        self.task_count = spec.task_count
        self._batch = (dataset.inputs, dataset.labels)

    def advance(self, step, rng):
        if self.batch_size is None:
            return
        idx = rng.integers(0, self.dataset.sample_count, size=self.batch_size)
        self._batch = (self.dataset.inputs[idx], self.dataset.labels[idx])

    def eval(self, theta):
        inputs, labels = self._batch
        return mlp_loss_and_grad(theta, self.spec, inputs, labels)

    def loss(self, theta):
        return mlp_loss(theta, self.spec, self.dataset.inputs, self.dataset.labels)

    def accuracies(self, theta):
        return mlp_accuracies(theta, self.spec, self.dataset)

    def init_members(self, num_members, rng):
        """Independently initialized member matrix (num_members x N)."""
        return np.stack([init_mlp_params(self.spec, rng) for _ in range(num_members)])
