"""Ensemble training in the convex hull of member parameters.

Each step samples ``window`` weightings from a Dirichlet distribution,
evaluates the interpolated model at each, scalarizes the vector losses
with the same weightings, adds the ordering regularizer over the
per-task multi-forward graphs, and takes one optimizer step on all
members jointly. Single-model baselines (linear scalarization, two-task
minimum-norm descent, gradient surgery) share the objective protocol.
"""

from dataclasses import dataclass, field

import numpy as np

from . import balancing
from .fileio import fmt, write_csv
from .simplex import DirichletParams, sample_dirichlet, uniform_dirichlet

BASELINE_METHODS = ("LS", "MGDA2", "PCGrad")


class NonFiniteLossError(RuntimeError):
    """Raised when a training step produces a non-finite loss."""

    def __init__(self, step, losses):
        super().__init__(f"non-finite loss at step {step}: {losses}")
        self.step = step
        self.losses = losses


@dataclass
class TrainerConfig:
    iterations: int = 50_000
    learning_rate: float = 2e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    window: int = 1
    reg_strength: float = 0.0
    dirichlet: DirichletParams = field(default_factory=lambda: uniform_dirichlet(2))
    balancing: str = "none"
    loss_window: int = 10
    lr_scale_by_members: bool = False
    optimizer: str = "adam"
    seed: int = 0
    log_every: int = 1000

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not (self.learning_rate > 0.0):
            raise ValueError("learning_rate must be positive")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.reg_strength < 0.0:
            raise ValueError("regularization strength must be >= 0")
        if self.balancing not in ("none", "loss", "gradient"):
            raise ValueError(f"unknown balancing scheme {self.balancing!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")


# ---------------------------------------------------------------------------
# multi-forward graphs and the ordering regularizer
# ---------------------------------------------------------------------------


@dataclass
class MultiForwardGraph:
    """Per-task directed graphs over the weightings sampled in one step.

    ``edges[t]`` holds (i, j) node-index pairs with the task-t weight of
    node i below that of node j, so the loss ordering wanted along edge
    (i, j) is L_t(a_j) < L_t(a_i).
    """

    nodes: np.ndarray
    edges: list


def build_multiforward_graph(weightings, mode="lex"):
    """Build the per-task ordering graphs for one batch of weightings.

    ``full`` connects every strictly ordered pair; ``lex`` sorts the
    nodes by the task coordinate (ties broken lexicographically on the
    whole weighting) and keeps one outgoing edge per node, giving
    exactly W - 1 edges per task.
    """
    nodes = np.asarray(weightings, dtype=np.float64)
    if nodes.ndim != 2 or nodes.shape[0] < 2:
        raise ValueError("need at least two weightings to build a graph")
    num_nodes, num_tasks = nodes.shape
    edges = []
    if mode == "full":
        for t in range(num_tasks):
            col = nodes[:, t]
            i_idx, j_idx = np.nonzero(col[:, None] < col[None, :])
            edges.append(np.stack([i_idx, j_idx], axis=1))
    elif mode == "lex":
        for t in range(num_tasks):
            keys = tuple(nodes[:, j] for j in range(num_tasks - 1, -1, -1))
            order = np.lexsort(keys + (nodes[:, t],))
            edges.append(np.stack([order[:-1], order[1:]], axis=1))
    else:
        raise ValueError(f"unknown graph mode {mode!r}")
    return MultiForwardGraph(nodes=nodes, edges=edges)


def _reg_terms(graph, losses_per_node):
    """Regularizer value and its gradient w.r.t. the node losses."""
    losses = np.asarray(losses_per_node, dtype=np.float64)
    if losses.shape[0] != graph.nodes.shape[0]:
        raise ValueError("losses do not align with the graph nodes")
    if losses.shape[1] != graph.nodes.shape[1]:
        raise ValueError("loss dimension does not match the task count")
    value = 0.0
    coeffs = np.zeros_like(losses)
    for t, edge_list in enumerate(graph.edges):
        if len(edge_list) == 0:
            continue
        i_idx = edge_list[:, 0]
        j_idx = edge_list[:, 1]
        gaps = np.maximum(losses[j_idx, t] - losses[i_idx, t], 0.0)
        weights = np.exp(gaps)
        total = weights.sum()
        value += float(np.log(total / len(edge_list)))
        active = weights * (gaps > 0.0) / total
        np.add.at(coeffs[:, t], j_idx, active)
        np.add.at(coeffs[:, t], i_idx, -active)
    return value, coeffs


def regularization(graph, losses_per_node):
    """Log-mean-exp penalty on violated loss orderings; 0 iff none."""
    return _reg_terms(graph, losses_per_node)[0]


def total_loss(weightings, losses_per_node, reg_strength, graph=None):
    """Sum of per-node scalarizations plus the weighted regularizer."""
    alphas = np.asarray(weightings, dtype=np.float64)
    losses = np.asarray(losses_per_node, dtype=np.float64)
    if alphas.shape != losses.shape:
        raise ValueError("weightings and losses must align node by node")
    value = float((alphas * losses).sum())
    if graph is not None and reg_strength != 0.0:
        value += reg_strength * regularization(graph, losses)
    return value


# ---------------------------------------------------------------------------
# optimizers
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size):
        return cls(m=np.zeros(size), v=np.zeros(size))


def adam_step(state, params, grad, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Standard bias-corrected update; returns the new parameters."""
    state.t += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grad
    state.v = beta2 * state.v + (1.0 - beta2) * (grad * grad)
    m_hat = state.m / (1.0 - beta1 ** state.t)
    v_hat = state.v / (1.0 - beta2 ** state.t)
    return params - lr * m_hat / (np.sqrt(v_hat) + eps)


# ---------------------------------------------------------------------------
# trajectory logging
# ---------------------------------------------------------------------------


@dataclass
class TrajectoryRecord:
    """Logged training state: per-member losses plus step totals."""

    iterations: list = field(default_factory=list)
    member_losses: list = field(default_factory=list)
    totals: list = field(default_factory=list)
    regs: list = field(default_factory=list)

    def append(self, iteration, member_losses, total, reg):
        if self.iterations and iteration <= self.iterations[-1]:
            raise ValueError("iteration indices must be strictly increasing")
        self.iterations.append(int(iteration))
        self.member_losses.append(np.asarray(member_losses, dtype=np.float64))
        self.totals.append(float(total))
        self.regs.append(float(reg))

    def to_csv(self, path):
        num_tasks = self.member_losses[0].shape[1] if self.member_losses else 0
        header = ["iter", "member"] + [f"loss_{t + 1}" for t in range(num_tasks)]
        header += ["total", "reg"]
        rows = []
        for it, losses, total, reg in zip(
            self.iterations, self.member_losses, self.totals, self.regs
        ):
            for member, loss in enumerate(losses):
                rows.append(
                    [str(it), str(member)]
                    + [fmt(v) for v in loss]
                    + [fmt(total), fmt(reg)]
                )
        write_csv(path, header, rows)


# ---------------------------------------------------------------------------
# ensemble training
# ---------------------------------------------------------------------------


@dataclass
class StepTerms:
    """One step's value, regularizer, member-matrix gradient and raw losses."""

    total: float
    reg: float
    member_grad: np.ndarray
    node_losses: np.ndarray


def pml_step_terms(objective, theta_matrix, weightings, reg_strength=0.0, loss_norm=None):
    """Total loss and its exact gradient w.r.t. the member matrix.

    The weightings are fixed inputs here (sampling happens outside), so
    the returned gradient is the true derivative of the returned total,
    suitable for finite-difference verification. ``loss_norm`` holds the
    per-task loss-balancing denominators, if any.
    """
    alphas = np.asarray(weightings, dtype=np.float64)
    num_nodes = alphas.shape[0]
    losses = np.empty((num_nodes, objective.task_count))
    grads = []
    for w in range(num_nodes):
        theta = alphas[w] @ theta_matrix
        losses[w], g = objective.eval(theta)
        grads.append(g)
    if not np.all(np.isfinite(losses)):
        raise NonFiniteLossError(step=None, losses=losses)
    return _terms_from_evals(alphas, losses, grads, reg_strength, loss_norm)


def _gradient_balanced_grad(alphas, grads, reg_strength, coeffs):
    """Member gradient with per-task unit-norm directions.

    The task-t gradients of all interpolated models are aggregated,
    normalized once, and re-composed with the usual interpolation and
    scalarization weights; the regularizer contribution keeps its true
    gradient.
    """
    num_nodes, num_tasks = alphas.shape
    agg = np.zeros((num_tasks, grads[0].shape[1]))
    for g in grads:
        agg += g
    unit = balancing.gradient_balance(agg)
    member_grad = np.zeros((alphas.shape[1], unit.shape[1]))
    for w in range(num_nodes):
        direction = alphas[w] @ unit
        if reg_strength != 0.0 and coeffs is not None:
            direction = direction + reg_strength * (coeffs[w] @ grads[w])
        member_grad += np.outer(alphas[w], direction)
    return member_grad


@dataclass
class PmlResult:
    theta: np.ndarray
    trajectory: TrajectoryRecord


def run_pml(objective, theta_matrix, config):
    """Train the ensemble; returns the final members and the trajectory.

    Per step: sample ``window`` weightings, evaluate the interpolated
    models, scalarize (optionally loss-balanced), regularize orderings,
    and apply one optimizer step to all members jointly through the
    interpolation (member m accumulates alpha_m times each node's
    parameter gradient).
    """
    theta = np.array(theta_matrix, dtype=np.float64)
    if theta.ndim != 2 or theta.shape[0] < 2:
        raise ValueError("theta_matrix must be (members x parameters) with M >= 2")
    num_members = theta.shape[0]
    num_tasks = objective.task_count
    if config.dirichlet.dim != num_members:
        raise ValueError("Dirichlet dimension must match the member count")

    rng = np.random.default_rng(config.seed)
    lr = config.learning_rate * (num_members if config.lr_scale_by_members else 1)
    state = AdamState.zeros(theta.size)
    scale = (
        balancing.ScaleTracker(num_tasks) if config.balancing == "loss" else None
    )
    trajectory = TrajectoryRecord()

    def log_state(iteration, total, reg):
        member_losses = np.stack([objective.loss(row) for row in theta])
        trajectory.append(iteration, member_losses, total, reg)

    last_total = float("nan")
    last_reg = float("nan")
    for step in range(config.iterations):
        objective.advance(step, rng)
        alphas = np.empty((config.window, num_members))
        for w in range(config.window):
            alphas[w] = sample_dirichlet(config.dirichlet, rng)

        if config.balancing == "gradient":
            losses = np.empty((config.window, num_tasks))
            grads = []
            for w in range(config.window):
                losses[w], g = objective.eval(alphas[w] @ theta)
                grads.append(g)
            if not np.all(np.isfinite(losses)):
                raise NonFiniteLossError(step, losses)
            reg = 0.0
            coeffs = None
            if config.window >= 2:
                graph = build_multiforward_graph(alphas, mode="lex")
                reg, coeffs = _reg_terms(graph, losses)
            total = float((alphas * losses).sum()) + config.reg_strength * reg
            member_grad = _gradient_balanced_grad(
                alphas, grads, config.reg_strength, coeffs
            )
        else:
            if scale is not None:
                # evaluate once, fold the step's mean losses into the
                # scale estimate, then normalize losses and gradients
                probe = np.empty((config.window, num_tasks))
                probe_grads = []
                for w in range(config.window):
                    probe[w], g = objective.eval(alphas[w] @ theta)
                    probe_grads.append(g)
                if not np.all(np.isfinite(probe)):
                    raise NonFiniteLossError(step, probe)
                scale.update(probe.mean(axis=0))
                terms = _terms_from_evals(
                    alphas, probe, probe_grads, config.reg_strength, scale.normalizers()
                )
            else:
                try:
                    terms = pml_step_terms(
                        objective, theta, alphas, config.reg_strength, None
                    )
                except NonFiniteLossError as err:
                    raise NonFiniteLossError(step, err.losses) from None
            total, reg, member_grad = terms.total, terms.reg, terms.member_grad

        if step % config.log_every == 0:
            log_state(step, total, reg)
        last_total, last_reg = total, reg

        flat_grad = member_grad.ravel()
        if config.optimizer == "adam":
            flat = adam_step(
                state,
                theta.ravel(),
                flat_grad,
                lr,
                config.adam_beta1,
                config.adam_beta2,
                config.adam_eps,
            )
        else:
            flat = theta.ravel() - lr * flat_grad
        theta = flat.reshape(num_members, -1)

    if config.iterations > 0:
        log_state(config.iterations, last_total, last_reg)
    return PmlResult(theta=theta, trajectory=trajectory)


def _terms_from_evals(alphas, losses, grads, reg_strength, loss_norm):
    """Step terms from already-evaluated nodes (loss-balancing path)."""
    balanced = losses if loss_norm is None else losses / loss_norm
    reg = 0.0
    coeffs = None
    if alphas.shape[0] >= 2:
        graph = build_multiforward_graph(alphas, mode="lex")
        reg, coeffs = _reg_terms(graph, balanced)
    total = float((alphas * balanced).sum()) + reg_strength * reg
    scal = alphas if coeffs is None else alphas + reg_strength * coeffs
    if loss_norm is not None:
        scal = scal / loss_norm
    member_grad = np.zeros((alphas.shape[1], grads[0].shape[1]))
    for w in range(alphas.shape[0]):
        member_grad += np.outer(alphas[w], scal[w] @ grads[w])
    return StepTerms(total=total, reg=reg, member_grad=member_grad, node_losses=losses)


# ---------------------------------------------------------------------------
# single-model baselines
# ---------------------------------------------------------------------------


def combine_ls(grads):
    """Gradient of the average loss."""
    return np.asarray(grads).mean(axis=0)


def combine_mgda2(grads):
    """Minimum-norm point in the convex hull of two task gradients.

    Closed form for T = 2: minimize ||gamma g1 + (1 - gamma) g2||^2
    over gamma in [0, 1]. Returns (combined, gamma).
    """
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape[0] != 2:
        raise ValueError("closed-form minimum-norm descent supports exactly 2 tasks")
    g1, g2 = grads
    diff = g1 - g2
    denom = float(diff @ diff)
    if denom < 1e-24:
        gamma = 0.5
    else:
        gamma = float(np.clip((g2 - g1) @ g2 / denom, 0.0, 1.0))
    return gamma * g1 + (1.0 - gamma) * g2, gamma


def combine_pcgrad(grads, rng):
    """Project conflicting task gradients onto each other's normal plane.

    Each task's gradient is projected against the other tasks' original
    gradients in random order whenever the inner product is negative;
    the combined update is the mean of the surgered gradients.
    """
    grads = np.asarray(grads, dtype=np.float64)
    num_tasks = grads.shape[0]
    out = grads.copy()
    for t in range(num_tasks):
        others = np.array([j for j in range(num_tasks) if j != t])
        rng.shuffle(others)
        for j in others:
            gj = grads[j]
            dot = float(out[t] @ gj)
            if dot < 0.0:
                sq = float(gj @ gj)
                if sq > 0.0:
                    out[t] = out[t] - (dot / sq) * gj
    return out.mean(axis=0)


@dataclass
class BaselineResult:
    theta: np.ndarray
    trajectory: TrajectoryRecord
    final_losses: np.ndarray
    final_grad_norm: float
    final_loss_drift: float


def run_baseline(objective, theta0, method, config):
    """Train a single model with the given multi-task gradient rule.

    The final gradient norm reports the combined direction's magnitude
    at the returned parameters (the minimum-norm value for MGDA2), and
    the loss drift compares the mean loss across the last update.
    """
    if method not in BASELINE_METHODS:
        raise ValueError(f"unknown baseline method {method!r}")
    theta = np.array(theta0, dtype=np.float64)
    rng = np.random.default_rng(config.seed)
    state = AdamState.zeros(theta.size)
    trajectory = TrajectoryRecord()
    prev_mean = float("nan")

    for step in range(config.iterations):
        objective.advance(step, rng)
        losses, grads = objective.eval(theta)
        if not np.all(np.isfinite(losses)):
            raise NonFiniteLossError(step, losses)
        if method == "LS":
            combined = combine_ls(grads)
        elif method == "MGDA2":
            combined, _ = combine_mgda2(grads)
        else:
            combined = combine_pcgrad(grads, rng)
        if step % config.log_every == 0:
            trajectory.append(step, losses[None, :], float(losses.mean()), 0.0)
        prev_mean = float(losses.mean())
        if config.optimizer == "adam":
            theta = adam_step(
                state,
                theta,
                combined,
                config.learning_rate,
                config.adam_beta1,
                config.adam_beta2,
                config.adam_eps,
            )
        else:
            theta = theta - config.learning_rate * combined

    losses, grads = objective.eval(theta)
    if method == "LS":
        combined = combine_ls(grads)
    elif method == "MGDA2":
        combined, _ = combine_mgda2(grads)
    else:
        combined = combine_pcgrad(grads, rng)
    if config.iterations > 0:
        trajectory.append(config.iterations, losses[None, :], float(losses.mean()), 0.0)
    drift = abs(float(losses.mean()) - prev_mean) if config.iterations > 0 else 0.0
    return BaselineResult(
        theta=theta,
        trajectory=trajectory,
        final_losses=losses,
        final_grad_norm=float(np.linalg.norm(combined)),
        final_loss_drift=drift,
    )
