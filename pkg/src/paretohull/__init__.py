"""Weight-space ensembles whose convex hull maps to a continuous Pareto front."""

__version__ = "0.1.0"

from .balancing import LossHistory, gradient_balance, loss_balance
from .ensemble import (
    effective_loss_weighting,
    identity_task_weights,
    interpolate,
    load_parameter_matrix,
    save_parameter_matrix,
)
from .metrics import (
    FrontSample,
    HypervolumeSpec,
    dominates,
    evaluate_subspace,
    hypervolume,
    hypervolume_monte_carlo,
    oracle_front_toy,
    pareto_filter,
    toy_reference_point,
)
from .objectives import (
    MlpSpec,
    MlpTaskObjective,
    SyntheticDataset,
    ToyConfig,
    ToyObjective,
    init_mlp_params,
    make_synthetic_dataset,
    mlp_loss_and_grad,
    toy_grad,
    toy_loss,
    toy_loss_and_grad,
)
from .simplex import (
    DirichletParams,
    SimplexGrid,
    check_weighting,
    make_grid,
    sample_dirichlet,
    uniform_dirichlet,
)
from .trainer import (
    AdamState,
    BaselineResult,
    MultiForwardGraph,
    NonFiniteLossError,
    PmlResult,
    TrainerConfig,
    TrajectoryRecord,
    adam_step,
    build_multiforward_graph,
    regularization,
    run_baseline,
    run_pml,
    total_loss,
)
