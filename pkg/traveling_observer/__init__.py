"""
traveling_observer
"""
from .errors import (
    ConfigError,
    FactorizationError,
    FormatError,
    ShapeError,
    TomError,
    UnknownTaskError,
    UnknownVariableError
)

from .rng import Rng
from .params import ParamTensor, count_parameters
from .layers import Affine, Dropout, ForwardContext, Relu, dropout_forward
from .losses import bce_loss, mse_loss, sigmoid, squared_hinge_loss
from .optim import AdamState, adam_step
from .gaussian import cholesky_sample, rbf_kernel
from .gradcheck import GradCheckReport, grad_check
from .checkpoint import load_checkpoint, save_checkpoint

from .tasks import Split, Task, VariableId
from .embeddings import VariableEmbeddingTable, make_oracle_ves
from .film import FilmLayer, film_modulate
from .blocks import ResidualBlock
from .tom import TomModel, encode_variable, tom_backward, tom_forward
from .deep_residual import DrModel, dr_forward

from .subsets import sample_variable_subset
from .synthetic import (
    GpUniverseConfig,
    HypersphereUniverseConfig,
    generate_gp_universe,
    generate_hypersphere_universe
)
from .loaders import (
    convert_cifar_batches,
    load_cifar_gray,
    load_daily_temperature,
    load_tabular_task,
    read_task,
    write_task
)

from .config import RunConfig, TrainConfig, resolve_config
from .schedules import PlateauSchedule, plateau_schedule, simple_moving_average
from .metrics import (
    angular_order_correlation,
    distance_correlation,
    embedding_recovery,
    metric_suite,
)
from .results import RunResult, TaskHistory
from .training import (
    ModelBank,
    batch_for,
    build_micro_problem,
    evaluate,
    finetune,
    train
)

__all__ = (
    "AdamState",
    "Affine",
    "adam_step",
    "angular_order_correlation",
    "batch_for",
    "bce_loss",
    "build_micro_problem",
    "cholesky_sample",
    "ConfigError",
    "convert_cifar_batches",
    "count_parameters",
    "distance_correlation",
    "dr_forward",
    "DrModel",
    "Dropout",
    "dropout_forward",
    "embedding_recovery",
    "encode_variable",
    "evaluate",
    "FactorizationError",
    "film_modulate",
    "FilmLayer",
    "finetune",
    "FormatError",
    "ForwardContext",
    "generate_gp_universe",
    "generate_hypersphere_universe",
    "GpUniverseConfig",
    "grad_check",
    "GradCheckReport",
    "HypersphereUniverseConfig",
    "load_checkpoint",
    "load_cifar_gray",
    "load_daily_temperature",
    "load_tabular_task",
    "make_oracle_ves",
    "metric_suite",
    "ModelBank",
    "mse_loss",
    "ParamTensor",
    "plateau_schedule",
    "PlateauSchedule",
    "rbf_kernel",
    "read_task",
    "Relu",
    "ResidualBlock",
    "resolve_config",
    "Rng",
    "RunConfig",
    "RunResult",
    "sample_variable_subset",
    "save_checkpoint",
    "ShapeError",
    "sigmoid",
    "simple_moving_average",
    "Split",
    "squared_hinge_loss",
    "Task",
    "TaskHistory",
    "tom_backward",
    "tom_forward",
    "TomError",
    "TomModel",
    "train",
    "TrainConfig",
    "UnknownTaskError",
    "UnknownVariableError",
    "VariableEmbeddingTable",
    "VariableId",
    "write_task",
)
