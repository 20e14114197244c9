"""Benchmark harness for off-policy learning in contextual bandits whose
action space is factored into discrete features and split into existing and
new actions."""
from .config import ExperimentConfig, load_config
from .data import LoggedDataset
from .dataset_io import (
    RealDatasetSpec,
    SemiSyntheticEnv,
    build_semi_synth_env,
    generate_fixture,
    load_real,
    read_logged_csv,
    write_logged_csv,
)
from .errors import (
    CapacityError,
    ConfigurationError,
    EstimatorPreconditionError,
    NumericError,
    ParseError,
    UnsupportedActionError,
)
from .estimators import (
    GammaProjection,
    GradientEstimate,
    gamma_matrix,
    grad_dr,
    grad_ips,
    grad_pona,
    grad_pseudoinverse,
    value_vector,
)
from .features import (
    LOCAL,
    MARGINAL,
    ActionPartition,
    ActionSpace,
    FeatureScheme,
    encode,
    enumerate_actions,
    indicator_table,
)
from .linalg import pinv
from .metrics import MetricsReport, evaluate
from .policy import (
    ArgmaxPolicy,
    LoggingPolicy,
    PerActionSoftmaxPolicy,
    SoftmaxFeaturePolicy,
    UniformPolicy,
    load_policy,
    save_policy,
)
from .qmodel import ACTION_FEATURE, ACTION_ID, QModel, QModelPolicy, fit_qmodel
from .runner import run_experiment, run_sweep_rho
from .synthetic import (
    EnvOracle,
    RewardModel,
    SynthConfig,
    build_env,
    build_partition,
)
from .trainer import (
    EstimatorSpec,
    KappaTuneResult,
    TrainConfig,
    TrainResult,
    ope_value,
    train,
    tune_kappa,
    write_trace_csv,
)

__version__ = "0.1.0"
