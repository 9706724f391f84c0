from enum import Enum


class CostKind(str, Enum):
    L1 = "l1"
    L2 = "l2"
    SQUARED_L2 = "sql2"
    COSINE = "cosine"
    SSIM = "ssim"


class SolverName(str, Enum):
    PDHG = "pdhg"
    SINKHORN = "sinkhorn"
    SINKHORN_CENTER = "sinkhorn-center"
    FISTA = "fista"
    FISTA_CENTER = "fista-center"

    @property
    def centered(self) -> bool:
        return self in (SolverName.SINKHORN_CENTER, SolverName.FISTA_CENTER)


class CriticMode(str, Enum):
    GP = "gp"
    SN_LAYER = "sn-layer"
    SN_PROJECT = "sn-project"


class Activation(str, Enum):
    LEAKY_RELU = "leaky_relu"
    RELU = "relu"
    IDENTITY = "identity"


class DatasetKind(str, Enum):
    CSV = "csv"
    IDX = "idx"
    CIFAR10 = "cifar10"
    SYNTHETIC_BLOBS = "synthetic-blobs"


SCHEMA_VERSION = 1

# Numerical guards
WEIGHT_SUM_TOL = 1e-12
UNDERFLOW_FLOOR = 1e-300
DISTANCE_FLOOR = 1e-12
LEAKY_SLOPE = 0.2
MATERIALIZE_LIMIT = 4096
ORACLE_MAX_ATOMS = 8

# SSIM reference configuration (inputs on a [0, 1] dynamic range)
SSIM_DYNAMIC_RANGE = 1.0
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5

# IDX magic numbers (unsigned byte payload)
IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

# CIFAR-10 binary records: 1 label byte + 3 planes of 32x32
CIFAR_SIDE = 32
CIFAR_CHANNELS = 3
CIFAR_RECORD_BYTES = 1 + CIFAR_SIDE * CIFAR_SIDE * CIFAR_CHANNELS

# Fixed CSV headers
HISTORY_HEADER = ["iteration", "residual", "objective"]
BENCH_EPS_HEADER = ["solver", "epsilon", "distance", "iterations", "converged"]
BENCH_BATCH_HEADER = ["size", "trial", "distance", "iterations"]
SPECNORM_HEADER = ["layers", "channels", "kernel", "input_size", "stride", "padding",
                   "true_norm", "reshaped_norm", "ratio"]
CRITIC_GRID_HEADER = ["x", "y", "value"]
CRITIC_SWEEP_HEADER = ["mode", "lam", "lr", "estimate", "ratio"]
LOSS_HEADER = ["epoch", "loss"]
