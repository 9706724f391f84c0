from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

from wasserstein_lab.config import config
from wasserstein_lab.constants import (
    SCHEMA_VERSION,
    WEIGHT_SUM_TOL,
    CostKind,
    DatasetKind,
    SolverName,
)


def _frozen_array(value, ndim: int, name: str) -> np.ndarray:
    """Copy `value` into a read-only float array of the given rank."""
    arr = np.array(value, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must have {ndim} dimension(s), got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must not be empty")
    arr.setflags(write=False)
    return arr


class _ArrayModel(BaseModel):
    """Immutable value object holding numpy arrays."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class DiscreteMeasure(_ArrayModel):
    """
    Probability vector over the atoms of a batch.

    Attributes:
    - weights: nonnegative masses summing to one.
    """
    weights: np.ndarray

    @field_validator("weights", mode="before")
    @classmethod
    def _coerce_weights(cls, v):
        arr = _frozen_array(v, 1, "weights")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("weights must be finite and nonnegative")
        total = float(arr.sum())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1, got {total!r}")
        return arr

    @field_serializer("weights")
    def _dump_weights(self, v: np.ndarray) -> list[float]:
        return v.tolist()

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])


class SampleBatch(_ArrayModel):
    """
    A batch of samples, one per row.

    Attributes:
    - data: n x d feature matrix.
    - image_shape: optional (height, width, channels) factoring d.
    - channels_first: pixels stored plane by plane (channel-major) instead of interleaved.
    """
    data: np.ndarray
    image_shape: tuple[int, int, int] | None = None
    channels_first: bool = False

    @field_validator("data", mode="before")
    @classmethod
    def _coerce_data(cls, v):
        arr = _frozen_array(v, 2, "data")
        if not np.all(np.isfinite(arr)):
            raise ValueError("data must be finite")
        return arr

    @model_validator(mode="after")
    def _check_image_shape(self) -> SampleBatch:
        if self.image_shape is not None:
            h, w, c = self.image_shape
            if min(h, w, c) < 1 or h * w * c != self.dim:
                raise ValueError(f"image_shape {self.image_shape} does not factor d={self.dim}")
        return self

    @field_serializer("data")
    def _dump_data(self, v: np.ndarray) -> list[list[float]]:
        return v.tolist()

    @property
    def size(self) -> int:
        return int(self.data.shape[0])

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])

    def images(self) -> np.ndarray:
        """Return the rows as an (n, channels, height, width) stack."""
        if self.image_shape is None:
            raise ValueError("batch carries no image_shape")
        h, w, c = self.image_shape
        if self.channels_first:
            return self.data.reshape(self.size, c, h, w)
        return self.data.reshape(self.size, h, w, c).transpose(0, 3, 1, 2)

    def take(self, rows) -> SampleBatch:
        return SampleBatch(data=self.data[np.asarray(rows)], image_shape=self.image_shape,
                           channels_first=self.channels_first)


class CostMatrix(_ArrayModel):
    """Ground cost C_ij = c(x_i, y_j)."""
    values: np.ndarray
    kind: CostKind | None = None

    @field_validator("values", mode="before")
    @classmethod
    def _coerce_values(cls, v):
        arr = _frozen_array(v, 2, "values")
        if not np.all(np.isfinite(arr)):
            raise ValueError("cost entries must be finite")
        if np.any(arr < 0):
            raise ValueError("cost entries must be nonnegative")
        return arr

    @field_serializer("values")
    def _dump_values(self, v: np.ndarray) -> list[list[float]]:
        return v.tolist()

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]


class TransportPlan(_ArrayModel):
    """Coupling T between two discrete measures."""
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _coerce_values(cls, v):
        arr = _frozen_array(v, 2, "values")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("plan entries must be finite and nonnegative")
        return arr

    @field_serializer("values")
    def _dump_values(self, v: np.ndarray) -> list[list[float]]:
        return v.tolist()

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]

    def row_sums(self) -> np.ndarray:
        return self.values.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.values.sum(axis=0)


class DualPotentials(_ArrayModel):
    """Kantorovich potentials (alpha on rows, beta on columns)."""
    alpha: np.ndarray
    beta: np.ndarray

    @field_validator("alpha", "beta", mode="before")
    @classmethod
    def _coerce(cls, v):
        arr = _frozen_array(v, 1, "potential")
        if not np.all(np.isfinite(arr)):
            raise ValueError("potentials must be finite")
        return arr

    @field_serializer("alpha", "beta")
    def _dump(self, v: np.ndarray) -> list[float]:
        return v.tolist()


class SolverConfig(BaseModel):
    """Parameters shared by every solver."""
    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(0.05, ge=0.0, description="Regularization weight")
    max_iter: int = Field(10000, ge=1, description="Maximum iterations")
    tol: float = Field(1e-9, gt=0.0, description="Marginal-residual threshold")
    inner_iter: int = Field(1, ge=1, description="Inner iterations of the centered variants")
    tau: float = Field(1.0, gt=0.0, description="PDHG primal step")
    log_domain: bool = Field(False, description="Run entropic updates on log-scalings")
    fista_restart: bool = Field(True, description="Adaptive momentum restart in FISTA")
    literal_center_update: bool = Field(False, description="Drop the center from the FISTA-Center plan update")

    @classmethod
    def from_settings(cls, **overrides) -> SolverConfig:
        values = dict(
            epsilon=config.default_epsilon,
            max_iter=config.default_max_iter,
            tol=config.default_tol,
            inner_iter=config.default_inner_iter,
            tau=config.default_tau,
            fista_restart=config.fista_restart,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class HistoryEntry(BaseModel):
    model_config = ConfigDict(frozen=True)
    iteration: int
    residual: float
    objective: float


class SolveReport(BaseModel):
    """
    Outcome of a single solve.

    Attributes:
    - distance: sharp transport cost <T, C>.
    - regularized_objective: objective of the regularized problem actually solved.
    - iterations: iterations performed (outer iterations for centered solvers).
    - marginal_residual: max-norm marginal violation of the returned plan.
    - converged: whether the stopping rule was met before the iteration cap.
    - dual_objective: dual value for solvers that iterate on potentials.
    - history: (iteration, residual, objective) samples.
    """
    model_config = ConfigDict(frozen=True)

    solver: SolverName
    epsilon: float
    distance: float
    regularized_objective: float
    iterations: int
    marginal_residual: float
    converged: bool
    dual_objective: float | None = None
    history: list[HistoryEntry] = Field(default_factory=list)
    notes: list[str] = Field(default_factory=list)

    @field_validator("history")
    @classmethod
    def _monotone_history(cls, v: list[HistoryEntry]) -> list[HistoryEntry]:
        its = [h.iteration for h in v]
        if any(b < a for a, b in zip(its, its[1:])):
            raise ValueError("history iterations must be non-decreasing")
        return v


class Certificate(BaseModel):
    """Primal-dual optimality evidence for a plan and its potentials."""
    model_config = ConfigDict(frozen=True)

    primal_value: float
    dual_value: float
    gap: float
    max_dual_violation: float
    max_marginal_residual: float

    def dual_feasible(self, tol: float = 0.0) -> bool:
        return self.max_dual_violation <= tol


class DivergenceReport(BaseModel):
    """Debiased combination 2 W(X, Y) - W(X, X) - W(Y, Y)."""
    model_config = ConfigDict(frozen=True)

    value: float
    w_xy: float
    w_xx: float
    w_yy: float
    use_regularized: bool = True
    solver_reports: list[SolveReport]


class TrainConfig(BaseModel):
    """Hyperparameters of full-batch generator training."""
    model_config = ConfigDict(frozen=True)

    epochs: int = Field(100, ge=1)
    batch: int = Field(1000, ge=1)
    solver: SolverName = SolverName.SINKHORN
    solver_config: SolverConfig = Field(default_factory=SolverConfig)
    outer_iter: int = Field(20, ge=0)
    cost: CostKind = CostKind.SQUARED_L2
    hidden: int = Field(500, ge=1)
    z_dim: int = Field(default_factory=lambda: config.generator_z_dim, ge=1)
    lr: float = Field(1e-4, gt=0.0)
    beta1: float = Field(0.0, ge=0.0, lt=1.0)
    beta2: float = Field(0.9, ge=0.0, lt=1.0)
    eps_hat: float = Field(1e-8, gt=0.0)
    fixed_z: bool = False
    seed: int = 0
    log_every: int = Field(50, ge=1)


class DatasetSource(BaseModel):
    """Where a SampleBatch comes from: a file or seeded synthetic blobs."""
    model_config = ConfigDict(frozen=True)

    kind: DatasetKind
    path: str | None = None
    centers: list[list[float]] = Field(default_factory=list)
    scale: float = 1.0
    n_per: int = 1
    seed: int = 0
    stream: tuple[int, ...] = ()

    @model_validator(mode="after")
    def _check(self) -> DatasetSource:
        if self.kind is DatasetKind.SYNTHETIC_BLOBS:
            if not self.centers or self.n_per < 1:
                raise ValueError("synthetic blobs need at least one center and n_per >= 1")
            if self.scale <= 0:
                raise ValueError("scale must be positive")
        elif not self.path:
            raise ValueError(f"{self.kind.value} source requires a path")
        return self


class RunManifest(BaseModel):
    """Self-description embedded in every report."""
    model_config = ConfigDict(frozen=True)

    schema_version: int = SCHEMA_VERSION
    run_id: str
    subcommand: str
    configuration: dict
    seed: int
    wall_clock: str
    elapsed_seconds: float = 0.0
    version: str
    flags: dict = Field(default_factory=dict)


class CriticStep(BaseModel):
    """One sample of critic training progress."""
    model_config = ConfigDict(frozen=True)

    step: int
    estimate: float
    penalty: float = 0.0
