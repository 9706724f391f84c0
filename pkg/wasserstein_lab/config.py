from pathlib import Path
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Config(BaseSettings):
    """Configuration class for wasserstein-lab using PydanticSettings."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    # Solver defaults
    default_epsilon: float = Field(default=0.05, description="Regularization weight for entropic and quadratic solvers")
    default_max_iter: int = Field(default=10000, description="Maximum solver iterations")
    default_tol: float = Field(default=1e-9, description="Marginal-residual threshold")
    default_inner_iter: int = Field(default=1, description="Inner iterations of the centered solvers")
    default_tau: float = Field(default=1.0, description="PDHG primal step")
    default_outer_iter: int = Field(default=200, description="Outer (center) iterations of the centered solvers")
    fista_restart: bool = Field(default=True, description="Adaptive momentum restart in FISTA")

    # Optimizer defaults (WGAN-GP setting)
    adam_lr: float = Field(default=1e-4, description="Adam learning rate")
    adam_beta1: float = Field(default=0.0, description="Adam first-moment decay")
    adam_beta2: float = Field(default=0.9, description="Adam second-moment decay")
    adam_eps: float = Field(default=1e-8, description="Adam denominator stabilizer")

    # Critic defaults
    power_iterations: int = Field(default=1, description="Power iterations per spectral-normalization step")
    gp_lambda: float = Field(default=10.0, description="Gradient penalty weight")
    gp_points: int = Field(default=64, description="Interpolates drawn per gradient penalty evaluation")
    critic_hidden: int = Field(default=10, description="Hidden units per critic layer")
    critic_depth: int = Field(default=4, description="Hidden layers of the critic")

    # Generator defaults
    generator_hidden: int = Field(default=500, description="Hidden units of the toy generator")
    generator_z_dim: int = Field(default=2, description="Latent dimension of the toy generator")
    train_batch: int = Field(default=1000, description="Full-batch size for generator training")
    train_epochs: int = Field(default=100, description="Generator training epochs")

    # Data
    data_path: str = Field(default="./data", description="Path to dataset directory")
    max_dataset_size_mb: int = Field(default=512, description="Maximum dataset file size in MB")
    allowed_dataset_types: list[str] = Field(
        default=["csv", "txt", "idx", "ubyte", "bin"],
        description="List of allowed dataset file extensions"
    )
    pixel_scale: float = Field(default=255.0, description="Divisor mapping raw pixel bytes to [0, 1]")

    # Runs
    run_data_path: str = Field(default_factory=lambda: str(Path.home() / "wasserstein-lab-data" / "runs"), description="Path to run output directory")
    bench_workers: int = Field(default=4, description="Concurrent benchmark trials")
    seed: int = Field(default=0, description="Default seed for all random streams")

    def get_data_path(self) -> Path:
        """Get dataset path as Path object."""
        return Path(self.data_path)

    def get_run_data_path(self) -> Path:
        """Get run data path as Path object."""
        path = Path(self.run_data_path)
        path.mkdir(parents=True, exist_ok=True)
        return path

    def get_run_outputs_path(self, run_id: str) -> Path:
        """Get outputs path for a specific run."""
        return self.get_run_data_path() / run_id / "outputs"


# Global config instance
config = Config()
