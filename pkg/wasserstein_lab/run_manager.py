import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any

from wasserstein_lab import __version__
from wasserstein_lab.config import config
from wasserstein_lab.models import RunManifest


class RunStatus(str, Enum):
    ACTIVE = "active"
    FINISHED = "finished"
    FAILED = "failed"


@dataclass
class RunData:
    """Represents one CLI invocation and the files it produced."""
    run_id: str
    subcommand: str
    created_at: datetime
    status: RunStatus
    outputs_path: Path
    outputs: list[str] = field(default_factory=list)


class RunManager:
    """Assigns run ids and output directories and builds report manifests."""

    def __init__(self):
        self.runs: dict[str, RunData] = {}

    def create_run(self, subcommand: str, out_dir: str | Path | None = None) -> str:
        """Create a run; outputs go to `out_dir` if given, else under config.run_data_path."""
        run_id = str(uuid.uuid4())
        outputs_path = Path(out_dir) if out_dir else config.get_run_outputs_path(run_id)
        outputs_path.mkdir(parents=True, exist_ok=True)
        self.runs[run_id] = RunData(
            run_id=run_id,
            subcommand=subcommand,
            created_at=datetime.now(timezone.utc),
            status=RunStatus.ACTIVE,
            outputs_path=outputs_path,
        )
        return run_id

    def get_run(self, run_id: str) -> RunData | None:
        return self.runs.get(run_id)

    def get_run_outputs_path(self, run_id: str) -> Path:
        return self.runs[run_id].outputs_path

    def add_output(self, run_id: str, path: str | Path) -> None:
        run = self.get_run(run_id)
        if run and str(path) not in run.outputs:
            run.outputs.append(str(path))

    def finish_run(self, run_id: str, status: RunStatus = RunStatus.FINISHED) -> None:
        if run_id in self.runs:
            self.runs[run_id].status = status

    def build_manifest(self, run_id: str, configuration: dict[str, Any], seed: int,
                       flags: dict[str, Any] | None = None) -> RunManifest:
        """Self-description embedded in every report of the run."""
        run = self.runs[run_id]
        now = datetime.now(timezone.utc)
        return RunManifest(
            run_id=run_id,
            subcommand=run.subcommand,
            configuration=configuration,
            seed=seed,
            wall_clock=run.created_at.isoformat(),
            elapsed_seconds=(now - run.created_at).total_seconds(),
            version=__version__,
            flags=flags or {},
        )


# Global run manager instance
run_manager = RunManager()
