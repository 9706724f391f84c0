from pathlib import Path

from wasserstein_lab import __version__
from wasserstein_lab.config import config
from wasserstein_lab.run_manager import RunManager, RunStatus


def test_create_run_under_data_path():
    manager = RunManager()
    run_id = manager.create_run("solve")
    run = manager.get_run(run_id)
    assert run.status is RunStatus.ACTIVE
    assert run.outputs_path == Path(config.run_data_path) / run_id / "outputs"
    assert run.outputs_path.is_dir()


def test_create_run_with_explicit_directory(tmp_path):
    manager = RunManager()
    run_id = manager.create_run("specnorm", tmp_path / "out")
    assert manager.get_run_outputs_path(run_id) == tmp_path / "out"


def test_outputs_and_status(tmp_path):
    manager = RunManager()
    run_id = manager.create_run("bench-eps", tmp_path)
    manager.add_output(run_id, tmp_path / "a.csv")
    manager.add_output(run_id, tmp_path / "a.csv")
    assert manager.get_run(run_id).outputs == [str(tmp_path / "a.csv")]
    manager.finish_run(run_id, RunStatus.FAILED)
    assert manager.get_run(run_id).status is RunStatus.FAILED
    assert manager.get_run("missing") is None


def test_manifest(tmp_path):
    manager = RunManager()
    run_id = manager.create_run("critic-toy", tmp_path)
    manifest = manager.build_manifest(run_id, {"steps": 10}, 7, {"log_domain": False})
    assert manifest.run_id == run_id
    assert manifest.subcommand == "critic-toy"
    assert manifest.seed == 7
    assert manifest.version == __version__
    assert manifest.elapsed_seconds >= 0
    assert manifest.flags == {"log_domain": False}
    assert manifest.schema_version == 1
