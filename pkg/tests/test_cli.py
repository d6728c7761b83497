import json
import shutil
import subprocess
import sys

import pytest

from fundlens.assets import mini_dataset_dir


def run_cli(*args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "fundlens.cli", *args],
        cwd=cwd, capture_output=True, text=True,
    )


@pytest.fixture
def mini(tmp_path):
    dest = tmp_path / "mini"
    shutil.copytree(mini_dataset_dir(), dest)
    return dest


class TestCliBasics:
    def test_help_lists_subcommands(self, tmp_path):
        result = run_cli("--help", cwd=tmp_path)
        assert result.returncode == 0
        for cmd in ("ingest", "fetch-images", "extract", "annotate", "train",
                    "importance", "pdp", "report"):
            assert cmd in result.stdout

    def test_missing_config_fails_cleanly(self, tmp_path):
        result = run_cli("ingest", "--config", "nope.json", cwd=tmp_path)
        assert result.returncode == 1
        assert "not found" in result.stderr

    def test_ingest_writes_reports(self, mini):
        result = run_cli("ingest", "--config", "config.json", cwd=mini)
        assert result.returncode == 0, result.stderr
        assert (mini / "out" / "records.jsonl").is_file()
        assert (mini / "out" / "rejects.jsonl").is_file()
        assert "20 records, 0 rejects" in result.stdout

    def test_fetch_images_local_cache(self, mini):
        result = run_cli("fetch-images", "--config", "config.json", cwd=mini)
        assert result.returncode == 0, result.stderr
        manifest = json.loads((mini / "cache" / "images_manifest.json").read_text())
        assert len(manifest) == 19  # one listing has no image
        for rel in manifest.values():
            assert (mini / "cache" / rel).is_file()
            assert rel.startswith("images/")

    def test_annotate_uses_cache_layout(self, mini):
        result = run_cli("annotate", "--config", "config.json", cwd=mini)
        assert result.returncode == 0, result.stderr
        files = list((mini / "cache" / "annotations" / "fixture").glob("*.json"))
        assert len(files) == 19


@pytest.mark.slow
class TestCliPipeline:
    def test_extract_then_train_offline(self, mini):
        for cmd in ("extract", "train"):
            result = run_cli(cmd, "--config", "config.json", cwd=mini)
            assert result.returncode == 0, f"{cmd}: {result.stderr}"
        out = mini / "out"
        assert (out / "features.csv").is_file()
        manifest = json.loads((out / "features.manifest.json").read_text())
        tags = {spec["tag"] for spec in manifest["columns"].values()}
        assert tags == {"baseline", "visual_count", "text", "image_detail"}
        grid = (out / "eval_grid.csv").read_text().strip().splitlines()
        assert len(grid) == 1 + 5 * 4  # header + 5 sets x 4 learners
        models = list((out / "models").glob("set*_*.json"))
        assert len(models) == 20

    def test_single_set_single_model_flags(self, mini):
        for cmd in ("extract",):
            assert run_cli(cmd, "--config", "config.json", cwd=mini).returncode == 0
        result = run_cli(
            "train", "--config", "config.json", "--set", "3", "--model", "gbt",
            cwd=mini,
        )
        assert result.returncode == 0, result.stderr
        assert (mini / "out" / "models" / "set3_gbt.json").is_file()
        grid = (mini / "out" / "eval_grid.csv").read_text().strip().splitlines()
        assert len(grid) == 2

    def test_warm_cache_extract_is_idempotent(self, mini):
        assert run_cli("extract", "--config", "config.json", cwd=mini).returncode == 0
        first = (mini / "out" / "features.csv").read_bytes()
        assert run_cli("extract", "--config", "config.json", cwd=mini).returncode == 0
        assert (mini / "out" / "features.csv").read_bytes() == first
