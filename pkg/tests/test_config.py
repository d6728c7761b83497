import json

import pytest

from fundlens.config import load_config
from fundlens.errors import ConfigError


def write_config(tmp_path, obj):
    p = tmp_path / "config.json"
    p.write_text(json.dumps(obj))
    return p


MINIMAL = {
    "input": {"path": "projects.jsonl", "format": "jsonl"},
    "annotation": {"providers": [], "fixture_path": None},
}


class TestLoadConfig:
    def test_defaults_fill_in(self, tmp_path):
        cfg = load_config(write_config(tmp_path, MINIMAL))
        assert cfg.models.train_fraction == 0.8
        assert cfg.models.cv_folds == 10
        assert cfg.extraction.slic_k == 100
        assert cfg.seed == 0

    def test_unknown_top_level_key_rejected(self, tmp_path):
        bad = dict(MINIMAL, typo_key=1)
        with pytest.raises(ConfigError, match="typo_key"):
            load_config(write_config(tmp_path, bad))

    def test_unknown_nested_key_rejected(self, tmp_path):
        bad = dict(MINIMAL, models={"train_fraciton": 0.8})
        with pytest.raises(ConfigError, match="train_fraciton"):
            load_config(write_config(tmp_path, bad))

    def test_invalid_format_rejected(self, tmp_path):
        bad = dict(MINIMAL, input={"path": "x", "format": "parquet"})
        with pytest.raises(ConfigError, match="format"):
            load_config(write_config(tmp_path, bad))

    def test_fixture_provider_requires_path(self, tmp_path):
        bad = dict(MINIMAL, annotation={"providers": ["fixture"]})
        with pytest.raises(ConfigError, match="fixture_path"):
            load_config(write_config(tmp_path, bad))

    def test_bad_variable_set_rejected(self, tmp_path):
        bad = dict(MINIMAL, models={"sets": [1, 6]})
        with pytest.raises(ConfigError, match="sets"):
            load_config(write_config(tmp_path, bad))

    def test_paths_resolve_against_config_dir(self, tmp_path):
        cfg = load_config(write_config(tmp_path, MINIMAL))
        assert cfg.resolve("data.csv") == tmp_path / "data.csv"
        assert str(cfg.resolve("/abs/data.csv")) == "/abs/data.csv"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "config.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(p)

    def test_bundled_mini_config_loads(self):
        from fundlens.assets import mini_dataset_dir

        cfg = load_config(mini_dataset_dir() / "config.json")
        assert cfg.annotation.providers == ["fixture"]
        assert cfg.models.sets == [1, 2, 3, 4, 5]
