"""
Tests for settings resolution.
"""
import pathlib

import pytest

from redlab.config import Settings, load_settings, read_config_file
from redlab.exceptions import BadValue


class TestSettings:
    def test_defaults(self, monkeypatch):
        monkeypatch.delenv('REDLAB_SEED', raising=False)
        settings = load_settings()
        assert settings.seed == 0
        assert settings.out_dir == pathlib.Path('redlab-out')
        assert settings.budget_seconds is None

    def test_environment(self, monkeypatch):
        monkeypatch.setenv('REDLAB_SEED', '11')
        assert load_settings().seed == 11

    def test_file_beats_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv('REDLAB_SEED', '11')
        config = tmp_path / 'c.json'
        config.write_text('{"seed": 12, "epsilon": 0.1}')
        settings = load_settings(config)
        assert settings.seed == 12
        assert settings.epsilon == 0.1

    def test_flags_beat_file(self, tmp_path):
        config = tmp_path / 'c.yaml'
        config.write_text('seed: 12\nepsilon: 0.1\n')
        settings = load_settings(config, {'seed': 13, 'epsilon': None})
        assert settings.seed == 13
        assert settings.epsilon == 0.1

    def test_unknown_key(self):
        with pytest.raises(BadValue):
            load_settings(overrides={'sede': 1})

    def test_out_of_range(self):
        with pytest.raises(BadValue):
            load_settings(overrides={'batch_size': 0})

    def test_not_a_mapping(self, tmp_path):
        config = tmp_path / 'c.yaml'
        config.write_text('- 1\n- 2\n')
        with pytest.raises(BadValue):
            read_config_file(config)

    def test_empty_file(self, tmp_path):
        config = tmp_path / 'c.yaml'
        config.write_text('')
        assert read_config_file(config) == {}

    def test_missing_file(self, tmp_path):
        with pytest.raises(BadValue):
            load_settings(tmp_path / 'missing.json')

    def test_dump_round_trip(self):
        settings = Settings(seed=4, jvhw_fallback=True)
        assert Settings(**settings.model_dump()) == settings
