import json

import pytest
import toml
import yaml

from src.config_manager import DEFAULT_SETTINGS, Config, ConfigError, load_document


@pytest.fixture
def settings_file(tmp_path):
    return tmp_path / "cmap.toml"


class TestConfig:
    def test_defaults_without_file(self, settings_file):
        config = Config(settings_file)
        assert config.get("runtime.threads") == 0
        assert config.threads() is None
        assert config.get("persistence.memory_budget") == 200_000_000
        assert config.data == DEFAULT_SETTINGS
        assert not settings_file.exists()

    def test_file_overrides_defaults(self, settings_file):
        settings_file.write_text('[runtime]\nthreads = 3\n\n[logging]\nlevel = "DEBUG"\n')
        config = Config(settings_file)
        assert config.threads() == 3
        assert config.get("logging.level") == "DEBUG"
        assert config.get("logging.rotation") == "10 MB"

    def test_env_overrides_file(self, settings_file, monkeypatch):
        settings_file.write_text("[runtime]\nthreads = 3\n")
        monkeypatch.setenv("CMAP_RUNTIME_THREADS", "6")
        monkeypatch.setenv("CMAP_PERSISTENCE_MEMORY_BUDGET", "1000")
        config = Config(settings_file)
        assert config.threads() == 6
        assert config.get("persistence.memory_budget") == 1000

    def test_env_value_must_parse(self, settings_file, monkeypatch):
        monkeypatch.setenv("CMAP_RUNTIME_THREADS", "many")
        with pytest.raises(ConfigError):
            Config(settings_file)

    @pytest.mark.parametrize(
        "content",
        [
            "[runtime]\nthreads = -1\n",
            "[persistence]\nnative_max_points = 0\n",
            '[logging]\nlevel = "LOUD"\n',
            "threads = 2\n",
            "[runtime\n",
        ],
    )
    def test_invalid_settings(self, settings_file, content):
        settings_file.write_text(content)
        with pytest.raises(ConfigError):
            Config(settings_file)

    def test_get_and_set(self, settings_file):
        config = Config(settings_file)
        config.set("extra.nested.value", 5)
        assert config.get("extra.nested.value") == 5
        assert config.get("missing.key", "fallback") == "fallback"
        assert config.get("logging.level") == "WARNING"


class TestLoadDocument:
    DOCUMENT = {"rng_seed": 3, "input": {"kind": "edgelist", "path": "g.edgelist"}}

    def test_formats(self, tmp_path):
        (tmp_path / "a.json").write_text(json.dumps(self.DOCUMENT))
        (tmp_path / "a.toml").write_text(toml.dumps(self.DOCUMENT))
        (tmp_path / "a.yaml").write_text(yaml.safe_dump(self.DOCUMENT))
        for name in ("a.json", "a.toml", "a.yaml"):
            assert load_document(tmp_path / name) == self.DOCUMENT

    def test_unknown_extension(self, tmp_path):
        path = tmp_path / "a.ini"
        path.write_text("x=1")
        with pytest.raises(ConfigError, match="Unsupported"):
            load_document(path)

    def test_parse_error(self, tmp_path):
        path = tmp_path / "a.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="Failed to parse"):
            load_document(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="Failed to read"):
            load_document(tmp_path / "missing.yaml")

    def test_must_be_mapping(self, tmp_path):
        path = tmp_path / "a.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError):
            load_document(path)
