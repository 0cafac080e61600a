import pytest

from core.configman import ConfigManager
from core.errors import ConfigError


def _ini(tmp_path, body):
    path = tmp_path / "run.ini"
    path.write_text(body, encoding="utf-8")
    return str(path)


def test_defaults_without_file():
    cm = ConfigManager()
    assert cm.get("epochs") == 1000
    assert cm.get("hidden") == 50
    assert cm.get("train-fraction") == 0.8
    assert cm.get("dwell") is None
    assert cm.get("close-final-cycle") is True
    assert cm.is_color_enabled()


def test_file_overrides_defaults_and_flags_override_file(tmp_path):
    cm = ConfigManager(_ini(tmp_path, "[settings]\nepochs = 20\nseed = 4\nno-color = 1\n"))
    assert cm.from_file == {"epochs", "seed", "no-color"}
    merged = cm.merged({"epochs": 7, "hidden": None})
    assert merged["epochs"] == 7
    assert merged["seed"] == 4
    assert merged["hidden"] == 50
    assert not cm.is_color_enabled()


def test_unknown_keys_and_sections_are_rejected(tmp_path):
    with pytest.raises(ConfigError, match="unknown configuration option 'epoch'"):
        ConfigManager(_ini(tmp_path, "[settings]\nepoch = 20\n"))
    with pytest.raises(ConfigError, match="unknown section"):
        ConfigManager(_ini(tmp_path, "[settings]\n[extra]\nx = 1\n"))
    with pytest.raises(ConfigError):
        ConfigManager().merged({"bogus": 1})


@pytest.mark.parametrize("key,value", [
    ("epochs", "0"),
    ("train-fraction", "1.0"),
    ("bit-flip-prob", "-0.1"),
    ("ascii-plot", "yes"),
    ("hidden", "many"),
])
def test_invalid_values(key, value):
    with pytest.raises(ConfigError, match=key):
        ConfigManager().set(key, value)


def test_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        ConfigManager("/nonexistent/run.ini")


def test_set_accepts_flag_spelling():
    cm = ConfigManager()
    cm.set("--learning_rate", "0.01")
    assert cm.get("learning-rate") == 0.01
