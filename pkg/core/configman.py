import configparser
import os
import logging

from core.errors import ConfigError

log = logging.getLogger(__name__)


def _flag(value):
    if value not in ("0", "1"):
        raise ValueError("must be 0 or 1")
    return value == "1"


def _optional_int(value):
    return int(value) if value != "" else None


def _positive_int(value):
    value = int(value)
    if value < 1:
        raise ValueError("must be >= 1")
    return value


def _non_negative_int(value):
    value = int(value)
    if value < 0:
        raise ValueError("must be >= 0")
    return value


def _fraction(value):
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ValueError("must lie in (0, 1)")
    return value


def _probability(value):
    value = float(value)
    if not 0.0 <= value < 1.0:
        raise ValueError("must lie in [0, 1)")
    return value


# --- ConfigManager ---
class ConfigManager:
    """Settings read from an INI file (section [settings]). Keys are the
    long command line flag names; a flag given on the command line wins
    over the file, the file wins over DEFAULT_CONFIG."""

    CONFIG_SECTION = "settings"

    DEFAULT_CONFIG = {
        "seed": "0",
        # plant simulation
        "cycles": "51",
        "dwell": "",
        "position-dwell": "2",
        "bit-flip-prob": "0.0",
        "dwell-jitter": "0",
        "sampling-period-ms": "500",
        "close-final-cycle": "1",
        # network and optimiser
        "epochs": "1000",
        "hidden": "50",
        "layers": "1",
        "learning-rate": "0.001",
        "beta1": "0.9",
        "beta2": "0.999",
        "epsilon": "1e-8",
        "init-scale": "0.08",
        "forget-bias": "1.0",
        # pipeline
        "train-fraction": "0.8",
        "otala-cycle": "",
        "ascii-plot": "0",
        "no-color": "0",
    }

    COERCE = {
        "seed": _non_negative_int,
        "cycles": _positive_int,
        "dwell": _optional_int,
        "position-dwell": _positive_int,
        "bit-flip-prob": _probability,
        "dwell-jitter": _non_negative_int,
        "sampling-period-ms": _positive_int,
        "close-final-cycle": _flag,
        "epochs": _positive_int,
        "hidden": _positive_int,
        "layers": _positive_int,
        "learning-rate": float,
        "beta1": _fraction,
        "beta2": _fraction,
        "epsilon": float,
        "init-scale": float,
        "forget-bias": float,
        "train-fraction": _fraction,
        "otala-cycle": _optional_int,
        "ascii-plot": _flag,
        "no-color": _flag,
    }

    def __init__(self, config_path=None):
        self.config_path = config_path
        self.config = self.DEFAULT_CONFIG.copy()
        self.from_file = set()
        if config_path is not None:
            self._load_config()

    def _load_config(self):
        """Loads settings from the .ini file, rejecting anything unknown."""
        if not os.path.exists(self.config_path):
            raise ConfigError(f"config file not found: {self.config_path}")
        parser = configparser.ConfigParser()
        try:
            parser.read(self.config_path, encoding="utf-8")
        except configparser.Error as e:
            raise ConfigError(f"cannot parse config file {self.config_path}: {e}")

        extra = [s for s in parser.sections() if s != self.CONFIG_SECTION]
        if extra:
            raise ConfigError(f"unknown section(s) in {self.config_path}: {', '.join(extra)}")
        if self.CONFIG_SECTION not in parser:
            log.warning("section [%s] not found in %s; using defaults", self.CONFIG_SECTION, self.config_path)
            return
        for key, value in parser.items(self.CONFIG_SECTION):
            self.set(key, value)
            self.from_file.add(key)
        log.info("loaded %d setting(s) from %s", len(self.from_file), self.config_path)

    def set(self, key, value):
        """Sets a configuration value after validating it."""
        key = key.strip().lstrip("-").replace("_", "-")
        if key not in self.DEFAULT_CONFIG:
            raise ConfigError(f"unknown configuration option '{key}'")
        value = str(value).strip()
        try:
            self.COERCE[key](value)
        except ValueError as e:
            raise ConfigError(f"'{key}' {e}; received '{value}'")
        self.config[key] = value

    def get(self, key):
        """Typed value of a setting."""
        return self.COERCE[key](self.config[key])

    def merged(self, overrides):
        """All settings as typed values, with non-None `overrides` (command
        line flags, keyed like DEFAULT_CONFIG) taking precedence."""
        result = {key: self.get(key) for key in self.DEFAULT_CONFIG}
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in self.DEFAULT_CONFIG:
                raise ConfigError(f"unknown configuration option '{key}'")
            result[key] = value
        return result

    def is_color_enabled(self):
        return not self.get("no-color")
