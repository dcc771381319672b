import logging
import os
import sys
from pathlib import Path
from typing import Any

from djr.core.errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

logger = logging.getLogger(__name__)

DEFAULT_CAP = 2**26
DEFAULT_DEPTH = 3
DEFAULT_TOWER_BUDGET = 2000

CAP_ENV = "DJR_CAP"
DEPTH_ENV = "DJR_DEPTH"

_KNOWN_KEYS = {"cap", "depth", "tower_budget", "format"}
_FORMATS = {"text", "json", "csv"}


def _positive_int(name: str, value: Any) -> int:
    try:
        number = int(value)
    except (TypeError, ValueError) as error:
        raise ConfigError(f"{name} must be an integer, got {value!r}") from error
    if number < 1:
        raise ConfigError(f"{name} must be positive, got {number}")
    return number


class Settings:
    """
    Configuration settings for the verifier.

    Values are resolved with the precedence: explicit overrides (CLI flags) >
    environment variables > TOML config file (table ``[djr]``) > defaults.
    """

    def __init__(
        self,
        config_path: Path | None = None,
        *,
        overrides: dict[str, Any] | None = None,
        environ: dict[str, str] | None = None,
    ):
        """
        Args:
            config_path: Optional TOML file with a ``[djr]`` table.
            overrides: Values taken from the command line; ``None`` entries
                       are ignored.
            environ: Environment mapping, ``os.environ`` when omitted.
        """
        values: dict[str, Any] = {
            "cap": DEFAULT_CAP,
            "depth": DEFAULT_DEPTH,
            "tower_budget": DEFAULT_TOWER_BUDGET,
            "format": None,
        }
        if config_path is not None:
            values.update(self._read_config(config_path))

        env = os.environ if environ is None else environ
        if env.get(CAP_ENV):
            values["cap"] = env[CAP_ENV]
            logger.debug("Materialization cap taken from %s", CAP_ENV)
        if env.get(DEPTH_ENV):
            values["depth"] = env[DEPTH_ENV]

        for key, value in (overrides or {}).items():
            if value is not None:
                values[key] = value

        self._config_path = config_path
        self._cap: int = _positive_int("cap", values["cap"])
        self._depth: int = _positive_int("depth", values["depth"])
        self._tower_budget: int = _positive_int(
            "tower_budget", values["tower_budget"]
        )
        fmt = values["format"]
        if fmt is not None and fmt not in _FORMATS:
            raise ConfigError(f"format must be one of {sorted(_FORMATS)}, got {fmt!r}")
        self._format: str | None = fmt
        logger.debug("Settings resolved: %r", self)

    @staticmethod
    def _read_config(config_path: Path) -> dict[str, Any]:
        try:
            with config_path.open("rb") as handle:
                document = tomllib.load(handle)
        except FileNotFoundError as error:
            raise ConfigError(f"config file not found: {config_path}") from error
        except tomllib.TOMLDecodeError as error:
            raise ConfigError(f"invalid TOML in {config_path}: {error}") from error

        table = document.get("djr", {})
        if not isinstance(table, dict):
            raise ConfigError("[djr] in the config file must be a table")
        unknown = set(table) - _KNOWN_KEYS
        if unknown:
            logger.warning("Ignoring unknown config keys: %s", sorted(unknown))
        return {key: table[key] for key in _KNOWN_KEYS if key in table}

    @property
    def config_path(self) -> Path | None:
        """The TOML file the settings were read from, if any."""
        return self._config_path

    @property
    def cap(self) -> int:
        """Largest block length (in symbols) that may be materialized."""
        return self._cap

    @property
    def depth(self) -> int:
        """Offset between a tower level N and its default scan level M."""
        return self._depth

    @property
    def tower_budget(self) -> int:
        """Largest h_N the verification suite builds towers for."""
        return self._tower_budget

    @property
    def format(self) -> str | None:
        """Requested output format, ``None`` to pick from the context."""
        return self._format

    def scan_level(self, level: int) -> int:
        """Default scan level M for a query whose largest level is ``level``."""
        return level + self._depth

    def __repr__(self):
        return (
            "Settings(\n"
            f"  config_path={str(self.config_path) if self.config_path else None!r},\n"
            f"  cap={self.cap},\n"
            f"  depth={self.depth},\n"
            f"  tower_budget={self.tower_budget},\n"
            f"  format={self.format!r}\n"
            ")"
        )


def resolve_cap(cap: int | None) -> int:
    """Return ``cap`` or the environment-aware default."""
    if cap is not None:
        return cap
    return Settings().cap
