"""Configuration defaults and the `.chainlint` config document for chainlint."""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from dotenv import dotenv_values

logger = logging.getLogger(__name__)

CONFIG_FILE_NAME = ".chainlint"


class ConfigError(Exception):
    """Exception raised for unusable configuration."""
    pass


# =============================================================================
# Source Tree Configuration
# =============================================================================
DEFAULT_INCLUDE = ["*.go"]
# vendor and testdata trees are skipped
DEFAULT_EXCLUDE = ["vendor/*", "*/vendor/*", "testdata/*", "*/testdata/*"]
DEFAULT_WORKERS = 4


# =============================================================================
# Entry Point Configuration
# =============================================================================
DEFAULT_ENTRY_METHODS = ["BeginBlock", "EndBlock"]
DEFAULT_SERVER_SUFFIXES = ["MsgServer"]
DEFAULT_EXTRA_ENTRIES: list[str] = []

# Legacy blacklist mode: package path substrings left out of scope.
DEFAULT_BLACKLIST = ["mock", "test", "simulation", "cli", "client"]


# =============================================================================
# Rule Configuration
# =============================================================================
RULE_NAMES = [
    "cosmos/block-panic",
    "cosmos/map-iteration",
    "cosmos/hardcoded-bech32",
    "cosmos/goroutine",
    "cosmos/float-arith",
    "cosmos/system-time",
    "cosmos/unsafe-package",
    "cosmos/platform-int",
]

DEFAULT_TIME_DENY = [
    "time.Now",
    "time.Since",
    "time.Until",
    "time.After",
    "time.Tick",
    "time.NewTicker",
    "time.NewTimer",
]

# crypto/rand is not listed.
DEFAULT_UNSAFE_PACKAGES = ["math/rand", "reflect", "unsafe", "runtime"]

DEFAULT_BECH32_SETTERS = [
    "SetBech32PrefixForAccount",
    "SetBech32PrefixForValidator",
    "SetBech32PrefixForConsensusNode",
    "GetFromBech32",
]


# =============================================================================
# Output Configuration
# =============================================================================
MODES = ("whitelist", "blacklist")
OUTPUTS = ("text", "sarif")
FAIL_ON = ("any", "none", "new-only")


@dataclass(frozen=True)
class EntryPointSpec:
    """Which declarations seed the consensus-critical scope.

    Method patterns are `(pattern, arity)`; a pattern starting with `*` is a
    suffix match, anything else an exact name. `arity=None` accepts any
    parameter count.
    """

    method_names: tuple[tuple[str, int | None], ...] = tuple(
        (name, None) for name in DEFAULT_ENTRY_METHODS
    )
    server_interface_suffixes: tuple[str, ...] = tuple(DEFAULT_SERVER_SUFFIXES)
    extra_entry_names: tuple[str, ...] = tuple(DEFAULT_EXTRA_ENTRIES)


@dataclass(frozen=True)
class RuleConfig:
    enabled: frozenset[str] = frozenset(RULE_NAMES)
    time_deny_list: tuple[str, ...] = tuple(DEFAULT_TIME_DENY)
    unsafe_packages: tuple[str, ...] = tuple(DEFAULT_UNSAFE_PACKAGES)
    bech32_setter_names: tuple[str, ...] = tuple(DEFAULT_BECH32_SETTERS)


@dataclass
class RunConfig:
    """Everything one `analyze`/`scope` invocation needs."""

    root: Path
    include: list[str] = field(default_factory=lambda: list(DEFAULT_INCLUDE))
    exclude: list[str] = field(default_factory=lambda: list(DEFAULT_EXCLUDE))
    mode: str = "whitelist"
    entry_spec: EntryPointSpec = field(default_factory=EntryPointSpec)
    entry_spec_overridden: bool = False
    blacklist_patterns: list[str] = field(default_factory=lambda: list(DEFAULT_BLACKLIST))
    rules: RuleConfig = field(default_factory=RuleConfig)
    output: str = "text"
    output_file: Path | None = None
    baseline: Path | None = None
    fail_on: str = "any"
    project: str = ""
    workers: int = DEFAULT_WORKERS


def _split_list(value: str | None) -> list[str]:
    if not value:
        return []
    return [item.strip() for item in value.split(",") if item.strip()]


def _parse_bool(value: str) -> bool:
    return value.strip().lower() in ("1", "true", "yes", "on")


def parse_method_patterns(values: list[str]) -> tuple[tuple[str, int | None], ...]:
    """Parse `Name` / `Name/arity` entries into method patterns.

    Raises:
        ConfigError: If an arity is not a non-negative integer
    """
    patterns = []
    for value in values:
        name, _, arity = value.partition("/")
        if not arity:
            patterns.append((name, None))
            continue
        if not arity.isdigit():
            raise ConfigError(f"Invalid arity in entry method pattern: {value}")
        patterns.append((name, int(arity)))
    return tuple(patterns)


def read_config_file(path: Path) -> dict[str, str]:
    """Read a `.chainlint` document.

    Args:
        path: Path to the config document

    Returns:
        Raw key/value pairs; empty when the file does not exist
    """
    if not path.is_file():
        return {}
    values = dotenv_values(path)
    logger.debug(f"Loaded {len(values)} settings from {path}")
    return {key: value for key, value in values.items() if value is not None}


def load_run_config(
    root: Path,
    overrides: dict[str, Any] | None = None,
    config_path: Path | None = None,
) -> RunConfig:
    """Build the run configuration with flag > file > default precedence.

    Args:
        root: Analysis root directory
        overrides: Values given on the command line, keyed like the config
            document; `None` values are ignored
        config_path: Explicit config document (defaults to `<root>/.chainlint`)

    Returns:
        Populated RunConfig (not yet validated)
    """
    settings: dict[str, Any] = dict(read_config_file(config_path or root / CONFIG_FILE_NAME))
    file_entry_keys = {key for key in settings if key.startswith("entry.") or key == "scope.include_init_chain"}
    for key, value in (overrides or {}).items():
        if value is not None:
            settings[key] = value

    def as_list(key: str) -> list[str] | None:
        value = settings.get(key)
        if value is None:
            return None
        if isinstance(value, (list, tuple)):
            return [str(item) for item in value]
        return _split_list(str(value))

    config = RunConfig(root=root)

    if (include := as_list("include")) is not None:
        config.include = include
    if (exclude := as_list("exclude")) is not None:
        config.exclude = exclude
    if "mode" in settings:
        config.mode = str(settings["mode"])
    if (blacklist := as_list("blacklist")) is not None:
        config.blacklist_patterns = blacklist
    if "output" in settings:
        config.output = str(settings["output"])
    if settings.get("output_file"):
        config.output_file = Path(settings["output_file"])
    if settings.get("baseline"):
        config.baseline = Path(settings["baseline"])
    if "fail_on" in settings:
        config.fail_on = str(settings["fail_on"])
    config.project = str(settings.get("project") or root.resolve().name)
    if "workers" in settings:
        try:
            config.workers = max(1, int(settings["workers"]))
        except ValueError as e:
            raise ConfigError(f"workers must be an integer: {settings['workers']}") from e

    # Entry points
    spec = EntryPointSpec()
    if (methods := as_list("entry.methods")) is not None:
        spec = replace(spec, method_names=parse_method_patterns(methods))
    if (suffixes := as_list("entry.server_suffixes")) is not None:
        spec = replace(spec, server_interface_suffixes=tuple(suffixes))
    extras = as_list("entry.extra") or []
    include_init_chain = settings.get("scope.include_init_chain")
    if include_init_chain is not None and _parse_bool(str(include_init_chain)):
        extras.append("InitChain")
    if extras:
        spec = replace(spec, extra_entry_names=tuple(dict.fromkeys(extras)))
    config.entry_spec = spec
    override_entry_keys = {
        key for key, value in (overrides or {}).items()
        if value and (key.startswith("entry.") or key == "scope.include_init_chain")
    }
    config.entry_spec_overridden = bool(file_entry_keys | override_entry_keys) and spec != EntryPointSpec()

    # Rules
    rules = RuleConfig()
    if (enabled := as_list("rules.enabled")) is not None:
        rules = replace(rules, enabled=frozenset(enabled))
    if (time_deny := as_list("rules.time_deny")) is not None:
        rules = replace(rules, time_deny_list=tuple(time_deny))
    if (unsafe := as_list("rules.unsafe_packages")) is not None:
        rules = replace(rules, unsafe_packages=tuple(unsafe))
    if (setters := as_list("rules.bech32_setters")) is not None:
        rules = replace(rules, bech32_setter_names=tuple(setters))
    config.rules = rules

    return config


def validate_run_config(config: RunConfig) -> list[str]:
    """Validate a run configuration.

    Returns:
        List of configuration problems; empty when the config is usable
    """
    errors = []

    if config.mode not in MODES:
        errors.append(f"mode must be one of {', '.join(MODES)}, got {config.mode!r}")
    if config.output not in OUTPUTS:
        errors.append(f"output must be one of {', '.join(OUTPUTS)}, got {config.output!r}")
    if config.fail_on not in FAIL_ON:
        errors.append(f"fail_on must be one of {', '.join(FAIL_ON)}, got {config.fail_on!r}")

    if config.mode == "blacklist" and config.entry_spec_overridden:
        errors.append("entry point settings cannot be combined with blacklist mode")
    if config.fail_on == "new-only" and config.baseline is None:
        errors.append("fail_on=new-only requires a baseline")

    unknown = sorted(config.rules.enabled - set(RULE_NAMES))
    for name in unknown:
        errors.append(f"Unknown rule: {name}")

    enabled = config.rules.enabled
    if "cosmos/system-time" in enabled and not config.rules.time_deny_list:
        errors.append("rules.time_deny is required when cosmos/system-time is enabled")
    if "cosmos/unsafe-package" in enabled and not config.rules.unsafe_packages:
        errors.append("rules.unsafe_packages is required when cosmos/unsafe-package is enabled")
    if "cosmos/hardcoded-bech32" in enabled and not config.rules.bech32_setter_names:
        errors.append("rules.bech32_setters is required when cosmos/hardcoded-bech32 is enabled")

    if not config.include:
        errors.append("include must name at least one glob")

    return errors
