"""Analysis configuration: flat key=value files plus flag overrides.

A config file holds one ``key = value`` pair per line; ``#`` starts a
comment and blank lines are skipped.  List-valued keys take
comma-separated entries.  Command-line flags override file values,
which override the documented defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .categories import CODINGS

COMMANDS = ("combo-em", "combo-mcmc", "combo-em-2stage", "combo-mcmc-2stage",
            "comma-em", "comma-pvw", "comma-ols", "bootstrap", "roc",
            "simulate")

_ROLE_LISTS = ("x", "z", "z1", "z2", "c")
_ROLE_SINGLES = ("ystar", "ystar1", "ystar2", "mstar", "outcome")

# data roles each analysis command requires (lists may be empty but the
# single-column roles must be bound)
REQUIRED_ROLES = {
    "combo-em": ("ystar", "x", "z"),
    "combo-mcmc": ("ystar", "x", "z"),
    "combo-em-2stage": ("ystar1", "ystar2", "x", "z1", "z2"),
    "combo-mcmc-2stage": ("ystar1", "ystar2", "x", "z1", "z2"),
    "comma-em": ("mstar", "outcome", "x", "z"),
    "comma-pvw": ("mstar", "outcome", "x", "z"),
    "comma-ols": ("mstar", "outcome", "x", "z"),
    "roc": ("ystar", "x", "z"),
}

BOOTSTRAP_TARGETS = ("comma-em", "comma-pvw", "comma-ols", "combo-em",
                     "combo-em-2stage")

SIM_FAMILIES = ("single", "twostage", "mediation")


class ConfigError(ValueError):
    """Invalid configuration or usage; maps to exit code 1."""


def _to_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _to_str_list(raw: str) -> list[str]:
    """Split on commas outside parentheses, so covariate specs such as
    normal(0,1) survive as single items."""
    items, buf, depth = [], [], 0
    for ch in raw:
        if ch == "," and depth == 0:
            items.append("".join(buf))
            buf = []
            continue
        depth += (ch == "(") - (ch == ")")
        buf.append(ch)
    items.append("".join(buf))
    return [p for p in (i.strip() for i in items) if p]


def _to_float_list(raw: str) -> list[float]:
    try:
        return [float(p) for p in _to_str_list(raw)]
    except ValueError as err:
        raise ConfigError(f"expected comma-separated numbers, got {raw!r}") from err


@dataclass
class AnalysisConfig:
    """Resolved settings for one CLI invocation."""

    command: str
    data: str | None = None
    out: str = "."
    # column role bindings
    ystar: str | None = None
    ystar1: str | None = None
    ystar2: str | None = None
    mstar: str | None = None
    outcome: str | None = None
    x: list[str] = field(default_factory=list)
    z: list[str] = field(default_factory=list)
    z1: list[str] = field(default_factory=list)
    z2: list[str] = field(default_factory=list)
    c: list[str] = field(default_factory=list)
    coding: str = "1,2"
    # method options
    tolerance: float = 1e-7
    max_iter: int = 1500
    accel: str = "plain"
    dist: str = "normal"
    interaction: bool = False
    prior: str = "normal"
    prior_location: float = 0.0
    prior_scale: float = 10.0
    prior_lower: float = -10.0
    prior_upper: float = 10.0
    prior_df: float = 3.0
    chains: int = 2
    samples: int = 1000
    burn_in: int = 500
    n_boot: int = 1000
    n_parallel: int = 1
    seed: int = 0
    method: str | None = None        # bootstrap target
    estimates: str | None = None     # prior fit table for the roc command
    # simulation settings
    family: str | None = None
    n: int = 1000
    beta: list[float] = field(default_factory=list)
    gamma: list[float] = field(default_factory=list)
    gamma1: list[float] = field(default_factory=list)
    gamma2: list[float] = field(default_factory=list)
    theta: list[float] = field(default_factory=list)
    sigma: float = 1.0
    x_spec: list[str] = field(default_factory=list)
    z_spec: list[str] = field(default_factory=list)
    z1_spec: list[str] = field(default_factory=list)
    z2_spec: list[str] = field(default_factory=list)
    c_spec: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        """Resolved config for embedding in reports.

        Excludes n_parallel so reports stay byte-identical across worker
        counts.
        """
        out = {}
        for f in fields(self):
            if f.name == "n_parallel":
                continue
            out[f.name] = getattr(self, f.name)
        return out


_PARSERS = {
    str: lambda raw: raw,
    int: int,
    float: float,
    bool: _to_bool,
}


def _field_registry():
    reg = {}
    for f in fields(AnalysisConfig):
        ann = f.type
        if ann in ("str", "str | None"):
            reg[f.name] = lambda raw: raw
        elif ann == "int":
            reg[f.name] = int
        elif ann == "float":
            reg[f.name] = float
        elif ann == "bool":
            reg[f.name] = _to_bool
        elif ann == "list[str]":
            reg[f.name] = _to_str_list
        elif ann == "list[float]":
            reg[f.name] = _to_float_list
        else:  # pragma: no cover - schema drift guard
            raise RuntimeError(f"unhandled config field type {ann}")
    return reg


_REGISTRY = _field_registry()


def parse_config_file(path: str) -> dict[str, str]:
    """Read raw key = value pairs; duplicate keys are an error."""
    raw: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from err
    for num, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{num}: expected key = value")
        key, value = stripped.split("=", 1)
        key = key.strip()
        value = value.strip().strip('"').strip("'")
        if key in raw:
            raise ConfigError(f"{path}:{num}: duplicate key {key!r}")
        raw[key] = value
    return raw


def build_config(command: str, file_values: dict[str, str] | None = None,
                 overrides: dict[str, str] | None = None) -> AnalysisConfig:
    """Merge defaults, config-file values, and flag overrides, then validate."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    cfg = AnalysisConfig(command=command)
    for source, label in ((file_values or {}, "config file"),
                          (overrides or {}, "flag")):
        for key, raw in source.items():
            if key == "command":
                if raw != command:
                    raise ConfigError(f"config file sets command = {raw!r} "
                                      f"but the CLI invoked {command!r}")
                continue
            if key not in _REGISTRY:
                raise ConfigError(f"unknown {label} key {key!r}")
            try:
                setattr(cfg, key, _REGISTRY[key](raw))
            except (ValueError, ConfigError) as err:
                raise ConfigError(f"bad value for {key!r}: {err}") from err
    validate_config(cfg)
    return cfg


def validate_config(cfg: AnalysisConfig) -> None:
    if cfg.coding not in CODINGS:
        raise ConfigError(f"coding must be one of {CODINGS}")
    if cfg.command == "simulate":
        if cfg.family not in SIM_FAMILIES:
            raise ConfigError(f"simulate needs family, one of {SIM_FAMILIES}")
        if cfg.n <= 0:
            raise ConfigError("n must be positive")
        return
    if cfg.command == "bootstrap":
        if cfg.method not in BOOTSTRAP_TARGETS:
            raise ConfigError(f"bootstrap needs method, one of "
                              f"{BOOTSTRAP_TARGETS}")
        roles = REQUIRED_ROLES[cfg.method]
    else:
        roles = REQUIRED_ROLES[cfg.command]
    if cfg.data is None:
        raise ConfigError("no data file given")
    for role in roles:
        if role in _ROLE_SINGLES and getattr(cfg, role) is None:
            raise ConfigError(f"command {cfg.command} needs the {role!r} "
                              "column binding")
        # observation-model lists (z, z1, z2) may stay empty for
        # intercept-only misclassification mechanisms
        if role == "x" and not cfg.x:
            raise ConfigError(f"command {cfg.command} needs the 'x' "
                              "column list")
    bound = [(role, getattr(cfg, role)) for role in _ROLE_SINGLES
             if getattr(cfg, role) is not None]
    seen: dict[str, str] = {}
    for role, col in bound:
        if col in seen:
            raise ConfigError(f"column {col!r} bound to both {seen[col]!r} "
                              f"and {role!r}")
        seen[col] = role
    if cfg.command.startswith("comma") or (cfg.command == "bootstrap" and
                                           cfg.method.startswith("comma")):
        if len(cfg.x) != 1:
            raise ConfigError("mediation commands need exactly one exposure "
                              "column in x")
    if cfg.tolerance <= 0 or cfg.max_iter <= 0:
        raise ConfigError("tolerance and max_iter must be positive")
    if cfg.command in ("combo-mcmc", "combo-mcmc-2stage"):
        if cfg.chains < 1 or cfg.samples < 1 or cfg.burn_in < 0:
            raise ConfigError("need chains >= 1, samples >= 1, burn_in >= 0")
    if cfg.command == "bootstrap" and cfg.n_boot < 2:
        raise ConfigError("n_boot must be at least 2")
