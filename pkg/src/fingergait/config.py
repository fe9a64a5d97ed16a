"""Experiment configuration: sectioned key-value files, env overrides, hash.

The experiment surface is driven by one INI-style text file.  Every key
maps onto a field of one of the package's config dataclasses (or onto the
experiment-level selection keys), so the schema below is authoritative and
unknown sections or keys are rejected at parse time:

``[experiment]``
    ``hand`` (``default``), ``object`` (any name in
    :data:`fingergait.geometry.STANDARD_SHAPES`), ``planner`` (``mrrt`` |
    ``grrt``), ``reset`` (``fixed`` | ``sgs`` | ``er`` | ``tree``),
    ``seeds`` (integers, space- or comma-separated), ``out`` (directory).
``[sim]``        fields of :class:`fingergait.sim.SimConfig`
``[stability]``  fields of :class:`fingergait.stability.StabilityConfig`
``[mrrt]``       fields of :class:`fingergait.planning.MRRTConfig` except ``seed``
``[grrt]``       fields of :class:`fingergait.planning.GRRTConfig` except ``seed``
``[resets]``     ``top_k``, ``cap`` for reset-set extraction
``[env]``        fields of :class:`fingergait.rl.EnvConfig`
``[ppo]``        fields of :class:`fingergait.rl.PPOConfig` except ``seed``
``[eval]``       ``episodes``, ``horizon``

Per-run seeds come from ``experiment.seeds`` (or the command line), never
from the file sections, so one file describes a whole seed sweep.

Any value can also be overridden through the process environment with
``FINGERGAIT_<SECTION>__<KEY>=value`` (for example
``FINGERGAIT_ENV__LANES=16``); overrides are applied after the file is
read and are validated exactly like file values.

:func:`config_hash` hashes the canonical rendering of the *effective*
configuration (file plus overrides, all defaults filled in), so artifacts
stamped with the hash identify the experiment regardless of key order,
comments, or formatting in the source file.
"""

from __future__ import annotations

import dataclasses
import hashlib
import os
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import configparser

from .errors import ConfigError
from .geometry import STANDARD_SHAPES
from .planning import GRRTConfig, MRRTConfig
from .rl import EnvConfig, PPOConfig
from .sim import SimConfig
from .stability import StabilityConfig

ENV_PREFIX = "FINGERGAIT_"

_PLANNERS = ("mrrt", "grrt")
_RESETS = ("fixed", "sgs", "er", "tree")
_HANDS = ("default",)


@dataclass
class ExperimentConfig:
    """Validated, fully-resolved experiment description."""

    hand: str = "default"
    object_name: str = "disc"
    planner: str = "grrt"
    reset: str = "fixed"
    seeds: Tuple[int, ...] = (0,)
    out_dir: str = "runs"
    sim: SimConfig = field(default_factory=SimConfig)
    stability: StabilityConfig = field(default_factory=StabilityConfig)
    mrrt: MRRTConfig = field(default_factory=MRRTConfig)
    grrt: GRRTConfig = field(default_factory=GRRTConfig)
    reset_top_k: int = 10
    reset_cap: int = 2000
    env: EnvConfig = field(default_factory=EnvConfig)
    ppo: PPOConfig = field(default_factory=PPOConfig)
    eval_episodes: int = 10
    eval_horizon: int = 200

    def validate(self) -> None:
        if self.hand not in _HANDS:
            raise ConfigError(f"unknown hand {self.hand!r}; "
                              f"choices: {', '.join(_HANDS)}")
        if self.object_name not in STANDARD_SHAPES:
            raise ConfigError(
                f"unknown object {self.object_name!r}; "
                f"choices: {', '.join(sorted(STANDARD_SHAPES))}")
        if self.planner not in _PLANNERS:
            raise ConfigError(f"unknown planner {self.planner!r}; "
                              f"choices: {', '.join(_PLANNERS)}")
        if self.reset not in _RESETS:
            raise ConfigError(f"unknown reset condition {self.reset!r}; "
                              f"choices: {', '.join(_RESETS)}")
        if not self.seeds:
            raise ConfigError("experiment.seeds must list at least one seed")
        if any(s < 0 for s in self.seeds):
            raise ConfigError("seeds must be non-negative")
        if not self.out_dir:
            raise ConfigError("experiment.out must not be empty")
        if self.reset_top_k < 1 or self.reset_cap < 1:
            raise ConfigError("resets.top_k and resets.cap must be positive")
        if self.eval_episodes < 1 or self.eval_horizon < 1:
            raise ConfigError("eval.episodes and eval.horizon must be positive")

    # -- derived builders ---------------------------------------------------

    def shape(self):
        """Instantiate the configured object shape."""
        return STANDARD_SHAPES[self.object_name]()

    def mrrt_config(self, seed: int) -> MRRTConfig:
        return dataclasses.replace(self.mrrt, seed=seed)

    def grrt_config(self, seed: int) -> GRRTConfig:
        return dataclasses.replace(self.grrt, seed=seed)

    def ppo_config(self, seed: int) -> PPOConfig:
        return dataclasses.replace(self.ppo, seed=seed)


# -- parsing -----------------------------------------------------------------

_EXPERIMENT_KEYS = ("hand", "object", "planner", "reset", "seeds", "out")
_SECTION_TARGETS = {
    "sim": ("sim", ()),
    "stability": ("stability", ()),
    "mrrt": ("mrrt", ("seed",)),
    "grrt": ("grrt", ("seed",)),
    "env": ("env", ()),
    "ppo": ("ppo", ("seed",)),
}
_RESETS_KEYS = ("top_k", "cap")
_EVAL_KEYS = ("episodes", "horizon")


def _parse_bool(section: str, key: str, raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{section}.{key}: expected a boolean, got {raw!r}")


def _parse_scalar(section: str, key: str, raw: str, kind: type,
                  optional: bool = False):
    raw = raw.strip()
    if optional and raw.lower() in ("none", "auto"):
        return None
    try:
        if kind is bool:
            return _parse_bool(section, key, raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: {exc}") from None
    return raw


def _parse_seeds(raw: str) -> Tuple[int, ...]:
    parts = raw.replace(",", " ").split()
    if not parts:
        raise ConfigError("experiment.seeds must list at least one seed")
    try:
        return tuple(int(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"experiment.seeds: {exc}") from None


def _dataclass_types(instance) -> Dict[str, type]:
    out = {}
    for f in dataclasses.fields(instance):
        if f.type in ("int", int):
            out[f.name] = int
        elif f.type in ("float", float):
            out[f.name] = float
        elif f.type in ("bool", bool):
            out[f.name] = bool
        else:
            out[f.name] = float if "float" in str(f.type) else str
    return out


def _apply_pair(config: ExperimentConfig, section: str, key: str,
                raw: str) -> None:
    """Set one section.key from its raw text; reject unknown targets."""
    if section == "experiment":
        if key not in _EXPERIMENT_KEYS:
            raise ConfigError(f"unknown key experiment.{key}")
        value = raw.strip()
        if key == "seeds":
            config.seeds = _parse_seeds(value)
        elif key == "object":
            config.object_name = value
        elif key == "out":
            config.out_dir = value
        else:
            setattr(config, key, value)
        return
    if section == "resets":
        if key not in _RESETS_KEYS:
            raise ConfigError(f"unknown key resets.{key}")
        setattr(config, f"reset_{key}",
                _parse_scalar(section, key, raw, int))
        return
    if section == "eval":
        if key not in _EVAL_KEYS:
            raise ConfigError(f"unknown key eval.{key}")
        setattr(config, f"eval_{key}",
                _parse_scalar(section, key, raw, int))
        return
    if section not in _SECTION_TARGETS:
        raise ConfigError(f"unknown config section [{section}]")
    attr, excluded = _SECTION_TARGETS[section]
    target = getattr(config, attr)
    types = _dataclass_types(target)
    if key in excluded or key not in types:
        raise ConfigError(f"unknown key {section}.{key}")
    optional = section == "sim" and key == "inertia"
    value = _parse_scalar(section, key, raw, types[key], optional=optional)
    try:
        setattr(config, attr,
                dataclasses.replace(target, **{key: value}))
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: {exc}") from None


def _env_overrides(environ: Mapping[str, str]) -> list:
    pairs = []
    for name in sorted(environ):
        if not name.startswith(ENV_PREFIX):
            continue
        spec = name[len(ENV_PREFIX):]
        if "__" not in spec:
            raise ConfigError(
                f"malformed override {name}: expected "
                f"{ENV_PREFIX}<SECTION>__<KEY>")
        section, key = spec.split("__", 1)
        pairs.append((section.lower(), key.lower(), environ[name]))
    return pairs


def parse_experiment_config(text: str,
                            environ: Optional[Mapping[str, str]] = None
                            ) -> ExperimentConfig:
    """Parse INI text plus environment overrides into a validated config."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",),
                                       interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    config = ExperimentConfig()
    for section in parser.sections():
        for key, raw in parser.items(section):
            _apply_pair(config, section, key, raw)
    for section, key, raw in _env_overrides(
            os.environ if environ is None else environ):
        _apply_pair(config, section, key, raw)
    try:
        config.validate()
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return config


def load_experiment_config(path: str,
                           environ: Optional[Mapping[str, str]] = None
                           ) -> ExperimentConfig:
    """Read and validate an experiment config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_experiment_config(text, environ=environ)


# -- canonical form and hash ---------------------------------------------------


def _canonical_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return " ".join(str(v) for v in value)
    return str(value)


def canonical_text(config: ExperimentConfig) -> str:
    """Render the effective configuration as sorted ``section.key = value``."""
    lines = []
    lines.append(f"experiment.hand = {config.hand}")
    lines.append(f"experiment.object = {config.object_name}")
    lines.append(f"experiment.out = {config.out_dir}")
    lines.append(f"experiment.planner = {config.planner}")
    lines.append(f"experiment.reset = {config.reset}")
    lines.append(f"experiment.seeds = {_canonical_value(config.seeds)}")
    for section, (attr, excluded) in sorted(_SECTION_TARGETS.items()):
        target = getattr(config, attr)
        for f in sorted(dataclasses.fields(target), key=lambda f: f.name):
            if f.name in excluded:
                continue
            lines.append(f"{section}.{f.name} = "
                         f"{_canonical_value(getattr(target, f.name))}")
    lines.append(f"eval.episodes = {config.eval_episodes}")
    lines.append(f"eval.horizon = {config.eval_horizon}")
    lines.append(f"resets.cap = {config.reset_cap}")
    lines.append(f"resets.top_k = {config.reset_top_k}")
    return "\n".join(lines) + "\n"


def config_hash(config: ExperimentConfig) -> str:
    """sha256 of the canonical rendering; stamped into every artifact."""
    return hashlib.sha256(canonical_text(config).encode("utf-8")).hexdigest()
