"""
Configuration module for CarpetLab
Loads environment variables and the TOML run configuration
"""

import copy
import json
import math
import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, field, fields

import tomli_w
from dotenv import load_dotenv

from .exceptions import ConfigError

# Load environment variables from .env file
load_dotenv()

# Get project root directory
PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

TOOL_VERSION = '1.0.0'


class Config:
    """Process-level configuration read from the environment"""

    # Output and defaults
    OUTPUT_DIR = os.getenv('CARPET_OUT_DIR', os.path.join(PROJECT_ROOT, 'runs'))
    THREADS = int(os.getenv('CARPET_THREADS', 1))
    DEFAULT_CONFIG_PATH = os.getenv('CARPET_CONFIG', os.path.join(PROJECT_ROOT, 'config', 'default.toml'))
    GOLDEN_RENDER_PATH = os.getenv('CARPET_GOLDEN', os.path.join(PROJECT_ROOT, 'data', 'golden_render.png'))
    SOURCE_DATE_EPOCH = os.getenv('SOURCE_DATE_EPOCH')

    # Flask configuration
    FLASK_ENV = os.getenv('FLASK_ENV', 'development')
    DEBUG = os.getenv('FLASK_DEBUG', 'False').lower() == 'true'
    SECRET_KEY = os.getenv('SECRET_KEY', 'dev-secret-key-change-in-production')

    # Server configuration
    HOST = '0.0.0.0'
    PORT = int(os.getenv('PORT', 5000))


if Config.THREADS < 1:
    raise ValueError("CARPET_THREADS must be a positive integer")


def default_intensity(kappa):
    """Loop-soup intensity c(kappa) = (3k - 8)(6 - k) / (2k)"""
    return (3.0 * kappa - 8.0) * (6.0 - kappa) / (2.0 * kappa)


# =====================================================
# Run configuration sections
# =====================================================

@dataclass
class SoupConfig:
    kappa: float = 3.0
    intensity: float | None = None
    min_duration: float = 1e-4
    bridge_steps: int = 64
    domain_radius: float = 1.0
    seed: int = 0
    restrict_to_domain: bool = True
    raster_n: int = 512
    max_attempts: int = 40

    @property
    def intensity_overridden(self):
        return self.intensity is not None

    @property
    def effective_intensity(self):
        if self.intensity is None:
            return default_intensity(self.kappa)
        return float(self.intensity)

    def validate(self):
        if not 8.0 / 3.0 < self.kappa < 4.0:
            raise ConfigError(f"kappa must lie in (8/3, 4), got {self.kappa}")
        if self.intensity is not None and self.intensity < 0:
            raise ConfigError("intensity must be nonnegative")
        if not self.min_duration > 0:
            raise ConfigError("min_duration must be positive (the soup measure needs a cutoff)")
        if self.bridge_steps < 8:
            raise ConfigError(f"bridge_steps must be at least 8, got {self.bridge_steps}")
        if not self.domain_radius > 0:
            raise ConfigError("domain_radius must be positive")
        if self.raster_n < 256:
            raise ConfigError(f"raster_n must be at least 256, got {self.raster_n}")
        if not 0 <= self.seed < 2 ** 63:
            raise ConfigError("seed must be a nonnegative 64-bit integer below 2**63 (TOML integer range)")


@dataclass
class CarpetSettings:
    grid: int = 512
    eps_list: list = field(default_factory=lambda: [0.0625, 0.125, 0.25])
    net_count: int = 32


@dataclass
class StatsSettings:
    replicas: int = 100
    p_list: list = field(default_factory=lambda: [0.25, 0.5, 0.75])
    m0: float = 2.0
    band_m1: float = 8.0
    pair_count: int = 400
    bootstrap_resamples: int = 200
    posdef_fraction: float = 0.1
    report_ensembles: int = 4


@dataclass
class LevySettings:
    kappa_list: list = field(default_factory=lambda: [2.7, 3.0, 3.5, 3.9])
    increments: int = 1_000_000
    paths: int = 100_000
    horizon: float = 1000.0
    dt: float = 0.05
    cutoff: float = 1e-3
    eta_scale: float = 1.0
    m_list: list = field(default_factory=lambda: [10.0, 100.0, 1000.0])
    n_list: list = field(default_factory=lambda: [1, 2, 4, 8, 16, 32, 64])
    jump_paths: int = 10_000
    moment_paths: int = 100_000


@dataclass
class RunSettings:
    seed: int = 20240601
    threads: int = Config.THREADS
    out: str = ''
    format: str = 'csv'
    raw: bool = False


@dataclass
class SelftestSettings:
    ensembles: int = 20
    masks: int = 20
    triples: int = 1000
    soups: int = 50
    covering_paths: int = 100


# Settings that change where or how fast a run executes, not what it computes
EXECUTION_KEYS = ('threads', 'out')

SECTIONS = {
    'soup': SoupConfig,
    'carpet': CarpetSettings,
    'stats': StatsSettings,
    'levy': LevySettings,
    'run': RunSettings,
    'selftest': SelftestSettings,
}


@dataclass
class RunConfig:
    """Complete run configuration, one attribute per TOML section"""

    soup: SoupConfig = field(default_factory=SoupConfig)
    carpet: CarpetSettings = field(default_factory=CarpetSettings)
    stats: StatsSettings = field(default_factory=StatsSettings)
    levy: LevySettings = field(default_factory=LevySettings)
    run: RunSettings = field(default_factory=RunSettings)
    selftest: SelftestSettings = field(default_factory=SelftestSettings)

    @classmethod
    def from_dict(cls, data):
        """
        Build a RunConfig from nested dictionaries

        Args:
            data (dict): Section name -> {key: value}

        Returns:
            RunConfig: Parsed configuration

        Raises:
            ConfigError: On unknown sections, unknown keys or bad types
        """
        sections = {}
        for name, values in (data or {}).items():
            if name not in SECTIONS:
                raise ConfigError(f"Unknown configuration section: [{name}]")
            if not isinstance(values, dict):
                raise ConfigError(f"Section [{name}] must be a table")
            section_cls = SECTIONS[name]
            known = {f.name: f for f in fields(section_cls)}
            unknown = set(values) - set(known)
            if unknown:
                raise ConfigError(f"Unknown keys in [{name}]: {', '.join(sorted(unknown))}")
            try:
                sections[name] = section_cls(**{k: _coerce(known[k], v) for k, v in values.items()})
            except (TypeError, ValueError) as e:
                raise ConfigError(f"Invalid value in [{name}]: {e}") from e
        return cls(**sections)

    def to_dict(self):
        """Nested dictionary form with None values dropped (TOML has no null)"""
        out = {}
        for name in SECTIONS:
            section = asdict(getattr(self, name))
            out[name] = {k: v for k, v in section.items() if v is not None}
        return out

    def dumps(self, include_execution=True):
        """Serialize to TOML text, optionally without the execution-only run keys"""
        body = self.to_dict()
        if not include_execution:
            for key in EXECUTION_KEYS:
                body['run'].pop(key, None)
        return tomli_w.dumps(body)

    def canonical_json(self):
        """Canonical JSON used for the config hash; execution-only keys are left out"""
        body = self.to_dict()
        for key in EXECUTION_KEYS:
            body['run'].pop(key, None)
        return json.dumps(body, sort_keys=True, separators=(',', ':'))

    @property
    def cell_size(self):
        """Configured raster cell size h = 2 * domain_radius / grid"""
        return 2.0 * self.soup.domain_radius / self.carpet.grid

    def validate(self, subcommand=None):
        """
        Cross-field validation

        Args:
            subcommand (str): Optional subcommand enabling extra checks

        Raises:
            ConfigError: When any check fails
        """
        self.soup.validate()
        h = self.cell_size
        if self.carpet.grid < 256:
            raise ConfigError(f"grid must be at least 256, got {self.carpet.grid}")
        if not self.carpet.eps_list or sorted(self.carpet.eps_list) != list(self.carpet.eps_list):
            raise ConfigError("eps_list must be a non-empty increasing list")
        for eps in self.carpet.eps_list:
            if eps < 4.0 * h - 1e-12:
                raise ConfigError(f"eps={eps} is below 4h={4.0 * h:.6g}; the box metric would be raster noise")
            if math.sqrt(self.soup.min_duration) > eps / 4.0 + 1e-12:
                raise ConfigError(
                    f"sqrt(min_duration)={math.sqrt(self.soup.min_duration):.6g} exceeds eps/4={eps / 4.0:.6g}"
                )
        if self.carpet.net_count < 16:
            raise ConfigError("net_count must be at least 16")
        if any(not 0.0 < p < 1.0 for p in self.stats.p_list):
            raise ConfigError("p_list entries must lie in (0, 1)")
        if self.stats.m0 <= 1.0:
            raise ConfigError("m0 must exceed 1")
        if subcommand == 'median' and self.stats.replicas < 50:
            raise ConfigError(f"median needs at least 50 replicas, got {self.stats.replicas}")
        if self.run.threads < 1:
            raise ConfigError("threads must be a positive integer")
        if not 0 <= self.run.seed < 2 ** 63:
            raise ConfigError("seed must be a nonnegative integer below 2**63")
        if self.run.format not in ('csv', 'json'):
            raise ConfigError(f"format must be csv or json, got {self.run.format}")
        for kappa in self.levy.kappa_list:
            if not 8.0 / 3.0 < kappa < 4.0:
                raise ConfigError(f"levy kappa must lie in (8/3, 4), got {kappa}")
        return self


def _coerce(dc_field, value):
    """Coerce TOML scalars to the dataclass field type (ints written as floats etc.)"""
    kind = dc_field.type
    if value is None:
        return None
    if kind in (float, float | None):
        if isinstance(value, bool):
            raise ValueError(f"{dc_field.name} must be a number")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
            raise ValueError(f"{dc_field.name} must be an integer")
        return int(value)
    if kind is bool:
        if not isinstance(value, bool):
            raise ValueError(f"{dc_field.name} must be a boolean")
        return value
    if kind is str:
        return str(value)
    if kind is list:
        if not isinstance(value, list):
            raise ValueError(f"{dc_field.name} must be a list")
        return list(value)
    return value


def deep_merge(base, overrides):
    """Recursively merge override dictionaries onto a copy of base"""
    merged = copy.deepcopy(base)
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def parse_overrides(blob):
    """Parse a JSON override blob from the command line"""
    if not blob:
        return {}
    try:
        data = json.loads(blob)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Override is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("Override JSON must be an object")
    return data


def load_config(path=None, overrides=None):
    """
    Load a run configuration

    Args:
        path (str): TOML file; None uses built-in defaults
        overrides (dict or list of dict): Deep-merged over the file contents

    Returns:
        RunConfig: Parsed (not yet validated) configuration
    """
    data = {}
    if path:
        try:
            with open(path, 'rb') as f:
                data = tomllib.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"Config file not found: {path}") from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"Config file does not parse: {e}") from e
    if isinstance(overrides, dict):
        overrides = [overrides]
    for blob in overrides or []:
        data = deep_merge(data, blob)
    return RunConfig.from_dict(data)


def loads_config(text):
    """Parse TOML text into a RunConfig"""
    try:
        return RunConfig.from_dict(tomllib.loads(text))
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Config text does not parse: {e}") from e
