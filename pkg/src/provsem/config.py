"""Application configuration: TOML files plus environment overrides.

One optional app-level TOML names the per-stage config files and global
knobs; each stage file holds one section of plain key/value pairs.  Any
key can also be overridden through PROVSEM_* environment variables
(PROVSEM_SEED, or PROVSEM_<SECTION>__<KEY> for section keys).
"""

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib

from .embedding import EmbedConfig
from .errors import ConfigError
from .normalize import NormalizerConfig
from .semiotics import SemioticsConfig
from .siamese import TrainConfig

ENV_PREFIX = "PROVSEM_"


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    except FileNotFoundError:
        raise ConfigError("config file not found: %s" % path) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("unreadable TOML in %s: %s" % (path, exc)) from exc


def _coerce(text, like):
    if isinstance(like, bool):
        return text.lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    if isinstance(like, (list, tuple)):
        return [t for t in text.split(",") if t]
    return text


def _env_overrides(section: str, values: dict) -> dict:
    out = dict(values)
    for key, current in list(out.items()):
        env_key = "%s%s__%s" % (ENV_PREFIX, section.upper(), key.upper())
        if env_key in os.environ:
            out[key] = _coerce(os.environ[env_key], current)
    return out


@dataclass
class AppConfig:
    """Merged configuration for one CLI invocation."""

    seed: int = 0
    verbosity: int = 0
    on_error: str = "skip"
    semiotics: SemioticsConfig = field(default_factory=SemioticsConfig)
    normalizer: NormalizerConfig = field(default_factory=NormalizerConfig)
    embed: EmbedConfig = field(default_factory=EmbedConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    _SECTIONS = {
        "semiotics": SemioticsConfig,
        "normalizer": NormalizerConfig,
        "embed": EmbedConfig,
        "train": TrainConfig,
    }

    @classmethod
    def load(cls, path=None) -> "AppConfig":
        """Build the config from an optional TOML file plus environment.

        The app file may hold [provsem] globals, inline sections, or
        `<section> = "path.toml"` references to stage files; referenced
        files must exist at load time.
        """
        raw = {}
        base = Path(".")
        if path is not None:
            raw = load_toml(path)
            base = Path(path).parent

        top = raw.get("provsem", {})
        seed = int(os.environ.get(ENV_PREFIX + "SEED", top.get("seed", 0)))
        verbosity = int(os.environ.get(ENV_PREFIX + "VERBOSITY", top.get("verbosity", 0)))
        on_error = os.environ.get(ENV_PREFIX + "ON_ERROR", top.get("on_error", "skip"))
        if on_error not in ("skip", "abort"):
            raise ConfigError("on_error must be 'skip' or 'abort'")

        kwargs = {}
        for section, cfg_cls in cls._SECTIONS.items():
            value = raw.get(section, {})
            if isinstance(value, str):
                ref = base / value
                if not ref.exists():
                    raise ConfigError(
                        "referenced %s config does not exist: %s" % (section, ref)
                    )
                value = load_toml(ref).get(section, load_toml(ref))
            if not isinstance(value, dict):
                raise ConfigError("section %s must be a table or a file path" % section)
            value = _env_overrides(section, value)
            try:
                kwargs[section] = (
                    cfg_cls.from_dict(value) if hasattr(cfg_cls, "from_dict") else cfg_cls(**value)
                )
            except TypeError as exc:
                raise ConfigError("bad %s config: %s" % (section, exc)) from exc

        return cls(
            seed=seed,
            verbosity=verbosity,
            on_error=on_error,
            **kwargs,
        )

    def dump(self) -> str:
        """Machine-readable JSON view of the merged configuration."""
        def plain(obj):
            out = {}
            for key, value in vars(obj).items():
                if isinstance(value, frozenset):
                    value = sorted(value)
                elif isinstance(value, tuple):
                    value = list(value)
                out[key] = value
            return out

        return json.dumps(
            {
                "seed": self.seed,
                "verbosity": self.verbosity,
                "on_error": self.on_error,
                "semiotics": plain(self.semiotics),
                "normalizer": plain(self.normalizer),
                "embed": plain(self.embed),
                "train": plain(self.train),
            },
            indent=2,
            sort_keys=True,
        )
