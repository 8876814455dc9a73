"""Token normalization for non-representative names.

Volatile names (temp files, OS internal state, pipes, hash-like
identifiers) do not recur across runs, so they are collapsed to the
placeholders ``<TMP>``, ``<PIPE>`` and ``<HASH>`` before any learning
happens.  Stable names pass through unchanged.  Rules fire in a fixed
order: temp/internal location or temp-marker name, then pipe designator,
then hash-like identifier, then identity.
"""

import re
from dataclasses import dataclass

from .errors import ConfigError

TMP = "<TMP>"
PIPE = "<PIPE>"
HASH = "<HASH>"
NA = "<NA>"

#: Every token a normalizer may introduce (NA comes from sentence building).
PLACEHOLDERS = frozenset({TMP, PIPE, HASH, NA})

#: Rule identifiers reported by normalize_token_explain, in firing order.
RULE_PLACEHOLDER = "placeholder"
RULE_TEMP = "temp-path"
RULE_PIPE = "pipe"
RULE_HASH = "hash-like"
RULE_NONE = "verbatim"

_UUID_RE = re.compile(
    r"[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}"
)

_DEFAULT_TEMP_DIRS = (
    "/tmp/",
    "/var/tmp/",
    "/run/",
    "/dev/",
    "/proc/",
    "/sys/",
    # Windows equivalents; inert on Unix traces but matched separator-agnostically.
    "c:/windows/temp/",
    "c:/users/default/appdata/local/temp/",
)

_DEFAULT_STABLE_EXTENSIONS = frozenset(
    {
        ".conf",
        ".jar",
        ".so",
        ".log",
        ".txt",
        ".json",
        ".xml",
        ".yaml",
        ".yml",
        ".py",
        ".sh",
        ".js",
        ".html",
        ".css",
        ".service",
    }
)


@dataclass(frozen=True)
class NormalizerConfig:
    """Tunables behind the normalization rules.

    temp_dirs must be absolute and '/'-terminated; they cover both
    designated temp locations and OS internal-state directories, all of
    which normalize to the same <TMP> placeholder.
    """

    temp_dirs: tuple = _DEFAULT_TEMP_DIRS
    temp_name_prefixes: tuple = (".tmp",)
    temp_name_extensions: tuple = (".tmp",)
    stable_extensions: frozenset = _DEFAULT_STABLE_EXTENSIONS
    hash_min_len: int = 16
    hash_transition_ratio: float = 0.25
    hash_min_classes: int = 2

    def __post_init__(self):
        for prefix in self.temp_dirs:
            if not prefix.endswith("/"):
                raise ConfigError("temp dir prefix %r must end with '/'" % prefix)
            if not (prefix.startswith("/") or _WIN_DRIVE_RE.match(prefix)):
                raise ConfigError("temp dir prefix %r must be absolute" % prefix)
        if not 0.0 < self.hash_transition_ratio <= 1.0:
            raise ConfigError("hash_transition_ratio must be in (0, 1]")
        if self.hash_min_len < 1 or self.hash_min_classes < 1:
            raise ConfigError("hash thresholds must be positive")

    @classmethod
    def from_dict(cls, raw: dict) -> "NormalizerConfig":
        known = {
            "temp_dirs",
            "temp_name_prefixes",
            "temp_name_extensions",
            "stable_extensions",
            "hash_min_len",
            "hash_transition_ratio",
            "hash_min_classes",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError("unknown normalizer keys: %s" % ", ".join(sorted(unknown)))
        kwargs = dict(raw)
        for key in ("temp_dirs", "temp_name_prefixes", "temp_name_extensions"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        if "stable_extensions" in kwargs:
            kwargs["stable_extensions"] = frozenset(kwargs["stable_extensions"])
        return cls(**kwargs)


_WIN_DRIVE_RE = re.compile(r"^[a-zA-Z]:/")

DEFAULT_NORMALIZER = NormalizerConfig()


def _canon(token: str) -> str:
    # Windows recorders emit backslashes; treat the separators uniformly.
    return token.replace("\\", "/")


def _basename(token: str) -> str:
    canon = _canon(token).rstrip("/")
    return canon.rsplit("/", 1)[-1] if "/" in canon else canon


def _extension_chain(name: str):
    parts = name.split(".")
    return ["." + part for part in parts[1:]]


def is_temp_path(token: str, cfg: NormalizerConfig = DEFAULT_NORMALIZER) -> bool:
    """True for tokens under a temp/internal-state directory or with a temp marker."""
    canon = _canon(token)
    probe = canon if canon.endswith("/") else canon + "/"
    for prefix in cfg.temp_dirs:
        if _WIN_DRIVE_RE.match(prefix):
            if probe.lower().startswith(prefix.lower()):
                return True
        elif probe.startswith(prefix):
            return True
    base = _basename(token)
    if any(base.startswith(p) for p in cfg.temp_name_prefixes):
        return True
    return any(base.endswith(ext) for ext in cfg.temp_name_extensions)


def is_pipe(token: str) -> bool:
    """True for recorder pipe designators such as ``pipe:[184520]``."""
    return token.startswith("pipe:")


def has_stable_extension(token: str, cfg: NormalizerConfig = DEFAULT_NORMALIZER) -> bool:
    """True when any suffix in the chain is a well-known persistent extension.

    The whole chain is inspected so versioned names like libssl.so.1.1
    still count as .so files.
    """
    return any(ext in cfg.stable_extensions for ext in _extension_chain(_basename(token)))


def _char_class(ch: str) -> int:
    if ch.isalpha():
        return 0
    if ch.isdigit():
        return 1
    return 2


def is_hash_like(token: str, cfg: NormalizerConfig = DEFAULT_NORMALIZER) -> bool:
    """Detect machine-generated identifiers that will not recur across runs.

    Evaluated on the final path component.  Names with well-known stable
    extensions are never hash-like.  A UUID-shaped name always is; other
    names qualify when they are long enough, mix at least
    ``hash_min_classes`` character classes, and switch class at a rate of
    ``hash_transition_ratio`` or more.
    """
    if not token:
        raise ValueError("token must be non-empty")
    base = _basename(token)
    if not base:
        return False
    if has_stable_extension(base, cfg):
        return False
    if _UUID_RE.fullmatch(base):
        return True
    if len(base) < cfg.hash_min_len:
        return False
    classes = [_char_class(ch) for ch in base]
    if len(set(classes)) < cfg.hash_min_classes:
        return False
    transitions = sum(1 for a, b in zip(classes, classes[1:]) if a != b)
    return transitions / (len(base) - 1) >= cfg.hash_transition_ratio


def normalize_token_explain(token: str, cfg: NormalizerConfig = DEFAULT_NORMALIZER):
    """Normalize one token and report which rule fired.

    Returns (normalized token, rule id).  Total over non-empty,
    whitespace-free tokens; placeholders map to themselves.
    """
    if not token:
        raise ValueError("token must be non-empty")
    if token in PLACEHOLDERS:
        return token, RULE_PLACEHOLDER
    if is_temp_path(token, cfg):
        return TMP, RULE_TEMP
    if is_pipe(token):
        return PIPE, RULE_PIPE
    if is_hash_like(token, cfg):
        return HASH, RULE_HASH
    return token, RULE_NONE


def normalize_token(token: str, cfg: NormalizerConfig = DEFAULT_NORMALIZER) -> str:
    """Apply the normalization rules in order; unmatched tokens pass through."""
    return normalize_token_explain(token, cfg)[0]
