"""Event-to-sentence conversion.

Each kept event becomes a five-slot sentence: subject, predicate, optional
subject-complement tokens, object, optional object-complement tokens.
Subjects that are shells, interpreters, or single-software VMs get their
non-flag arguments appended as a complement, since the bare executable
name says little about what actually ran.  All tokens are normalized on
the way in, so no volatile name survives into a rendered sentence.
"""

import enum
from dataclasses import dataclass

from . import normalize as norm
from .errors import ConfigError, DataError
from .ingest import RawEvent, canonicalize_syscall


class SubjectKind(enum.Enum):
    PLAIN = "plain"
    SCRIPTING_SHELL = "scripting_shell"
    INTERPRETER = "interpreter"
    VM = "vm"


_DEFAULT_SHELLS = frozenset({"bash", "sh", "csh", "zsh", "dash"})
_DEFAULT_INTERPRETERS = frozenset({"python", "python3", "perl", "ruby", "node"})
_DEFAULT_VMS = frozenset({"java", "scala", "kotlin"})

#: Object-complement policies: none, or the object's parent directory when
#: the object itself was replaced by a placeholder.
OBJECT_COMPLEMENT_MODES = ("none", "parent-dir")


@dataclass(frozen=True)
class SemioticsConfig:
    shells: frozenset = _DEFAULT_SHELLS
    interpreters: frozenset = _DEFAULT_INTERPRETERS
    vms: frozenset = _DEFAULT_VMS
    max_complement_tokens: int = 6
    object_complement: str = "none"

    def __post_init__(self):
        if self.max_complement_tokens < 0:
            raise ConfigError("max_complement_tokens must be >= 0")
        if self.object_complement not in OBJECT_COMPLEMENT_MODES:
            raise ConfigError(
                "object_complement must be one of %s" % (OBJECT_COMPLEMENT_MODES,)
            )

    @classmethod
    def from_dict(cls, raw: dict) -> "SemioticsConfig":
        known = {
            "shells",
            "interpreters",
            "vms",
            "max_complement_tokens",
            "object_complement",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError("unknown semiotics keys: %s" % ", ".join(sorted(unknown)))
        kwargs = dict(raw)
        for key in ("shells", "interpreters", "vms"):
            if key in kwargs:
                kwargs[key] = frozenset(kwargs[key])
        return cls(**kwargs)


DEFAULT_SEMIOTICS = SemioticsConfig()


@dataclass(frozen=True)
class SentenceRecord:
    """The five-slot textual abstraction of one event."""

    subject: str
    predicate: str
    subject_complement: tuple
    object: str
    object_complement: tuple
    label: str
    scenario_id: str

    def __post_init__(self):
        for name in ("subject", "predicate", "object"):
            value = getattr(self, name)
            if not value or any(ch.isspace() for ch in value):
                raise DataError("%s must be a non-empty whitespace-free token" % name)
        for tok in self.subject_complement + self.object_complement:
            if not tok or any(ch.isspace() for ch in tok):
                raise DataError("complement tokens must be whitespace-free")

    def tokens(self) -> tuple:
        return (
            self.subject,
            self.predicate,
            *self.subject_complement,
            self.object,
            *self.object_complement,
        )


def _sanitize(text: str) -> str:
    # Tokens are space-delimited in rendered sentences, so embedded
    # whitespace must not survive.
    return "_".join(text.split())


def _basename(path: str) -> str:
    return path.replace("\\", "/").rstrip("/").rsplit("/", 1)[-1]


def classify_subject(exe_path: str, cfg: SemioticsConfig = DEFAULT_SEMIOTICS) -> SubjectKind:
    """Classify an executable by its base name against the configured lists."""
    base = _basename(exe_path)
    if base in cfg.shells:
        return SubjectKind.SCRIPTING_SHELL
    if base in cfg.interpreters:
        return SubjectKind.INTERPRETER
    if base in cfg.vms:
        return SubjectKind.VM
    return SubjectKind.PLAIN


def build_subject_complement(
    kind: SubjectKind,
    args,
    cfg: SemioticsConfig = DEFAULT_SEMIOTICS,
    norm_cfg: norm.NormalizerConfig = norm.DEFAULT_NORMALIZER,
) -> tuple:
    """Normalized non-flag arguments, in order, for non-plain subjects.

    Flags are anything starting with '-'; combined '-x=value' arguments
    are dropped whole.  The result is capped to keep pathological command
    lines from dominating a sentence.
    """
    if kind is SubjectKind.PLAIN:
        return ()
    out = []
    for arg in args:
        if arg.startswith("-"):
            continue
        token = _sanitize(arg)
        if not token:
            continue
        out.append(norm.normalize_token(token, norm_cfg))
        if len(out) >= cfg.max_complement_tokens:
            break
    return tuple(out)


def build_sentence(
    event: RawEvent,
    cfg: SemioticsConfig = DEFAULT_SEMIOTICS,
    norm_cfg: norm.NormalizerConfig = norm.DEFAULT_NORMALIZER,
) -> SentenceRecord:
    """Convert one filtered event into its sentence record."""
    subject = _sanitize(_basename(event.exe_path)) or _sanitize(event.proc_name)
    predicate = canonicalize_syscall(event.syscall) or event.syscall

    if event.fd_type == "none":
        obj, rule = norm.NA, norm.RULE_NONE
    elif event.fd_type == "pipe":
        obj, rule = norm.PIPE, norm.RULE_PIPE
    else:
        obj, rule = norm.normalize_token_explain(_sanitize(event.fd_name), norm_cfg)

    object_complement = ()
    if (
        cfg.object_complement == "parent-dir"
        and obj in (norm.TMP, norm.PIPE, norm.HASH)
        and rule != norm.RULE_PLACEHOLDER
    ):
        parent = _sanitize(event.fd_name).replace("\\", "/").rstrip("/").rpartition("/")[0]
        if parent and parent != "/":
            parent_token = norm.normalize_token(parent, norm_cfg)
            if parent_token not in norm.PLACEHOLDERS:
                object_complement = (parent_token,)

    kind = classify_subject(event.exe_path, cfg)
    return SentenceRecord(
        subject=subject,
        predicate=predicate,
        subject_complement=build_subject_complement(kind, event.args, cfg, norm_cfg),
        object=obj,
        object_complement=object_complement,
        label=event.label,
        scenario_id=event.scenario_id,
    )


def render_sentence(record: SentenceRecord) -> str:
    """Slots joined by single spaces, in slot order."""
    return " ".join(record.tokens())


def parse_sentence(
    line: str,
    label: str = "unknown",
    scenario_id: str = "",
    cfg: SemioticsConfig = DEFAULT_SEMIOTICS,
) -> SentenceRecord:
    """Inverse of render_sentence.

    With object complements disabled (the default) the grammar is
    unambiguous: the object is the last token.  In parent-dir mode a
    trailing non-placeholder token after a placeholder object is read as
    the object complement, which is exactly how build_sentence emits it.
    """
    tokens = line.split()
    if len(tokens) < 3:
        raise DataError("a sentence needs at least subject, predicate and object")
    subject, predicate = tokens[0], tokens[1]
    rest = tokens[2:]
    if (
        cfg.object_complement == "parent-dir"
        and len(rest) >= 2
        and rest[-2] in (norm.TMP, norm.PIPE, norm.HASH)
        and rest[-1] not in norm.PLACEHOLDERS
    ):
        obj, complement, sc = rest[-2], (rest[-1],), tuple(rest[:-2])
    else:
        obj, complement, sc = rest[-1], (), tuple(rest[:-1])
    return SentenceRecord(
        subject=subject,
        predicate=predicate,
        subject_complement=sc,
        object=obj,
        object_complement=complement,
        label=label,
        scenario_id=scenario_id,
    )


def corpus_line(record: SentenceRecord) -> str:
    """One TSV corpus line: label, scenario id, rendered sentence."""
    return "%s\t%s\t%s" % (record.label, record.scenario_id, render_sentence(record))


def write_corpus(records, path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(corpus_line(record) + "\n")
            count += 1
    return count


def read_corpus(path):
    """Yield (label, scenario_id, sentence) rows from a corpus TSV."""
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError("corpus line %d is not a 3-column TSV row" % lineno)
            rows.append((parts[0], parts[1], parts[2]))
    return rows
