"""Trace ingestion: JSONL provenance records to validated events.

One event per line.  Events are validated against the RawEvent invariants,
then filtered down to the process/file/network syscall families the
detector understands; everything else is dropped but counted.
"""

import json
import logging
import re
from dataclasses import asdict, dataclass
from typing import Iterable, Optional

from .errors import DataError, ParseError

logger = logging.getLogger(__name__)

FD_TYPES = ("file", "pipe", "ipv4", "ipv6", "none")
LABELS = ("benign", "adversarial", "unknown")

_SYSCALL_RE = re.compile(r"[a-z][a-z0-9_]*")


@dataclass(frozen=True)
class RawEvent:
    """One recorded system call with its subject and object context."""

    ts: int
    syscall: str
    proc_name: str
    pid: int
    exe_path: str
    args: tuple
    fd_type: str
    fd_name: str
    label: str
    scenario_id: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["args"] = list(self.args)
        return d


@dataclass(frozen=True)
class SyscallFamily:
    family: str
    names: frozenset


# Base syscall names per family; kernel-version variants reduce onto these.
PROCESS_FAMILY = SyscallFamily(
    "process", frozenset({"fork", "vfork", "clone", "exec", "execve", "kill"})
)
FILE_FAMILY = SyscallFamily(
    "file",
    frozenset({"open", "close", "read", "write", "unlink", "dup", "rename", "chmod"}),
)
NETWORK_FAMILY = SyscallFamily("network", frozenset({"listen", "connect", "accept"}))

FAMILIES = (PROCESS_FAMILY, FILE_FAMILY, NETWORK_FAMILY)

_FAMILY_BY_NAME = {
    name: fam.family for fam in FAMILIES for name in fam.names
}

# Irregular variants the suffix/prefix rules cannot reduce.
SYSCALL_ALIASES = {
    "creat": "open",
    "fexecve": "execve",
    "fchmod": "chmod",
    "readv": "read",
    "writev": "write",
    "tkill": "kill",
    "tgkill": "kill",
}


def canonicalize_syscall(name: str) -> Optional[str]:
    """Reduce a syscall variant to its base family member, or None.

    Reduction repeatedly applies: alias lookup, trailing-digit strip
    (clone3, dup2), '*at' suffix strip (openat, renameat), 'p' prefix
    strip (pread64, popen), stopping as soon as a family member appears.
    """
    seen = set()
    cur = name
    while cur and cur not in seen:
        seen.add(cur)
        if cur in _FAMILY_BY_NAME:
            return cur
        if cur in SYSCALL_ALIASES:
            cur = SYSCALL_ALIASES[cur]
            continue
        stripped = cur.rstrip("0123456789")
        if stripped != cur:
            cur = stripped
            continue
        if cur.endswith("at") and len(cur) > 2:
            cur = cur[:-2]
            continue
        if cur.startswith("p") and len(cur) > 1:
            cur = cur[1:]
            continue
        break
    return cur if cur in _FAMILY_BY_NAME else None


def family_of(syscall: str) -> Optional[str]:
    """Family name ('process', 'file', 'network') for a syscall or variant."""
    canonical = canonicalize_syscall(syscall)
    return _FAMILY_BY_NAME.get(canonical) if canonical else None


_REQUIRED_FIELDS = (
    "ts",
    "syscall",
    "proc_name",
    "pid",
    "exe_path",
    "args",
    "fd_type",
    "fd_name",
    "label",
    "scenario_id",
)


def _require_str(record, key, lineno):
    value = record[key]
    if not isinstance(value, str):
        raise ParseError("%s must be a string" % key, lineno, key)
    return value


def _check_addr_port(value: str) -> bool:
    addr, sep, port = value.rpartition(":")
    if not sep or not addr:
        return False
    return port.isdigit() and 0 <= int(port) <= 65535


def parse_event_line(line: str, lineno: int = 0) -> RawEvent:
    """Parse one JSONL record into a RawEvent, enforcing all invariants."""
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError("malformed JSON: %s" % exc.msg, lineno) from exc
    if not isinstance(record, dict):
        raise ParseError("record must be a JSON object", lineno)

    for key in _REQUIRED_FIELDS:
        if key not in record:
            raise ParseError("missing required field", lineno, key)

    ts = record["ts"]
    if isinstance(ts, bool) or not isinstance(ts, int):
        raise ParseError("ts must be an integer", lineno, "ts")

    syscall = _require_str(record, "syscall", lineno)
    if not _SYSCALL_RE.fullmatch(syscall):
        raise ParseError(
            "syscall must be non-empty lowercase ASCII", lineno, "syscall"
        )

    pid = record["pid"]
    if isinstance(pid, bool) or not isinstance(pid, int) or pid <= 0:
        raise ParseError("pid must be positive", lineno, "pid")

    proc_name = _require_str(record, "proc_name", lineno)
    if not proc_name:
        raise ParseError("proc_name must be non-empty", lineno, "proc_name")

    exe_path = _require_str(record, "exe_path", lineno)

    args = record["args"]
    if not isinstance(args, list) or not all(isinstance(a, str) for a in args):
        raise ParseError("args must be a list of strings", lineno, "args")

    fd_type = _require_str(record, "fd_type", lineno)
    if fd_type not in FD_TYPES:
        raise ParseError("fd_type must be one of %s" % (FD_TYPES,), lineno, "fd_type")

    fd_name = _require_str(record, "fd_name", lineno)
    if fd_type == "none" and fd_name:
        raise ParseError("fd_name must be empty when fd_type is none", lineno, "fd_name")
    if fd_type in ("ipv4", "ipv6") and not _check_addr_port(fd_name):
        raise ParseError("fd_name must look like addr:port", lineno, "fd_name")
    if fd_type == "file" and not fd_name:
        raise ParseError("fd_name required when fd_type is file", lineno, "fd_name")

    label = _require_str(record, "label", lineno)
    if label not in LABELS:
        raise ParseError("label must be one of %s" % (LABELS,), lineno, "label")

    scenario_id = _require_str(record, "scenario_id", lineno)

    return RawEvent(
        ts=ts,
        syscall=syscall,
        proc_name=proc_name,
        pid=pid,
        exe_path=exe_path,
        args=tuple(args),
        fd_type=fd_type,
        fd_name=fd_name,
        label=label,
        scenario_id=scenario_id,
    )


def filter_relevant(event: RawEvent) -> Optional[RawEvent]:
    """The event unchanged when its syscall maps into a family, else None."""
    return event if family_of(event.syscall) else None


@dataclass
class IngestStats:
    """Line accounting for one trace load; blank lines are ignored."""

    total: int = 0
    kept: int = 0
    dropped: int = 0
    errors: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def load_trace(path, on_error: str = "skip"):
    """Load a JSONL trace.

    Returns (events, stats) with events in file order.  on_error='skip'
    counts bad lines and keeps going; 'abort' re-raises the first
    ParseError.  I/O failures always propagate.
    """
    if on_error not in ("skip", "abort"):
        raise DataError("on_error must be 'skip' or 'abort'")
    events = []
    stats = IngestStats()
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            stripped = line.strip()
            if not stripped:
                continue
            stats.total += 1
            try:
                event = parse_event_line(stripped, lineno)
            except ParseError as exc:
                if on_error == "abort":
                    raise
                stats.errors += 1
                logger.warning("%s: skipped %s", path, exc)
                continue
            if filter_relevant(event) is None:
                stats.dropped += 1
                continue
            stats.kept += 1
            events.append(event)
    return events, stats


def write_trace(events: Iterable, path) -> int:
    """Serialize events (RawEvent or plain dicts) as JSONL; returns the count."""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for event in events:
            record = event.to_dict() if isinstance(event, RawEvent) else event
            handle.write(json.dumps(record, separators=(",", ":")) + "\n")
            count += 1
    return count
