import json

import pytest

from provsem.errors import DataError, ParseError
from provsem.ingest import (
    FAMILIES,
    IngestStats,
    canonicalize_syscall,
    family_of,
    filter_relevant,
    load_trace,
    parse_event_line,
    write_trace,
)
from conftest import make_event, parse_event

SPEC_LINE = (
    '{"ts":1,"syscall":"open","proc_name":"ps","pid":42,"exe_path":"/bin/ps",'
    '"args":[],"fd_type":"file","fd_name":"/proc/42/stat","label":"benign",'
    '"scenario_id":"C01"}'
)


class TestParseEventLine:
    def test_spec_example(self):
        event = parse_event_line(SPEC_LINE)
        assert (event.proc_name, event.syscall, event.fd_name) == ("ps", "open", "/proc/42/stat")
        assert event.pid == 42
        assert event.label == "benign"

    def test_pid_zero_rejected(self):
        with pytest.raises(ParseError, match="pid must be positive"):
            parse_event(pid=0)

    def test_clone_without_object(self):
        event = parse_event(syscall="clone", fd_type="none", fd_name="")
        assert event.fd_name == ""

    def test_fd_name_forbidden_for_none(self):
        with pytest.raises(ParseError, match="fd_name"):
            parse_event(fd_type="none", fd_name="/x")

    def test_fd_name_required_for_file(self):
        with pytest.raises(ParseError, match="fd_name"):
            parse_event(fd_type="file", fd_name="")

    def test_addr_port_validation(self):
        event = parse_event(fd_type="ipv4", fd_name="10.0.0.1:80")
        assert event.fd_type == "ipv4"
        for bad in ("10.0.0.1", "10.0.0.1:", ":80", "10.0.0.1:99999"):
            with pytest.raises(ParseError, match="addr:port"):
                parse_event(fd_type="ipv4", fd_name=bad)

    def test_malformed_json(self):
        with pytest.raises(ParseError, match="malformed JSON"):
            parse_event_line("{nope", lineno=3)

    def test_missing_field_names_field(self):
        record = make_event()
        del record["syscall"]
        with pytest.raises(ParseError) as exc:
            parse_event_line(json.dumps(record), lineno=7)
        assert exc.value.field == "syscall"
        assert exc.value.lineno == 7

    def test_uppercase_syscall_rejected(self):
        with pytest.raises(ParseError, match="lowercase"):
            parse_event(syscall="OPEN")

    def test_bad_label(self):
        with pytest.raises(ParseError, match="label"):
            parse_event(label="evil")

    def test_unknown_keys_ignored(self):
        record = make_event()
        record["uid"] = 1000
        event = parse_event_line(json.dumps(record))
        assert event.pid == 42


class TestFamilies:
    def test_families_disjoint(self):
        seen = set()
        for family in FAMILIES:
            assert not (family.names & seen)
            seen |= family.names

    @pytest.mark.parametrize(
        "name,expected",
        [
            ("execve", "process"),
            ("openat", "file"),
            ("clone3", "process"),
            ("dup2", "file"),
            ("pwrite64", "file"),
            ("preadv2", "file"),
            ("renameat2", "file"),
            ("unlinkat", "file"),
            ("fchmodat", "file"),
            ("execveat", "process"),
            ("tgkill", "process"),
            ("accept4", "network"),
            ("listen", "network"),
            ("popen", "file"),
            ("creat", "file"),
            ("vfork", "process"),
        ],
    )
    def test_variant_families(self, name, expected):
        assert family_of(name) == expected

    @pytest.mark.parametrize("name", ["getpid", "stat", "mmap", "pipe2", "epoll_wait", "socket"])
    def test_irrelevant_syscalls(self, name):
        assert family_of(name) is None
        assert canonicalize_syscall(name) is None

    def test_canonical_names(self):
        assert canonicalize_syscall("openat") == "open"
        assert canonicalize_syscall("execve") == "execve"
        assert canonicalize_syscall("clone3") == "clone"


class TestFilterRelevant:
    def test_kept_event_unchanged(self):
        event = parse_event(syscall="execve")
        assert filter_relevant(event) is event

    def test_dropped(self):
        assert filter_relevant(parse_event(syscall="getpid")) is None

    def test_openat_kept(self):
        assert filter_relevant(parse_event(syscall="openat")) is not None

    def test_idempotent_and_label_preserving(self):
        event = parse_event(syscall="openat", label="adversarial")
        once = filter_relevant(event)
        assert filter_relevant(once) is once
        assert once.label == "adversarial"

    def test_exactly_one_family_per_kept_syscall(self):
        for syscall in ("open", "execve", "connect", "dup3", "pread64"):
            canonical = canonicalize_syscall(syscall)
            claims = [f.family for f in FAMILIES if canonical in f.names]
            assert len(claims) == 1


class TestLoadTrace:
    def test_empty_file(self, trace_file):
        events, stats = load_trace(trace_file([]))
        assert events == []
        assert stats == IngestStats(total=0, kept=0, dropped=0, errors=0)

    def test_drop_counting(self, trace_file):
        # 10 lines, 3 with syscalls outside every family
        records = [make_event(ts=i) for i in range(7)]
        records += [make_event(ts=10 + i, syscall="getpid", fd_type="none", fd_name="") for i in range(3)]
        events, stats = load_trace(trace_file(records))
        assert len(events) == 7
        assert stats == IngestStats(total=10, kept=7, dropped=3, errors=0)

    def test_malformed_line_skip_mode(self, trace_file):
        records = [make_event(ts=i) for i in range(9)]
        path = trace_file(records + ["{broken"])
        events, stats = load_trace(path, on_error="skip")
        assert len(events) == 9
        assert stats.errors == 1

    def test_malformed_line_abort_mode(self, trace_file):
        path = trace_file([make_event(), "{broken"])
        with pytest.raises(ParseError) as exc:
            load_trace(path, on_error="abort")
        assert exc.value.lineno == 2

    def test_order_and_determinism(self, trace_file):
        records = [make_event(ts=i, pid=i + 1) for i in range(20)]
        path = trace_file(records)
        first, _ = load_trace(path)
        second, _ = load_trace(path)
        assert first == second
        assert [e.ts for e in first] == sorted(e.ts for e in first)

    def test_bad_on_error_value(self, trace_file):
        with pytest.raises(DataError):
            load_trace(trace_file([]), on_error="explode")

    def test_missing_file_raises_oserror(self, tmp_path):
        with pytest.raises(OSError):
            load_trace(tmp_path / "nope.jsonl")

    def test_write_trace_round_trip(self, tmp_path, trace_file):
        records = [make_event(ts=i) for i in range(5)]
        events, _ = load_trace(trace_file(records))
        out = tmp_path / "copy.jsonl"
        assert write_trace(events, out) == 5
        again, stats = load_trace(out)
        assert again == events
        assert stats.errors == 0
