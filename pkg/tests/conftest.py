import json

import pytest

from provsem.ingest import parse_event_line


def make_event(**overrides):
    """A valid event dict with spec-shaped defaults, overridable per test."""
    record = {
        "ts": 1,
        "syscall": "open",
        "proc_name": "ps",
        "pid": 42,
        "exe_path": "/bin/ps",
        "args": [],
        "fd_type": "file",
        "fd_name": "/proc/42/stat",
        "label": "benign",
        "scenario_id": "C01",
    }
    record.update(overrides)
    return record


def parse_event(**overrides):
    return parse_event_line(json.dumps(make_event(**overrides)))


@pytest.fixture
def event_factory():
    return parse_event


@pytest.fixture
def trace_file(tmp_path):
    def write(records, name="trace.jsonl"):
        path = tmp_path / name
        with open(path, "w", encoding="utf-8") as handle:
            for record in records:
                if isinstance(record, str):
                    handle.write(record + "\n")
                else:
                    handle.write(json.dumps(record) + "\n")
        return path

    return write
