import datetime as dt

import numpy as np
import pytest

from temporal_har.events import OTHER, EventStream


def make_stream(sensors, labels=None, times=None, states=None, registry=None, start="2024-01-01 08:00:00"):
    """Build a stream from sensor names (or indices), one event per second by default."""
    if registry is None:
        registry = []
        for s in sensors:
            if isinstance(s, str) and s not in registry:
                registry.append(s)
    idx = [registry.index(s) if isinstance(s, str) else s for s in sensors]
    n = len(idx)
    if times is None:
        t0 = dt.datetime.fromisoformat(start)
        times = [t0 + dt.timedelta(seconds=i) for i in range(n)]
    if labels is None:
        labels = [OTHER] * n
    if states is None:
        states = [1] * n
    return EventStream(
        timestamps=np.array(times, dtype="datetime64[us]"),
        sensors=np.array(idx, dtype=np.int32),
        states=np.array(states, dtype=np.int8),
        labels=np.array(labels, dtype=object),
        sensor_registry=tuple(registry),
    )


@pytest.fixture
def stream_factory():
    return make_stream


# acceptance bookkeeping: criterion -> list of (check, ok, detail, seconds)
ACCEPTANCE: dict[str, list] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[crit]
        if all(c[1] == "skip" for c in checks):
            tr.write_line(f"criterion {crit}: SKIP ({checks[0][2]})")
            continue
        ok = all(c[1] is True for c in checks)
        secs = sum(c[3] for c in checks)
        details = "; ".join(f"{c[0]}: {c[2]}" for c in checks)
        tr.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'} [{secs:.1f}s] {details}")
