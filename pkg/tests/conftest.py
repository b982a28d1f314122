import math
from collections import defaultdict

import pytest

from edtn.scenario import BUNDLED, bundled_path, load_scenario
from edtn.sim import run
from edtn.trace import EventKind


@pytest.fixture(scope="session")
def bundled_results():
    return {name: run(load_scenario(bundled_path(name))) for name in BUNDLED}


def causality_violations(trace):
    """Trace scan: ACK needs a prior server delivery, deletion a prior ACK."""
    sent, served, acked, deleted = set(), set(), set(), set()
    problems = []
    for r in trace:
        b = r.bundle_id
        if r.event is EventKind.BUNDLE_SENT:
            sent.add(b)
        elif r.event is EventKind.SERVER_DELIVERED:
            if b not in sent:
                problems.append(("served-before-sent", b))
            served.add(b)
        elif r.event is EventKind.ACK_DELIVERED:
            if b not in served:
                problems.append(("ack-before-served", b))
            acked.add(b)
        elif r.event is EventKind.FAN_DELETE:
            if b not in acked:
                problems.append(("delete-before-ack", b))
            if b in deleted:
                problems.append(("double-delete", b))
            deleted.add(b)
    return problems


def ledger_mismatches(result, rel_tol=1e-9):
    """Per-node check that trace deltas and the store ledger tell the same story."""
    sums = defaultdict(list)
    for r in result.trace:
        sums[r.node].append(r.energy_delta)
    out = []
    for node, store in (("DM", result.dm.store), ("FAN", result.fan.store)):
        led = store.ledger
        expected = led.harvested_in - led.total_shed - led.total_discharged
        got = math.fsum(sums[node])
        if not math.isclose(got, expected, rel_tol=rel_tol, abs_tol=1e-9):
            out.append((node, "trace", got, expected))
        if not store.balances(rel_tol):
            out.append((node, "capacitor"))
    return out
