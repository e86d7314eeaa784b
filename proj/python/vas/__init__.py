"""Python bindings for the vas video answer search library.

Structured results come back as plain dicts and lists.
"""

import json

from . import _vas
from ._vas import VasError, aggregate, child_windows, gtou, iou, sample_timestamps, segment

__all__ = [
    "VasError",
    "aggregate",
    "calibration_report",
    "child_windows",
    "generate_world",
    "gtou",
    "iou",
    "sample_timestamps",
    "segment",
    "simulate_ask",
    "simulate_bench",
]


def calibration_report(confidence, correct, bins=10, thresholds=(0.9,)):
    """ACE, MCE, Brier and calibration counts for (confidence, correct) pairs."""
    return json.loads(
        _vas.calibration_report(list(confidence), [bool(c) for c in correct], bins, list(thresholds))
    )


def generate_world(seed, mcq=False, adversarial=False, duration=3600.0):
    return json.loads(_vas.generate_world(seed, mcq, adversarial, duration))


def simulate_ask(world, agent="falconeye-pro", it_max=0):
    """Answers the world's question against mock backends.

    `world` is a dict from generate_world. Returns {"record", "result"}.
    """
    return json.loads(_vas.simulate_ask(json.dumps(world), agent, it_max))


def simulate_bench(seed, n, agent="falconeye-pro", mcq=False, it_max=0):
    """Benchmarks `agent` on worlds seed, seed + 1, ..., seed + n - 1."""
    return json.loads(_vas.simulate_bench(seed, n, agent, mcq, it_max))
