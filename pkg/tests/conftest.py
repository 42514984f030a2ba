from __future__ import annotations

import numpy as np
import pytest

from coopres.indicators import EpisodeTrace


def build_trace(apples_per_tree, consumed, hunger_ticks=None, **kwargs) -> EpisodeTrace:
    """Assemble a structurally valid trace from per-tick arrays.

    When ``hunger_ticks`` is omitted it is derived from the consumption
    matrix (reset on every increase, +1 otherwise, starting at 0).
    """
    apples = np.asarray(apples_per_tree, dtype=np.int32)
    eaten = np.asarray(consumed, dtype=np.int64)
    h, n = eaten.shape
    if hunger_ticks is None:
        hunger = np.zeros((h, n), dtype=np.int64)
        for t in range(1, h):
            ate = eaten[t] > eaten[t - 1]
            hunger[t] = np.where(ate, 0, hunger[t - 1] + 1)
    else:
        hunger = np.asarray(hunger_ticks, dtype=np.int64)
    zeros = np.zeros(h, dtype=np.int64)
    defaults = dict(ledger_consumed=zeros, ledger_regrown=zeros,
                    ledger_event_vanished=zeros)
    defaults.update(kwargs)
    return EpisodeTrace(n_agents=n, apples_per_tree=apples, consumed=eaten,
                        hunger_ticks=hunger, **defaults)


@pytest.fixture
def flat_trace():
    """Five agents, two trees holding 30 apples total, nobody ever eats."""
    h = 20
    apples = np.tile([24, 6], (h, 1))
    consumed = np.zeros((h, 5), dtype=np.int64)
    return build_trace(apples, consumed)
