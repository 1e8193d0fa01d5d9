"""Keyed random substreams for reproducible simulation.

Every random draw in the package comes from a numpy Generator derived
from the master seed plus a tuple of small integer keys (a purpose tag
and indices such as slot id, round, client).  Distinct key tuples give
statistically independent streams regardless of evaluation order, so
chunked or resumed runs reproduce the serial sequence exactly.
"""

from __future__ import annotations

import numpy as np

# Purpose tags.  The values are part of the reproducibility contract:
# changing them changes every derived stream.
TOPOLOGY = 1
CORRELATION = 2
SLOT = 3
MONTE_CARLO = 4
CLIENT = 5
SCHEDULE = 6
DATA = 7
REP = 8
INIT = 9


def substream(seed, *keys):
    """Return a fresh Generator for the stream keyed by (seed, *keys)."""
    entropy = (int(seed),) + tuple(int(k) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def standard_complex(rng, shape):
    """Draw i.i.d. CN(0, 1) entries (unit total variance per entry)."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)
