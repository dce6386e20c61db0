"""Counter-keyed random streams.

Every trial owns independent Philox streams derived from
``(seed, trial, stream)``. Draws inside a stream are laid out step-major,
sensor-minor, so the value used for sensor ``n`` at step ``k`` is a pure
function of ``(seed, trial, n, k)`` no matter how the work is chunked or
which worker runs the trial.
"""

import numpy as np

#: stream identifiers; never renumber, outputs depend on them
SIGNAL = 0
BRIDGE = 1
RENEWAL = 2
AUX = 3


def stream(seed, trial, kind=SIGNAL):
    """Return the generator for one ``(seed, trial, kind)`` key."""
    ss = np.random.SeedSequence([int(seed), int(trial), int(kind)])
    key = ss.generate_state(2, dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
