from __future__ import annotations

import math

import numpy as np


def lq_norm(field, q: float, measure=1.0) -> float:
    """``(sum measure |field|^q)^(1/q)``; ``q = inf`` gives ``max |field|``.

    ``measure`` broadcasts against ``field`` (a scalar cell volume, or cell
    volume times velocity weights).
    """
    if not q >= 1:
        raise ValueError(f"q must be >= 1, got {q}")
    a = np.abs(np.asarray(field, dtype=float))
    top = float(a.max()) if a.size else 0.0
    if math.isinf(q) or top == 0.0:
        return top
    # scaled by the maximum so that |a|^q neither underflows nor overflows
    return top * float(np.sum(np.broadcast_to(measure, a.shape) * (a / top) ** q) ** (1.0 / q))
