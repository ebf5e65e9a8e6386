"""Central finite-difference checking of reverse-mode gradients.

The numerical side is computed from forward evaluations only, so it is
independent of every backward rule it verifies.  Probe points must stay
away from non-smooth spots (spike thresholds, hard-tanh corners); the
straight-through and arctangent surrogates are excluded by design since
their backward rules are deliberately not the true derivative.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tensor


def grad_check(build: Callable[[], Tensor], params: list[Tensor], eps: float = 1e-6) -> float:
    """Return the max relative error between autodiff and finite differences.

    ``build`` must construct and return a fresh scalar loss from the
    current values of ``params`` every time it is called.
    """
    for p in params:
        p.grad = None
    loss = build()
    loss.backward()
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]

    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        ga_flat = ga.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            f_plus = float(build().data)
            flat[i] = original - eps
            f_minus = float(build().data)
            flat[i] = original
            numeric = (f_plus - f_minus) / (2.0 * eps)
            denom = max(abs(numeric), abs(float(ga_flat[i])), 1e-8)
            worst = max(worst, abs(numeric - float(ga_flat[i])) / denom)
    for p in params:
        p.grad = None
    return worst
