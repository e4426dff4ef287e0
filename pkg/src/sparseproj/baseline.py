"""Hoyer's original alternating projection scheme, kept for comparison.

Negative entries are clamped by the orthant projection ``max(s, 0)`` and
stay fixed at zero; the remaining mass is moved back onto the hyperplane
and the restricted hypersphere. The only difference to
:func:`sparseproj.core.project_nonneg` is orthant clamping versus the
simplex projection.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import NEG_TOL, _as_vector, _check_dim, _circle


@dataclass
class BaselineTrace:
    iterations: int = 1
    support_per_iteration: list = field(default_factory=list)


def hoyer_project(x, t):
    """Return ``(point, BaselineTrace)`` for the non-negative target set of ``t``."""
    x = _as_vector(x)
    _check_dim(x, t)
    n = t.n
    lam1, lam2 = t.lambda1, t.lambda2
    tol = NEG_TOL * lam2
    # barycenter ties go to the entry ranked last, as in project_nonneg
    order = np.argsort(-x, kind="stable")

    s = np.zeros(n)
    s[order] = _circle(x[order] + (lam1 - x.sum()) / n, lam1, lam2)[0]
    trace = BaselineTrace(1, [int(np.count_nonzero(s))])

    alive = np.ones(n, dtype=bool)
    while s.min() < -tol:
        alive &= s >= -tol
        s[~alive] = 0.0
        idx = order[alive[order]]
        v = s[idx]
        v += (lam1 - v.sum()) / len(v)
        s[idx] = _circle(v, lam1, lam2)[0]
        trace.iterations += 1
        trace.support_per_iteration.append(int(np.count_nonzero(s)))
    np.maximum(s, 0.0, out=s)
    return s, trace
