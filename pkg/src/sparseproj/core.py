"""Euclidean projections onto sets of prescribed Hoyer sparseness.

The non-negative target set is ``D = {s >= 0 : ||s||_1 = lambda1, ||s||_2 = lambda2}``,
the unrestricted one drops the sign constraint. Projections are computed by
alternating between the L1 hyperplane, the hypercircle where hyperplane and
L2 sphere meet, and the scaled canonical simplex. The input is sorted once, so
the working vector stays sorted and its support is always a contiguous prefix.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

# Loop guard: an entry is negative iff it is below -NEG_TOL * lambda2.
NEG_TOL = 1e-12
# Separator collisions closer than this (relative to lambda2) mark a kink.
COLLISION_TOL = 1e-10
# Centered vectors shorter than this (relative) are treated as the barycenter.
_BARYCENTER_RTOL = 8 * np.finfo(np.float64).eps


class InfeasibleSupportError(ValueError):
    """Raised when a support is too small to carry the target norms."""


@dataclass(frozen=True)
class SparseTarget:
    """Target norms ``lambda1`` (L1) and ``lambda2`` (L2) in dimension ``n``."""

    n: int
    lambda1: float
    lambda2: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"dimension n must be an integer >= 2, got {self.n}")
        if not (self.lambda1 > 0 and self.lambda2 > 0):
            raise ValueError("target norms must be positive")
        slack = 1e-12 * self.lambda2
        if self.lambda1 < self.lambda2 - slack:
            raise ValueError(f"lambda1={self.lambda1} < lambda2={self.lambda2}")
        if self.lambda1 > math.sqrt(self.n) * self.lambda2 + slack:
            raise ValueError(
                f"lambda1={self.lambda1} > sqrt(n)*lambda2={math.sqrt(self.n) * self.lambda2}"
            )
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "lambda1", float(self.lambda1))
        object.__setattr__(self, "lambda2", float(self.lambda2))

    @property
    def sigma(self):
        """Sparseness shared by every point of the target set."""
        rn = math.sqrt(self.n)
        return (rn - self.lambda1 / self.lambda2) / (rn - 1)

    def rho(self, d=None):
        """Squared radius of the hypercircle restricted to ``d`` coordinates."""
        d = self.n if d is None else d
        return self.lambda2**2 - self.lambda1**2 / d

    def barycenter(self, d=None):
        d = self.n if d is None else d
        return np.full(d, self.lambda1 / d)

    def min_support(self):
        """Smallest support size with a non-empty restricted hypercircle."""
        return max(1, math.ceil((self.lambda1 / self.lambda2) ** 2 - 1e-9))


@dataclass(frozen=True)
class IterationRecord:
    """Bookkeeping of one hypercircle projection.

    ``r_head`` holds the first ``N`` entries of the centered vector that was
    rescaled, where ``N`` is the support of the final result.
    """

    d: int
    delta: float
    r_head: np.ndarray
    r_sqnorm: float

    @property
    def alpha(self):
        return self.delta / self.r_sqnorm


@dataclass(frozen=True)
class ProjectionTrace:
    permutation: np.ndarray
    signs: np.ndarray
    iterations: tuple
    final_support: int
    degenerate: bool = False
    # Smallest distance of any working entry to a separator or to zero.
    margin: float = math.inf
    lambda2: float = 1.0

    @property
    def n(self):
        return len(self.permutation)

    @property
    def differentiable(self):
        return not self.degenerate and self.margin > COLLISION_TOL * self.lambda2


@dataclass(frozen=True)
class ProjectionResult:
    point: np.ndarray
    trace: ProjectionTrace
    unique: bool = True


def _as_vector(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {x.shape}")
    return x


def _check_dim(x, t):
    if len(x) != t.n:
        raise ValueError(f"vector has length {len(x)} but target dimension is {t.n}")


def sigma(x):
    """Hoyer's sparseness of a nonzero vector, in [0, 1]."""
    x = _as_vector(x)
    n = x.size
    if n < 2:
        raise ValueError("sparseness needs at least two entries")
    l2 = np.linalg.norm(x)
    if l2 == 0:
        raise ValueError("sparseness of the zero vector is undefined")
    rn = math.sqrt(n)
    return float((rn - np.abs(x).sum() / l2) / (rn - 1))


def target_for_sigma(n, sigma_star):
    """Target norms with ``lambda2 = 1`` whose set has sparseness ``sigma_star``."""
    if not 0 < sigma_star < 1:
        raise ValueError(f"sigma_star must lie in (0, 1), got {sigma_star}")
    if n < 2:
        raise ValueError("n must be >= 2")
    rn = math.sqrt(n)
    return SparseTarget(n, rn - sigma_star * (rn - 1), 1.0)


def proj_hyperplane(x, t):
    """Projection onto ``{a : sum(a) = lambda1}``."""
    x = _as_vector(x)
    _check_dim(x, t)
    return x + (t.lambda1 - x.sum()) / len(x)


def _circle(y, lambda1, lambda2):
    """Project ``y`` (summing to ``lambda1``) onto the hypercircle of its length.

    Returns ``(point, delta, r, phi, degenerate)`` with ``r`` the centered
    input and ``phi = ||r||^2``. A sorted input yields a sorted output.
    """
    d = len(y)
    rho = lambda2**2 - lambda1**2 / d
    if rho < -NEG_TOL * lambda2**2:
        raise InfeasibleSupportError(
            f"support of size {d} cannot carry lambda1={lambda1}, lambda2={lambda2}"
        )
    rho = max(rho, 0.0)
    r = y - y.mean()
    r -= r.mean()
    phi = float(r @ r)
    scale = np.abs(y).max() if d else 0.0
    if math.sqrt(phi) <= _BARYCENTER_RTOL * math.sqrt(d) * scale:
        r[:] = 0.0
        phi = 0.0
    if phi == 0.0:
        out = np.full(d, lambda1 / d)
        if rho == 0.0:
            return out, 0.0, r, phi, False
        out[: d - 1] += math.sqrt(rho) / math.sqrt(d * (d - 1))
        out[d - 1] = lambda1 / d - math.sqrt(rho * (d - 1)) / math.sqrt(d)
        return out, math.nan, r, phi, True
    delta = math.sqrt(rho / phi)
    return lambda1 / d + delta * r, delta, r, phi, False


def proj_hypercircle(y, t, support=None):
    """Projection of a point of the hyperplane onto the hypercircle.

    ``support`` selects the coordinates allowed to be nonzero (default: all);
    the other entries of ``y`` must already vanish. Returns
    ``(point, delta, degenerate)``; when ``y`` is the barycenter the point is
    the sorted representative with the odd entry in the last support slot.
    """
    y = _as_vector(y)
    _check_dim(y, t)
    idx = np.arange(t.n) if support is None else np.flatnonzero(_support_mask(support, t.n))
    vals, delta, _, _, degenerate = _circle(y[idx], t.lambda1, t.lambda2)
    out = np.zeros(t.n)
    out[idx] = vals
    return out, delta, degenerate


def _support_mask(support, n):
    support = np.asarray(support)
    if support.dtype == bool:
        return support
    mask = np.zeros(n, dtype=bool)
    mask[support] = True
    return mask


def simplex_separator(y, lambda1):
    """Separator ``t_hat`` and support ``d`` of the simplex projection.

    ``y`` must be sorted in descending order. The projection onto
    ``{a >= 0 : sum(a) = lambda1}`` is ``max(y - t_hat, 0)`` and has exactly
    ``d`` nonzero entries.
    """
    y = _as_vector(y)
    n = len(y)
    t = (np.cumsum(y) - lambda1) / np.arange(1, n + 1)
    hits = np.flatnonzero(t[:-1] >= y[1:])
    d = int(hits[0]) + 1 if hits.size else n
    return float(t[d - 1]), d


def project_nonneg(x, t):
    """Projection onto the non-negative set of prescribed L1 and L2 norm."""
    x = _as_vector(x)
    _check_dim(x, t)
    n = t.n
    lam1, lam2 = t.lambda1, t.lambda2
    tol = NEG_TOL * lam2

    perm = np.argsort(-x, kind="stable")
    y = x[perm]
    y = y + (lam1 - y.sum()) / n

    records = []
    y, delta, r, phi, degenerate = _circle(y, lam1, lam2)
    records.append((n, delta, r, phi))

    d = n
    margin = math.inf
    while y[d - 1] < -tol:
        t_hat, d_new = simplex_separator(y[:d], lam1)
        margin = min(margin, float(np.min(np.abs(y[:d] - t_hat))))
        vals, delta, r, phi, degen = _circle(y[:d_new] - t_hat, lam1, lam2)
        y[:d_new] = vals
        y[d_new:d] = 0.0
        d = d_new
        degenerate |= degen
        records.append((d, delta, r, phi))

    margin = min(margin, abs(float(y[d - 1])))
    np.maximum(y[:d], 0.0, out=y[:d])
    support = int(np.count_nonzero(y[:d]))

    point = np.zeros(n)
    point[perm[:d]] = y[:d]
    iterations = tuple(
        IterationRecord(di, de, ri[:support].copy(), ph) for di, de, ri, ph in records
    )
    trace = ProjectionTrace(
        permutation=perm,
        signs=np.ones(n),
        iterations=iterations,
        final_support=support,
        degenerate=degenerate,
        margin=margin,
        lambda2=lam2,
    )
    return ProjectionResult(point, trace, unique=not degenerate)


def project_unrestricted(x, t):
    """Projection onto the sign-unrestricted set of prescribed L1 and L2 norm.

    Signs are recorded, the absolute values projected onto the non-negative
    set, and the signs restored. Zero inputs count as positive.
    """
    x = _as_vector(x)
    _check_dim(x, t)
    signs = np.where(x >= 0, 1.0, -1.0)
    ax = np.abs(x)
    res = project_nonneg(ax, t)
    tr = res.trace
    margin = tr.margin
    on_support = tr.permutation[: tr.final_support]
    if on_support.size:
        # |x| has a kink at zero
        margin = min(margin, float(ax[on_support].min()))
    trace = replace(tr, signs=signs, margin=margin)
    return ProjectionResult(signs * res.point, trace, unique=res.unique)


def project_scale_free(x, t):
    """Closest point to ``x`` with sparseness ``t.sigma`` and free scale."""
    x = _as_vector(x)
    if not np.any(x):
        raise ValueError("cannot project the zero vector onto a sparseness level")
    p = project_unrestricted(x, t).point
    return (x @ p) / (p @ p) * p


def project_l0(x, kappa):
    """Keep the ``kappa`` entries of largest magnitude, zero the rest.

    Ties at the threshold keep the lower index.
    """
    x = _as_vector(x)
    n = len(x)
    if int(kappa) != kappa or not 1 <= kappa <= n:
        raise ValueError(f"kappa must be an integer in [1, {n}], got {kappa}")
    keep = np.argsort(-np.abs(x), kind="stable")[: int(kappa)]
    out = np.zeros(n)
    out[keep] = x[keep]
    return out


def face_projection_sequence(q, support, lambda1=None):
    """Project a simplex point onto the face spanned by ``support``.

    Coordinates outside the support are zeroed one at a time, smallest first,
    and their mass spread evenly over the coordinates still alive. Returns the
    final point and the list of all intermediate points (first one is ``q``).
    """
    q = _as_vector(q)
    n = len(q)
    lam1 = float(q.sum()) if lambda1 is None else float(lambda1)
    if np.any(q < -NEG_TOL * max(lam1, 1.0)) or abs(q.sum() - lam1) > 1e-9 * lam1:
        raise ValueError("q does not lie on the simplex")
    mask = _support_mask(support, n)
    if not mask.any():
        raise ValueError("support must be non-empty")
    drop = np.flatnonzero(~mask)
    drop = drop[np.argsort(q[drop], kind="stable")]

    alive = np.ones(n, dtype=bool)
    s = q.copy()
    steps = [s.copy()]
    for k, j in enumerate(drop, start=1):
        mass = s[j]
        s[j] = 0.0
        alive[j] = False
        s[alive] += mass / (n - k)
        steps.append(s.copy())
    return s, steps


def _proj_simplex_unsorted(v, lambda1):
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - lambda1
    k = np.arange(1, len(v) + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def project_nonneg_alternating(x, t):
    """Plain alternating projections in full coordinates, no sort-once.

    Reference path for :func:`project_nonneg`; returns ``(point, iterations)``.
    Barycenter ties are broken by the stable descending order of ``x`` so that
    both paths pick the same representative.
    """
    x = _as_vector(x)
    _check_dim(x, t)
    lam1, lam2 = t.lambda1, t.lambda2
    tol = NEG_TOL * lam2
    rank = np.empty(t.n, dtype=np.intp)
    rank[np.argsort(-x, kind="stable")] = np.arange(t.n)

    def onto_circle(r, idx):
        idx = idx[np.argsort(rank[idx])]
        out = np.zeros(t.n)
        out[idx] = _circle(r[idx], lam1, lam2)[0]
        return out

    s = onto_circle(proj_hyperplane(x, t), np.arange(t.n))
    iterations = 1
    while s.min() < -tol:
        r = _proj_simplex_unsorted(s, lam1)
        s = onto_circle(r, np.flatnonzero(r))
        iterations += 1
    return np.maximum(s, 0.0), iterations
