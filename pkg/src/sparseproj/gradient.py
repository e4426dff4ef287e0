"""Derivative of the sparseness projection, rebuilt from a projection trace.

Each alternating-projection step contributes an ``N x N`` factor

    A_i = delta_i (E - J/d_i) - alpha_i s_i s_i^T + alpha_i/d_i s_i s_i^T J

acting on the first ``N`` sorted coordinates, where ``N`` is the support of
the result. The Jacobian of the projection is the product ``A_h ... A_1``
conjugated by the sort permutation and the input signs. Products with a vector
only need inner products, so :meth:`GradientOperator.matvec` and
:meth:`GradientOperator.rmatvec` cost ``O(h N)``.
"""

from dataclasses import dataclass

import numpy as np


class NotDifferentiableError(ValueError):
    """The projection has no derivative at this point (or is too close to a kink)."""


@dataclass(frozen=True)
class GradientOperator:
    n: int
    support: int
    factors: tuple  # (d, delta, alpha, s) per iteration, in application order
    permutation: np.ndarray
    signs: np.ndarray

    @classmethod
    def from_trace(cls, trace):
        if not trace.differentiable:
            raise NotDifferentiableError(
                "projection trace hit a barycenter or a separator collision "
                f"(margin={trace.margin:.3g}); perturb the input"
            )
        factors = tuple((it.d, it.delta, it.alpha, it.r_head) for it in trace.iterations)
        return cls(trace.n, trace.final_support, factors, trace.permutation, trace.signs)

    def _gather(self, y):
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.n,):
            raise ValueError(f"expected a vector of length {self.n}, got shape {y.shape}")
        head = self.permutation[: self.support]
        return (self.signs * y)[head]

    def _scatter(self, z):
        out = np.zeros(self.n)
        out[self.permutation[: self.support]] = z
        return self.signs * out

    def matvec(self, y):
        """Jacobian times ``y``."""
        z = self._gather(y)
        for d, delta, alpha, s in self.factors:
            zs = z.sum()
            z = delta * (z - zs / d) + alpha * (s.sum() * zs / d - s @ z) * s
        return self._scatter(z)

    def rmatvec(self, y):
        """Transposed Jacobian times ``y`` (the backpropagation direction)."""
        z = self._gather(y)
        for d, delta, alpha, s in reversed(self.factors):
            z = delta * (z - z.sum() / d) - alpha * (s @ z) * (s - s.sum() / d)
        return self._scatter(z)

    def block(self):
        """The ``N x N`` product ``A_h ... A_1`` in sorted coordinates."""
        N = self.support
        A = np.eye(N)
        for d, delta, alpha, s in self.factors:
            Ai = delta * (np.eye(N) - 1.0 / d) - alpha * np.outer(s, s)
            Ai += alpha / d * np.outer(s, np.full(N, s.sum()))
            A = Ai @ A
        return A

    def todense(self):
        G = np.zeros((self.n, self.n))
        head = self.permutation[: self.support]
        G[np.ix_(head, head)] = self.block()
        return self.signs[:, None] * G * self.signs[None, :]


def grad_full(trace):
    """Dense ``n x n`` Jacobian of the projection at the traced input."""
    return GradientOperator.from_trace(trace).todense()


def grad_vjp(trace, y):
    """Jacobian-vector product without forming the matrix."""
    return GradientOperator.from_trace(trace).matvec(y)


def grad_vjp_transpose(trace, y):
    """``y^T`` times the Jacobian, as needed by the chain rule."""
    return GradientOperator.from_trace(trace).rmatvec(y)


def grad_l0(x, kappa):
    """Diagonal 0/1 mask of the L0 projection's Jacobian."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if int(kappa) != kappa or not 1 <= kappa <= n:
        raise ValueError(f"kappa must be an integer in [1, {n}], got {kappa}")
    order = np.argsort(-np.abs(x), kind="stable")
    kappa = int(kappa)
    if kappa < n and abs(x[order[kappa - 1]]) == abs(x[order[kappa]]):
        raise NotDifferentiableError(
            f"entries {order[kappa - 1]} and {order[kappa]} tie at the L0 threshold"
        )
    mask = np.zeros(n)
    mask[order[:kappa]] = 1.0
    return mask


def numerical_jacobian(f, x, step=1e-6):
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = step
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * step))
    return np.stack(cols, axis=-1)


def check_gradient(f, jac, x, step=1e-6):
    """Max entrywise error of ``jac(x)`` against central differences of ``f``.

    Errors are relative with denominator ``max(1, |analytic entry|)``.
    """
    analytic = np.atleast_2d(np.asarray(jac(x), dtype=np.float64))
    numeric = np.atleast_2d(numerical_jacobian(f, x, step))
    if analytic.shape != numeric.shape:
        raise ValueError(f"Jacobian shape {analytic.shape} != {numeric.shape}")
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))))
