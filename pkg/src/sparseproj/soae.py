"""Supervised online auto-encoder with sparse activity and sparse connectivity.

A sample ``x`` is encoded as ``u = W^T x`` and passed through a sparseness
enforcing transfer function ``h = f(u)``. The same ``W`` decodes
``x_tilde = W h`` and a softmax layer classifies ``h``. The objective blends
negated correlation of ``x_tilde`` with ``x`` and cross-entropy,

    E = (1 - alpha) * (-corr(x_tilde, x)) + alpha * xent(y, t),

and is minimized by single-sample SGD. After every epoch each column of
``W`` is projected back onto the sparseness level ``sigma_W``.
"""

import hashlib
import json
import math
import struct
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import core
from .data import one_hot
from .gradient import GradientOperator, NotDifferentiableError, grad_l0

MAX_RETRIES = 3


@dataclass(frozen=True)
class SigmaProjection:
    sigma_h: float

    def __post_init__(self):
        if not 0 < self.sigma_h < 1:
            raise ValueError(f"sigma_h must lie in (0, 1), got {self.sigma_h}")


@dataclass(frozen=True)
class L0Projection:
    kappa: int


@dataclass(frozen=True)
class Tanh:
    pass


@dataclass(frozen=True)
class SoaeConfig:
    n_hidden: int
    sigma_W: float = 0.75
    transfer: object = field(default_factory=lambda: SigmaProjection(0.6))
    step_size: float = 0.05
    anneal_factor: float = 0.999
    samples_per_epoch: int = 21600
    # alpha(nu) = 1 - exp(-nu / alpha_timescale)
    alpha_timescale: float = 100.0
    stop_rel_tol: float = 1e-4
    stop_window: int = 10
    max_epochs: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.sigma_W is not None and not 0 < self.sigma_W < 1:
            raise ValueError(f"sigma_W must lie in (0, 1), got {self.sigma_W}")
        if isinstance(self.transfer, L0Projection) and not 1 <= self.transfer.kappa <= self.n_hidden:
            raise ValueError(f"kappa must lie in [1, {self.n_hidden}]")

    def alpha(self, nu):
        return 1.0 - math.exp(-nu / self.alpha_timescale)

    def step(self, nu):
        return self.step_size * self.anneal_factor ** (nu - 1)

    def to_dict(self):
        d = asdict(self)
        d["transfer"] = {"kind": type(self.transfer).__name__, **asdict(self.transfer)}
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        tf = dict(d.pop("transfer"))
        kind = tf.pop("kind")
        transfer = {"SigmaProjection": SigmaProjection, "L0Projection": L0Projection, "Tanh": Tanh}[kind](**tf)
        return cls(transfer=transfer, **d)


@dataclass
class SoaeParams:
    W: np.ndarray  # d x n
    W_out: np.ndarray  # n x c
    theta_out: np.ndarray  # c

    def copy(self):
        return SoaeParams(self.W.copy(), self.W_out.copy(), self.theta_out.copy())


@dataclass(frozen=True)
class ForwardRecord:
    u: np.ndarray
    h: np.ndarray
    x_tilde: np.ndarray
    y: np.ndarray
    logits: np.ndarray
    transfer_trace: object = None
    differentiable: bool = True


def _transfer(u, cfg):
    """Return ``(h, trace, differentiable)``."""
    tf = cfg.transfer
    if isinstance(tf, SigmaProjection):
        res = core.project_unrestricted(u, core.target_for_sigma(len(u), tf.sigma_h))
        return res.point, res.trace, res.trace.differentiable
    if isinstance(tf, L0Projection):
        h = core.project_l0(u, tf.kappa)
        try:
            grad_l0(u, tf.kappa)
        except NotDifferentiableError:
            return h, None, False
        return h, None, True
    if isinstance(tf, Tanh):
        return np.tanh(u), None, True
    raise TypeError(f"unknown transfer {tf!r}")


def forward(params, x, cfg, rng=None):
    """Run one sample through the network.

    With an ``rng``, a transfer input sitting on a kink is nudged by uniform
    noise of size ``1e-9 * ||u||`` (at most three times).
    """
    x = np.asarray(x, dtype=np.float64)
    u = params.W.T @ x
    h, trace, ok = _transfer(u, cfg)
    if not ok and rng is not None:
        scale = 1e-9 * np.linalg.norm(u)
        for _ in range(MAX_RETRIES):
            u = u + rng.uniform(-scale, scale, size=u.shape)
            h, trace, ok = _transfer(u, cfg)
            if ok:
                break
    logits = params.W_out.T @ h + params.theta_out
    z = logits - logits.max()
    y = np.exp(z)
    y /= y.sum()
    return ForwardRecord(u, h, params.W @ h, y, logits, trace, ok)


def _centered(v):
    return v - v.mean()


def correlation(a, b):
    """Pearson correlation; ``None`` when either vector is constant."""
    ac, bc = _centered(a), _centered(b)
    lam, mu = ac @ ac, bc @ bc
    if lam == 0 or mu == 0:
        return None
    return float(ac @ bc / math.sqrt(lam * mu))


def correlation_grad(x_tilde, x):
    """Gradient of ``corr(x_tilde, x)`` with respect to ``x_tilde``."""
    xc, tc = _centered(x), _centered(x_tilde)
    lam, mu = tc @ tc, xc @ xc
    if lam == 0 or mu == 0:
        return np.zeros_like(x_tilde)
    corr = tc @ xc / math.sqrt(lam * mu)
    return xc / math.sqrt(lam * mu) - corr / lam * tc


def _log_softmax(logits):
    z = logits - logits.max()
    return z - math.log(np.exp(z).sum())


def loss(rec, x, t, alpha):
    """Blended objective for one sample; ``t`` is a one-of-c target vector."""
    value = 0.0
    if alpha < 1:
        corr = correlation(rec.x_tilde, np.asarray(x, dtype=np.float64))
        if corr is not None:
            value -= (1 - alpha) * corr
    if alpha > 0:
        value -= alpha * float(np.asarray(t) @ _log_softmax(rec.logits))
    return value


def grad_params(params, rec, x, t, alpha, cfg):
    """Gradients ``(dW, dW_out, dtheta_out)`` of :func:`loss`."""
    x = np.asarray(x, dtype=np.float64)
    n, c = params.W_out.shape
    recon = -(1 - alpha) * correlation_grad(rec.x_tilde, x) if alpha < 1 else np.zeros_like(x)
    cls = alpha * (rec.y - np.asarray(t, dtype=np.float64))

    dh = params.W.T @ recon + params.W_out @ cls
    tf = cfg.transfer
    if isinstance(tf, SigmaProjection):
        du = GradientOperator.from_trace(rec.transfer_trace).rmatvec(dh)
    elif isinstance(tf, L0Projection):
        du = grad_l0(rec.u, tf.kappa) * dh
    else:
        du = (1 - rec.h**2) * dh

    dW = np.outer(recon, rec.h) + np.outer(x, du)
    return dW, np.outer(rec.h, cls), cls


def project_columns(W, sigma_W):
    """Project each column of ``W`` onto sparseness ``sigma_W`` at free scale."""
    W = np.array(W, dtype=np.float64)
    target = core.target_for_sigma(W.shape[0], sigma_W)
    for i in range(W.shape[1]):
        if np.any(W[:, i]):
            W[:, i] = core.project_scale_free(W[:, i], target)
    return W


def init_params(samples, cfg, rng, n_classes=10):
    """Columns of ``W`` from randomly chosen samples, output layer ~ N(0, 0.01^2)."""
    samples = np.asarray(samples, dtype=np.float64)
    if len(samples) == 0:
        raise ValueError("cannot initialize from an empty learning set")
    replace_ = len(samples) < cfg.n_hidden
    idx = rng.choice(len(samples), size=cfg.n_hidden, replace=replace_)
    W = samples[idx].T.copy()
    if cfg.sigma_W is not None:
        W = project_columns(W, cfg.sigma_W)
    W_out = rng.normal(0.0, 0.01, size=(cfg.n_hidden, n_classes))
    theta_out = rng.normal(0.0, 0.01, size=n_classes)
    return SoaeParams(W, W_out, theta_out)


def epoch_indices(n_samples, count, rng):
    """``count`` indices drawn without replacement, cycling when exhausted."""
    reps = -(-count // n_samples)
    return np.concatenate([rng.permutation(n_samples) for _ in range(reps)])[:count]


def train_epoch(params, dataset, cfg, nu, rng, monitor=None):
    """One epoch of projected SGD; returns ``(params, mean loss)``.

    ``monitor`` is called with every :class:`ForwardRecord`.
    """
    if nu < 1:
        raise ValueError("epochs are numbered from 1")
    p = params.copy()
    alpha, eta = cfg.alpha(nu), cfg.step(nu)
    c = p.W_out.shape[1]
    total = 0.0
    idx = epoch_indices(len(dataset), cfg.samples_per_epoch, rng)
    for i in idx:
        x = dataset.samples[i]
        t = one_hot(int(dataset.labels[i]), c)
        rec = forward(p, x, cfg, rng)
        if monitor is not None:
            monitor(rec)
        total += loss(rec, x, t, alpha)
        if not rec.differentiable:
            continue
        dW, dW_out, dtheta = grad_params(p, rec, x, t, alpha, cfg)
        p.W -= eta * dW
        p.W_out -= eta * dW_out
        p.theta_out -= eta * dtheta
    if cfg.sigma_W is not None:
        p.W = project_columns(p.W, cfg.sigma_W)
    return p, total / len(idx)


def _converged(history, cfg):
    if math.isinf(cfg.stop_rel_tol):
        return True
    w = cfg.stop_window
    if len(history) <= w:
        return False
    window = history[-w - 1 :]
    mean = abs(float(np.mean(window)))
    change = abs(window[-1] - window[0])
    return mean > 0 and change / mean < cfg.stop_rel_tol


def train(params, dataset, cfg, rng, monitor=None, on_epoch=None):
    """Run epochs until the loss settles or ``cfg.max_epochs`` is reached.

    ``on_epoch(nu, params, mean_loss)`` is called after every epoch.
    """
    history = []
    for nu in range(1, cfg.max_epochs + 1):
        params, mean_loss = train_epoch(params, dataset, cfg, nu, rng, monitor)
        history.append(mean_loss)
        if on_epoch is not None:
            on_epoch(nu, params, mean_loss)
        if _converged(history, cfg):
            break
    return params, history


def classify(params, x, cfg):
    return int(np.argmax(forward(params, x, cfg).y))


def predict(params, X, cfg):
    return np.array([classify(params, x, cfg) for x in np.asarray(X)])


def error_rate(params, dataset, cfg):
    return float(np.mean(predict(params, dataset.samples, cfg) != dataset.labels))


def mean_loss(params, dataset, cfg, alpha):
    """Objective averaged over a dataset at a fixed trade-off ``alpha``."""
    c = params.W_out.shape[1]
    vals = [
        loss(forward(params, x, cfg), x, one_hot(int(y), c), alpha)
        for x, y in zip(dataset.samples, dataset.labels)
    ]
    return float(np.mean(vals))


# Checkpoint container: magic, version, header length, JSON header, float64 payload.
_MAGIC = b"SOAE"
_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params, cfg):
    payload = b"".join(
        np.ascontiguousarray(a, dtype="<f8").tobytes()
        for a in (params.W, params.W_out, params.theta_out)
    )
    d, n = params.W.shape
    header = {
        "dims": {"d": d, "n": n, "c": len(params.theta_out)},
        "config": cfg.to_dict(),
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(_MAGIC + struct.pack("<II", _VERSION, len(blob)) + blob + payload)


def load_checkpoint(path):
    """Return ``(params, cfg)``; raises :class:`CheckpointError` on corruption."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != _MAGIC:
        raise CheckpointError("not a SOAE checkpoint")
    version, hlen = struct.unpack("<II", raw[4:12])
    if version != _VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    header = json.loads(raw[12 : 12 + hlen])
    payload = raw[12 + hlen :]
    if hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise CheckpointError("checksum mismatch")
    d, n, c = (header["dims"][k] for k in ("d", "n", "c"))
    flat = np.frombuffer(payload, dtype="<f8")
    if flat.size != d * n + n * c + c:
        raise CheckpointError("payload size does not match dims")
    W = flat[: d * n].reshape(d, n).copy()
    W_out = flat[d * n : d * n + n * c].reshape(n, c).copy()
    theta = flat[d * n + n * c :].copy()
    return SoaeParams(W, W_out, theta), SoaeConfig.from_dict(header["config"])
