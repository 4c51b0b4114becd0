"""Backpropagation with a tabulated activation and bounded weights.

Every update moves the parameters by ``epsilon`` times the summed
delta-rule direction and then projects weights onto ``[-w_max, w_max]`` and
thresholds onto ``[-theta_max, theta_max]``, so the network never holds a
value its memristor pairs cannot realize.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .circuit import ActivationTable, TanhActivation, check_safe_inputs
from .errors import ConfigError, NonFiniteLoss
from .network import ForwardTrace, Perceptron, forward


class BatchMode(str, enum.Enum):
    FULL_BATCH = "FULL_BATCH"
    PER_SAMPLE = "PER_SAMPLE"


@dataclass(frozen=True)
class TrainConfig:
    epsilon: float = 0.1
    max_steps: int = 1000
    w_max: float = 1.0
    theta_max: Optional[float] = None
    batch: BatchMode = BatchMode.FULL_BATCH
    seed: int = 0
    stop_error: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "batch", BatchMode(self.batch))
        self.validate()

    def validate(self) -> None:
        if not (0.0 <= self.epsilon < 1.0) or math.isnan(self.epsilon):
            raise ConfigError(f"step size must satisfy 0 <= epsilon < 1, got {self.epsilon}")
        if self.max_steps < 0:
            raise ConfigError("max_steps must be >= 0")
        if not self.w_max > 0:
            raise ConfigError("w_max must be positive")
        if self.theta_max is not None and not self.theta_max > 0:
            raise ConfigError("theta_max must be positive")
        if self.stop_error < 0:
            raise ConfigError("stop_error must be >= 0")

    @property
    def theta_bound(self) -> float:
        return self.w_max if self.theta_max is None else self.theta_max


@dataclass
class ErrorHistory:
    errors: np.ndarray

    @property
    def steps(self) -> np.ndarray:
        return np.arange(len(self.errors))

    @property
    def normalized(self) -> np.ndarray:
        e0 = self.errors[0]
        if e0 == 0:
            return np.ones_like(self.errors)
        return self.errors / e0

    @property
    def final_normalized(self) -> float:
        return float(self.normalized[-1])

    def __len__(self):
        return len(self.errors)

    def __getitem__(self, m):
        return int(m), float(self.errors[m]), float(self.normalized[m])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["step", "error", "normalized_error"])
        for m, e, n in zip(self.steps, self.errors, self.normalized):
            writer.writerow([int(m), repr(float(e)), repr(float(n))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ErrorHistory":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls(np.array([float(r["error"]) for r in rows]))


def loss(net: Perceptron, X, D) -> float:
    """Half the summed squared residual over samples and outputs."""
    y = forward(net, X).output
    r = y - np.asarray(D, dtype=float).reshape(y.shape)
    return 0.5 * float(np.sum(r * r))


def deltas(trace: ForwardTrace, D, net: Perceptron) -> list:
    """Delta multipliers per layer, each shaped ``(batch, units)``.

    Output layer: ``F'(S) * (d - y)``; a hidden layer takes the next layer's
    deltas weighted by the connecting weights, times its own ``F'(S)``.
    """
    act = net.activation
    D = np.asarray(D, dtype=float).reshape(trace.output.shape)
    out = [None] * len(trace.pre)
    out[-1] = act.activate_deriv(trace.pre[-1]) * (D - trace.output)
    for l in range(len(trace.pre) - 2, -1, -1):
        out[l] = act.activate_deriv(trace.pre[l]) * (out[l + 1] @ net.weights[l + 1])
    return out


def descent_direction(net: Perceptron, X, D) -> tuple:
    """Summed ``delta * x`` and ``delta`` per layer, plus the loss at ``net``.

    Multiplying by the step size gives the weight and threshold corrections.
    """
    trace = forward(net, X)
    r = trace.output - np.asarray(D, dtype=float).reshape(trace.output.shape)
    e = 0.5 * float(np.sum(r * r))
    ds = deltas(trace, D, net)
    dW = [d.T @ x for d, x in zip(ds, trace.inputs)]
    dT = [d.sum(axis=0) for d in ds]
    return dW, dT, e


def analytic_gradient(net: Perceptron, X, D) -> np.ndarray:
    """Flat gradient of the loss, ordered like :meth:`Perceptron.parameters`."""
    dW, dT, _ = descent_direction(net, X, D)
    return -np.concatenate([np.concatenate([w.ravel(), t]) for w, t in zip(dW, dT)])


def numeric_gradient(net: Perceptron, X, D, h: float = 1e-6, activation=None) -> np.ndarray:
    """Central-difference gradient of the loss with a smooth activation.

    ``activation`` defaults to exact ``tanh`` so the estimate does not see the
    kinks of a piecewise-linear table.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    base = net.as_software(TanhActivation() if activation is None else activation)
    p = base.parameters()
    grad = np.empty_like(p)
    for k in range(p.size):
        up, dn = p.copy(), p.copy()
        up[k] += h
        dn[k] -= h
        grad[k] = (loss(base.with_parameters(up), X, D) - loss(base.with_parameters(dn), X, D)) / (2 * h)
    return grad


def clamp(net: Perceptron, w_max: float, theta_max: float) -> Perceptron:
    """Project weights and thresholds onto the realizable box, in place."""
    for w in net.weights:
        np.clip(w, -w_max, w_max, out=w)
    for t in net.thresholds:
        np.clip(t, -theta_max, theta_max, out=t)
    return net


def _apply(net: Perceptron, X, D, epsilon, w_max, theta_max) -> float:
    dW, dT, e = descent_direction(net, X, D)
    for w, g in zip(net.weights, dW):
        w += epsilon * g
    for t, g in zip(net.thresholds, dT):
        t += epsilon * g
    clamp(net, w_max, theta_max)
    return e


def step(net: Perceptron, X, D, config: TrainConfig, order=None) -> tuple:
    """One training step on a software copy of ``net``.

    Returns the updated net and the loss *before* the update. In
    ``PER_SAMPLE`` mode the samples are visited in ``order`` (default: data
    order), updating and clamping after each one.
    """
    X = np.asarray(X, dtype=float)
    D = np.asarray(D, dtype=float).reshape(X.shape[0], -1)
    new = net.as_software()
    eps, wm, tm = config.epsilon, config.w_max, config.theta_bound
    if config.batch is BatchMode.FULL_BATCH:
        e = _apply(new, X, D, eps, wm, tm)
    else:
        e = loss(new, X, D)
        for p in (range(X.shape[0]) if order is None else order):
            _apply(new, X[p:p + 1], D[p:p + 1], eps, wm, tm)
    return new, e


def sample_orders(config: TrainConfig, n_samples: int) -> Optional[np.ndarray]:
    """Per-step visiting orders for PER_SAMPLE mode, drawn from ``config.seed``."""
    if config.batch is BatchMode.FULL_BATCH:
        return None
    rng = np.random.default_rng(config.seed)
    return np.array([rng.permutation(n_samples) for _ in range(config.max_steps)],
                    dtype=np.intp).reshape(config.max_steps, n_samples)


def _kernel_eligible(net: Perceptron) -> bool:
    return (net.circuits is None and net.topology.n_layers == 2
            and isinstance(net.activation, ActivationTable))


def train(net: Perceptron, X, D, config: TrainConfig,
          on_step: Optional[Callable[[int, Perceptron, float], None]] = None,
          use_kernel: bool = True) -> tuple:
    """Repeat :func:`step` until ``max_steps`` or normalized loss < ``stop_error``.

    The returned history holds the loss before the first step and after
    every step taken. ``on_step(M, net, E)`` is called after step ``M``
    with the updated net and its loss; passing it forces the step-by-step
    path instead of the compiled loop.

    Raises
    ------
    NonFiniteLoss
        If the loss becomes NaN or infinite.
    """
    X = np.ascontiguousarray(X, dtype=float)
    D = np.ascontiguousarray(np.asarray(D, dtype=float).reshape(X.shape[0], -1))
    orders = sample_orders(config, X.shape[0])
    if use_kernel and on_step is None and _kernel_eligible(net):
        new = net.as_software()
        W1, W2 = (np.ascontiguousarray(w) for w in new.weights)
        t1, t2 = (np.ascontiguousarray(t) for t in new.thresholds)
        act = new.activation
        check_safe_inputs(X)
        errors = kernels.train_two_layer(
            W1, t1, W2, t2, X, D, act.f, act.df, act.s_min, act.step,
            config.epsilon, config.max_steps, config.w_max, config.theta_bound,
            config.stop_error, orders,
        )
        new.weights, new.thresholds = [W1, W2], [t1, t2]
    else:
        new = net.as_software()
        errors = []
        e0 = None
        for k in range(config.max_steps + 1):
            e = loss(new, X, D)
            errors.append(e)
            if not math.isfinite(e):
                break
            if k > 0 and on_step is not None:
                on_step(k, new, e)
            if k == 0:
                e0 = e
            if k == config.max_steps or e0 == 0 or (k > 0 and e / e0 < config.stop_error):
                break
            new, _ = step(new, X, D, config, None if orders is None else orders[k])
        errors = np.array(errors)
    if not np.all(np.isfinite(errors)):
        raise NonFiniteLoss(f"loss became non-finite after {len(errors) - 1} steps "
                            f"(epsilon={config.epsilon})")
    return new, ErrorHistory(np.asarray(errors, dtype=float))
