"""Pure numpy versions of the compiled kernels (same signatures, same semantics)."""

import numpy as np


def interp_uniform(s0, step, values, s):
    """Linear interpolation of ``values`` sampled at ``s0 + k*step``, clamped at both ends."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    scalar = np.ndim(s) == 0
    s = np.asarray(s, dtype=float)
    pos = (s - s0) / step
    nan = np.isnan(pos)
    pos = np.clip(np.where(nan, 0.0, pos), 0.0, n - 1.0)
    i = np.minimum(pos.astype(np.intp), n - 2)
    t = pos - i
    out = values[i] + t * (values[i + 1] - values[i])
    out = np.where(nan, np.nan, out)
    return float(out) if scalar else out


def _forward(W1, t1, W2, t2, X, f, s0, step):
    S1 = X @ W1.T + t1
    Y1 = interp_uniform(s0, step, f, S1)
    S2 = Y1 @ W2.T + t2
    Y2 = interp_uniform(s0, step, f, S2)
    return S1, Y1, S2, Y2


def _update(W1, t1, W2, t2, X, D, S1, Y1, S2, Y2, df, s0, step, epsilon, w_max, theta_max):
    d2 = interp_uniform(s0, step, df, S2) * (D - Y2)
    d1 = interp_uniform(s0, step, df, S1) * (d2 @ W2)
    W2 += epsilon * (d2.T @ Y1)
    t2 += epsilon * d2.sum(axis=0)
    W1 += epsilon * (d1.T @ X)
    t1 += epsilon * d1.sum(axis=0)
    np.clip(W1, -w_max, w_max, out=W1)
    np.clip(W2, -w_max, w_max, out=W2)
    np.clip(t1, -theta_max, theta_max, out=t1)
    np.clip(t2, -theta_max, theta_max, out=t2)


def train_two_layer(W1, t1, W2, t2, X, D, f, df, s0, step, epsilon, max_steps,
                    w_max, theta_max, stop_error, orders=None):
    """Gradient descent on a one-hidden-layer net with a tabulated activation.

    Parameters are updated in place. Returns the loss recorded before each
    step (index 0 is the initial loss); iteration stops after ``max_steps``
    updates, when loss/initial loss drops below ``stop_error``, or as soon as
    the loss is non-finite (which is then the last entry). ``orders`` selects
    per-sample updates: row ``k`` is the sample order used in step ``k``.
    """
    errors = np.empty(max_steps + 1)
    e0 = 0.0
    for k in range(max_steps + 1):
        S1, Y1, S2, Y2 = _forward(W1, t1, W2, t2, X, f, s0, step)
        r = Y2 - D
        e = 0.5 * float(np.sum(r * r))
        errors[k] = e
        if not np.isfinite(e):
            return errors[: k + 1]
        if k == 0:
            e0 = e
        if k == max_steps or e0 == 0.0 or (k > 0 and e / e0 < stop_error):
            return errors[: k + 1]
        if orders is None:
            _update(W1, t1, W2, t2, X, D, S1, Y1, S2, Y2, df, s0, step, epsilon, w_max, theta_max)
        else:
            for p in orders[k]:
                x = X[p:p + 1]
                s1, y1, s2, y2 = _forward(W1, t1, W2, t2, x, f, s0, step)
                _update(W1, t1, W2, t2, x, D[p:p + 1], s1, y1, s2, y2, df, s0, step,
                        epsilon, w_max, theta_max)
    return errors
