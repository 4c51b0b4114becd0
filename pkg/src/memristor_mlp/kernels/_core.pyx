# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: uniform-grid table lookup and the two-layer training loop."""

import numpy as np
cimport numpy as cnp
from libc.math cimport isnan, isfinite, NAN

cnp.import_array()


cdef inline double _lookup(double s0, double step, const double[::1] v, Py_ssize_t n, double s) noexcept nogil:
    cdef double pos
    cdef Py_ssize_t i
    if isnan(s):
        return NAN
    pos = (s - s0) / step
    if pos < 0.0:
        pos = 0.0
    elif pos > n - 1.0:
        pos = n - 1.0
    i = <Py_ssize_t>pos
    if i > n - 2:
        i = n - 2
    return v[i] + (pos - i) * (v[i + 1] - v[i])


def interp_uniform(double s0, double step, values, s):
    """Linear interpolation of ``values`` sampled at ``s0 + k*step``, clamped at both ends."""
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t k, m
    cdef cnp.ndarray arr
    cdef double[::1] src, dst
    if np.ndim(s) == 0:
        return _lookup(s0, step, v, n, float(s))
    arr = np.ascontiguousarray(s, dtype=np.float64)
    out = np.empty_like(arr)
    src = arr.reshape(-1)
    dst = out.reshape(-1)
    m = src.shape[0]
    with nogil:
        for k in range(m):
            dst[k] = _lookup(s0, step, v, n, src[k])
    return out


cdef inline double _clip(double x, double bound) noexcept nogil:
    if x > bound:
        return bound
    if x < -bound:
        return -bound
    return x


cdef void _forward_one(const double[:, ::1] W1, const double[::1] t1,
                       const double[:, ::1] W2, const double[::1] t2,
                       const double[::1] x, const double[::1] f, double s0, double step,
                       double[::1] s1, double[::1] y1, double[::1] s2, double[::1] y2) noexcept nogil:
    cdef Py_ssize_t H = W1.shape[0], N = W1.shape[1], O = W2.shape[0], nf = f.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc
    for j in range(H):
        acc = 0.0
        for i in range(N):
            acc = acc + x[i] * W1[j, i]
        s1[j] = acc + t1[j]
        y1[j] = _lookup(s0, step, f, nf, s1[j])
    for j in range(O):
        acc = 0.0
        for i in range(H):
            acc = acc + y1[i] * W2[j, i]
        s2[j] = acc + t2[j]
        y2[j] = _lookup(s0, step, f, nf, s2[j])


cdef void _accumulate(const double[:, ::1] W2, const double[::1] x, const double[::1] d,
                      const double[::1] df, double s0, double step,
                      const double[::1] s1, const double[::1] y1, const double[::1] s2,
                      const double[::1] y2, double[::1] d1, double[::1] d2,
                      double[:, ::1] gW1, double[::1] gt1,
                      double[:, ::1] gW2, double[::1] gt2) noexcept nogil:
    cdef Py_ssize_t H = W2.shape[1], O = W2.shape[0], N = x.shape[0], ndf = df.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double acc
    for k in range(O):
        d2[k] = _lookup(s0, step, df, ndf, s2[k]) * (d[k] - y2[k])
    for j in range(H):
        acc = 0.0
        for k in range(O):
            acc = acc + d2[k] * W2[k, j]
        d1[j] = _lookup(s0, step, df, ndf, s1[j]) * acc
    for k in range(O):
        for j in range(H):
            gW2[k, j] += d2[k] * y1[j]
        gt2[k] += d2[k]
    for j in range(H):
        for i in range(N):
            gW1[j, i] += d1[j] * x[i]
        gt1[j] += d1[j]


cdef void _apply(double[:, ::1] W1, double[::1] t1, double[:, ::1] W2, double[::1] t2,
                 double[:, ::1] gW1, double[::1] gt1, double[:, ::1] gW2, double[::1] gt2,
                 double eps, double w_max, double theta_max) noexcept nogil:
    cdef Py_ssize_t H = W1.shape[0], N = W1.shape[1], O = W2.shape[0]
    cdef Py_ssize_t i, j
    for j in range(O):
        for i in range(H):
            W2[j, i] = _clip(W2[j, i] + eps * gW2[j, i], w_max)
            gW2[j, i] = 0.0
        t2[j] = _clip(t2[j] + eps * gt2[j], theta_max)
        gt2[j] = 0.0
    for j in range(H):
        for i in range(N):
            W1[j, i] = _clip(W1[j, i] + eps * gW1[j, i], w_max)
            gW1[j, i] = 0.0
        t1[j] = _clip(t1[j] + eps * gt1[j], theta_max)
        gt1[j] = 0.0


def train_two_layer(double[:, ::1] W1, double[::1] t1, double[:, ::1] W2, double[::1] t2,
                    const double[:, ::1] X, const double[:, ::1] D,
                    const double[::1] f, const double[::1] df, double s0, double step,
                    double epsilon, Py_ssize_t max_steps, double w_max, double theta_max,
                    double stop_error, orders=None):
    """Gradient descent on a one-hidden-layer net with a tabulated activation.

    Parameters are updated in place. Returns the loss recorded before each
    step (index 0 is the initial loss); iteration stops after ``max_steps``
    updates, when loss/initial loss drops below ``stop_error``, or as soon as
    the loss is non-finite (which is then the last entry). ``orders`` selects
    per-sample updates: row ``k`` is the sample order used in step ``k``.
    """
    cdef Py_ssize_t P = X.shape[0], H = W1.shape[0], O = W2.shape[0], N = W1.shape[1]
    cdef Py_ssize_t k, p, q, j, n_done = 0
    cdef double e, e0 = 0.0, r
    cdef bint per_sample = orders is not None
    cdef const cnp.intp_t[:, ::1] order_view
    cdef double[::1] errors = np.empty(max_steps + 1)
    cdef double[:, ::1] S1 = np.empty((P, H)), Y1 = np.empty((P, H))
    cdef double[:, ::1] S2 = np.empty((P, O)), Y2 = np.empty((P, O))
    cdef double[::1] d1 = np.empty(H), d2 = np.empty(O)
    cdef double[:, ::1] gW1 = np.zeros((H, N)), gW2 = np.zeros((O, H))
    cdef double[::1] gt1 = np.zeros(H), gt2 = np.zeros(O)
    if per_sample:
        order_view = np.ascontiguousarray(orders, dtype=np.intp)
    with nogil:
        for k in range(max_steps + 1):
            e = 0.0
            for p in range(P):
                _forward_one(W1, t1, W2, t2, X[p], f, s0, step, S1[p], Y1[p], S2[p], Y2[p])
                for j in range(O):
                    r = Y2[p, j] - D[p, j]
                    e = e + r * r
            e = 0.5 * e
            errors[k] = e
            n_done = k + 1
            if not isfinite(e):
                break
            if k == 0:
                e0 = e
            if k == max_steps or e0 == 0.0 or (k > 0 and e / e0 < stop_error):
                break
            if not per_sample:
                for p in range(P):
                    _accumulate(W2, X[p], D[p], df, s0, step, S1[p], Y1[p], S2[p], Y2[p],
                                d1, d2, gW1, gt1, gW2, gt2)
                _apply(W1, t1, W2, t2, gW1, gt1, gW2, gt2, epsilon, w_max, theta_max)
            else:
                for q in range(P):
                    p = order_view[k, q]
                    _forward_one(W1, t1, W2, t2, X[p], f, s0, step, S1[p], Y1[p], S2[p], Y2[p])
                    _accumulate(W2, X[p], D[p], df, s0, step, S1[p], Y1[p], S2[p], Y2[p],
                                d1, d2, gW1, gt1, gW2, gt2)
                    _apply(W1, t1, W2, t2, gW1, gt1, gW2, gt2, epsilon, w_max, theta_max)
    return np.asarray(errors)[:n_done].copy()
