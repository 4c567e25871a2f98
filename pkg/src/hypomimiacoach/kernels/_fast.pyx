# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel backend.

Same contract and parameter order as kernels.reference; per-sample loops in
C instead of batched numpy ops. Kept numerically aligned with the reference
backend (float64 throughout, identical ReLU/tie/clamp conventions).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, log, sqrt

NAME = "compiled"

cdef double _CLAMP = 1e-12
PROB_CLAMP = _CLAMP


cdef void _knn_fill(double[:, ::1] H, int n, int F, int k,
                    double[:, ::1] dist2, char[::1] used, double[:, ::1] A) noexcept:
    cdef int i, j, f, picked, best
    cdef double s, d, bestd
    for i in range(n):
        for j in range(n):
            A[i, j] = 0.0
            if i == j:
                dist2[i, j] = INFINITY
            else:
                s = 0.0
                for f in range(F):
                    d = H[i, f] - H[j, f]
                    s += d * d
                dist2[i, j] = s
    for i in range(n):
        for j in range(n):
            used[j] = 0
        for picked in range(k):
            best = -1
            bestd = INFINITY
            for j in range(n):
                if j == i or used[j]:
                    continue
                # strict < keeps the lowest index on distance ties
                if dist2[i, j] < bestd:
                    bestd = dist2[i, j]
                    best = j
            used[best] = 1
            A[i, best] = 1.0
    for i in range(n):
        for j in range(i + 1, n):
            if A[i, j] > 0.0 or A[j, i] > 0.0:
                A[i, j] = 1.0
                A[j, i] = 1.0


cdef void _normalize_fill(double[:, ::1] A, int n, double[::1] deg, double[:, ::1] ahat) noexcept:
    cdef int i, j
    cdef double s
    for i in range(n):
        s = 1.0
        for j in range(n):
            s += A[i, j]
        deg[i] = 1.0 / sqrt(s)
    for i in range(n):
        for j in range(n):
            ahat[i, j] = (A[i, j] + (1.0 if i == j else 0.0)) * deg[i] * deg[j]


def knn_adjacency(H, int k):
    """Symmetrized kNN adjacency of one node-feature matrix."""
    return knn_adjacency_batch(np.asarray(H)[None, :, :], k)[0]


def knn_adjacency_batch(H, int k):
    H = np.ascontiguousarray(H, dtype=np.float64)
    cdef double[:, :, ::1] Hv = H
    cdef int B = Hv.shape[0], n = Hv.shape[1], F = Hv.shape[2]
    out = np.zeros((B, n, n))
    cdef double[:, :, ::1] Av = out
    dist2 = np.empty((n, n))
    used = np.zeros(n, dtype=np.int8)
    cdef double[:, ::1] dv = dist2
    cdef char[::1] uv = used
    cdef int b
    for b in range(B):
        _knn_fill(Hv[b], n, F, k, dv, uv, Av[b])
    return out


def node_features_batch(params, X):
    """Extractor-head outputs for a batch: (B, 8, F)."""
    head_w = np.ascontiguousarray(params[0], dtype=np.float64)
    head_b = np.ascontiguousarray(params[1], dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[:, :, ::1] wv = head_w
    cdef double[:, ::1] bv = head_b
    cdef double[:, ::1] xv = X
    cdef int B = xv.shape[0], D = xv.shape[1], n = wv.shape[0], F = wv.shape[2]
    out = np.empty((B, n, F))
    cdef double[:, :, ::1] ov = out
    cdef int b, i, f, d
    cdef double s
    for b in range(B):
        for i in range(n):
            for f in range(F):
                s = bv[i, f]
                for d in range(D):
                    s += xv[b, d] * wv[i, d, f]
                ov[b, i, f] = s if s > 0.0 else 0.0
    return out


cdef void _forward_sample(double[::1] x, int D, int n, int F, int C1, int C2, int k,
                          double[:, :, ::1] head_w, double[:, ::1] head_b,
                          double[:, ::1] g1, double[:, ::1] g2,
                          double[:, :, ::1] c1w, double[::1] c1b,
                          double[:, :, ::1] c2w, double[::1] c2b,
                          double[:, ::1] ow, double[::1] ob,
                          bint use_static, double[:, ::1] static_ahat,
                          double[:, ::1] Z0, double[:, ::1] H0,
                          double[:, ::1] dist2, char[::1] used, double[:, ::1] A,
                          double[::1] deg, double[:, ::1] ahat,
                          double[:, ::1] M1, double[:, ::1] Z1, double[:, ::1] H1,
                          double[:, ::1] M2, double[:, ::1] Z2, double[:, ::1] H2,
                          double[:, ::1] Z3, double[:, ::1] H3,
                          double[:, ::1] Z4, double[:, ::1] H4,
                          double[::1] pool, double[::1] logits, double[::1] probs) noexcept:
    cdef int i, j, f, g, d, m, w, c, e, r, t
    cdef double s, mx, e0, e1

    for i in range(n):
        for f in range(F):
            s = head_b[i, f]
            for d in range(D):
                s += x[d] * head_w[i, d, f]
            Z0[i, f] = s
            H0[i, f] = s if s > 0.0 else 0.0

    if use_static:
        for i in range(n):
            for j in range(n):
                ahat[i, j] = static_ahat[i, j]
    else:
        _knn_fill(H0, n, F, k, dist2, used, A)
        _normalize_fill(A, n, deg, ahat)

    for i in range(n):
        for f in range(F):
            s = 0.0
            for j in range(n):
                s += ahat[i, j] * H0[j, f]
            M1[i, f] = s
    for i in range(n):
        for g in range(F):
            s = 0.0
            for f in range(F):
                s += M1[i, f] * g1[f, g]
            Z1[i, g] = s
            H1[i, g] = s if s > 0.0 else 0.0

    for i in range(n):
        for f in range(F):
            s = 0.0
            for j in range(n):
                s += ahat[i, j] * H1[j, f]
            M2[i, f] = s
    for i in range(n):
        for g in range(F):
            s = 0.0
            for f in range(F):
                s += M2[i, f] * g2[f, g]
            Z2[i, g] = s
            H2[i, g] = s if s > 0.0 else 0.0

    for m in range(n):
        for c in range(C1):
            s = c1b[c]
            for w in range(3):
                r = m + w - 1
                if 0 <= r < n:
                    for f in range(F):
                        s += H2[r, f] * c1w[w, f, c]
            Z3[m, c] = s
            H3[m, c] = s if s > 0.0 else 0.0

    for m in range(n):
        for e in range(C2):
            s = c2b[e]
            for w in range(3):
                r = m + w - 1
                if 0 <= r < n:
                    for c in range(C1):
                        s += H3[r, c] * c2w[w, c, e]
            Z4[m, e] = s
            H4[m, e] = s if s > 0.0 else 0.0

    for e in range(C2):
        s = 0.0
        for m in range(n):
            s += H4[m, e]
        pool[e] = s / n

    for t in range(2):
        s = ob[t]
        for e in range(C2):
            s += pool[e] * ow[e, t]
        logits[t] = s

    mx = logits[0] if logits[0] > logits[1] else logits[1]
    e0 = exp(logits[0] - mx)
    e1 = exp(logits[1] - mx)
    probs[0] = e0 / (e0 + e1)
    probs[1] = e1 / (e0 + e1)


cdef tuple _unpack(params):
    return (
        np.ascontiguousarray(params[0], dtype=np.float64),
        np.ascontiguousarray(params[1], dtype=np.float64),
        np.ascontiguousarray(params[2], dtype=np.float64),
        np.ascontiguousarray(params[3], dtype=np.float64),
        np.ascontiguousarray(params[4], dtype=np.float64),
        np.ascontiguousarray(params[5], dtype=np.float64),
        np.ascontiguousarray(params[6], dtype=np.float64),
        np.ascontiguousarray(params[7], dtype=np.float64),
        np.ascontiguousarray(params[8], dtype=np.float64),
        np.ascontiguousarray(params[9], dtype=np.float64),
    )


def forward_batch(params, X, int k, static_a_hat=None):
    """Class probabilities (healthy, hypomimia) for a batch of feature vectors."""
    head_w, head_b, g1, g2, c1w, c1b, c2w, c2b, ow, ob = _unpack(params)
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != head_w.shape[1]:
        raise ValueError(f"input must be (B, {head_w.shape[1]}), got {X.shape}")
    cdef double[:, ::1] xv = X
    cdef int B = xv.shape[0]
    cdef int n = head_w.shape[0], D = head_w.shape[1], F = head_w.shape[2]
    cdef int C1 = c1w.shape[2], C2 = c2w.shape[2]
    cdef bint use_static = static_a_hat is not None
    static_arr = np.ascontiguousarray(static_a_hat, dtype=np.float64) if use_static else np.zeros((n, n))

    probs_out = np.empty((B, 2))
    cdef double[:, ::1] pv = probs_out

    Z0 = np.empty((n, F)); H0 = np.empty((n, F))
    dist2 = np.empty((n, n)); used = np.zeros(n, dtype=np.int8); A = np.empty((n, n))
    deg = np.empty(n); ahat = np.empty((n, n))
    M1 = np.empty((n, F)); Z1 = np.empty((n, F)); H1 = np.empty((n, F))
    M2 = np.empty((n, F)); Z2 = np.empty((n, F)); H2 = np.empty((n, F))
    Z3 = np.empty((n, C1)); H3 = np.empty((n, C1))
    Z4 = np.empty((n, C2)); H4 = np.empty((n, C2))
    pool = np.empty(C2); logits = np.empty(2); probs = np.empty(2)

    cdef double[:, :, ::1] hwv = head_w
    cdef double[:, ::1] hbv = head_b, g1v = g1, g2v = g2, owv = ow
    cdef double[:, :, ::1] c1wv = c1w, c2wv = c2w
    cdef double[::1] c1bv = c1b, c2bv = c2b, obv = ob
    cdef double[:, ::1] sav = static_arr
    cdef double[:, ::1] Z0v = Z0, H0v = H0, dv = dist2, Av = A, ahv = ahat
    cdef double[:, ::1] M1v = M1, Z1v = Z1, H1v = H1, M2v = M2, Z2v = Z2, H2v = H2
    cdef double[:, ::1] Z3v = Z3, H3v = H3, Z4v = Z4, H4v = H4
    cdef double[::1] degv = deg, poolv = pool, logv = logits, prv = probs
    cdef char[::1] uv = used

    cdef int b, t
    for b in range(B):
        _forward_sample(xv[b], D, n, F, C1, C2, k, hwv, hbv, g1v, g2v,
                        c1wv, c1bv, c2wv, c2bv, owv, obv, use_static, sav,
                        Z0v, H0v, dv, uv, Av, degv, ahv,
                        M1v, Z1v, H1v, M2v, Z2v, H2v, Z3v, H3v, Z4v, H4v,
                        poolv, logv, prv)
        for t in range(2):
            pv[b, t] = prv[t]
    return probs_out


def loss_and_grads(params, X, labels, int k, static_a_hat=None):
    """Mean cross-entropy and exact analytic gradients (topology constant)."""
    head_w, head_b, g1, g2, c1w, c1b, c2w, c2b, ow, ob = _unpack(params)
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != head_w.shape[1]:
        raise ValueError(f"input must be (B, {head_w.shape[1]}), got {X.shape}")
    y = np.ascontiguousarray(labels, dtype=np.int64)
    cdef double[:, ::1] xv = X
    cdef long long[::1] yv = y
    cdef int B = xv.shape[0]
    cdef int n = head_w.shape[0], D = head_w.shape[1], F = head_w.shape[2]
    cdef int C1 = c1w.shape[2], C2 = c2w.shape[2]
    cdef bint use_static = static_a_hat is not None
    static_arr = np.ascontiguousarray(static_a_hat, dtype=np.float64) if use_static else np.zeros((n, n))

    # gradient accumulators
    d_head_w = np.zeros((n, D, F)); d_head_b = np.zeros((n, F))
    d_g1 = np.zeros((F, F)); d_g2 = np.zeros((F, F))
    d_c1w = np.zeros((3, F, C1)); d_c1b = np.zeros(C1)
    d_c2w = np.zeros((3, C1, C2)); d_c2b = np.zeros(C2)
    d_ow = np.zeros((C2, 2)); d_ob = np.zeros(2)

    # per-sample caches and backward scratch
    Z0 = np.empty((n, F)); H0 = np.empty((n, F))
    dist2 = np.empty((n, n)); used = np.zeros(n, dtype=np.int8); A = np.empty((n, n))
    deg = np.empty(n); ahat = np.empty((n, n))
    M1 = np.empty((n, F)); Z1 = np.empty((n, F)); H1 = np.empty((n, F))
    M2 = np.empty((n, F)); Z2 = np.empty((n, F)); H2 = np.empty((n, F))
    Z3 = np.empty((n, C1)); H3 = np.empty((n, C1))
    Z4 = np.empty((n, C2)); H4 = np.empty((n, C2))
    pool = np.empty(C2); logits = np.empty(2); probs = np.empty(2)
    dZ4 = np.empty((n, C2)); dH3 = np.empty((n, C1)); dZ3 = np.empty((n, C1))
    dH2 = np.empty((n, F)); dZ2 = np.empty((n, F)); dT2 = np.empty((n, F))
    dH1 = np.empty((n, F)); dZ1 = np.empty((n, F)); dT1 = np.empty((n, F))
    dH0 = np.empty((n, F)); dZ0 = np.empty((n, F))
    dpool = np.empty(C2); dlogits = np.empty(2)

    cdef double[:, :, ::1] hwv = head_w, c1wv = c1w, c2wv = c2w
    cdef double[:, ::1] hbv = head_b, g1v = g1, g2v = g2, owv = ow
    cdef double[::1] c1bv = c1b, c2bv = c2b, obv = ob
    cdef double[:, ::1] sav = static_arr
    cdef double[:, :, ::1] dhwv = d_head_w, dc1wv = d_c1w, dc2wv = d_c2w
    cdef double[:, ::1] dhbv = d_head_b, dg1v = d_g1, dg2v = d_g2, dowv = d_ow
    cdef double[::1] dc1bv = d_c1b, dc2bv = d_c2b, dobv = d_ob
    cdef double[:, ::1] Z0v = Z0, H0v = H0, dv = dist2, Av = A, ahv = ahat
    cdef double[:, ::1] M1v = M1, Z1v = Z1, H1v = H1, M2v = M2, Z2v = Z2, H2v = H2
    cdef double[:, ::1] Z3v = Z3, H3v = H3, Z4v = Z4, H4v = H4
    cdef double[::1] degv = deg, poolv = pool, logv = logits, prv = probs
    cdef char[::1] uv = used
    cdef double[:, ::1] dZ4v = dZ4, dH3v = dH3, dZ3v = dZ3, dH2v = dH2, dZ2v = dZ2
    cdef double[:, ::1] dT2v = dT2, dH1v = dH1, dZ1v = dZ1, dT1v = dT1, dH0v = dH0, dZ0v = dZ0
    cdef double[::1] dpoolv = dpool, dlv = dlogits

    cdef int b, i, j, f, g, d, m, w, c, e, r, t, lab
    cdef double s, py, loss = 0.0
    cdef double inv_n = 1.0 / n

    for b in range(B):
        _forward_sample(xv[b], D, n, F, C1, C2, k, hwv, hbv, g1v, g2v,
                        c1wv, c1bv, c2wv, c2bv, owv, obv, use_static, sav,
                        Z0v, H0v, dv, uv, Av, degv, ahv,
                        M1v, Z1v, H1v, M2v, Z2v, H2v, Z3v, H3v, Z4v, H4v,
                        poolv, logv, prv)
        lab = <int> yv[b]
        py = prv[lab]
        if py > _CLAMP:
            loss += -log(py)
            for t in range(2):
                dlv[t] = prv[t] - (1.0 if t == lab else 0.0)
        else:
            loss += -log(_CLAMP)
            dlv[0] = 0.0
            dlv[1] = 0.0

        for e in range(C2):
            for t in range(2):
                dowv[e, t] += poolv[e] * dlv[t]
        for t in range(2):
            dobv[t] += dlv[t]
        for e in range(C2):
            dpoolv[e] = owv[e, 0] * dlv[0] + owv[e, 1] * dlv[1]

        for m in range(n):
            for e in range(C2):
                dZ4v[m, e] = (dpoolv[e] * inv_n) if Z4v[m, e] > 0.0 else 0.0

        for m in range(n):
            for c in range(C1):
                dH3v[m, c] = 0.0
        for m in range(n):
            for e in range(C2):
                if dZ4v[m, e] == 0.0:
                    continue
                dc2bv[e] += dZ4v[m, e]
                for w in range(3):
                    r = m + w - 1
                    if 0 <= r < n:
                        for c in range(C1):
                            dc2wv[w, c, e] += H3v[r, c] * dZ4v[m, e]
                            dH3v[r, c] += c2wv[w, c, e] * dZ4v[m, e]

        for m in range(n):
            for c in range(C1):
                dZ3v[m, c] = dH3v[m, c] if Z3v[m, c] > 0.0 else 0.0
        for m in range(n):
            for f in range(F):
                dH2v[m, f] = 0.0
        for m in range(n):
            for c in range(C1):
                if dZ3v[m, c] == 0.0:
                    continue
                dc1bv[c] += dZ3v[m, c]
                for w in range(3):
                    r = m + w - 1
                    if 0 <= r < n:
                        for f in range(F):
                            dc1wv[w, f, c] += H2v[r, f] * dZ3v[m, c]
                            dH2v[r, f] += c1wv[w, f, c] * dZ3v[m, c]

        for i in range(n):
            for f in range(F):
                dZ2v[i, f] = dH2v[i, f] if Z2v[i, f] > 0.0 else 0.0
        for f in range(F):
            for g in range(F):
                s = 0.0
                for i in range(n):
                    s += M2v[i, f] * dZ2v[i, g]
                dg2v[f, g] += s
        # dH1 = ahat @ (dZ2 @ g2^T)
        for i in range(n):
            for f in range(F):
                s = 0.0
                for g in range(F):
                    s += dZ2v[i, g] * g2v[f, g]
                dT2v[i, f] = s
        for i in range(n):
            for f in range(F):
                s = 0.0
                for j in range(n):
                    s += ahv[i, j] * dT2v[j, f]
                dH1v[i, f] = s

        for i in range(n):
            for f in range(F):
                dZ1v[i, f] = dH1v[i, f] if Z1v[i, f] > 0.0 else 0.0
        for f in range(F):
            for g in range(F):
                s = 0.0
                for i in range(n):
                    s += M1v[i, f] * dZ1v[i, g]
                dg1v[f, g] += s
        for i in range(n):
            for f in range(F):
                s = 0.0
                for g in range(F):
                    s += dZ1v[i, g] * g1v[f, g]
                dT1v[i, f] = s
        for i in range(n):
            for f in range(F):
                s = 0.0
                for j in range(n):
                    s += ahv[i, j] * dT1v[j, f]
                dH0v[i, f] = s

        for i in range(n):
            for f in range(F):
                dZ0v[i, f] = dH0v[i, f] if Z0v[i, f] > 0.0 else 0.0
        for i in range(n):
            for f in range(F):
                if dZ0v[i, f] == 0.0:
                    continue
                dhbv[i, f] += dZ0v[i, f]
                for d in range(D):
                    dhwv[i, d, f] += xv[b, d] * dZ0v[i, f]

    grads = (d_head_w, d_head_b, d_g1, d_g2, d_c1w, d_c1b, d_c2w, d_c2b, d_ow, d_ob)
    for arr in grads:
        arr /= B
    return loss / B, grads
