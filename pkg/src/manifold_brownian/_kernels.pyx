# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.  Same contracts as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, sin, cos, floor, M_PI
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t stream_key(uint64_t h0, uint64_t path, uint64_t step, uint64_t sub) nogil:
    cdef uint64_t h = mix64(h0 ^ path)
    h = mix64(h ^ step)
    return mix64(h ^ sub)


cdef inline double uniform(uint64_t key, int channel) nogil:
    cdef uint64_t x = mix64(key + <uint64_t>(channel + 1) * GOLDEN)
    return (<double>(x >> 11) + 0.5) * INV_2_53


cdef inline void box_muller(uint64_t key, int n, double* out) nogil:
    cdef int j
    cdef double rad, ang
    j = 0
    while j < n:
        rad = sqrt(-2.0 * log(uniform(key, j)))
        ang = 2.0 * M_PI * uniform(key, j + 1)
        out[j] = rad * cos(ang)
        if j + 1 < n:
            out[j + 1] = rad * sin(ang)
        j += 2


cdef inline uint64_t seed_key(object seed):
    return mix64(<uint64_t>((int(seed) + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF))


def normals(seed, path_ids, long long step, long long sub, int n_channels):
    cdef const int64_t[::1] paths = np.ascontiguousarray(path_ids, dtype=np.int64)
    cdef Py_ssize_t n = paths.shape[0], i
    out_arr = np.empty((n, n_channels), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef uint64_t h0 = seed_key(seed)
    with nogil:
        for i in range(n):
            box_muller(stream_key(h0, <uint64_t>paths[i], <uint64_t>step, <uint64_t>sub),
                       n_channels, &out[i, 0])
    return out_arr


def normals_over_steps(seed, long long path_id, steps, long long sub, int n_channels):
    cdef const int64_t[::1] st = np.ascontiguousarray(steps, dtype=np.int64)
    cdef Py_ssize_t n = st.shape[0], i
    out_arr = np.empty((n, n_channels), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef uint64_t h0 = seed_key(seed)
    with nogil:
        for i in range(n):
            box_muller(stream_key(h0, <uint64_t>path_id, <uint64_t>st[i], <uint64_t>sub),
                       n_channels, &out[i, 0])
    return out_arr


cdef inline void rodrigues_right(double* R, double x, double y, double z) nogil:
    """R <- R exp(hat(x, y, z)) in place, R row-major 3x3."""
    cdef double th2 = x * x + y * y + z * z
    cdef double th, A, B
    cdef double E[9]
    cdef double T[9]
    cdef int i, j
    if th2 < 1e-8:
        A = 1.0 - th2 / 6.0 + th2 * th2 / 120.0
        B = 0.5 - th2 / 24.0 + th2 * th2 / 720.0
    else:
        th = sqrt(th2)
        A = sin(th) / th
        B = (1.0 - cos(th)) / (th * th)
    E[0] = 1.0 - B * (y * y + z * z)
    E[1] = -A * z + B * x * y
    E[2] = A * y + B * x * z
    E[3] = A * z + B * x * y
    E[4] = 1.0 - B * (x * x + z * z)
    E[5] = -A * x + B * y * z
    E[6] = -A * y + B * x * z
    E[7] = A * x + B * y * z
    E[8] = 1.0 - B * (x * x + y * y)
    for i in range(3):
        for j in range(3):
            T[3 * i + j] = R[3 * i] * E[j] + R[3 * i + 1] * E[3 + j] + R[3 * i + 2] * E[6 + j]
    for i in range(9):
        R[i] = T[i]


def so3_right_exp(R, omega):
    cdef const double[:, ::1] src = np.ascontiguousarray(np.asarray(R, dtype=np.float64).reshape(-1, 9))
    cdef const double[:, ::1] w = np.ascontiguousarray(np.asarray(omega, dtype=np.float64).reshape(-1, 3))
    out_arr = np.array(src, copy=True)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(out.shape[0]):
            rodrigues_right(&out[i, 0], w[i, 0], w[i, 1], w[i, 2])
    return out_arr


def so3_exp_walk(double[:, ::1] states, seed, path_ids, long long step0, long long n_steps,
                 double dt, drift):
    cdef const int64_t[::1] paths = np.ascontiguousarray(path_ids, dtype=np.int64)
    cdef const double[::1] d = np.ascontiguousarray(drift, dtype=np.float64)
    cdef uint64_t h0 = seed_key(seed)
    cdef double sq = sqrt(dt)
    cdef double z[3]
    cdef Py_ssize_t i
    cdef long long k
    with nogil:
        for i in range(states.shape[0]):
            for k in range(n_steps):
                box_muller(stream_key(h0, <uint64_t>paths[i], <uint64_t>(step0 + k), 0), 3, z)
                rodrigues_right(&states[i, 0], d[0] * dt + sq * z[0], d[1] * dt + sq * z[1],
                                d[2] * dt + sq * z[2])
    return np.asarray(states)


def torus_chain_histogram(double R, double r, double dt, long long n_steps, long long burn_steps,
                          seed, int bins, double theta0=0.0, block=None):
    counts_arr = np.zeros(bins, dtype=np.int64)
    cdef int64_t[::1] counts = counts_arr
    cdef uint64_t h0 = seed_key(seed)
    cdef double sq = sqrt(dt), inv_r = 1.0 / r, two_pi = 2.0 * M_PI
    cdef double th = theta0, dw, a0, a1, tp, wrapped
    cdef double z[1]
    cdef long long k
    cdef int b
    with nogil:
        for k in range(n_steps):
            box_muller(stream_key(h0, 0, <uint64_t>k, 0), 1, z)
            dw = sq * z[0]
            a0 = -sin(th) / (2.0 * r * (R + r * cos(th)))
            tp = th + a0 * dt + inv_r * dw
            a1 = -sin(tp) / (2.0 * r * (R + r * cos(tp)))
            th = th + 0.5 * (a0 + a1) * dt + inv_r * dw
            if k >= burn_steps:
                wrapped = th - two_pi * floor(th / two_pi)
                b = <int>(wrapped / two_pi * bins)
                if b >= bins:
                    b = bins - 1
                counts[b] += 1
    return counts_arr


cdef inline double inv_transpose(const double* X, double* Y) nogil:
    """Y = X^{-T} for a row-major 3x3 X; returns det(X)."""
    cdef double c00 = X[4] * X[8] - X[5] * X[7]
    cdef double c01 = X[5] * X[6] - X[3] * X[8]
    cdef double c02 = X[3] * X[7] - X[4] * X[6]
    cdef double det = X[0] * c00 + X[1] * c01 + X[2] * c02
    cdef double inv = 1.0 / det
    Y[0] = c00 * inv
    Y[1] = c01 * inv
    Y[2] = c02 * inv
    Y[3] = (X[2] * X[7] - X[1] * X[8]) * inv
    Y[4] = (X[0] * X[8] - X[2] * X[6]) * inv
    Y[5] = (X[1] * X[6] - X[0] * X[7]) * inv
    Y[6] = (X[1] * X[5] - X[2] * X[4]) * inv
    Y[7] = (X[2] * X[3] - X[0] * X[5]) * inv
    Y[8] = (X[0] * X[4] - X[1] * X[3]) * inv
    return det


def so3_polar(X, int max_iter=30):
    """Orthogonal polar factor of flattened 3x3 matrices by Newton's iteration X <- (X + X^{-T})/2."""
    out_arr = np.array(np.asarray(X, dtype=np.float64).reshape(-1, 9), copy=True, order="C")
    cdef double[:, ::1] out = out_arr
    cdef double Y[9]
    cdef double change
    cdef Py_ssize_t i
    cdef int it, j
    with nogil:
        for i in range(out.shape[0]):
            for it in range(max_iter):
                inv_transpose(&out[i, 0], Y)
                change = 0.0
                for j in range(9):
                    Y[j] = 0.5 * (out[i, j] + Y[j])
                    change = change + (Y[j] - out[i, j]) * (Y[j] - out[i, j])
                    out[i, j] = Y[j]
                if change < 1e-30:
                    break
    return out_arr


def so3_residual(X):
    """Frobenius norm of X^T X - I for flattened 3x3 matrices."""
    cdef const double[:, ::1] src = np.ascontiguousarray(np.asarray(X, dtype=np.float64).reshape(-1, 9))
    out_arr = np.empty(src.shape[0], dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef int a, b
    cdef double s, acc
    with nogil:
        for i in range(src.shape[0]):
            acc = 0.0
            for a in range(3):
                for b in range(3):
                    s = src[i, a] * src[i, b] + src[i, 3 + a] * src[i, 3 + b] + src[i, 6 + a] * src[i, 6 + b]
                    if a == b:
                        s = s - 1.0
                    acc = acc + s * s
            out[i] = sqrt(acc)
    return out_arr
