"""Pure NumPy implementations of the hot kernels.

Used when the compiled extension is unavailable or when the environment
variable MANIFOLD_BM_PURE=1 is set.  Results agree with the compiled kernels to
rounding (libm and NumPy transcendental functions may differ in the last ulp).

Noise derivation (shared with the compiled kernels)::

    h  = mix64(seed + G)
    h  = mix64(h ^ path);  h = mix64(h ^ step);  h = mix64(h ^ sub)
    u_c = ((mix64(h + (c + 1) * G) >> 11) + 0.5) * 2**-53

where mix64 is the splitmix64 finalizer and G = 0x9E3779B97F4A7C15.  Channels
are paired (2j, 2j+1) and turned into normals by Box-Muller.
"""

import math

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
M1 = 0xBF58476D1CE4E5B9
M2 = 0x94D049BB133111EB
MASK = (1 << 64) - 1
INV_2_53 = 1.0 / 9007199254740992.0

_G = np.uint64(GOLDEN)
_M1 = np.uint64(M1)
_M2 = np.uint64(M2)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))


def mix64(z):
    """splitmix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def mix64_int(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * M1) & MASK
    z = ((z ^ (z >> 27)) * M2) & MASK
    return z ^ (z >> 31)


def _stream_keys(seed, path_ids, step, sub):
    h0 = np.uint64(mix64_int((int(seed) + GOLDEN) & MASK))
    paths = np.asarray(path_ids).astype(np.uint64)
    with np.errstate(over="ignore"):
        h = mix64(h0 ^ paths)
        h = mix64(h ^ np.asarray(step).astype(np.uint64))
        return mix64(h ^ np.asarray(sub).astype(np.uint64))


def _uniform(keys, channel):
    with np.errstate(over="ignore"):
        x = mix64(keys + np.uint64(((channel + 1) * GOLDEN) & MASK))
    return ((x >> _S11).astype(np.float64) + 0.5) * INV_2_53


def _box_muller(keys, n_channels):
    out = np.empty(keys.shape + (n_channels,))
    for j in range(0, n_channels, 2):
        u1 = _uniform(keys, j)
        u2 = _uniform(keys, j + 1)
        rad = np.sqrt(-2.0 * np.log(u1))
        ang = 2.0 * np.pi * u2
        out[..., j] = rad * np.cos(ang)
        if j + 1 < n_channels:
            out[..., j + 1] = rad * np.sin(ang)
    return out


def normals(seed, path_ids, step, sub, n_channels):
    """Standard normals of shape (len(path_ids), n_channels)."""
    keys = _stream_keys(seed, np.asarray(path_ids, dtype=np.int64), step, sub)
    return _box_muller(keys, int(n_channels))


def normals_over_steps(seed, path_id, steps, sub, n_channels):
    """Standard normals of shape (len(steps), n_channels) for one path."""
    steps = np.asarray(steps, dtype=np.int64)
    keys = _stream_keys(seed, np.full(steps.shape, path_id, dtype=np.int64), steps, sub)
    return _box_muller(keys, int(n_channels))


def so3_right_exp(R, omega):
    """R @ exp(hat(omega)) row-wise, R flattened (N, 9), omega (N, 3)."""
    R = np.asarray(R, dtype=float).reshape(-1, 3, 3)
    w = np.asarray(omega, dtype=float).reshape(-1, 3)
    th2 = w[:, 0] * w[:, 0] + w[:, 1] * w[:, 1] + w[:, 2] * w[:, 2]
    th = np.sqrt(th2)
    small = th2 < 1e-8
    safe = np.where(small, 1.0, th)
    A = np.where(small, 1.0 - th2 / 6.0 + th2 * th2 / 120.0, np.sin(safe) / safe)
    B = np.where(small, 0.5 - th2 / 24.0 + th2 * th2 / 720.0, (1.0 - np.cos(safe)) / (safe * safe))
    x, y, z = w[:, 0], w[:, 1], w[:, 2]
    E = np.empty_like(R)
    E[:, 0, 0] = 1.0 - B * (y * y + z * z)
    E[:, 0, 1] = -A * z + B * x * y
    E[:, 0, 2] = A * y + B * x * z
    E[:, 1, 0] = A * z + B * x * y
    E[:, 1, 1] = 1.0 - B * (x * x + z * z)
    E[:, 1, 2] = -A * x + B * y * z
    E[:, 2, 0] = -A * y + B * x * z
    E[:, 2, 1] = A * x + B * y * z
    E[:, 2, 2] = 1.0 - B * (x * x + y * y)
    out = np.empty_like(R)
    for i in range(3):
        for j in range(3):
            out[:, i, j] = R[:, i, 0] * E[:, 0, j] + R[:, i, 1] * E[:, 1, j] + R[:, i, 2] * E[:, 2, j]
    return out.reshape(-1, 9)


def so3_exp_walk(states, seed, path_ids, step0, n_steps, dt, drift):
    """Advance (N, 9) rotations in place by n_steps of R <- R exp(drift dt + sqrt(dt) Z)."""
    sq = math.sqrt(dt)
    d = np.asarray(drift, dtype=float)
    for k in range(n_steps):
        z = normals(seed, path_ids, step0 + k, 0, 3)
        states[:] = so3_right_exp(states, d * dt + sq * z)
    return states


def torus_chain_histogram(R, r, dt, n_steps, burn_steps, seed, bins, theta0=0.0, block=1 << 16):
    """Histogram of θ mod 2π along one Heun chain of the torus θ-equation."""
    counts = np.zeros(bins, dtype=np.int64)
    sq = math.sqrt(dt)
    inv_r = 1.0 / r
    two_pi = 2.0 * math.pi
    th = float(theta0)
    done = 0
    while done < n_steps:
        m = min(block, n_steps - done)
        z = normals_over_steps(seed, 0, np.arange(done, done + m), 0, 1)[:, 0]
        for k in range(m):
            dw = sq * z[k]
            a0 = -math.sin(th) / (2.0 * r * (R + r * math.cos(th)))
            tp = th + a0 * dt + inv_r * dw
            a1 = -math.sin(tp) / (2.0 * r * (R + r * math.cos(tp)))
            th = th + 0.5 * (a0 + a1) * dt + inv_r * dw
            if done + k >= burn_steps:
                b = int((th % two_pi) / two_pi * bins)
                counts[min(b, bins - 1)] += 1
        done += m
    return counts


def so3_polar(X, max_iter=30):
    """Orthogonal polar factor of flattened 3x3 matrices by Newton's iteration X <- (X + X^{-T})/2."""
    M = np.array(np.asarray(X, dtype=float).reshape(-1, 3, 3), copy=True)
    active = np.ones(len(M), dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        A = M[active]
        Y = 0.5 * (A + np.swapaxes(np.linalg.inv(A), -1, -2))
        change = np.sum((Y - A) ** 2, axis=(-1, -2))
        M[active] = Y
        idx = np.flatnonzero(active)
        active[idx[change < 1e-30]] = False
    return M.reshape(-1, 9)


def so3_residual(X):
    """Frobenius norm of X^T X - I for flattened 3x3 matrices."""
    M = np.asarray(X, dtype=float).reshape(-1, 3, 3)
    D = np.einsum("nki,nkj->nij", M, M) - np.eye(3)
    return np.sqrt(np.einsum("nij,nij->n", D, D))
