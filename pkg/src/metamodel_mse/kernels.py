"""Counter-based Gaussian streams and the per-condition sample-mean kernel.

Every variate is a pure function of a 64-bit stream key and a draw index:

    mix64(z)       SplitMix64 finalizer (xor-shift 30/27/31, two multiplies)
    combine(h, v)  mix64(h + GOLDEN * (v + 1))            (wrapping uint64)
    key            combine(combine(mix64(base_seed), replication), condition)
    u_i            ((combine(key, i) >> 12) + 0.5) * 2**-52   in (0, 1)
    z_i            Phi^-1(u_i) by Wichura's AS241 (PPND16)

No generator state is carried between draws, so replications and
conditions can be computed in any order or on any thread.
"""

from __future__ import annotations

import numpy as np

from ._accel import HAVE_NUMBA, njit, selected_backend

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S12 = np.uint64(12)
_ONE = np.uint64(1)
_INV52 = 2.0**-52
_MASK64 = (1 << 64) - 1

# AS241 PPND16 coefficients
_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)

BACKEND = selected_backend()


# ---------------------------------------------------------------------------
# key derivation (python ints; not hot)


def mix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def combine(h: int, v: int) -> int:
    return mix64(h + 0x9E3779B97F4A7C15 * (v + 1))


def stream_key(base_seed: int, replication: int, condition: int) -> int:
    return combine(combine(mix64(base_seed), replication), condition)


def stream_keys(base_seed: int, replications: np.ndarray, num_conditions: int) -> np.ndarray:
    """Vectorized ``stream_key`` over a replication range, shape (R, L) uint64."""
    reps = np.asarray(replications, dtype=np.uint64)
    root = np.uint64(mix64(base_seed))
    rep_keys = _mix_np(root + GOLDEN * (reps + _ONE))
    conds = np.arange(num_conditions, dtype=np.uint64)
    return _mix_np(rep_keys[:, None] + GOLDEN * (conds[None, :] + _ONE))


# ---------------------------------------------------------------------------
# numpy backend


def _mix_np(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _uniform_np(bits: np.ndarray) -> np.ndarray:
    return ((bits >> _S12).astype(np.float64) + 0.5) * _INV52


def _poly_np(coef, r):
    acc = np.full_like(r, coef[-1])
    for c in coef[-2::-1]:
        acc = acc * r + c
    return acc


def ndtri_np(u: np.ndarray) -> np.ndarray:
    """Standard normal quantile for u in (0, 1), elementwise."""
    u = np.asarray(u, dtype=np.float64)
    q = u - 0.5
    out = np.empty_like(u)
    central = np.abs(q) <= 0.425
    if central.any():
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _poly_np(_A, r) / _poly_np(_B, r)
    tail = ~central
    if tail.any():
        qt = q[tail]
        r = np.where(qt < 0.0, u[tail], 1.0 - u[tail])
        r = np.sqrt(-np.log(r))
        near = r <= 5.0
        val = np.empty_like(r)
        rn = r[near] - 1.6
        val[near] = _poly_np(_C, rn) / _poly_np(_D, rn)
        rf = r[~near] - 5.0
        val[~near] = _poly_np(_E, rf) / _poly_np(_F, rf)
        out[tail] = np.where(qt < 0.0, -val, val)
    return out


def _normals_np(key: int, count: int) -> np.ndarray:
    idx = np.arange(1, count + 1, dtype=np.uint64)
    return ndtri_np(_uniform_np(_mix_np(np.uint64(key) + GOLDEN * idx)))


def _condition_means_np(keys, m, mu, sigma, chunk_elems=1 << 21):
    R, L = keys.shape
    out = np.empty((R, L))
    offsets = GOLDEN * np.arange(1, m + 1, dtype=np.uint64)
    step = max(1, chunk_elems // (L * m))
    for start in range(0, R, step):
        stop = min(R, start + step)
        z = ndtri_np(_uniform_np(_mix_np(keys[start:stop, :, None] + offsets)))
        out[start:stop] = mu + sigma * (z.sum(axis=2) / m)
    return out


# ---------------------------------------------------------------------------
# numba backend


@njit(cache=True, inline="always")
def _mix_nb(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def _ndtri_nb(u):
    q = u - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((_A[7] * r + _A[6]) * r + _A[5]) * r + _A[4]) * r + _A[3]) * r + _A[2]) * r
                + _A[1]) * r + _A[0])
        den = (((((((_B[7] * r + _B[6]) * r + _B[5]) * r + _B[4]) * r + _B[3]) * r + _B[2]) * r
                + _B[1]) * r + 1.0)
        return q * num / den
    r = u if q < 0.0 else 1.0 - u
    r = np.sqrt(-np.log(r))
    if r <= 5.0:
        r -= 1.6
        num = (((((((_C[7] * r + _C[6]) * r + _C[5]) * r + _C[4]) * r + _C[3]) * r + _C[2]) * r
                + _C[1]) * r + _C[0])
        den = (((((((_D[7] * r + _D[6]) * r + _D[5]) * r + _D[4]) * r + _D[3]) * r + _D[2]) * r
                + _D[1]) * r + 1.0)
    else:
        r -= 5.0
        num = (((((((_E[7] * r + _E[6]) * r + _E[5]) * r + _E[4]) * r + _E[3]) * r + _E[2]) * r
                + _E[1]) * r + _E[0])
        den = (((((((_F[7] * r + _F[6]) * r + _F[5]) * r + _F[4]) * r + _F[3]) * r + _F[2]) * r
                + _F[1]) * r + 1.0)
    v = num / den
    return -v if q < 0.0 else v


@njit(cache=True, inline="always")
def _draw_nb(key, i):
    bits = _mix_nb(key + GOLDEN * np.uint64(i + 1))
    return _ndtri_nb(((bits >> _S12) + 0.5) * _INV52)


@njit(cache=True, nogil=True)
def _normals_nb(key, count):
    out = np.empty(count)
    for i in range(count):
        out[i] = _draw_nb(key, i)
    return out


@njit(cache=True, nogil=True)
def _condition_means_nb(keys, m, mu, sigma):
    R, L = keys.shape
    out = np.empty((R, L))
    for r in range(R):
        for c in range(L):
            k = keys[r, c]
            s = 0.0
            for i in range(m):
                s += _draw_nb(k, i)
            out[r, c] = mu[c] + sigma * (s / m)
    return out


# ---------------------------------------------------------------------------
# dispatch


def _resolve(backend):
    backend = backend or BACKEND
    if backend == "numba" and not HAVE_NUMBA:
        backend = "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    return backend


def standard_normals(key: int, count: int, backend: str | None = None) -> np.ndarray:
    """``count`` N(0, 1) variates from stream ``key`` (draw indices 0..count-1)."""
    if _resolve(backend) == "numba":
        return _normals_nb(np.uint64(key), count)
    return _normals_np(key, count)


def condition_means(keys, m, mu, sigma, backend: str | None = None) -> np.ndarray:
    """Sample means of ``m`` draws of ``mu[c] + sigma * z`` for every key.

    ``keys`` is an (R, L) uint64 array of stream keys; returns (R, L).
    """
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    mu = np.ascontiguousarray(mu, dtype=np.float64)
    if keys.ndim != 2 or keys.shape[1] != mu.shape[0]:
        raise ValueError(f"keys shape {keys.shape} does not match {mu.shape[0]} conditions")
    if _resolve(backend) == "numba":
        return _condition_means_nb(keys, int(m), mu, float(sigma))
    return _condition_means_np(keys, int(m), mu, float(sigma))
