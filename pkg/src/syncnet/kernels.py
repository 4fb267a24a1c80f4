"""Hot loops: edge-wise coupling right-hand sides and fixed-step integrators.

Every kernel exists twice, a loop version compiled with numba and a
vectorised numpy version. The module-level names point at the numba
variants unless ``SYNCNET_DISABLE_NUMBA`` is set (see ``_accel``); both are
reachable through ``BACKENDS`` so they can be cross-checked and benchmarked.

Conventions shared by all kernels:

* the graph is given as three edge arrays ``tails``, ``heads`` (int64, tail
  is the lower node index) and ``weights`` (float64);
* the coupling nonlinearity is an integer code, see ``COUPLING_CODES``;
* scalar states have shape ``(N,)``; vector states ``(N, L)``;
* chunk integrators advance ``theta`` in place by ``n_steps`` steps, write a
  copy of the state into ``out`` after every ``sample_every`` steps and return
  the index of the first step that produced a non-finite state (or -1).
"""
import numpy as np

from ._accel import USE_NUMBA, optional_njit

COUPLING_CODES = {"linear": 0, "tanh": 1, "sin": 2}


# ---------------------------------------------------------------- numba path

@optional_njit(cache=True, nogil=True)
def _apply_f(code, x):
    if code == 1:
        return np.tanh(x)
    if code == 2:
        return np.sin(x)
    return x


@optional_njit(cache=True, nogil=True)
def _rhs_scalar_jit(theta, omega, gain, tails, heads, weights, code, out):
    n = theta.shape[0]
    for i in range(n):
        out[i] = 0.0
    for e in range(tails.shape[0]):
        t = tails[e]
        h = heads[e]
        flux = weights[e] * _apply_f(code, theta[h] - theta[t])
        out[t] += flux
        out[h] -= flux
    for i in range(n):
        out[i] = omega[i] + gain[i] * out[i]
    return out


@optional_njit(cache=True, nogil=True)
def _rhs_vector_jit(theta, omega, K, qinv, tails, heads, weights, code, out):
    n, dim = theta.shape
    acc = np.zeros((n, dim))
    for e in range(tails.shape[0]):
        t = tails[e]
        h = heads[e]
        w = weights[e]
        for k in range(dim):
            flux = w * _apply_f(code, theta[h, k] - theta[t, k])
            acc[t, k] += flux
            acc[h, k] -= flux
    for i in range(n):
        for r in range(dim):
            s = 0.0
            for k in range(dim):
                s += qinv[i, r, k] * acc[i, k]
            out[i, r] = omega[i, r] + K * s
    return out


@optional_njit(cache=True, nogil=True)
def _rk4_scalar_jit(theta, omega, gain, tails, heads, weights, code,
                    dt, n_steps, sample_every, out):
    n = theta.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    row = 0
    for step in range(n_steps):
        _rhs_scalar_jit(theta, omega, gain, tails, heads, weights, code, k1)
        for i in range(n):
            tmp[i] = theta[i] + 0.5 * dt * k1[i]
        _rhs_scalar_jit(tmp, omega, gain, tails, heads, weights, code, k2)
        for i in range(n):
            tmp[i] = theta[i] + 0.5 * dt * k2[i]
        _rhs_scalar_jit(tmp, omega, gain, tails, heads, weights, code, k3)
        for i in range(n):
            tmp[i] = theta[i] + dt * k3[i]
        _rhs_scalar_jit(tmp, omega, gain, tails, heads, weights, code, k4)
        bad = False
        for i in range(n):
            theta[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not np.isfinite(theta[i]):
                bad = True
        if bad:
            return step
        if (step + 1) % sample_every == 0:
            out[row, :] = theta
            row += 1
    return -1


@optional_njit(cache=True, nogil=True)
def _em_scalar_jit(theta, omega, gain, tails, heads, weights, code,
                   dt, n_steps, sample_every, out, noise):
    n = theta.shape[0]
    drift = np.empty(n)
    row = 0
    for step in range(n_steps):
        _rhs_scalar_jit(theta, omega, gain, tails, heads, weights, code, drift)
        bad = False
        for i in range(n):
            theta[i] += dt * drift[i] + noise[step, i]
            if not np.isfinite(theta[i]):
                bad = True
        if bad:
            return step
        if (step + 1) % sample_every == 0:
            out[row, :] = theta
            row += 1
    return -1


@optional_njit(cache=True, nogil=True)
def _rk4_vector_jit(theta, omega, K, qinv, tails, heads, weights, code,
                    dt, n_steps, sample_every, out):
    n, dim = theta.shape
    k1 = np.empty((n, dim))
    k2 = np.empty((n, dim))
    k3 = np.empty((n, dim))
    k4 = np.empty((n, dim))
    tmp = np.empty((n, dim))
    row = 0
    for step in range(n_steps):
        _rhs_vector_jit(theta, omega, K, qinv, tails, heads, weights, code, k1)
        for i in range(n):
            for k in range(dim):
                tmp[i, k] = theta[i, k] + 0.5 * dt * k1[i, k]
        _rhs_vector_jit(tmp, omega, K, qinv, tails, heads, weights, code, k2)
        for i in range(n):
            for k in range(dim):
                tmp[i, k] = theta[i, k] + 0.5 * dt * k2[i, k]
        _rhs_vector_jit(tmp, omega, K, qinv, tails, heads, weights, code, k3)
        for i in range(n):
            for k in range(dim):
                tmp[i, k] = theta[i, k] + dt * k3[i, k]
        _rhs_vector_jit(tmp, omega, K, qinv, tails, heads, weights, code, k4)
        bad = False
        for i in range(n):
            for k in range(dim):
                theta[i, k] += dt / 6.0 * (k1[i, k] + 2.0 * k2[i, k]
                                           + 2.0 * k3[i, k] + k4[i, k])
                if not np.isfinite(theta[i, k]):
                    bad = True
        if bad:
            return step
        if (step + 1) % sample_every == 0:
            out[row, :, :] = theta
            row += 1
    return -1


@optional_njit(cache=True, nogil=True)
def _em_vector_jit(theta, omega, K, qinv, tails, heads, weights, code,
                   dt, n_steps, sample_every, out, noise):
    n, dim = theta.shape
    drift = np.empty((n, dim))
    row = 0
    for step in range(n_steps):
        _rhs_vector_jit(theta, omega, K, qinv, tails, heads, weights, code, drift)
        bad = False
        for i in range(n):
            for k in range(dim):
                theta[i, k] += dt * drift[i, k] + noise[step, i, k]
                if not np.isfinite(theta[i, k]):
                    bad = True
        if bad:
            return step
        if (step + 1) % sample_every == 0:
            out[row, :, :] = theta
            row += 1
    return -1


# ---------------------------------------------------------------- numpy path

def _apply_f_np(code, x):
    if code == 1:
        return np.tanh(x)
    if code == 2:
        return np.sin(x)
    return x


def _rhs_scalar_np(theta, omega, gain, tails, heads, weights, code, out):
    n = theta.shape[0]
    flux = weights * _apply_f_np(code, theta[heads] - theta[tails])
    acc = np.bincount(tails, flux, n) - np.bincount(heads, flux, n)
    np.add(omega, gain * acc, out=out)
    return out


def _rhs_vector_np(theta, omega, K, qinv, tails, heads, weights, code, out):
    flux = weights[:, None] * _apply_f_np(code, theta[heads] - theta[tails])
    acc = np.zeros_like(theta)
    np.add.at(acc, tails, flux)
    np.subtract.at(acc, heads, flux)
    np.add(omega, K * np.einsum("irk,ik->ir", qinv, acc), out=out)
    return out


def _rk4_np(rhs, args, theta, dt, n_steps, sample_every, out):
    k1 = np.empty_like(theta)
    k2 = np.empty_like(theta)
    k3 = np.empty_like(theta)
    k4 = np.empty_like(theta)
    row = 0
    for step in range(n_steps):
        rhs(theta, *args, k1)
        rhs(theta + 0.5 * dt * k1, *args, k2)
        rhs(theta + 0.5 * dt * k2, *args, k3)
        rhs(theta + dt * k3, *args, k4)
        theta += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(theta)):
            return step
        if (step + 1) % sample_every == 0:
            out[row] = theta
            row += 1
    return -1


def _em_np(rhs, args, theta, dt, n_steps, sample_every, out, noise):
    drift = np.empty_like(theta)
    row = 0
    for step in range(n_steps):
        rhs(theta, *args, drift)
        theta += dt * drift + noise[step]
        if not np.all(np.isfinite(theta)):
            return step
        if (step + 1) % sample_every == 0:
            out[row] = theta
            row += 1
    return -1


def _rk4_scalar_np(theta, omega, gain, tails, heads, weights, code,
                   dt, n_steps, sample_every, out):
    return _rk4_np(_rhs_scalar_np, (omega, gain, tails, heads, weights, code),
                   theta, dt, n_steps, sample_every, out)


def _em_scalar_np(theta, omega, gain, tails, heads, weights, code,
                  dt, n_steps, sample_every, out, noise):
    return _em_np(_rhs_scalar_np, (omega, gain, tails, heads, weights, code),
                  theta, dt, n_steps, sample_every, out, noise)


def _rk4_vector_np(theta, omega, K, qinv, tails, heads, weights, code,
                   dt, n_steps, sample_every, out):
    return _rk4_np(_rhs_vector_np, (omega, K, qinv, tails, heads, weights, code),
                   theta, dt, n_steps, sample_every, out)


def _em_vector_np(theta, omega, K, qinv, tails, heads, weights, code,
                  dt, n_steps, sample_every, out, noise):
    return _em_np(_rhs_vector_np, (omega, K, qinv, tails, heads, weights, code),
                  theta, dt, n_steps, sample_every, out, noise)


BACKENDS = {
    "numba": {
        "rhs_scalar": _rhs_scalar_jit,
        "rhs_vector": _rhs_vector_jit,
        "rk4_scalar": _rk4_scalar_jit,
        "em_scalar": _em_scalar_jit,
        "rk4_vector": _rk4_vector_jit,
        "em_vector": _em_vector_jit,
    },
    "numpy": {
        "rhs_scalar": _rhs_scalar_np,
        "rhs_vector": _rhs_vector_np,
        "rk4_scalar": _rk4_scalar_np,
        "em_scalar": _em_scalar_np,
        "rk4_vector": _rk4_vector_np,
        "em_vector": _em_vector_np,
    },
}

ACTIVE_BACKEND = "numba" if USE_NUMBA else "numpy"
_active = BACKENDS[ACTIVE_BACKEND]

rhs_scalar = _active["rhs_scalar"]
rhs_vector = _active["rhs_vector"]
rk4_scalar = _active["rk4_scalar"]
em_scalar = _active["em_scalar"]
rk4_vector = _active["rk4_vector"]
em_vector = _active["em_vector"]
