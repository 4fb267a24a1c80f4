"""Linear-Gaussian observation models, their network configurations and baselines."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .coupling import CouplingFunction
from .dynamics import ScalarNetwork, VectorNetwork
from .graph import Topology


@dataclass(frozen=True, eq=False)
class ScalarObservationModel:
    """x_i = b_i * xi + w_i with independent w_i ~ N(0, sigma2_i)."""

    b: np.ndarray
    sigma2: np.ndarray
    xi: float

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        sigma2 = np.asarray(self.sigma2, dtype=float)
        if b.shape != sigma2.shape or b.ndim != 1:
            raise ValueError("b and sigma2 must be 1-D arrays of equal length")
        if np.any(b == 0):
            raise ValueError("observation gains b_i must be nonzero")
        if np.any(sigma2 <= 0):
            raise ValueError("noise variances must be positive")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "xi", float(self.xi))

    @property
    def n(self):
        return self.b.shape[0]


@dataclass(frozen=True, eq=False)
class VectorObservationModel:
    """x_i = A_i xi + w_i, A_i of shape (M, L), w_i ~ N(0, C_i)."""

    A: np.ndarray   # (N, M, L)
    C: np.ndarray   # (N, M, M)
    xi: np.ndarray  # (L,)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        C = np.asarray(self.C, dtype=float)
        xi = np.asarray(self.xi, dtype=float)
        if A.ndim != 3:
            raise ValueError("A must have shape (N, M, L)")
        n, m, dim = A.shape
        if m < dim:
            raise ValueError(f"need M >= L, got M={m}, L={dim}")
        if C.shape != (n, m, m):
            raise ValueError(f"C has shape {C.shape}, expected {(n, m, m)}")
        if xi.shape != (dim,):
            raise ValueError(f"xi has shape {xi.shape}, expected ({dim},)")
        if np.any(np.linalg.matrix_rank(A) < dim):
            raise ValueError("every A_i must have full column rank")
        if not np.allclose(C, np.swapaxes(C, 1, 2)) or np.any(np.linalg.eigvalsh(C) <= 0):
            raise ValueError("every C_i must be symmetric positive definite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "xi", xi)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def dim(self):
        return self.A.shape[2]

    @property
    def n_obs(self):
        return self.A.shape[1]


def random_vector_model(n, dim, n_obs, xi, noise_var=1.0, rng=None) -> VectorObservationModel:
    """i.i.d. standard Gaussian mixing matrices and white observation noise."""
    rng = np.random.default_rng(rng)
    A = rng.standard_normal((n, n_obs, dim))
    C = np.broadcast_to(noise_var * np.eye(n_obs), (n, n_obs, n_obs)).copy()
    return VectorObservationModel(A, C, xi)


def draw_scalar(model: ScalarObservationModel, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return model.b * model.xi + np.sqrt(model.sigma2) * rng.standard_normal(model.n)


def draw_vector(model: VectorObservationModel, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    chol = np.linalg.cholesky(model.C)
    z = rng.standard_normal((model.n, model.n_obs))
    return model.A @ model.xi + np.einsum("imk,ik->im", chol, z)


def configure_scalar(model: ScalarObservationModel, x, K, f: CouplingFunction,
                     topology: Topology, noise_std=0.0, theta0=None) -> ScalarNetwork:
    """omega_i = x_i / b_i and c_i = b_i^2 / sigma2_i."""
    x = np.asarray(x, dtype=float)
    return ScalarNetwork(topology, x / model.b, model.b ** 2 / model.sigma2,
                         K, f, noise_std, theta0)


def local_information(model: VectorObservationModel) -> np.ndarray:
    """Q_i = A_i^T C_i^{-1} A_i."""
    cinv_a = np.linalg.solve(model.C, model.A)
    return np.einsum("iml,imk->ilk", model.A, cinv_a)


def configure_vector(model: VectorObservationModel, x_blocks, K, f: CouplingFunction,
                     topology: Topology, noise_std=0.0, theta0=None) -> VectorNetwork:
    """Q_i = A_i^T C_i^{-1} A_i and omega_i = Q_i^{-1} A_i^T C_i^{-1} x_i (local ML)."""
    x = np.asarray(x_blocks, dtype=float)
    Q = local_information(model)
    # whitened least squares keeps the error at cond(A_i), not cond(A_i)^2
    chol = np.linalg.cholesky(model.C)
    wa = np.linalg.solve(chol, model.A)
    wx = np.linalg.solve(chol, x[..., None])[..., 0]
    omega = np.stack([np.linalg.lstsq(a, b, rcond=None)[0] for a, b in zip(wa, wx)])
    return VectorNetwork(topology, omega, Q, K, f, noise_std, theta0)


def centralized_ml_scalar(model: ScalarObservationModel, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum(model.b * x / model.sigma2) / np.sum(model.b ** 2 / model.sigma2))


def centralized_ml_vector(model: VectorObservationModel, x_blocks) -> np.ndarray:
    """Generalised least squares on the stacked observations."""
    x = np.asarray(x_blocks, dtype=float)
    cinv_a = np.linalg.solve(model.C, model.A)
    normal = np.einsum("iml,imk->lk", model.A, cinv_a)
    rhs = np.einsum("iml,im->l", cinv_a, x)
    return np.linalg.solve(normal, rhs)


@dataclass(frozen=True)
class GeneralFunctionSpec:
    g: Callable
    h: Callable
    c: np.ndarray


def general_consensus_function(spec: GeneralFunctionSpec, x) -> float:
    """h of the c-weighted mean of g(x_i).

    A network computes this by driving node i with omega_i = g(x_i), using
    c_i as adaptation coefficients and applying h to the synchronized rate.
    """
    x = np.asarray(x, dtype=float)
    c = np.broadcast_to(np.asarray(spec.c, dtype=float), x.shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        gx = np.asarray(spec.g(x), dtype=float)
        if not np.all(np.isfinite(gx)):
            raise ValueError("g is undefined at some observations")
        out = spec.h(np.dot(c, gx) / c.sum())
    if not np.isfinite(out):
        raise ValueError("h is undefined at the consensus value")
    return float(out)


def metropolis_weights(topology: Topology) -> np.ndarray:
    """Symmetric doubly stochastic Metropolis-Hastings matrix of the graph."""
    deg = topology.neighbor_counts()
    n = topology.n
    w = np.zeros((n, n))
    t, h = topology.tails, topology.heads
    vals = 1.0 / (1.0 + np.maximum(deg[t], deg[h]))
    w[t, h] = vals
    w[h, t] = vals
    w[np.arange(n), np.arange(n)] = 1.0 - w.sum(axis=1)
    return w


def average_consensus_baseline(topology: Topology, x0, steps: int, noise_std=0.0, seed=0):
    """Iterate x[n] = W x[n-1] + v[n]; return (states, running mean)."""
    x0 = np.asarray(x0, dtype=float)
    w = metropolis_weights(topology)
    rng = np.random.default_rng(seed)
    states = np.empty((steps + 1, topology.n))
    states[0] = x0
    for k in range(1, steps + 1):
        states[k] = w @ states[k - 1]
        if noise_std > 0:
            states[k] += noise_std * rng.standard_normal(topology.n)
    return states, states.mean(axis=1)
