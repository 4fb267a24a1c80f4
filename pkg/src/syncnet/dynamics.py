"""Coupled first-order node dynamics: integration, synchronized states, diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .coupling import CouplingFunction, evaluate, slope_ratio
from .graph import GraphError, Topology, generalized_inverse, incidence, max_degree, weighted_laplacian

RK4_STABILITY = 2.785
DEFAULT_EPS = 1e-6
DEFAULT_DT = 1e-3
_CHUNK_STEPS = 8192


class SimulationError(RuntimeError):
    """Integration produced a non-finite state."""


class NoFixedPointError(RuntimeError):
    """Fixed-point iteration for the equilibrium did not converge."""


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ScalarNetwork:
    topology: Topology
    omega: np.ndarray
    c: np.ndarray
    K: float
    f: CouplingFunction
    noise_std: float = 0.0
    theta0: np.ndarray | None = None

    def __post_init__(self):
        n = self.topology.n
        omega = _frozen(self.omega)
        c = _frozen(self.c if np.ndim(self.c) else np.full(n, float(self.c)))
        theta0 = _frozen(np.zeros(n) if self.theta0 is None else self.theta0)
        for name, arr in (("omega", omega), ("c", c), ("theta0", theta0)):
            if arr.shape != (n,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")
        if np.any(c <= 0):
            raise ValueError("adaptation coefficients c must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "theta0", theta0)
        object.__setattr__(self, "K", float(self.K))

    @property
    def n(self):
        return self.topology.n

    def replace(self, **changes) -> "ScalarNetwork":
        kw = {k: getattr(self, k) for k in
              ("topology", "omega", "c", "K", "f", "noise_std", "theta0")}
        kw.update(changes)
        return ScalarNetwork(**kw)


@dataclass(frozen=True, eq=False)
class VectorNetwork:
    topology: Topology
    omega: np.ndarray          # (N, L)
    Q: np.ndarray              # (N, L, L)
    K: float
    f: CouplingFunction
    noise_std: float = 0.0
    theta0: np.ndarray | None = None
    Qinv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.topology.n
        omega = _frozen(self.omega)
        if omega.ndim != 2 or omega.shape[0] != n:
            raise ValueError(f"omega must have shape (N, L) with N={n}, got {omega.shape}")
        dim = omega.shape[1]
        Q = _frozen(self.Q)
        if Q.shape != (n, dim, dim):
            raise ValueError(f"Q has shape {Q.shape}, expected {(n, dim, dim)}")
        cond = np.linalg.cond(Q)
        if not np.all(np.isfinite(cond)) or np.any(cond > 1e12):
            raise ValueError("every Q_i must be nonsingular")
        if np.linalg.cond(Q.sum(axis=0)) > 1e12:
            raise ValueError("sum of Q_i is singular")
        theta0 = _frozen(np.zeros((n, dim)) if self.theta0 is None else self.theta0)
        if theta0.shape != (n, dim):
            raise ValueError(f"theta0 has shape {theta0.shape}, expected {(n, dim)}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "theta0", theta0)
        object.__setattr__(self, "K", float(self.K))
        object.__setattr__(self, "Qinv", _frozen(np.linalg.inv(Q)))

    @property
    def n(self):
        return self.topology.n

    @property
    def dim(self):
        return self.omega.shape[1]

    def replace(self, **changes) -> "VectorNetwork":
        kw = {k: getattr(self, k) for k in
              ("topology", "omega", "Q", "K", "f", "noise_std", "theta0")}
        kw.update(changes)
        return VectorNetwork(**kw)


@dataclass
class Trajectory:
    """Sampled run. ``states``/``derivs`` are (T, N) or (T, N, L)."""

    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    predicted: float | np.ndarray
    synchronized: bool = False
    sync_time: float | None = None

    @property
    def t_end(self):
        return float(self.times[-1])


# ------------------------------------------------------------ right-hand sides

def _edge_args(topo):
    return topo.tails, topo.heads, topo.weights


def rhs_scalar(net: ScalarNetwork, theta) -> np.ndarray:
    theta = np.ascontiguousarray(theta, dtype=float)
    out = np.empty_like(theta)
    kernels.rhs_scalar(theta, net.omega, net.K / net.c, *_edge_args(net.topology),
                       net.f.code, out)
    return out


def rhs_vector(net: VectorNetwork, theta) -> np.ndarray:
    """Block-form right-hand side; accepts (N, L) or node-major flat (N*L,)."""
    theta = np.asarray(theta, dtype=float)
    flat = theta.ndim == 1
    th = np.ascontiguousarray(theta.reshape(net.n, net.dim))
    out = np.empty_like(th)
    kernels.rhs_vector(th, net.omega, net.K, net.Qinv, *_edge_args(net.topology),
                       net.f.code, out)
    return out.ravel() if flat else out


def permutation_map(n: int, l: int) -> np.ndarray:
    """Indices ``idx`` with ``x[idx]`` reordering node-major to component-major."""
    if n < 1 or l < 1:
        raise ValueError("n and l must be >= 1")
    return (np.arange(n)[None, :] * l + np.arange(l)[:, None]).ravel()


def permutation_matrix(n: int, l: int) -> np.ndarray:
    p = np.zeros((n * l, n * l))
    p[np.arange(n * l), permutation_map(n, l)] = 1.0
    return p


def rhs_vector_stacked(net: VectorNetwork, theta) -> np.ndarray:
    """Dense permuted/Kronecker form of the vector right-hand side (flat in, flat out)."""
    n, dim = net.n, net.dim
    theta = np.asarray(theta, dtype=float).ravel()
    b = incidence(net.topology).astype(float)
    p = permutation_matrix(n, dim)
    eye = np.eye(dim)
    bda = b * net.topology.weights
    inner = evaluate(net.f, np.kron(eye, b.T) @ (p @ theta))
    dq_inv = np.zeros((n * dim, n * dim))
    for i in range(n):
        dq_inv[i * dim:(i + 1) * dim, i * dim:(i + 1) * dim] = net.Qinv[i]
    return net.omega.ravel() - net.K * dq_inv @ (p.T @ (np.kron(eye, bda) @ inner))


# ---------------------------------------------------------- synchronized state

def predicted_state_scalar(net: ScalarNetwork) -> float:
    return float(np.dot(net.c, net.omega) / net.c.sum())


def predicted_state_vector(net: VectorNetwork) -> np.ndarray:
    return np.linalg.solve(net.Q.sum(axis=0), np.einsum("irk,ik->r", net.Q, net.omega))


def predicted_state(net):
    if isinstance(net, VectorNetwork):
        return predicted_state_vector(net)
    return predicted_state_scalar(net)


# ------------------------------------------------------------------ integration

def stiffness_bound(net) -> float:
    """Upper bound on the Jacobian spectral radius of the coupling term."""
    d2 = 2.0 * max_degree(net.topology)
    if isinstance(net, VectorNetwork):
        inv_scale = float(np.linalg.norm(net.Qinv, ord=2, axis=(1, 2)).max())
    else:
        inv_scale = float((1.0 / net.c).max())
    return abs(net.K) * inv_scale * d2


def suggest_dt(net, dt_max=DEFAULT_DT, safety=0.5) -> float:
    """Largest step (capped at ``dt_max``) inside the explicit stability region."""
    rho = stiffness_bound(net)
    limit = RK4_STABILITY if net.noise_std == 0 else 2.0
    if rho == 0:
        return dt_max
    return min(dt_max, safety * limit / rho)


def _node_streams(seed, n):
    return [np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
            for i in range(n)]


def simulate(net, t_end: float, dt: float = DEFAULT_DT, seed: int = 0,
             sample_every: int | None = None, eps: float = DEFAULT_EPS,
             hold: float | None = None, backend: str | None = None) -> Trajectory:
    """Fixed-step integration of a scalar or vector network.

    Noise-free networks use classic RK4; with ``noise_std > 0`` a stochastic
    Euler step adds ``noise_std * sqrt(dt) * z`` to every state component,
    one independent stream per node derived from ``(seed, node)``.
    Reported derivatives are the noise-free right-hand side at each sample.
    """
    if not (dt > 0 and t_end > 0):
        raise ValueError("dt and t_end must be positive")
    n_steps = int(round(t_end / dt))
    if n_steps < 1:
        raise ValueError("t_end shorter than one step")
    if sample_every is None:
        sample_every = max(1, n_steps // 10000)
    ks = kernels.BACKENDS[backend] if backend else kernels.BACKENDS[kernels.ACTIVE_BACKEND]
    vector = isinstance(net, VectorNetwork)
    topo = net.topology
    edges = _edge_args(topo)
    code = net.f.code
    if vector:
        theta = np.array(net.theta0, dtype=float)
        shape = (net.n, net.dim)
        args = (net.omega, net.K, net.Qinv) + edges + (code,)
        step_det, step_sto, rhs = ks["rk4_vector"], ks["em_vector"], ks["rhs_vector"]
    else:
        theta = np.array(net.theta0, dtype=float)
        shape = (net.n,)
        args = (net.omega, net.K / net.c) + edges + (code,)
        step_det, step_sto, rhs = ks["rk4_scalar"], ks["em_scalar"], ks["rhs_scalar"]

    n_samples = n_steps // sample_every
    states = np.empty((n_samples + 1,) + shape)
    states[0] = theta
    noisy = net.noise_std > 0
    streams = _node_streams(seed, net.n) if noisy else None
    chunk = sample_every * max(1, _CHUNK_STEPS // sample_every)
    done = 0
    row = 1
    while done < n_steps:
        m = min(chunk, n_steps - done)
        buf = np.empty((m // sample_every,) + shape)
        if noisy:
            scale = net.noise_std * math.sqrt(dt)
            cols = [g.standard_normal((m,) + shape[1:]) for g in streams]
            noise = scale * np.stack(cols, axis=1)
            bad = step_sto(theta, *args, dt, m, sample_every, buf, noise)
        else:
            bad = step_det(theta, *args, dt, m, sample_every, buf)
        if bad >= 0:
            raise SimulationError(
                f"non-finite state at step {done + bad + 1} (t = {(done + bad + 1) * dt:.6g})")
        states[row:row + buf.shape[0]] = buf
        row += buf.shape[0]
        done += m
    times = np.arange(n_samples + 1) * (sample_every * dt)
    derivs = np.empty_like(states)
    for k in range(states.shape[0]):
        rhs(np.ascontiguousarray(states[k]), *args, derivs[k])
    traj = Trajectory(times, states, derivs, predicted_state(net))
    if hold is None:
        hold = 0.1 * times[-1]
    traj.synchronized, traj.sync_time = detect_sync(traj, traj.predicted, eps, hold)
    return traj


def sync_error(traj: Trajectory, predicted) -> np.ndarray:
    """max_i ||dtheta_i(t) - predicted||_inf at every sample."""
    dev = np.abs(traj.derivs - predicted)
    return dev.reshape(dev.shape[0], -1).max(axis=1)


def detect_sync(traj: Trajectory, predicted, eps: float = DEFAULT_EPS, hold: float | None = None):
    """Return ``(synchronized, sync_time)``.

    ``sync_time`` is the earliest sample after which every node stays within
    ``eps`` of ``predicted``; the run counts as synchronized when that tail
    spans at least ``hold`` time units.
    """
    if hold is None:
        hold = 0.1 * traj.t_end
    err = sync_error(traj, predicted)
    outside = np.flatnonzero(~(err < eps))
    if outside.size == 0:
        start = 0
    elif outside[-1] == err.shape[0] - 1:
        return False, None
    else:
        start = int(outside[-1]) + 1
    t0 = float(traj.times[start])
    if traj.t_end - t0 + 1e-12 < hold:
        return False, None
    return True, t0


def conservation_check(net, traj: Trajectory) -> float:
    """Largest violation of the weighted-sum identity on the sampled derivatives."""
    if isinstance(net, VectorNetwork):
        lhs = np.einsum("irk,tik->tr", net.Q, traj.derivs)
        rhs = np.einsum("irk,ik->r", net.Q, net.omega)
        return float(np.abs(lhs - rhs).max())
    return float(np.abs(traj.derivs @ net.c - np.dot(net.c, net.omega)).max())


# -------------------------------------------------------- equilibrium analysis

@dataclass
class Equilibrium:
    psi: np.ndarray
    residual: float
    iterations: int


def _coupling_flux(topo, f, psi):
    """B D_A f(B^T psi)."""
    flux = topo.weights * evaluate(f, psi[topo.heads] - psi[topo.tails])
    return np.bincount(topo.heads, flux, topo.n) - np.bincount(topo.tails, flux, topo.n)


def _fixed_point(topo, f, drive, K, damping, max_iter, tol):
    """Solve ``B D_A f(B^T psi) = drive / K`` with zero node-sum gauge."""
    target = drive / K
    if np.abs(drive).max() == 0:
        return np.zeros(topo.n), 0.0, 0
    psi = generalized_inverse(weighted_laplacian(topo)) @ target
    for it in range(max_iter + 1):
        res = float(np.abs(_coupling_flux(topo, f, psi) - target).max())
        if res < tol:
            return psi, res, it
        if not np.all(np.isfinite(psi)) or np.abs(psi).max() > 1e12:
            break
        ratio = slope_ratio(f, psi[topo.heads] - psi[topo.tails])
        if np.any(ratio <= 0):
            break
        try:
            pinv = generalized_inverse(weighted_laplacian(topo, topo.weights * ratio))
        except GraphError:
            break
        psi = (1.0 - damping) * psi + damping * (pinv @ target)
    raise NoFixedPointError(f"no fixed point found (last residual {res:.3g})")


def solve_equilibrium(net: ScalarNetwork, theta0=None, damping=0.5,
                      max_iter=10_000, tol=1e-8) -> Equilibrium:
    """Equilibrium of the frame rotating at the synchronized frequency.

    Damped fixed-point iteration with the state-dependent Laplacian
    pseudo-inverse, started from the linear-coupling solution. The result is
    shifted along the all-ones direction so that ``c . psi = c . theta0``.
    """
    if net.K <= 0:
        raise ValueError("equilibrium search needs K > 0")
    drive = net.c * (net.omega - predicted_state_scalar(net))
    psi, res, it = _fixed_point(net.topology, net.f, drive, net.K, damping, max_iter, tol)
    anchor = net.theta0 if theta0 is None else np.asarray(theta0, dtype=float)
    psi = psi + (np.dot(net.c, anchor) - np.dot(net.c, psi)) / net.c.sum()
    return Equilibrium(psi, res, it)


def solve_equilibrium_vector(net: VectorNetwork, theta0=None, damping=0.5,
                             max_iter=10_000, tol=1e-8) -> Equilibrium:
    """Component-wise equilibria, gauged so that sum_i Q_i psi_i = sum_i Q_i theta0_i."""
    if net.K <= 0:
        raise ValueError("equilibrium search needs K > 0")
    delta = net.omega - predicted_state_vector(net)
    drive = np.einsum("irk,ik->ir", net.Q, delta)
    psi = np.empty((net.n, net.dim))
    res = 0.0
    iters = 0
    for k in range(net.dim):
        col, r, it = _fixed_point(net.topology, net.f, drive[:, k], net.K,
                                  damping, max_iter, tol)
        psi[:, k] = col
        res = max(res, r)
        iters = max(iters, it)
    anchor = net.theta0 if theta0 is None else np.asarray(theta0, dtype=float)
    qsum = net.Q.sum(axis=0)
    gap = np.einsum("irk,ik->r", net.Q, anchor - psi)
    psi = psi + np.linalg.solve(qsum, gap)
    return Equilibrium(psi, res, iters)


def lyapunov_series(net, traj: Trajectory, psi_star) -> np.ndarray:
    """Weighted squared distance to the equilibrium in the co-rotating frame.

    Scalar: ``0.5 * sum_i c_i e_i(t)^2``; vector: ``0.5 * sum_i e_i^T Q_i e_i``
    with ``e(t) = theta(t) - predicted * t - psi_star``.
    """
    psi_star = np.asarray(psi_star, dtype=float)
    if isinstance(net, VectorNetwork):
        w = predicted_state_vector(net)
        e = traj.states - traj.times[:, None, None] * w[None, None, :] - psi_star
        return 0.5 * np.einsum("tir,irk,tik->t", e, net.Q, e)
    w = predicted_state_scalar(net)
    e = traj.states - traj.times[:, None] * w - psi_star
    return 0.5 * (e * e) @ net.c
