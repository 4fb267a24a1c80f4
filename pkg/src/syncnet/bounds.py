"""Critical coupling bounds and the non-synchronization probability bound."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import gammainc

from .coupling import CouplingFunction, compute_g
from .dynamics import ScalarNetwork, VectorNetwork, predicted_state_scalar, predicted_state_vector
from .graph import Topology, algebraic_connectivity, is_connected, max_degree, weighted_laplacian


@dataclass
class CouplingBounds:
    """Lower bound on K_L and upper bound on K_U, with their ingredients.

    ``k_u_upper`` is 0 for unbounded increasing couplings (synchronization for
    every positive K); ``certified`` is False when the coupling is not
    increasing and the values carry no guarantee.
    """

    k_l_lower: float
    k_u_upper: float
    certified: bool
    disagreement_inf: float
    disagreement_2: float
    f_max: float
    g: float
    d_max: float
    lambda2: float

    def to_dict(self):
        out = asdict(self)
        for key, val in out.items():
            if isinstance(val, float) and math.isinf(val):
                out[key] = "inf"
        if self.k_u_upper == 0.0 and self.certified:
            out["k_u_upper_note"] = "0 (always synchronizes)"
        return out


def _graph_terms(topology: Topology):
    if not is_connected(topology):
        raise ValueError("coupling bounds need a connected topology")
    return max_degree(topology), algebraic_connectivity(weighted_laplacian(topology))


def _finish(norm_inf, norm_2, f: CouplingFunction, d_max, lam2):
    g = float(compute_g(f))
    # a zero numerator wins over an infinite denominator: 0 / inf = 0
    k_l = norm_inf / (f.f_max * d_max) if norm_inf else 0.0
    k_u = norm_2 / (g * lam2) if norm_2 else 0.0
    return CouplingBounds(k_l, k_u, f.satisfies_a2, norm_inf, norm_2, f.f_max, g, d_max, lam2)


def scalar_bounds(net: ScalarNetwork) -> CouplingBounds:
    d_max, lam2 = _graph_terms(net.topology)
    disagreement = net.c * (net.omega - predicted_state_scalar(net))
    return _finish(float(np.abs(disagreement).max()), float(np.linalg.norm(disagreement)),
                   net.f, d_max, lam2)


def component_disagreement(net: VectorNetwork) -> np.ndarray:
    """Rows k hold component k of Q_i (omega_i - omega*) over the nodes i."""
    delta = net.omega - predicted_state_vector(net)
    return np.einsum("irk,ik->ir", net.Q, delta).T


def vector_bounds(net: VectorNetwork) -> CouplingBounds:
    d_max, lam2 = _graph_terms(net.topology)
    blocks = component_disagreement(net)
    return _finish(float(np.abs(blocks).max()), float(np.linalg.norm(blocks, axis=1).max()),
                   net.f, d_max, lam2)


def coupling_bounds(net) -> CouplingBounds:
    if isinstance(net, VectorNetwork):
        return vector_bounds(net)
    return scalar_bounds(net)


def chi_cdf(z, dof: int):
    """CDF of the chi distribution with ``dof`` degrees of freedom."""
    z = np.asarray(z, dtype=float)
    out = gammainc(dof / 2.0, 0.5 * np.maximum(z, 0.0) ** 2)
    return out if out.ndim else float(out)


def non_sync_probability_bound(topology: Topology, f: CouplingFunction, K: float,
                               scale: float) -> float:
    """1 - F_chi(K f_max lambda2 / (2 scale)) with N degrees of freedom.

    ``scale`` is the common standard deviation of the entries of the weighted
    disagreement vector. The chi model treats those entries as independent.
    """
    if K < 0:
        raise ValueError("K must be nonnegative")
    if scale <= 0:
        raise ValueError("scale must be positive")
    lam2 = algebraic_connectivity(weighted_laplacian(topology))
    if math.isinf(f.f_max):
        return 0.0 if K > 0 else 1.0
    threshold = K * f.f_max * lam2 / (2.0 * scale)
    return 1.0 - chi_cdf(threshold, topology.n)
