"""Time-dependent interval construction that keeps both frontiers on nodes.

A control fraction delta in (0, 1/2) caps how much of each time-slice
interval may sit inside the buying and selling regions.  The cap K and the
node index j_k are chosen once per discretization; the per-slice interval
formulas then place the selling frontier exactly on node j_k and the buying
frontier exactly on node n (when it is zero) or node n - j_k (when positive).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .chebyshev import ReferenceGrid, build_reference
from .exceptions import ConfigurationError, SolverFailure
from .model import ModelParams, PolarDomain


@dataclass(frozen=True)
class MeshPolicy:
    """Frozen mesh-control parameters shared by every slice of a solve."""

    delta: float
    n_theta: int
    k_cap: float
    j_k: int
    domain: PolarDomain
    reference: ReferenceGrid


def build_policy(p: ModelParams, dom: PolarDomain, delta: float, n_theta: int,
                 sr_stationary: Optional[float] = None,
                 reference: Optional[ReferenceGrid] = None) -> MeshPolicy:
    """Compute the cap K = min(delta, k1, -beta1) and the node index j_k.

    The stationary selling frontier entering k1 has no closed form here; by
    default it is replaced by the conservative beta2 - 0.05*(beta2 - beta1),
    which can only shrink K (smaller margins stay safe).  Pass sr_stationary
    to refine from a completed long-horizon solve.
    """
    if not 0.0 < delta < 0.5:
        raise ConfigurationError(f"delta must lie in (0, 1/2), got {delta}")
    if sr_stationary is None:
        sr_stationary = dom.beta2 - 0.05 * (dom.beta2 - dom.beta1)
    if not dom.beta1 < sr_stationary < dom.beta2:
        raise ConfigurationError("sr_stationary must lie inside (beta1, beta2)")
    br_terminal = 0.0
    k1 = (dom.beta2 - sr_stationary) / (dom.beta2 - br_terminal)
    k_cap = min(delta, k1, br_terminal - dom.beta1)
    if reference is None:
        reference = build_reference(n_theta)
    elif reference.n != n_theta:
        raise ConfigurationError("reference grid degree does not match n_theta")
    # largest j with |node[n-j] - node[n]| = 1 - node[j] <= 2K
    gaps = 1.0 - reference.nodes
    j_k = 0
    for j in range(1, n_theta + 1):
        if gaps[j] <= 2.0 * k_cap:
            j_k = j
        else:
            break
    if j_k < 1:
        raise ConfigurationError(
            f"n_theta={n_theta} too small for K={k_cap:.6g}: the first node gap "
            f"{gaps[1]:.6g} exceeds 2K; increase n_theta"
        )
    return MeshPolicy(delta=delta, n_theta=n_theta, k_cap=k_cap, j_k=j_k,
                      domain=dom, reference=reference)


def interval(policy: MeshPolicy, br: float, sr: float) -> tuple[float, float]:
    """Interval [a1, a2] around the no-transaction region [br, sr].

    With br = 0 the interval is [0, 2*sr/(node[j_k] + 1)]; otherwise both
    margins stretch the gap M = sr - br so that node j_k lands on sr and
    node n - j_k on br.  Fails loudly on ordering violations or if the
    interval escapes the solvency wedge.
    """
    if not 0.0 <= br <= sr:
        raise SolverFailure("frontier ordering violated", br=br, sr=sr)
    if br == sr:
        raise SolverFailure(
            "frontiers coincide: empty no-transaction region signals "
            "under-resolution", br=br, sr=sr)
    nodes = policy.reference.nodes
    n = policy.n_theta
    jk = policy.j_k
    if br == 0.0:
        a1 = 0.0
        a2 = 2.0 * sr / (nodes[jk] - nodes[n])
    else:
        m = sr - br
        denom = nodes[jk] - nodes[n - jk]
        a1 = br - m * (nodes[n - jk] - nodes[n]) / denom
        a2 = sr + m * (nodes[0] - nodes[jk]) / denom
    dom = policy.domain
    if a1 < dom.beta1 or a2 > dom.beta2:
        raise SolverFailure(
            "slice interval escapes the solvency wedge; mesh policy is "
            "misconfigured for these frontiers",
            interval=(a1, a2), wedge=(dom.beta1, dom.beta2), br=br, sr=sr)
    return a1, a2
