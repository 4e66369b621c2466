"""Closed-form uplink performance: LSFD weights, PFZF SINR, spectral efficiency.

The SINR is evaluated in closed form from large-scale quantities only. For a
UE served by n APs it is a generalized Rayleigh quotient in the LSFD weight
vector a: signal p_t (a.b)^2 over a.Q a, where Q collects coherent co-pilot
interference plus a diagonal of non-coherent interference and noise. The
optimal weights are therefore Q^{-1} b up to scale, and scale is irrelevant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .estimation import PilotAssignment, compute_gamma
from .network import group_strong_ues

__all__ = [
    "LsfdWeights",
    "SeReport",
    "prelog",
    "compute_lsfd",
    "collect_lsfd",
    "sinr_pfzf",
    "se_uplink",
    "evaluate",
]


@dataclass(frozen=True)
class LsfdWeights:
    """M x T weight matrix; zero wherever AP m does not serve UE t."""

    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).copy()
        if not np.all(np.isfinite(a)):
            raise ValueError("weights must be finite")
        a.flags.writeable = False
        object.__setattr__(self, "a", a)


@dataclass(frozen=True)
class SeReport:
    """Per-UE SINR/SE for one evaluated drop."""

    sinr: np.ndarray
    se: np.ndarray
    sum_se: float
    per_user_cdf: np.ndarray

    def percentile(self, q: float) -> float:
        return float(np.percentile(self.se, q))


def prelog(coherence_block: int, pilot_length: int) -> float:
    """SE prefactor: half the fraction of the block left after pilots."""
    return (1.0 - pilot_length / coherence_block) / 2.0


def _array_gain(assoc, serving, t, antennas):
    # A - delta_mt L_{S_m}: zero-forcing spends one dimension per distinct
    # strong pilot, but only from the viewpoint of strong UEs
    delta = assoc.strong_flag[serving, t].astype(float)
    return delta, antennas - delta * assoc.strong_pilot_count[serving]


def compute_lsfd(t: int, beta, gamma, powers, assoc, assignment: PilotAssignment,
                 antennas: int) -> np.ndarray:
    """Optimal LSFD weight vector for UE t over its serving APs, unit norm.

    Solves (sum_k p_k c_k c_k^T + diag(D)) a = b with b_m = sqrt((A -
    delta L_S) gamma_mt), c_k the co-pilot counterparts of b, and D the
    non-coherent-plus-noise diagonal. The system is symmetric positive
    definite (D >= 1), so a Cholesky solve suffices.
    """
    beta = np.asarray(beta, dtype=float)
    serving = np.asarray(assoc.serving_aps[t], dtype=int)
    delta, gain = _array_gain(assoc, serving, t, antennas)
    b = np.sqrt(gain * gamma[serving, t])
    p_u = powers.p_uplink
    noncoh = beta[serving, :] @ p_u
    zf = (gamma[serving, :] * assoc.strong_flag[serving, :]) @ p_u
    d = noncoh - delta * zf + 1.0
    copilots = assignment.copilot_set(int(assignment.pilot_of[t]))
    copilots = copilots[copilots != t]
    q = np.diag(d)
    if copilots.size:
        c = np.sqrt(gain[:, None] * gamma[np.ix_(serving, copilots)])
        q = q + (c * p_u[copilots]) @ c.T
    a = cho_solve(cho_factor(q, lower=True), b)
    norm = np.linalg.norm(a)
    if not np.isfinite(norm) or norm == 0.0:
        raise ArithmeticError(f"degenerate LSFD solve for UE {t}")
    return a / norm


def collect_lsfd(beta, gamma, powers, assoc, assignment: PilotAssignment,
                 antennas: int, weight_mode: str = "optimal") -> LsfdWeights:
    """Weight matrix for all UEs; `equal` mode is the 1/|M_t| ablation."""
    beta = np.asarray(beta, dtype=float)
    num_aps, num_ues = beta.shape
    a = np.zeros((num_aps, num_ues))
    for t in range(num_ues):
        serving = assoc.serving_aps[t]
        if weight_mode == "equal":
            a[serving, t] = 1.0 / serving.size
        elif weight_mode == "optimal":
            a[serving, t] = compute_lsfd(t, beta, gamma, powers, assoc,
                                         assignment, antennas)
        else:
            raise ValueError(f"unknown weight mode {weight_mode!r}")
    return LsfdWeights(a)


def sinr_pfzf(t: int, weights, beta, gamma, powers, assoc,
              assignment: PilotAssignment, antennas: int) -> float:
    """Closed-form PFZF SINR for UE t under the given weight vector.

    `weights` aligns with assoc.serving_aps[t]; APs outside the serving set
    carry zero weight by definition and are omitted from every sum.
    """
    beta = np.asarray(beta, dtype=float)
    serving = np.asarray(assoc.serving_aps[t], dtype=int)
    a = np.asarray(weights, dtype=float)
    if a.shape != (serving.size,):
        raise ValueError("weight vector must align with the serving set")
    if not np.any(a):
        raise ValueError("all-zero weight vector")
    delta, gain = _array_gain(assoc, serving, t, antennas)
    p_u = powers.p_uplink
    signal = p_u[t] * (a @ np.sqrt(gain * gamma[serving, t])) ** 2
    copilots = assignment.copilot_set(int(assignment.pilot_of[t]))
    copilots = copilots[copilots != t]
    coherent = 0.0
    if copilots.size:
        roots = np.sqrt(gain[:, None] * gamma[np.ix_(serving, copilots)])
        coherent = p_u[copilots] @ (a @ roots) ** 2
    a2 = a * a
    leak = beta[serving, :] - delta[:, None] * (assoc.strong_flag[serving, :]
                                                * gamma[serving, :])
    noncoherent = (a2 @ leak) @ p_u
    noise = a2.sum()
    return float(signal / (coherent + noncoherent + noise))


def se_uplink(sinr, coherence_block: int, pilot_length: int):
    """Ergodic uplink SE in bits/s/Hz; accepts scalars or arrays."""
    se = prelog(coherence_block, pilot_length) * np.log2(1.0 + np.asarray(sinr))
    if np.ndim(sinr) == 0:
        return float(se)
    return se


def evaluate(real, assoc, assignment: PilotAssignment, powers, config,
             weight_mode: str = "optimal") -> SeReport:
    """Full pipeline for one drop: gamma, strong grouping, LSFD, SINR, SE."""
    if not assignment.is_complete:
        raise ValueError("evaluation requires a complete assignment")
    gamma = compute_gamma(real.beta, powers, config.pilot_length, assignment).gamma
    grouped = group_strong_ues(real, assoc, config.strong_threshold, assignment,
                               config.antennas_per_ap)
    weights = collect_lsfd(real.beta, gamma, powers, grouped, assignment,
                           config.antennas_per_ap, weight_mode)
    sinr = np.empty(real.num_ues)
    for t in range(real.num_ues):
        serving = grouped.serving_aps[t]
        sinr[t] = sinr_pfzf(t, weights.a[serving, t], real.beta, gamma, powers,
                            grouped, assignment, config.antennas_per_ap)
    se = se_uplink(sinr, config.coherence_block, config.pilot_length)
    return SeReport(sinr=sinr, se=se, sum_se=float(se.sum()),
                    per_user_cdf=np.sort(se))
