"""Network geometry, large-scale fading, and AP-UE association structures.

A "drop" is one Monte-Carlo realization of AP and UE positions on a square
area together with the resulting matrix of large-scale fading coefficients
(LSFCs). Everything downstream (pilot assignment, SINR evaluation) consumes
only this large-scale information; no small-scale fading is ever drawn.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "PathLossParams",
    "NetworkConfig",
    "NetworkRealization",
    "PowerProfile",
    "AssociationMap",
    "compute_lsfc",
    "generate_drop",
    "noise_power_dbm",
    "normalize_powers",
    "associate_aps",
    "group_strong_ues",
]


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class PathLossParams:
    """Three-slope log-distance path loss constants.

    Defaults follow the common 1.9 GHz parameterization (15 m AP and 1.65 m
    UE antenna heights): fixed loss 140.7 dB at 1 km, breakpoints at 10 m and
    50 m, and exponents 0 / 2 / 3.5 on the three segments. The profile is
    continuous at both breakpoints by construction.
    """

    ref_loss_db: float = 140.7
    d0_m: float = 10.0
    d1_m: float = 50.0
    exp_near: float = 0.0
    exp_mid: float = 2.0
    exp_far: float = 3.5

    def __post_init__(self):
        if not (0.0 < self.d0_m < self.d1_m):
            raise ValueError("breakpoints must satisfy 0 < d0 < d1")
        for name in ("ref_loss_db", "exp_near", "exp_mid", "exp_far"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"non-finite path loss parameter {name}")


@dataclass(frozen=True)
class NetworkConfig:
    """Static system parameters for one simulation scenario.

    `assoc_threshold` is the fraction of a UE's total LSFC mass its serving
    APs must capture; `strong_threshold` plays the same role per AP when
    splitting served UEs into the strong (zero-forced) group.
    """

    area_side_m: float = 1000.0
    num_aps: int = 100
    num_ues: int = 100
    antennas_per_ap: int = 8
    bandwidth_hz: float = 20e6
    coherence_block: int = 200
    pilot_length: int = 7
    shadow_sigma_db: float = 8.0
    assoc_threshold: float = 0.95
    strong_threshold: float = 0.95
    tx_power_mw: float = 100.0
    noise_figure_db: float = 9.0
    pathloss: PathLossParams = field(default_factory=PathLossParams)
    wrap_around: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("area_side_m", "bandwidth_hz", "shadow_sigma_db",
                     "assoc_threshold", "strong_threshold", "tx_power_mw",
                     "noise_figure_db"):
            if not math.isfinite(float(getattr(self, name))):
                raise ValueError(f"non-finite config value {name}")
        if self.num_aps < 1 or self.num_ues < 1:
            raise ValueError("need at least one AP and one UE")
        if not 0 < self.pilot_length <= self.coherence_block:
            raise ValueError("pilot length must satisfy 0 < Lp <= Lc")
        if self.antennas_per_ap <= self.pilot_length:
            raise ValueError("partial zero-forcing requires A > Lp")
        if not 0.0 < self.assoc_threshold <= 1.0:
            raise ValueError("assoc_threshold must be in (0, 1]")
        if not 0.0 < self.strong_threshold <= 1.0:
            raise ValueError("strong_threshold must be in (0, 1]")
        if self.area_side_m <= 0 or self.bandwidth_hz <= 0 or self.tx_power_mw <= 0:
            raise ValueError("area, bandwidth and transmit power must be positive")
        if self.shadow_sigma_db < 0:
            raise ValueError("shadow sigma must be nonnegative")


@dataclass(frozen=True)
class NetworkRealization:
    """One drop: node positions plus the M x T linear-scale LSFC matrix."""

    ap_positions: np.ndarray
    ue_positions: np.ndarray
    beta: np.ndarray
    seed: int

    def __post_init__(self):
        ap = np.atleast_2d(np.asarray(self.ap_positions, dtype=float))
        ue = np.atleast_2d(np.asarray(self.ue_positions, dtype=float))
        beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        if beta.shape != (ap.shape[0], ue.shape[0]):
            raise ValueError(f"beta must be {ap.shape[0]}x{ue.shape[0]}, got {beta.shape}")
        if not np.all(np.isfinite(beta)) or np.any(beta <= 0):
            raise ValueError("LSFCs must be positive and finite")
        object.__setattr__(self, "ap_positions", _readonly(ap))
        object.__setattr__(self, "ue_positions", _readonly(ue))
        object.__setattr__(self, "beta", _readonly(beta))

    @property
    def num_aps(self) -> int:
        return self.beta.shape[0]

    @property
    def num_ues(self) -> int:
        return self.beta.shape[1]


@dataclass(frozen=True)
class PowerProfile:
    """Normalized (noise-referenced) SNR per UE for pilots and uplink data."""

    p_pilot: np.ndarray
    p_uplink: np.ndarray

    def __post_init__(self):
        pp = np.asarray(self.p_pilot, dtype=float)
        pu = np.asarray(self.p_uplink, dtype=float)
        if pp.shape != pu.shape:
            raise ValueError("pilot and uplink power vectors must have equal length")
        if np.any(pp <= 0) or np.any(pu <= 0):
            raise ValueError("normalized powers must be positive")
        object.__setattr__(self, "p_pilot", _readonly(pp))
        object.__setattr__(self, "p_uplink", _readonly(pu))


@dataclass(frozen=True)
class AssociationMap:
    """Serving structure between APs and UEs.

    `serving_aps[t]` lists the APs serving UE t in descending LSFC order;
    `served_ues[m]` is the (ascending) set of UEs served by AP m; the two are
    transposes of each other through the boolean `serves` matrix. The strong
    fields are None until :func:`group_strong_ues` has run.
    """

    serving_aps: tuple
    served_ues: tuple
    serves: np.ndarray
    strong_ues: tuple | None = None
    strong_flag: np.ndarray | None = None
    strong_pilot_count: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "serves", _readonly(np.asarray(self.serves, dtype=bool)))
        if self.strong_flag is not None:
            object.__setattr__(self, "strong_flag",
                               _readonly(np.asarray(self.strong_flag, dtype=bool)))
        if self.strong_pilot_count is not None:
            object.__setattr__(self, "strong_pilot_count",
                               _readonly(np.asarray(self.strong_pilot_count, dtype=int)))

    @property
    def has_strong_groups(self) -> bool:
        return self.strong_flag is not None


def compute_lsfc(distance_m, shadow_db=0.0, params: PathLossParams | None = None):
    """Linear-scale LSFC for one distance or an array of distances.

    Path loss follows the three-slope profile of `params`; the lognormal
    shadowing term `shadow_db` is applied only beyond the outer breakpoint,
    where the environment actually decorrelates. Distances are clamped to
    1 m to avoid the log singularity.
    """
    p = params if params is not None else PathLossParams()
    d_km = np.maximum(np.asarray(distance_m, dtype=float), 1.0) / 1000.0
    d0, d1 = p.d0_m / 1000.0, p.d1_m / 1000.0
    # offsets chain the segments together so the profile stays continuous
    mid_off = 10.0 * (p.exp_far - p.exp_mid) * math.log10(d1)
    near_off = mid_off + 10.0 * (p.exp_mid - p.exp_near) * math.log10(d0)
    pl_db = np.where(
        d_km > d1,
        p.ref_loss_db + 10.0 * p.exp_far * np.log10(d_km),
        np.where(
            d_km > d0,
            p.ref_loss_db + mid_off + 10.0 * p.exp_mid * np.log10(d_km),
            p.ref_loss_db + near_off + 10.0 * p.exp_near * np.log10(d_km),
        ),
    )
    shadowed = np.where(d_km > d1, shadow_db, 0.0)
    beta = 10.0 ** ((-pl_db + shadowed) / 10.0)
    if np.ndim(distance_m) == 0 and np.ndim(shadow_db) == 0:
        return float(beta)
    return beta


def _pairwise_distances(ap_pos: np.ndarray, ue_pos: np.ndarray,
                        wrap_side: float | None) -> np.ndarray:
    diff = ap_pos[:, None, :] - ue_pos[None, :, :]
    if wrap_side is not None:
        # shortest distance over the 3x3 torus images
        diff = np.abs(diff)
        diff = np.minimum(diff, wrap_side - diff)
    return np.sqrt(np.sum(diff * diff, axis=2))


def generate_drop(config: NetworkConfig, seed: int) -> NetworkRealization:
    """Draw one reproducible network drop.

    AP and UE positions are i.i.d. uniform on the square. Identical
    (config, seed) pairs produce bit-identical output. AP positions, UE
    positions, and shadowing come from three independently spawned streams,
    and the per-UE quantities are drawn UE-major, so rerunning the same seed
    with extra UEs appended leaves the first T columns of beta unchanged.
    """
    config.validate()
    ap_rng, ue_rng, sh_rng = (np.random.default_rng(s) for s in
                              np.random.SeedSequence(seed).spawn(3))
    side = config.area_side_m
    ap_pos = ap_rng.uniform(0.0, side, size=(config.num_aps, 2))
    ue_pos = ue_rng.uniform(0.0, side, size=(config.num_ues, 2))
    shadow = sh_rng.normal(0.0, config.shadow_sigma_db,
                           size=(config.num_ues, config.num_aps)).T
    dist = _pairwise_distances(ap_pos, ue_pos,
                               side if config.wrap_around else None)
    beta = compute_lsfc(dist, shadow, config.pathloss)
    return NetworkRealization(ap_pos, ue_pos, beta, int(seed))


def noise_power_dbm(bandwidth_hz: float, noise_figure_db: float) -> float:
    """Thermal noise power over the signal bandwidth, in dBm."""
    return -174.0 + 10.0 * math.log10(bandwidth_hz) + noise_figure_db


def normalize_powers(config: NetworkConfig) -> PowerProfile:
    """Noise-normalized SNR per UE; pilots and data share one power budget."""
    tx_dbm = 10.0 * math.log10(config.tx_power_mw)
    snr_db = tx_dbm - noise_power_dbm(config.bandwidth_hz, config.noise_figure_db)
    p = 10.0 ** (snr_db / 10.0)
    per_ue = np.full(config.num_ues, p)
    return PowerProfile(per_ue, per_ue.copy())


def _cumulative_prefix(values: np.ndarray, threshold: float) -> np.ndarray:
    """Indices (into `values`) of the smallest descending-order prefix whose
    sum reaches `threshold` times the total."""
    order = np.argsort(-values, kind="stable")
    csum = np.cumsum(values[order])
    need = threshold * csum[-1]
    k = int(np.searchsorted(csum, need, side="left")) + 1
    return order[:k]


def associate_aps(real: NetworkRealization, assoc_threshold: float) -> AssociationMap:
    """Serving sets per UE: smallest descending-LSFC prefix of APs capturing
    `assoc_threshold` of the UE's total LSFC mass across all APs."""
    if not 0.0 < assoc_threshold <= 1.0:
        raise ValueError("assoc_threshold must be in (0, 1]")
    num_aps, num_ues = real.beta.shape
    serves = np.zeros((num_aps, num_ues), dtype=bool)
    serving = []
    for t in range(num_ues):
        chosen = _cumulative_prefix(real.beta[:, t], assoc_threshold)
        serving.append(_readonly(chosen))
        serves[chosen, t] = True
    served = tuple(_readonly(np.flatnonzero(serves[m])) for m in range(num_aps))
    return AssociationMap(tuple(serving), served, serves)


def group_strong_ues(real: NetworkRealization, assoc: AssociationMap,
                     strong_threshold: float, assignment,
                     antennas_per_ap: int | None = None) -> AssociationMap:
    """Per-AP strong-UE grouping given a complete pilot assignment.

    At each AP the served UEs are ranked by LSFC and the smallest prefix
    holding `strong_threshold` of the AP's served LSFC mass becomes the
    strong set; its distinct-pilot count is the zero-forcing dimension spent
    at that AP and must stay below the antenna count.
    """
    if not 0.0 < strong_threshold <= 1.0:
        raise ValueError("strong_threshold must be in (0, 1]")
    num_aps, num_ues = real.beta.shape
    strong_flag = np.zeros((num_aps, num_ues), dtype=bool)
    strong_sets = []
    pilot_count = np.zeros(num_aps, dtype=int)
    for m in range(num_aps):
        members = assoc.served_ues[m]
        if members.size == 0:
            strong_sets.append(_readonly(members.copy()))
            continue
        pilots = assignment.pilot_of[members]
        if np.any(pilots < 0):
            raise ValueError(f"AP {m} serves unassigned UEs; assign pilots first")
        chosen = members[_cumulative_prefix(real.beta[m, members], strong_threshold)]
        strong_sets.append(_readonly(np.sort(chosen)))
        strong_flag[m, chosen] = True
        pilot_count[m] = np.unique(assignment.pilot_of[chosen]).size
        if antennas_per_ap is not None and pilot_count[m] >= antennas_per_ap:
            raise ValueError(
                f"AP {m} would zero-force {pilot_count[m]} pilots with only "
                f"{antennas_per_ap} antennas")
    return replace(assoc, strong_ues=tuple(strong_sets),
                   strong_flag=strong_flag, strong_pilot_count=pilot_count)
