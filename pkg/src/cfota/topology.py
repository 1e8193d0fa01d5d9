"""Network geometry, large-scale fading and user-centric clustering.

Positions live on a square service area (meters).  Each terminal/access
point link gets a large-scale gain from a log-distance model with
lognormal shadowing, a spatial correlation matrix (scaled identity or
exponential), and each terminal is served by a small user-centric
cluster of access points.  A cellular deployment is the L = 1 special
case with the single access point pinned to the area center; all
downstream physics runs through the same code path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng

CORRELATION_MODELS = ("identity", "exponential")
ASSOCIATION_POLICIES = ("top_q", "threshold")


@dataclass(frozen=True)
class NetworkConfig:
    """Static description of one deployment.

    ``cluster_size`` is the serving-cluster size Q for ``top_q`` and the
    cap Q_max for ``threshold``; ``threshold_db`` is how far below the
    strongest link (in dB) an access point may be and still serve.
    """

    num_uts: int
    num_aps: int
    antennas_per_ap: int
    area_side: float = 2000.0
    pathloss_exponent: float = 3.76
    shadowing_std_db: float = 10.0
    min_distance: float = 10.0
    correlation: str = "identity"
    corr_rho: float = 0.5
    association: str = "top_q"
    cluster_size: int = 4
    threshold_db: float = 20.0
    cellular: bool = False

    def __post_init__(self):
        if self.num_uts < 1 or self.num_aps < 1 or self.antennas_per_ap < 1:
            raise ValueError("num_uts, num_aps, antennas_per_ap must be >= 1")
        if self.area_side <= 0 or self.min_distance <= 0:
            raise ValueError("area_side and min_distance must be positive")
        if self.correlation not in CORRELATION_MODELS:
            raise ValueError(f"unknown correlation model {self.correlation!r}")
        if not 0.0 <= self.corr_rho < 1.0:
            raise ValueError("corr_rho must lie in [0, 1)")
        if self.association not in ASSOCIATION_POLICIES:
            raise ValueError(f"unknown association policy {self.association!r}")
        if not 1 <= self.cluster_size <= self.num_aps:
            raise ValueError("cluster_size must lie in [1, num_aps]")
        if self.threshold_db < 0:
            raise ValueError("threshold_db must be nonnegative")
        if self.cellular and self.num_aps != 1:
            raise ValueError("cellular mode requires num_aps == 1")


@dataclass(frozen=True)
class Topology:
    """One placement draw: positions in meters, gains linear."""

    config: NetworkConfig
    ap_positions: np.ndarray  # (L, 2)
    ut_positions: np.ndarray  # (N, 2)
    beta: np.ndarray  # (N, L), strictly positive


@dataclass(frozen=True)
class CorrelationSet:
    """Per-link spatial covariances R (and CSI error covariances C).

    Both arrays have shape (N, L, M, M); C starts at zero and is filled
    by the channel module once a CSI model is chosen.
    """

    R: np.ndarray
    C: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.C is None:
            object.__setattr__(self, "C", np.zeros_like(self.R))
        if self.R.shape != self.C.shape or self.R.ndim != 4:
            raise ValueError("R and C must both have shape (N, L, M, M)")

    @property
    def num_uts(self):
        return self.R.shape[0]

    @property
    def num_aps(self):
        return self.R.shape[1]

    @property
    def antennas(self):
        return self.R.shape[2]


@dataclass(frozen=True)
class AssociationMap:
    """Serving relation between terminals and access points.

    ``serving[n]`` lists the access points in terminal n's cluster,
    ``served[l]`` the terminals access point l participates in combining
    for.  ``c`` holds the per-terminal trace normalizer
    c_n = sum_{l in serving[n]} tr R_{n,l}.
    """

    serving: tuple
    served: tuple
    mask: np.ndarray  # (N, L) bool
    c: np.ndarray  # (N,) float

    def __post_init__(self):
        if any(len(s) == 0 for s in self.serving):
            raise ValueError("every terminal needs a non-empty serving cluster")
        if np.any(self.c <= 0):
            raise ValueError("trace normalizers must be strictly positive")


def place_network(config, seed):
    """Draw positions and large-scale gains for one deployment.

    Gains follow beta_dB = -30.5 - 10 * pathloss_exponent * log10(d / 1 m)
    plus N(0, shadowing_std_db^2) shadowing, distances clamped below at
    ``min_distance`` so the model stays bounded.
    """
    gen = _rng.substream(seed, _rng.TOPOLOGY)
    side = config.area_side
    if config.cellular:
        ap = np.full((1, 2), side / 2.0)
    else:
        ap = gen.uniform(0.0, side, size=(config.num_aps, 2))
    ut = gen.uniform(0.0, side, size=(config.num_uts, 2))
    shadow = gen.standard_normal((config.num_uts, config.num_aps))

    dist = np.linalg.norm(ut[:, None, :] - ap[None, :, :], axis=-1)
    dist = np.maximum(dist, config.min_distance)
    beta_db = (
        -30.5
        - 10.0 * config.pathloss_exponent * np.log10(dist)
        + config.shadowing_std_db * shadow
    )
    beta = 10.0 ** (beta_db / 10.0)
    return Topology(config=config, ap_positions=ap, ut_positions=ut, beta=beta)


def build_correlations(topology, seed):
    """Per-link covariance matrices for the drawn deployment.

    identity:     R_{n,l} = beta_{n,l} I_M.
    exponential:  (R_{n,l})_{jk} = beta_{n,l} rho^|j-k| exp(i phi_{n,l} (j-k))
                  with a deterministic per-link phase phi; the linear
                  phase ramp is a unitary diagonal similarity, so the
                  eigenvalues and trace of the real exponential profile
                  are preserved and R stays Hermitian PSD.
    """
    cfg = topology.config
    n, l, m = cfg.num_uts, cfg.num_aps, cfg.antennas_per_ap
    beta = topology.beta
    if cfg.correlation == "identity":
        r = np.zeros((n, l, m, m), dtype=np.complex128)
        idx = np.arange(m)
        r[:, :, idx, idx] = beta[:, :, None]
        return CorrelationSet(R=r)

    gen = _rng.substream(seed, _rng.CORRELATION)
    phi = gen.uniform(0.0, 2.0 * np.pi, size=(n, l))
    j = np.arange(m)
    lag = j[:, None] - j[None, :]  # (M, M), j - k
    profile = cfg.corr_rho ** np.abs(lag)
    ramp = np.exp(1j * phi[:, :, None, None] * lag[None, None, :, :])
    r = beta[:, :, None, None] * profile[None, None, :, :] * ramp
    r = 0.5 * (r + np.conj(np.swapaxes(r, -1, -2)))
    return CorrelationSet(R=r)


def associate(topology, correlations):
    """Build serving clusters under the configured association policy.

    top_q keeps the Q strongest links per terminal; threshold keeps all
    links within threshold_db of the strongest, capped at cluster_size.
    Ties resolve toward the lower access-point index.  Every access
    point in a cluster serves; c_n sums serving-link covariance traces.
    """
    cfg = topology.config
    n, l = cfg.num_uts, cfg.num_aps
    beta = topology.beta
    serving = []
    for i in range(n):
        order = np.argsort(-beta[i], kind="stable")
        if cfg.association == "top_q":
            keep = order[: cfg.cluster_size]
        else:
            cutoff = beta[i, order[0]] * 10.0 ** (-cfg.threshold_db / 10.0)
            inside = order[beta[i, order] >= cutoff]
            keep = inside[: cfg.cluster_size]
        serving.append(tuple(sorted(int(a) for a in keep)))

    mask = np.zeros((n, l), dtype=bool)
    for i, aps in enumerate(serving):
        mask[i, list(aps)] = True
    served = tuple(
        tuple(int(u) for u in np.flatnonzero(mask[:, a])) for a in range(l)
    )
    traces = np.trace(correlations.R, axis1=-2, axis2=-1).real  # (N, L)
    c = (traces * mask).sum(axis=1)
    return AssociationMap(serving=tuple(serving), served=served, mask=mask, c=c)


def save_layout(path, topology, assoc):
    """Dump positions, gains and serving sets to a JSON file."""
    payload = {
        "area_side_m": topology.config.area_side,
        "ap_positions_m": topology.ap_positions.tolist(),
        "ut_positions_m": topology.ut_positions.tolist(),
        "beta_db": (10.0 * np.log10(topology.beta)).tolist(),
        "serving": [list(s) for s in assoc.serving],
        "trace_normalizer": assoc.c.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
