"""Correlated Rayleigh channel draws and CSI error models.

True channels are h_{n,l} ~ CN(0, R_{n,l}), independent across links
and across transmission slots.  Estimates are h_hat = h + h_err with
h_err ~ CN(0, C_{n,l}) independent of h; C comes from a pilot-based
MMSE model, an explicit scaling of R, or is zero under perfect CSI.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .topology import CorrelationSet

CSI_MODES = ("perfect", "mmse", "explicit")


@dataclass(frozen=True)
class CsiConfig:
    mode: str = "perfect"
    pilot_snr: float = 10.0  # linear
    error_scale: float = 0.1  # explicit mode: C = error_scale * R

    def __post_init__(self):
        if self.mode not in CSI_MODES:
            raise ValueError(f"unknown CSI mode {self.mode!r}")
        if self.mode == "mmse" and self.pilot_snr <= 0:
            raise ValueError("pilot_snr must be positive")
        if self.mode == "explicit" and not 0.0 <= self.error_scale:
            raise ValueError("error_scale must be nonnegative")


@dataclass(frozen=True)
class ChannelDraw:
    """A batch of slot realizations.

    Arrays are (B, N, L, M); ``z_unit`` is unit-variance CN noise at the
    access points, (B, L, M), scaled by sigma_z at combining time.
    ``slot_ids`` is None for anonymous Monte-Carlo batches.
    """

    h: np.ndarray
    h_hat: np.ndarray
    z_unit: np.ndarray
    slot_ids: np.ndarray | None = None

    @property
    def batch(self):
        return self.h.shape[0]


def hermitize(a):
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def matrix_sqrt_psd(a):
    """Hermitian PSD square root; tiny negative eigenvalues clamp to 0."""
    vals, vecs = np.linalg.eigh(a)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)[..., None, :]) @ np.conj(
        np.swapaxes(vecs, -1, -2)
    )


def sample_gaussian(r, gen, size=1):
    """Draw ``size`` vectors from CN(0, r) for a single covariance."""
    root = matrix_sqrt_psd(np.asarray(r, dtype=np.complex128))
    w = _rng.standard_complex(gen, (size, r.shape[-1]))
    return np.einsum("ij,sj->si", root, w)


def mmse_error_covariance(r, pilot_snr):
    """Estimation error covariance C = R - R (R + I/snr)^{-1} R.

    Works on a single matrix or a batch (..., M, M).  C is Hermitian
    PSD and C <= R in the semidefinite order for any pilot_snr > 0.
    """
    r = np.asarray(r, dtype=np.complex128)
    m = r.shape[-1]
    eye = np.eye(m, dtype=np.complex128)
    lifted = r + eye / pilot_snr
    c = r - r @ np.linalg.solve(lifted, r)
    return hermitize(c)


def with_csi_errors(correlations, csi):
    """Return a CorrelationSet whose C field reflects the CSI model."""
    r = correlations.R
    if csi.mode == "perfect":
        c = np.zeros_like(r)
    elif csi.mode == "mmse":
        c = mmse_error_covariance(r, csi.pilot_snr)
    else:
        c = csi.error_scale * r
    return CorrelationSet(R=r, C=c)


class ChannelSampler:
    """Draws slot realizations for a fixed deployment.

    Square-root factors of R and C are computed once.  ``draw_slots``
    keys one substream per slot id, so any chunking of the id list
    reproduces the serial sequence; ``draw_stream`` pulls an anonymous
    batch from a caller-held generator for Monte-Carlo estimation.
    """

    def __init__(self, correlations, seed):
        self.correlations = correlations
        self.seed = int(seed)
        self._sqrt_r = matrix_sqrt_psd(correlations.R)
        if np.any(correlations.C):
            self._sqrt_c = matrix_sqrt_psd(correlations.C)
        else:
            self._sqrt_c = None

    @property
    def shape(self):
        n, l, m, _ = self.correlations.R.shape
        return n, l, m

    def _slot_normals(self, gen, batch):
        n, l, m = self.shape
        wh = _rng.standard_complex(gen, (batch, n, l, m))
        we = _rng.standard_complex(gen, (batch, n, l, m))
        wz = _rng.standard_complex(gen, (batch, l, m))
        return wh, we, wz

    def _transform(self, wh, we, wz, slot_ids):
        h = np.einsum("nlij,bnlj->bnli", self._sqrt_r, wh)
        if self._sqrt_c is None:
            h_hat = h.copy()
        else:
            h_hat = h + np.einsum("nlij,bnlj->bnli", self._sqrt_c, we)
        return ChannelDraw(h=h, h_hat=h_hat, z_unit=wz, slot_ids=slot_ids)

    def draw(self, slot_id):
        return self.draw_slots([slot_id])

    def draw_slots(self, slot_ids):
        """Draw the given slots, one keyed substream per slot id."""
        ids = np.asarray(list(slot_ids), dtype=np.int64)
        n, l, m = self.shape
        wh = np.empty((len(ids), n, l, m), dtype=np.complex128)
        we = np.empty_like(wh)
        wz = np.empty((len(ids), l, m), dtype=np.complex128)
        for j, sid in enumerate(ids):
            gen = _rng.substream(self.seed, _rng.SLOT, sid)
            wh[j], we[j], wz[j] = self._slot_normals(gen, 1)
        return self._transform(wh, we, wz, ids)

    def draw_stream(self, gen, batch):
        """Draw an anonymous batch from ``gen`` (no slot identities)."""
        wh, we, wz = self._slot_normals(gen, batch)
        return self._transform(wh, we, wz, None)
