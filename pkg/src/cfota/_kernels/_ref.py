"""Reference combining kernel in plain numpy.

Given drawn channels for a batch of slots, accumulate the four receive
components per slot: the wanted (true-channel, own-symbol) part, the
true-channel cross-client leakage, the estimation-error leakage, and
the combined noise pickup.  Shapes:

    h, h_hat : (B, n, L, M) complex  channels of transmitting clients
    z        : (B, L, M) complex     noise at the access points (scaled)
    x        : (B, n) complex        per-slot symbols
    mask     : (n, L) float          1.0 where the access point serves
    inv_c    : (n,) float            1 / c_n trace normalizers
    alpha    : float                 transmit scaling
    n_eff    : int                   clients averaged by the combiner

Returns four (B,) complex arrays (signal, interf1, interf2, noise)
whose sum equals the combiner output v^H y for the slot.
"""

from __future__ import annotations

import numpy as np


def combine_terms(h, h_hat, z, x, mask, inv_c, alpha, n_eff):
    herr = h_hat - h
    s_h = np.einsum("bn,bnlm->blm", x, h)  # superposed uplink signal
    q = np.einsum("bnlm,nl->bn", h.real**2 + h.imag**2, mask)
    u = np.einsum("bnlm,nl,blm->bn", np.conj(h), mask, s_h)
    e = np.einsum("bnlm,nl,blm->bn", np.conj(herr), mask, s_h)
    w = np.einsum("bnlm,nl,blm->bn", np.conj(h_hat), mask, z)

    scale = alpha / n_eff
    signal = scale * ((q * inv_c) * x).sum(axis=1)
    interf1 = scale * ((u - q * x) * inv_c).sum(axis=1)
    interf2 = scale * (e * inv_c).sum(axis=1)
    noise = (w * inv_c).sum(axis=1) / n_eff
    return signal, interf1, interf2, noise
