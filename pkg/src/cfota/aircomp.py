"""Analog over-the-air aggregation of model updates.

Each client packs its length-d update into K x S complex symbols (real
part first, imaginary part second, zero padding at the tail), scales by
alpha and transmits; all clients share the channel, so each slot
superposes their symbols.  The receiver applies a trace-normalized
matched-filter combiner over each terminal's serving cluster and
averages, which makes the combined output an unbiased estimate of the
mean update entry.  The slot output splits into four components
(wanted part, true-channel leakage, estimation-error leakage, noise)
whose sum is exactly the combiner output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class SymbolFrame:
    """Symbols for one round: (N, K, S) complex, plus padding info."""

    symbols: np.ndarray
    dim: int
    pad: int

    @property
    def num_clients(self):
        return self.symbols.shape[0]

    @property
    def transmissions(self):
        return self.symbols.shape[1]

    @property
    def subcarriers(self):
        return self.symbols.shape[2]


@dataclass
class AggregateResult:
    """Combined slot grids and the reconstructed mean update."""

    delta_hat: np.ndarray  # (d,)
    signal: np.ndarray  # (K, S) complex
    interf1: np.ndarray
    interf2: np.ndarray
    noise: np.ndarray
    alpha: float
    symbol_energy: np.ndarray  # (N,) mean_k ||alpha x_n^k||^2

    @property
    def combined(self):
        return self.signal + self.interf1 + self.interf2 + self.noise


def map_to_symbols(updates, subcarriers):
    """Pack updates (N, d) or (d,) into an (N, K, S) symbol frame.

    Entry 2*(s*K + k) of a padded update becomes the real part and
    entry 2*(s*K + k) + 1 the imaginary part of symbol (k, s); the pad
    is zeros, so K = ceil(d / (2 S)) transmissions always suffice.
    """
    upd = np.atleast_2d(np.asarray(updates, dtype=np.float64))
    n, d = upd.shape
    s = int(subcarriers)
    if s < 1:
        raise ValueError("subcarriers must be >= 1")
    k = math.ceil(d / (2 * s))
    pad = 2 * k * s - d
    padded = np.zeros((n, 2 * k * s), dtype=np.float64)
    padded[:, :d] = upd
    pairs = padded.reshape(n, s, k, 2)
    symbols = (pairs[..., 0] + 1j * pairs[..., 1]).transpose(0, 2, 1)
    return SymbolFrame(symbols=np.ascontiguousarray(symbols), dim=d, pad=pad)


def demap(symbols, alpha, dim):
    """Invert map_to_symbols on one or many (K, S) grids.

    Accepts (..., K, S) and returns (..., dim); leading axes index
    independent frames.
    """
    grid = np.asarray(symbols)
    if grid.ndim < 2:
        raise ValueError("expected at least a (K, S) grid")
    k, s = grid.shape[-2:]
    if dim > 2 * k * s:
        raise ValueError("dim exceeds frame capacity")
    scaled = grid / alpha if alpha != 1.0 else grid
    swapped = np.swapaxes(scaled, -1, -2)  # (..., S, K)
    pairs = np.stack([swapped.real, swapped.imag], axis=-1)  # (..., S, K, 2)
    flat = pairs.reshape(grid.shape[:-2] + (2 * k * s,))
    return flat[..., :dim].copy()


def build_combiner(draw, assoc, participants=None):
    """Averaged trace-normalized combiner, (B, L, M) per slot.

    Block l is (1/n_eff) sum over combining clients served by l of
    h_hat_{n,l} / c_n; blocks outside every serving cluster are zero.
    """
    h_hat = draw.h_hat
    mask = assoc.mask.astype(np.float64)
    inv_c = 1.0 / assoc.c
    if participants is not None:
        part = np.asarray(participants, dtype=np.intp)
        h_hat = h_hat[:, part]
        mask = mask[part]
        inv_c = inv_c[part]
    n_eff = mask.shape[0]
    weights = mask * inv_c[:, None]
    return np.einsum("nl,bnlm->blm", weights, h_hat) / n_eff


def transmit_and_combine(frame, alpha, draw, assoc, noise_std,
                         participants=None, backend=None):
    """Run one frame over drawn channels and reconstruct the average.

    ``draw`` must hold K*S slots ordered k-major (slot j = k*S + s).
    Only ``participants`` transmit and are averaged by the combiner
    (all clients when None); the reconstruction divides by alpha, so
    the returned delta_hat estimates the mean update over participants.
    """
    k, s = frame.transmissions, frame.subcarriers
    if draw.batch != k * s:
        raise ValueError(f"need {k * s} slots, draw has {draw.batch}")
    if participants is None:
        part = np.arange(frame.num_clients)
    else:
        part = np.asarray(participants, dtype=np.intp)
        if part.size == 0:
            raise ValueError("participants must be non-empty")
    n_eff = int(part.size)

    x = frame.symbols[part].transpose(1, 2, 0).reshape(k * s, n_eff)
    sig, it1, it2, noi = _kernels.combine_terms(
        draw.h[:, part],
        draw.h_hat[:, part],
        noise_std * draw.z_unit,
        x,
        assoc.mask[part].astype(np.float64),
        1.0 / assoc.c[part],
        alpha,
        n_eff,
        backend=backend,
    )
    grids = [a.reshape(k, s) for a in (sig, it1, it2, noi)]
    combined = grids[0] + grids[1] + grids[2] + grids[3]
    delta_hat = demap(combined, alpha, frame.dim)
    energy = (alpha**2) * np.abs(frame.symbols) ** 2
    symbol_energy = energy.sum(axis=(1, 2)) / k
    return AggregateResult(
        delta_hat=delta_hat,
        signal=grids[0],
        interf1=grids[1],
        interf2=grids[2],
        noise=grids[3],
        alpha=alpha,
        symbol_energy=symbol_energy,
    )


@dataclass
class PowerLedger:
    """Running per-client symbol-energy average across rounds.

    Accumulates alpha^2 sum_{k,s} |x_n^{k,s}|^2 per round; the average
    divides by rounds * K, matching a per-transmission energy budget.
    """

    num_clients: int
    energy: np.ndarray = field(default=None)  # type: ignore[assignment]
    rounds: int = 0
    transmissions: int = 0

    def __post_init__(self):
        if self.energy is None:
            self.energy = np.zeros(self.num_clients)

    def add(self, frame, alpha):
        if frame.num_clients != self.num_clients:
            raise ValueError("frame client count does not match ledger")
        if self.rounds and frame.transmissions != self.transmissions:
            raise ValueError("transmissions per round changed mid-run")
        self.transmissions = frame.transmissions
        self.energy += (alpha**2) * (np.abs(frame.symbols) ** 2).sum(axis=(1, 2))
        self.rounds += 1

    def average(self):
        if self.rounds == 0:
            return np.zeros(self.num_clients)
        return self.energy / (self.rounds * self.transmissions)

    def max_average(self):
        return float(self.average().max(initial=0.0))

    def max_average_dbm(self):
        avg = self.max_average()
        return 10.0 * math.log10(avg) if avg > 0 else float("-inf")


def account_power(ledger, frame, alpha):
    """Record one round's transmissions in the ledger."""
    ledger.add(frame, alpha)
    return ledger
