"""Monte-Carlo verification of the combining statistics.

Closed forms being checked, for fixed per-client updates and the
averaged trace-normalized combiner over N clients:

  wanted-part deviation, per entry i:
      (1/N^2) sum_n tr(R_n D_n R_n D_n) / c_n^2 * update[n, i]^2
  true-channel leakage, summed over entries:
      (1/N^2) sum_n sum_{n' != n} tr(R_n' D_n R_n D_n) / c_n^2 * ||update[n']||^2
  estimation-error leakage, summed over entries (n' = n included):
      (1/N^2) sum_n sum_{n'} tr(C_n D_n R_n' D_n) / c_n^2 * ||update[n']||^2
  noise, per entry:
      (kappa + kappa_tilde) sigma_z^2 / (2 N alpha^2)

plus unbiasedness: the reconstructed average matches the true mean
update entrywise.  The Monte-Carlo estimator replays one fixed symbol
frame over independent slot draws and accumulates all statistics in
one pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .aircomp import demap, map_to_symbols, transmit_and_combine
from .channel import ChannelSampler


@dataclass
class MomentCheck:
    name: str
    measured: float
    expected: float
    rel_err: float
    tol: float
    passed: bool

    def line(self):
        state = "PASS" if self.passed else "FAIL"
        return (
            f"{self.name:<28s} measured {self.measured:.6e}  "
            f"expected {self.expected:.6e}  rel_err {self.rel_err:.3%}  "
            f"tol {self.tol:.1%}  {state}"
        )


def trace_products(correlations, assoc):
    """Serving-masked trace products (rr[n, n'], cr[n, n']).

    rr[n, n'] = sum_{l in K_n} tr(R_{n,l} R_{n',l}) and cr likewise
    with C_{n,l} in the first slot; both are the block-sparse values of
    tr(X_n D_n R_{n'} D_n) for collective block-diagonal covariances.
    """
    mask = assoc.mask.astype(np.float64)
    r, c = correlations.R, correlations.C
    rr = np.einsum("nlij,plji,nl->np", r, r, mask).real
    cr = np.einsum("nlij,plji,nl->np", c, r, mask).real
    return rr, cr


def expected_moments(correlations, assoc, updates, alpha, noise_std):
    """Closed-form values the Monte-Carlo run is checked against."""
    updates = np.atleast_2d(np.asarray(updates, dtype=np.float64))
    n = updates.shape[0]
    inv_c2 = 1.0 / assoc.c**2
    rr, cr = trace_products(correlations, assoc)

    signal_entry = (inv_c2 * np.diag(rr)) @ updates**2 / n**2
    norms_sq = (updates**2).sum(axis=1)
    off = rr * inv_c2[:, None]
    np.fill_diagonal(off, 0.0)
    interf1_sum = float((off @ norms_sq).sum()) / n**2
    interf2_sum = float(((cr * inv_c2[:, None]) @ norms_sq).sum()) / n**2

    trace_c = np.trace(correlations.C, axis1=-2, axis2=-1).real
    kappa = float(np.mean(1.0 / assoc.c))
    kappa_tilde = float(np.mean((trace_c * assoc.mask).sum(axis=1) * inv_c2))
    noise_entry = (kappa + kappa_tilde) * noise_std**2 / (2 * n * alpha**2)
    return {
        "signal_entry": signal_entry,  # (d,)
        "interf1_sum": interf1_sum,
        "interf2_sum": interf2_sum,
        "noise_entry": noise_entry,
    }


@dataclass
class MonteCarloMoments:
    frames: int
    mean: np.ndarray  # (d,) mean reconstructed average
    se: np.ndarray  # (d,) standard error of the mean
    signal_entry: np.ndarray  # (d,) second moment of wanted-part deviation
    interf1_sum: float
    interf2_sum: float
    noise_entry: np.ndarray  # (d,)


def monte_carlo_moments(correlations, assoc, updates, subcarriers, alpha,
                        noise_std, seed, frames, chunk=4096, backend=None):
    """Replay a fixed frame over ``frames`` independent channel draws."""
    updates = np.atleast_2d(np.asarray(updates, dtype=np.float64))
    n, d = updates.shape
    frame = map_to_symbols(updates, subcarriers)
    k, s = frame.transmissions, frame.subcarriers
    per_frame = k * s
    sampler = ChannelSampler(correlations, seed)
    gen = _rng.substream(seed, _rng.MONTE_CARLO)
    mean_update = updates.mean(axis=0)

    sum_total = np.zeros(d)
    sumsq_total = np.zeros(d)
    sum_sig_dev = np.zeros(d)
    sum_noise = np.zeros(d)
    sum_i1 = 0.0
    sum_i2 = 0.0
    done = 0
    while done < frames:
        b = min(chunk, frames - done)
        draw = sampler.draw_stream(gen, b * per_frame)
        batched = _replay(frame, alpha, draw, assoc, noise_std, b, backend)
        sig, it1, it2, noi = (
            demap(g, alpha, d) for g in batched
        )  # each (b, d)
        total = sig + it1 + it2 + noi
        sum_total += total.sum(axis=0)
        sumsq_total += (total**2).sum(axis=0)
        sum_sig_dev += ((sig - mean_update) ** 2).sum(axis=0)
        sum_noise += (noi**2).sum(axis=0)
        sum_i1 += float((it1**2).sum())
        sum_i2 += float((it2**2).sum())
        done += b

    mean = sum_total / frames
    var = np.maximum(sumsq_total / frames - mean**2, 0.0)
    se = np.sqrt(var / frames)
    return MonteCarloMoments(
        frames=frames,
        mean=mean,
        se=se,
        signal_entry=sum_sig_dev / frames,
        interf1_sum=sum_i1 / frames,
        interf2_sum=sum_i2 / frames,
        noise_entry=sum_noise / frames,
    )


def _replay(frame, alpha, draw, assoc, noise_std, b, backend):
    """transmit_and_combine for b copies of one frame; (b, K, S) grids."""
    from . import _kernels

    k, s = frame.transmissions, frame.subcarriers
    x_frame = frame.symbols.transpose(1, 2, 0).reshape(k * s, -1)
    x = np.tile(x_frame, (b, 1))
    sig, it1, it2, noi = _kernels.combine_terms(
        draw.h,
        draw.h_hat,
        noise_std * draw.z_unit,
        x,
        assoc.mask.astype(np.float64),
        1.0 / assoc.c,
        alpha,
        frame.num_clients,
        backend=backend,
    )
    return tuple(a.reshape(b, k, s) for a in (sig, it1, it2, noi))


def moment_checks(correlations, assoc, updates, subcarriers, alpha,
                  noise_std, seed, frames, tol=0.02, chunk=4096,
                  backend=None):
    """Run the Monte-Carlo moment comparison; one check per component.

    Entrywise components report their worst entry.  A component whose
    closed-form value is zero (e.g. leakage under perfect CSI) is
    checked against zero exactly.
    """
    mc = monte_carlo_moments(
        correlations, assoc, updates, subcarriers, alpha, noise_std,
        seed, frames, chunk=chunk, backend=backend,
    )
    want = expected_moments(correlations, assoc, updates, alpha, noise_std)

    checks = []

    def rel(measured, expected):
        if expected == 0.0:
            return 0.0 if measured == 0.0 else float("inf")
        return abs(measured - expected) / abs(expected)

    worst = int(np.argmax(np.abs(mc.signal_entry - want["signal_entry"])
                          / np.maximum(want["signal_entry"], 1e-300)))
    checks.append(_make(
        "signal_entry_var[worst]", float(mc.signal_entry[worst]),
        float(want["signal_entry"][worst]), tol, rel,
    ))
    checks.append(_make(
        "interf1_sum", mc.interf1_sum, want["interf1_sum"], tol, rel
    ))
    checks.append(_make(
        "interf2_sum", mc.interf2_sum, want["interf2_sum"], tol, rel
    ))
    worst_noise = float(want["noise_entry"])
    worst_idx = int(np.argmax(np.abs(mc.noise_entry - worst_noise)))
    checks.append(_make(
        "noise_entry_var[worst]", float(mc.noise_entry[worst_idx]),
        worst_noise, tol, rel,
    ))
    return checks, mc


def _make(name, measured, expected, tol, rel):
    err = rel(measured, expected)
    return MomentCheck(
        name=name,
        measured=measured,
        expected=expected,
        rel_err=err,
        tol=tol,
        passed=err <= tol,
    )


def unbiasedness_check(mc, updates, band=4.0):
    """Entrywise |mean - target| <= band * SE for the reconstruction."""
    target = np.atleast_2d(updates).mean(axis=0)
    dev = np.abs(mc.mean - target)
    limit = band * np.maximum(mc.se, 1e-300)
    worst = int(np.argmax(dev / limit))
    return MomentCheck(
        name="unbiasedness[worst]",
        measured=float(dev[worst] / np.maximum(mc.se[worst], 1e-300)),
        expected=0.0,
        rel_err=float(dev[worst] / np.maximum(mc.se[worst], 1e-300)),
        tol=band,
        passed=bool(np.all(dev <= limit)),
    )
