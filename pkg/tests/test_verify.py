"""Moment oracles: closed forms, Monte-Carlo estimator, checkers."""

import numpy as np
import pytest

from cfota import rng as _rng
from cfota.aircomp import map_to_symbols, transmit_and_combine
from cfota.channel import ChannelSampler, CsiConfig, with_csi_errors
from cfota.topology import (
    NetworkConfig,
    associate,
    build_correlations,
    place_network,
)
from cfota.verify import (
    _replay,
    expected_moments,
    moment_checks,
    monte_carlo_moments,
    trace_products,
    unbiasedness_check,
)


def small_system(seed=0, csi=None, **kw):
    base = dict(
        num_uts=3,
        num_aps=4,
        antennas_per_ap=2,
        area_side=300.0,
        cluster_size=2,
        shadowing_std_db=4.0,
        correlation="exponential",
        corr_rho=0.4,
    )
    base.update(kw)
    cfg = NetworkConfig(**base)
    topo = place_network(cfg, seed)
    corr = with_csi_errors(
        build_correlations(topo, seed),
        csi or CsiConfig(mode="explicit", error_scale=0.25),
    )
    return corr, associate(topo, corr)


def test_trace_products_match_direct_loops():
    corr, assoc = small_system(1)
    rr, cr = trace_products(corr, assoc)
    n, l = assoc.mask.shape
    for i in range(n):
        for p in range(n):
            want_rr = sum(
                np.trace(corr.R[i, a] @ corr.R[p, a]).real
                for a in assoc.serving[i]
            )
            want_cr = sum(
                np.trace(corr.C[i, a] @ corr.R[p, a]).real
                for a in assoc.serving[i]
            )
            assert rr[i, p] == pytest.approx(want_rr, rel=1e-12)
            assert cr[i, p] == pytest.approx(want_cr, rel=1e-12)


def test_expected_moments_match_direct_loops():
    corr, assoc = small_system(2)
    gen = np.random.default_rng(0)
    updates = gen.standard_normal((3, 5))
    alpha, sigma = 0.5, 0.3
    got = expected_moments(corr, assoc, updates, alpha, sigma)

    n = 3
    rr, cr = trace_products(corr, assoc)
    sig = np.zeros(5)
    i1 = 0.0
    i2 = 0.0
    for i in range(n):
        sig += rr[i, i] / assoc.c[i] ** 2 * updates[i] ** 2
        for p in range(n):
            if p != i:
                i1 += rr[i, p] / assoc.c[i] ** 2 * (updates[p] ** 2).sum()
            i2 += cr[i, p] / assoc.c[i] ** 2 * (updates[p] ** 2).sum()
    kappa = np.mean(1.0 / assoc.c)
    kappa_t = np.mean(
        [
            sum(np.trace(corr.C[i, a]).real for a in assoc.serving[i])
            / assoc.c[i] ** 2
            for i in range(n)
        ]
    )
    np.testing.assert_allclose(got["signal_entry"], sig / n**2, rtol=1e-12)
    assert got["interf1_sum"] == pytest.approx(i1 / n**2, rel=1e-12)
    assert got["interf2_sum"] == pytest.approx(i2 / n**2, rel=1e-12)
    want_noise = (kappa + kappa_t) * sigma**2 / (2 * n * alpha**2)
    assert got["noise_entry"] == pytest.approx(want_noise, rel=1e-12)


def test_replay_matches_transmit_and_combine():
    corr, assoc = small_system(3)
    gen = np.random.default_rng(1)
    updates = gen.standard_normal((3, 6))
    frame = map_to_symbols(updates, 2)
    sampler = ChannelSampler(corr, seed=5)
    draw = sampler.draw_slots(range(frame.transmissions * 2))
    single = transmit_and_combine(frame, 0.5, draw, assoc, 0.2)
    batched = _replay(frame, 0.5, draw, assoc, 0.2, 1, None)
    np.testing.assert_allclose(batched[0][0], single.signal, rtol=1e-12)
    np.testing.assert_allclose(batched[1][0], single.interf1, rtol=1e-12)
    np.testing.assert_allclose(batched[2][0], single.interf2, rtol=1e-12)
    np.testing.assert_allclose(batched[3][0], single.noise, rtol=1e-12)


def test_monte_carlo_deterministic():
    corr, assoc = small_system(4)
    updates = np.random.default_rng(2).standard_normal((3, 4))
    kw = dict(subcarriers=2, alpha=1.0, noise_std=0.1, seed=7, frames=200,
              chunk=64)
    a = monte_carlo_moments(corr, assoc, updates, **kw)
    b = monte_carlo_moments(corr, assoc, updates, **kw)
    np.testing.assert_array_equal(a.mean, b.mean)
    np.testing.assert_array_equal(a.signal_entry, b.signal_entry)
    assert a.interf1_sum == b.interf1_sum


def test_moment_checks_pass_on_seeded_instance():
    corr, assoc = small_system(5)
    updates = np.random.default_rng(3).standard_normal((3, 4))
    checks, mc = moment_checks(
        corr, assoc, updates, subcarriers=2, alpha=0.5, noise_std=1e-6,
        seed=11, frames=30_000, tol=0.08, chunk=4096,
    )
    assert len(checks) == 4
    assert all(c.passed for c in checks), [c.line() for c in checks]
    assert mc.frames == 30_000
    ub = unbiasedness_check(mc, updates, band=4.0)
    assert ub.passed


def test_perfect_csi_zero_noise_components_exact():
    corr, assoc = small_system(6, csi=CsiConfig(mode="perfect"))
    updates = np.random.default_rng(4).standard_normal((3, 4))
    checks, mc = moment_checks(
        corr, assoc, updates, subcarriers=2, alpha=1.0, noise_std=0.0,
        seed=13, frames=500, tol=0.9,
    )
    by_name = {c.name: c for c in checks}
    assert by_name["interf2_sum"].expected == 0.0
    assert by_name["interf2_sum"].passed
    assert mc.interf2_sum == 0.0
    assert by_name["noise_entry_var[worst]"].expected == 0.0
    assert by_name["noise_entry_var[worst]"].passed
    assert np.all(mc.noise_entry == 0.0)


def test_unbiasedness_check_rejects_wrong_target():
    corr, assoc = small_system(7)
    updates = np.random.default_rng(5).standard_normal((3, 4))
    mc = monte_carlo_moments(
        corr, assoc, updates, subcarriers=2, alpha=1.0, noise_std=0.05,
        seed=17, frames=4000,
    )
    assert unbiasedness_check(mc, updates, band=4.0).passed
    # shift every target well past the band, whatever the spread here is
    offset = 8.0 * float(mc.se.max()) + 1.0
    assert not unbiasedness_check(mc, updates + offset, band=4.0).passed


def test_check_line_format():
    corr, assoc = small_system(8)
    updates = np.ones((3, 4))
    checks, _ = moment_checks(
        corr, assoc, updates, subcarriers=2, alpha=1.0, noise_std=0.0,
        seed=19, frames=200, tol=0.9,
    )
    for c in checks:
        line = c.line()
        assert c.name in line
        assert ("PASS" in line) != ("FAIL" in line)
