import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate

from modchsh.modular import (
    LOCAL_BOUND,
    TSIRELSON,
    BellBlock,
    ModularFrame,
    ModularPoint,
    ModularWavepacket,
    NoCrossingError,
    QuadratureError,
    WrappedDensity,
    axis_rule,
    bell_block,
    bell_estimate,
    bell_expectation,
    bell_expectation_bruteforce,
    bell_matrix,
    correlation_from_joint_wrapped_density,
    default_ax_grid,
    delta_limit_bell,
    expectation_from_wrapped_density,
    max_over_ax,
    pair_marginal_expectation,
    position_phase_expectation,
    psi_amplitudes,
    setting_correlation,
    sigma_blocks,
    sweep_ax,
    violation_threshold,
    wrap_position,
    wrapped_gaussian_density,
    wrapped_normal_pdf,
)

FRAME = ModularFrame()
ORIGIN = ModularPoint(0.0, 0.0)
R2 = math.sqrt(2)


def near_delta(ax=0.0, ap=0.0):
    return ModularWavepacket(ax, ap, 1e-4, 1e-4)


def normal_cos_oracle(std, center=0.0):
    """``int_R cos(2 pi x) N(x; center, std) dx`` by adaptive quadrature."""
    f = lambda x: math.cos(2 * math.pi * x) * math.exp(-0.5 * ((x - center) / std) ** 2) / (std * math.sqrt(2 * math.pi))
    val, _ = integrate.quad(f, center - 12 * std, center + 12 * std, limit=400, epsabs=1e-14)
    return val


# -- frame and points -------------------------------------------------------------


def test_frame_periods():
    f = ModularFrame(ell=2.0)
    assert f.h == pytest.approx(2 * math.pi)
    assert f.p_period == pytest.approx(math.pi)


def test_frame_rejects_nonpositive_ell():
    with pytest.raises(ValueError):
        ModularFrame(ell=0.0)


@pytest.mark.parametrize("x, expected", [(0.0, (0.0, 0)), (2.5, (0.5, 2)), (-0.25, (0.75, -1))])
def test_wrap_position_examples(x, expected):
    xbar, n = wrap_position(x, FRAME)
    assert xbar == pytest.approx(expected[0])
    assert n == expected[1]


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(0.1, 10))
def test_wrap_position_reconstructs(x, ell):
    f = ModularFrame(ell=ell)
    xbar, n = wrap_position(x, f)
    assert 0 <= xbar < ell
    assert xbar + n * ell == pytest.approx(x, abs=1e-9 * max(1, abs(x)))


def test_point_validation():
    with pytest.raises(ValueError):
        ModularPoint(0.6, 0.0).validate(FRAME, half=True)
    with pytest.raises(ValueError):
        ModularPoint(0.1, FRAME.p_period).validate(FRAME)
    ModularPoint(0.6, 0.0).validate(FRAME)


def test_wavepacket_validation():
    with pytest.raises(ValueError):
        ModularWavepacket(0.5, 0.0, 0.1, 0.1)
    with pytest.raises(ValueError):
        ModularWavepacket(0.0, 1.0, 0.1, 0.1)
    with pytest.raises(ValueError):
        ModularWavepacket(0.0, 0.0, 0.0, 0.1)


# -- sigma blocks and Bell block -----------------------------------------------------


def test_sigma_blocks_spectra():
    sz, sy = sigma_blocks()
    assert_allclose(np.linalg.eigvalsh(sz), [-1, 1])
    assert_allclose(np.linalg.eigvalsh(sy), [-1, 1])


def test_sigma_blocks_commutator():
    sz, sy = sigma_blocks()
    sx = np.array([[0, 1], [1, 0]])
    # Pauli algebra: [z, y] = -2i x
    assert_allclose(sz @ sy - sy @ sz, -2j * sx, atol=1e-15)


def test_bell_block_origin_eigensystem():
    blk = bell_block(ORIGIN, ORIGIN, FRAME)
    assert isinstance(blk, BellBlock)
    assert_allclose(blk.eigvals(), [-2 * R2, 0, 0, 2 * R2], atol=1e-12)
    for sign in (1, -1):
        psi = psi_amplitudes(sign)
        assert_allclose(blk.matrix @ psi, sign * 2 * R2 * psi, atol=1e-12)


def test_bell_block_vanishes_at_quarter_period():
    blk = bell_block(ModularPoint(0.25, 0.0), ORIGIN, FRAME)
    assert blk.c_a == pytest.approx(0, abs=1e-15)
    assert blk.d_a == pytest.approx(0, abs=1e-15)
    assert_allclose(blk.matrix, 0, atol=1e-15)


def test_bell_block_quarter_momentum_shift():
    # p l / (2 hbar) = pi / 2  means p = pi for ell = hbar = 1, half the momentum period
    p = ModularPoint(0.0, math.pi)
    blk = bell_block(p, p, FRAME)
    assert blk.d_a == pytest.approx(0, abs=1e-15)
    sz, _ = sigma_blocks()
    assert_allclose(blk.matrix, np.kron(sz, sz), atol=1e-15)
    assert_allclose(np.linalg.eigvalsh(blk.matrix), [-1, -1, 1, 1], atol=1e-12)


def test_bell_block_rejects_full_period_xbar():
    with pytest.raises(ValueError):
        bell_block(ModularPoint(0.7, 0.0), ORIGIN, FRAME)


def test_bell_block_rescales_with_ell():
    f = ModularFrame(ell=3.0)
    a = ModularPoint(0.3, 0.4)
    b = ModularPoint(1.1, 1.7)
    blk = bell_block(a, b, f)
    ca = math.cos(2 * math.pi * 0.3 / 3)
    da = math.cos(2 * math.pi * 0.3 / 3 - 0.4 * 3 / 2)
    assert blk.c_a == pytest.approx(ca)
    assert blk.d_a == pytest.approx(da)
    assert np.allclose(blk.matrix, blk.matrix.conj().T, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(*[st.floats(-1, 1) for _ in range(4)])
def test_bell_matrix_spectrum_bounded(ca, da, cb, db):
    m = bell_matrix(ca, da, cb, db)
    assert np.allclose(m, m.conj().T, atol=1e-12)
    ev = np.linalg.eigvalsh(m)
    assert ev.max() <= TSIRELSON + 1e-12 and ev.min() >= -TSIRELSON - 1e-12


def test_psi_amplitudes_norm_and_contraction():
    for sign in (1, -1):
        assert np.linalg.norm(psi_amplitudes(sign)) == pytest.approx(1, abs=1e-14)
    psi = psi_amplitudes(1)
    sz, _ = sigma_blocks()
    # hand contraction: (|a0|^2 - |a1|^2 - |a2|^2 + |a3|^2)
    a = psi
    by_hand = abs(a[0]) ** 2 - abs(a[1]) ** 2 - abs(a[2]) ** 2 + abs(a[3]) ** 2
    assert np.vdot(psi, np.kron(sz, sz) @ psi).real == pytest.approx(by_hand, abs=1e-15)
    assert by_hand == pytest.approx(1 / R2, abs=1e-14)


def test_psi_amplitudes_closed_form():
    for s in (1, -1):
        expected = np.array([1, s * 1j * (R2 - s), s * 1j * (R2 - s), 1]) / (2 * math.sqrt(2 - s * R2))
        assert_allclose(psi_amplitudes(s), expected, atol=1e-15)
    with pytest.raises(ValueError):
        psi_amplitudes(0)


# -- wrapped Gaussian densities ------------------------------------------------------


def test_density_peaks_at_centre():
    p = ModularWavepacket(0.1, 0.3, 0.05, 0.1)
    centre = ModularPoint(0.1, 0.3 * FRAME.p_period)
    peak = wrapped_gaussian_density(p, centre, FRAME)
    for dx, du in [(0.01, 0), (-0.01, 0), (0, 0.05), (0.02, -0.02)]:
        other = ModularPoint(0.1 + dx, (0.3 + du) * FRAME.p_period)
        assert wrapped_gaussian_density(p, other, FRAME) < peak


def test_density_flat_limit():
    p = ModularWavepacket(0.1, 0.3, 50.0, 50.0)
    for x, u in [(0.0, 0.0), (0.2, 0.5), (0.45, 0.9)]:
        val = wrapped_gaussian_density(p, ModularPoint(x, u * FRAME.p_period), FRAME)
        assert val == pytest.approx(2 / FRAME.h, rel=1e-10)


@pytest.mark.parametrize("packet", [
    ModularWavepacket(0.1, 0.3, 0.05, 0.1),
    ModularWavepacket(0.01, 0.95, 0.2, 0.4),
    ModularWavepacket(0.49, 0.0, 0.01, 0.02),
])
def test_density_integrates_to_one(packet):
    f = lambda u, x: packet.density(np.array(x), np.array(u))
    # dense midpoint rule in fractional coordinates; cross-checks the normalization
    nx, nu = 4000, 4000
    x = (np.arange(nx) + 0.5) * 0.5 / nx
    u = (np.arange(nu) + 0.5) / nu
    mass = packet.xbar_density(x).sum() * 0.5 / nx * packet.pbar_density(u).sum() / nu
    assert mass == pytest.approx(1, abs=1e-10)
    assert f(0.3, 0.1) > 0


@pytest.mark.parametrize("std", [0.01, 0.1, 0.3, 0.6, 2.0])
def test_wrapped_normal_pdf_against_image_sum(std):
    x = np.linspace(0, 1, 37, endpoint=False)
    n = np.arange(-200, 201)
    brute = np.exp(-0.5 * ((x[:, None] - 0.2 - n) / std) ** 2).sum(axis=1) / (std * math.sqrt(2 * math.pi))
    assert_allclose(wrapped_normal_pdf(x, 0.2, std, 1.0), brute, rtol=1e-12, atol=1e-300)


def test_axis_rule_weights_are_probabilities():
    x, w = axis_rule(0.01, 0.05, 0.5, 32)
    assert w.sum() == pytest.approx(1, abs=1e-15)
    assert np.all(w >= 0)
    assert np.all((0 <= x) & (x < 0.5))


def test_axis_rule_near_delta_is_point_mass():
    x, w = axis_rule(0.2, 1e-4, 1.0, 64)
    assert x.tolist() == [0.2] and w.tolist() == [1.0]


# -- bell_expectation ------------------------------------------------------------------


def test_bell_near_delta_origin():
    p = near_delta()
    assert bell_expectation(p, p, FRAME, 64) == pytest.approx(TSIRELSON, abs=1e-3)


def test_bell_near_delta_eighth_period():
    p = near_delta(0.125)
    assert bell_expectation(p, p, FRAME, 64) == pytest.approx(R2, abs=1e-3)


def test_bell_broad_packet_never_violates():
    p = ModularWavepacket(0.0, 0.0, 0.08, 1e-4)
    _, best = max_over_ax(p, FRAME, 64)
    assert best < LOCAL_BOUND


def test_bell_expectation_tol_raises_on_mismatch():
    p = ModularWavepacket(0.1, 0.2, 0.03, 0.05)
    with pytest.raises(QuadratureError):
        bell_expectation(p, p, FRAME, 16, tol=1e-300)
    assert bell_expectation(p, p, FRAME, 64, tol=1e-6) == pytest.approx(bell_expectation(p, p, FRAME, 128))


def test_bell_factorized_form():
    # <B> = (<c_a> + <d_a>)(<c_b> + <d_b>) / sqrt 2 for psi_plus
    pa = ModularWavepacket(0.05, 0.1, 0.04, 0.1)
    pb = ModularWavepacket(0.3, 0.7, 0.02, 0.2)
    x = np.linspace(0, 0.5, 3001)
    u = np.linspace(0, 1, 3001)

    def moments(p):
        dens = p.density(x, u)
        c = np.cos(2 * np.pi * x)[:, None] * np.ones_like(u)[None, :]
        d = np.cos(2 * np.pi * x[:, None] - np.pi * u[None, :])
        return (integrate.simpson(integrate.simpson(dens * c, x=u), x=x),
                integrate.simpson(integrate.simpson(dens * d, x=u), x=x))

    (ca, da), (cb, db) = moments(pa), moments(pb)
    expected = (ca + da) * (cb + db) / R2
    assert bell_expectation(pa, pb, FRAME, 128) == pytest.approx(expected, abs=1e-6)


def test_minus_state_flips_sign_at_origin():
    p = near_delta()
    assert bell_expectation(p, p, FRAME, sign=-1) == pytest.approx(-TSIRELSON, abs=1e-3)


def test_setting_correlations_sum_to_bell():
    pa = ModularWavepacket(0.05, 0.1, 0.04, 0.1)
    pb = ModularWavepacket(0.2, 0.3, 0.03, 0.1)
    h = math.pi / 2
    s = (setting_correlation(pa, pb, 0, 0) + setting_correlation(pa, pb, 0, h)
         + setting_correlation(pa, pb, h, 0) - setting_correlation(pa, pb, h, h))
    assert s == pytest.approx(bell_expectation(pa, pb, FRAME), abs=1e-14)


def test_pair_marginals_vanish():
    p = ModularWavepacket(0.05, 0.1, 0.04, 0.1)
    for phi in (0.0, math.pi / 2):
        for party in "ab":
            assert pair_marginal_expectation(p, p, phi, party) == pytest.approx(0, abs=1e-15)


def test_unsupported_setting_rejected():
    p = near_delta()
    with pytest.raises(ValueError):
        setting_correlation(p, p, math.pi / 3, 0)


@pytest.mark.parametrize("ax", [0.0, 0.1, 0.2, 0.3, 0.45])
def test_delta_limit_matches_formula(ax):
    p = near_delta(ax)
    assert bell_expectation(p, p) == pytest.approx(delta_limit_bell(ax), abs=1e-9)


# -- brute-force oracle ------------------------------------------------------------------


def test_bruteforce_agrees_with_fast_path():
    rng = np.random.default_rng(3)
    for _ in range(3):
        pa = ModularWavepacket(rng.uniform(0, 0.5), rng.uniform(0, 1), rng.uniform(0.005, 0.1), rng.uniform(0.005, 0.3))
        pb = ModularWavepacket(rng.uniform(0, 0.5), rng.uniform(0, 1), rng.uniform(0.005, 0.1), rng.uniform(0.005, 0.3))
        fast = bell_expectation(pa, pb, FRAME, 16)
        slow = bell_expectation_bruteforce(pa, pb, FRAME, 16)
        assert slow == pytest.approx(fast, abs=1e-8)


def test_bruteforce_uniform_packets():
    p = ModularWavepacket(0.1, 0.5, 40.0, 40.0)
    assert bell_expectation_bruteforce(p, p, FRAME, 16) == pytest.approx(bell_expectation(p, p, FRAME, 16), abs=1e-12)
    # flat packets: <c> = 0 and <d> = 2 int_0^1/2 dx int_0^1 du cos(2 pi x - pi u) = 4 / pi^2
    assert bell_expectation(p, p, FRAME, 16) == pytest.approx((4 / math.pi**2) ** 2 / R2, abs=1e-10)


def test_bruteforce_near_delta_origin():
    p = near_delta()
    assert bell_expectation_bruteforce(p, p, FRAME, 8) == pytest.approx(TSIRELSON, abs=1e-2)


def test_bruteforce_node_budget():
    p = near_delta()
    with pytest.raises(ValueError):
        bell_expectation_bruteforce(p, p, FRAME, 64)


def test_delta_limit_bell_examples():
    assert delta_limit_bell(0.0) == pytest.approx(TSIRELSON)
    assert delta_limit_bell(0.25) == pytest.approx(0, abs=1e-15)
    assert delta_limit_bell(0.125) == pytest.approx(R2)
    assert delta_limit_bell(0.25, ModularFrame(ell=2.0)) == pytest.approx(R2)


# -- sweeps -------------------------------------------------------------------------------


def test_sweep_uppermost_curve_tracks_delta_limit():
    res = sweep_ax(ModularWavepacket(0.0, 0.0, 0.001, 1e-4), default_ax_grid(32))
    expected = [delta_limit_bell(a) for a in res.a_xbar]
    assert np.max(np.abs(res.bell - expected)) < 0.01
    assert res.converged.all()


def test_sweep_rows_in_grid_order_and_bounded():
    grid = np.array([0.3, 0.1, 0.2])
    res = sweep_ax(ModularWavepacket(0.0, 0.1, 0.02, 0.1), grid)
    assert_allclose(res.a_xbar, grid)
    assert [r[0] for r in res.rows] == grid.tolist()
    assert np.all(res.bell <= TSIRELSON + 1e-6)
    assert res.convergence_estimate < 1e-6


def test_sweep_rejects_bad_grid():
    t = near_delta()
    with pytest.raises(ValueError):
        sweep_ax(t, [])
    with pytest.raises(ValueError):
        sweep_ax(t, [0.6])


def test_sweep_maxima_decrease_with_width():
    widths = [0.001, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08]
    grid = default_ax_grid(32)
    maxima = [sweep_ax(ModularWavepacket(0.0, 0.0, s, 1e-4), grid).max() for s in widths]
    assert np.all(np.diff(maxima) < 0)


def test_shifted_momentum_curve_is_asymmetric():
    t = ModularWavepacket(0.0, 0.1, 0.02, 0.1)
    a_star, _ = max_over_ax(t)
    offsets = np.array([0.02, 0.05, 0.08])
    left = [bell_expectation(t.with_center(a_star - o), t.with_center(a_star - o)) for o in offsets]
    right = [bell_expectation(t.with_center(a_star + o), t.with_center(a_star + o)) for o in offsets]
    assert np.max(np.abs(np.subtract(left, right))) > 1e-3


def test_delta_limit_gap_shrinks_with_width():
    grid = default_ax_grid(32)
    target = np.array([delta_limit_bell(a) for a in grid])
    gaps = [np.max(np.abs(sweep_ax(ModularWavepacket(0.0, 0.0, s, 1e-4), grid).bell - target)) for s in (1e-2, 1e-3, 1e-4)]
    assert gaps[0] > gaps[1] > gaps[2]


@pytest.mark.parametrize("packet", [
    ModularWavepacket(0.0, 0.0, 0.03, 1e-4),
    ModularWavepacket(0.1, 0.1, 0.04, 0.1),
    ModularWavepacket(0.4, 0.9, 0.08, 0.3),
])
def test_resolution_doubling_converges(packet):
    _, err = bell_estimate(packet, packet, FRAME, 64)
    assert err < 1e-6


# -- thresholds ----------------------------------------------------------------------------


def test_threshold_rejects_bracket_without_crossing():
    t = ModularWavepacket(0.0, 0.0, 0.01, 1e-4)
    with pytest.raises(NoCrossingError):
        violation_threshold(t, bracket=(0.005, 0.02))


def test_threshold_rejects_inverted_bracket():
    with pytest.raises(ValueError):
        violation_threshold(near_delta(), bracket=(0.08, 0.01))


def test_threshold_history_records_inner_max():
    res = violation_threshold(ModularWavepacket(0.0, 0.0, 0.01, 1e-4), tol=5e-3)
    assert res.bracket == (0.01, 0.08)
    assert len(res.inner_max_locations) == res.iterations + 2
    assert 0.04 < res.sigma_star < 0.06


# -- wrapped densities on [0, ell) ------------------------------------------------------------


def test_expectation_spike_and_uniform():
    assert expectation_from_wrapped_density(WrappedDensity.spike(0.0, 64)) == pytest.approx(1)
    assert expectation_from_wrapped_density(WrappedDensity.uniform(64)) == pytest.approx(0, abs=1e-15)


@pytest.mark.parametrize("std", [0.02, 0.05, 0.1, 0.2, 0.4])
def test_expectation_matches_wrapped_normal_oracle(std):
    dens = WrappedDensity.wrapped_normal(0.0, std, 256)
    oracle = normal_cos_oracle(std)
    assert expectation_from_wrapped_density(dens) == pytest.approx(oracle, abs=1e-10)
    assert oracle == pytest.approx(math.exp(-2 * math.pi**2 * std**2), abs=1e-12)


def test_expectation_rescales_with_ell():
    f = ModularFrame(ell=2.0)
    dens = WrappedDensity.wrapped_normal(0.0, 0.1, 256, ell=2.0)
    assert expectation_from_wrapped_density(dens, f) == pytest.approx(normal_cos_oracle(0.05), abs=1e-10)
    with pytest.raises(ValueError):
        expectation_from_wrapped_density(dens, FRAME)


def test_expectation_rejects_unnormalized():
    with pytest.raises(ValueError):
        expectation_from_wrapped_density(WrappedDensity(np.full(16, 2.0)))


def test_joint_correlation_examples():
    u = WrappedDensity.uniform(64)
    assert correlation_from_joint_wrapped_density(WrappedDensity.product(u, u)) == pytest.approx(0, abs=1e-15)
    spike = WrappedDensity.spike(0.0, 64)
    assert correlation_from_joint_wrapped_density(WrappedDensity.diagonal(spike)) == pytest.approx(1)


def test_joint_correlation_separates_for_products():
    pa = WrappedDensity.wrapped_normal(0.1, 0.07, 128)
    pb = WrappedDensity.wrapped_normal(0.8, 0.15, 128)
    joint = WrappedDensity.product(pa, pb)
    expected = expectation_from_wrapped_density(pa) * expectation_from_wrapped_density(pb)
    assert correlation_from_joint_wrapped_density(joint) == pytest.approx(expected, abs=1e-10)


def test_joint_correlation_rejects_unnormalized():
    with pytest.raises(ValueError):
        correlation_from_joint_wrapped_density(WrappedDensity(np.ones((8, 8)) * 3))


def test_position_phase_examples():
    assert position_phase_expectation(WrappedDensity.spike(0.0, 64)) == pytest.approx(1 + 0j)
    assert position_phase_expectation(WrappedDensity.spike(0.5, 64)) == pytest.approx(-1 + 0j)


def test_position_phase_quarter_centre_is_imaginary():
    dens = WrappedDensity.wrapped_normal(0.25, 0.08, 256)
    z = position_phase_expectation(dens)
    assert z.real == pytest.approx(0, abs=1e-12)
    # sin moment of a normal centred at 1/4 equals its cos moment at 0
    assert z.imag == pytest.approx(normal_cos_oracle(0.08), abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 0.999), st.floats(0.01, 0.5))
def test_position_phase_real_part_is_expectation(center, std):
    dens = WrappedDensity.wrapped_normal(center, std, 128)
    assert position_phase_expectation(dens).real == pytest.approx(expectation_from_wrapped_density(dens), abs=1e-10)


def test_wrapped_density_validation():
    with pytest.raises(ValueError):
        WrappedDensity(np.array([-1.0, 3.0]))
    with pytest.raises(ValueError):
        WrappedDensity(np.ones((2, 3)))
    with pytest.raises(ValueError):
        WrappedDensity.product(WrappedDensity.uniform(8), WrappedDensity.uniform(16))
