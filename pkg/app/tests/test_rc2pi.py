import math

import numpy as np
import pytest
from scipy.optimize import brentq

from app.core.errors import ThresholdAbovePeakError
from app.schemas.net_schema import LumpedVictimParams
from app.schemas.rc_schema import RampInput, TwoPiModel
from app.schemas.sim_schema import InputWave, SimConfig
from app.services import ladder_sim, rc2pi


def _random_models(n: int, seed: int):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        yield TwoPiModel(
            rd=rng.uniform(50, 500),
            rs=rng.uniform(10, 200),
            re=rng.uniform(10, 200),
            c1=rng.uniform(5e-15, 50e-15),
            c2=rng.uniform(5e-15, 50e-15),
            cl=rng.uniform(5e-15, 50e-15),
            cx=rng.uniform(10e-15, 100e-15),
            tr=rng.uniform(20e-12, 200e-12),
        )


# ---------- reduction + transfer function ----------

def test_reduce_splits_lumped_capacitance():
    """
    This test:
    - Reduces cs_up = ce_down = 40 fF with a 5 fF load.
    - Checks C1 = 20 fF, C2 = 40 fF, CL = 25 fF.
    """
    lumped = LumpedVictimParams(rs_up=20.0, cs_up=40e-15, re_down=20.0, ce_down=40e-15, cx=50e-15)
    m = rc2pi.reduce(lumped, rd=100.0, cload=5e-15, tr=100e-12)
    assert m.c1 == pytest.approx(20e-15)
    assert m.c2 == pytest.approx(40e-15)
    assert m.cl == pytest.approx(25e-15)


def test_reduce_boundary_positions():
    at_driver = LumpedVictimParams(rs_up=0.0, cs_up=0.0, re_down=40.0, ce_down=80e-15, cx=50e-15)
    assert rc2pi.reduce(at_driver, 100.0, 5e-15, 1e-10).c1 == 0.0

    at_receiver = LumpedVictimParams(rs_up=40.0, cs_up=80e-15, re_down=0.0, ce_down=0.0, cx=50e-15)
    assert rc2pi.reduce(at_receiver, 100.0, 5e-15, 1e-10).cl == pytest.approx(5e-15)


def test_transfer_coeffs_case_a(case_a):
    c = rc2pi.transfer_coeffs(case_a)
    assert not c.order_reduced
    assert c.a1 / c.b0 == pytest.approx(7.5e-12, rel=1e-12)
    assert c.b1 / c.b0 == pytest.approx(17e-12, rel=1e-12)


def test_transfer_coeffs_match_closed_forms_on_random_models():
    """
    This test:
    - Builds 1000 random 2-π circuits.
    - Checks a1/b0 = (Rd+Rs) Cx and b1/b0 = tv to 1e-12 relative.
    """
    for m in _random_models(1000, seed=11):
        c = rc2pi.transfer_coeffs(m)
        tx, tv = rc2pi.dominant_pole_metrics(m)
        assert c.a1 / c.b0 == pytest.approx(tx, rel=1e-12)
        assert c.b1 / c.b0 == pytest.approx(tv, rel=1e-12)


def test_zero_coupling_gives_zero_transfer(case_a):
    m = case_a.model_copy(update={"cx": 0.0})
    c = rc2pi.transfer_coeffs(m)
    assert c.a1 == 0.0 and c.a2 == 0.0

    pr = rc2pi.pole_residue_form(m)
    assert np.all(pr.residues == 0)
    assert rc2pi.waveform_exact(pr, RampInput(tr=m.tr), 50e-12) == 0.0


def test_missing_driver_capacitance_reduces_order(case_a):
    c = rc2pi.transfer_coeffs(case_a.model_copy(update={"c1": 0.0}))
    assert c.order_reduced
    assert c.order == 2
    assert c.b3 == 0.0


def test_zero_downstream_resistance_has_direct_term(case_a):
    """
    This test:
    - Sets Re = 0 so the receiver sits on the coupling node.
    - Checks the capacitive divider feedthrough Cx / (C2 + Cx + CL).
    """
    m = case_a.model_copy(update={"re": 0.0})
    pr = rc2pi.pole_residue_form(m)
    assert len(pr.poles) == 2
    assert pr.direct == pytest.approx(m.cx / (m.c2 + m.cx + m.cl), rel=1e-12)


# ---------- poles ----------

@pytest.mark.parametrize(
    "coeffs, expected",
    [
        ((6.0, 11.0, 6.0), [-1.0, -2.0, -3.0]),
        ((3.0, 3.0, 1.0), [-1.0, -1.0, -1.0]),
    ],
)
def test_solve_cubic_known_roots(coeffs, expected):
    roots = rc2pi.solve_cubic_stable(*coeffs)
    np.testing.assert_allclose(roots.real, expected, rtol=1e-12)
    np.testing.assert_allclose(roots.imag, 0.0, atol=1e-12)


def test_solve_cubic_matches_companion_eigenvalues():
    """
    This test:
    - Draws 1000 stable cubics from random root sets (real or conjugate pairs).
    - Compares against the companion-matrix eigenvalues (numpy.roots).
    """
    rng = np.random.default_rng(3)
    checked = 0
    while checked < 1000:
        r0 = -10 ** rng.uniform(9, 12)
        if rng.random() < 0.5:
            pair = [-10 ** rng.uniform(9, 12), -10 ** rng.uniform(9, 12)]
        else:
            re = -10 ** rng.uniform(9, 12)
            im = 10 ** rng.uniform(8, 12)
            pair = [complex(re, im), complex(re, -im)]
        truth = np.array([r0] + pair, dtype=complex)
        scale = np.max(np.abs(truth))
        gaps = [abs(a - b) for i, a in enumerate(truth) for b in truth[i + 1:]]
        if min(gaps) < 1e-3 * scale:
            continue

        _, b2, b1, b0 = np.real(np.poly(truth))
        ours = rc2pi.solve_cubic_stable(b2, b1, b0)
        oracle = np.roots([1.0, b2, b1, b0])
        for z in ours:
            assert np.min(np.abs(oracle - z)) <= 1e-7 * scale
        checked += 1


def test_poles_are_stable_and_conjugate_closed():
    for m in _random_models(200, seed=5):
        ps = rc2pi.poles(rc2pi.transfer_coeffs(m))
        assert np.all(ps.real < 0)
        for p in ps:
            if p.imag != 0:
                assert np.conj(p) in ps


# ---------- residues ----------

def test_residues_of_simple_fraction():
    """
    This test:
    - Uses H(s) = s / ((s+1)(s+2)) written as an order-2 coefficient set.
    - Expects k = -1 at s = -1 and k = 2 at s = -2.
    """
    c = rc2pi.TransferCoeffs(a2=0.0, a1=1.0, b3=0.0, b2=1.0, b1=3.0, b0=2.0, order=2)
    pr = rc2pi.residues(c, rc2pi.poles(c))
    by_pole = {round(p.real): k for p, k in zip(pr.poles, pr.residues)}
    assert by_pole[-1] == pytest.approx(-1.0)
    assert by_pole[-2] == pytest.approx(2.0)
    assert pr.direct == 0.0


def test_residue_sum_and_reconstruction(case_a):
    for m in [case_a, *_random_models(50, seed=21)]:
        c = rc2pi.transfer_coeffs(m)
        pr = rc2pi.residues(c, rc2pi.poles(c))
        assert np.sum(pr.residues).real == pytest.approx(c.a2, rel=1e-9)
        for w in (1e9, 1e10, 1e11, 1e12):
            s = 1j * w
            assert abs(pr.evaluate(s) - c.evaluate(s)) <= 1e-9 * abs(c.evaluate(s))


def test_repeated_poles_are_perturbed_and_flagged():
    c = rc2pi.TransferCoeffs(a2=0.0, a1=1.0, b2=3.0, b1=3.0, b0=1.0)
    pr = rc2pi.residues(c, rc2pi.poles(c))
    assert pr.perturbed
    assert "pole-perturbation applied" in pr.flags


# ---------- waveforms ----------

def test_exact_waveform_starts_and_ends_at_zero(case_a):
    assert rc2pi.exact_waveform_for(case_a, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert abs(rc2pi.exact_waveform_for(case_a, 5e-9)) < 1e-9


def test_exact_waveform_peak_is_bounded_by_tx_over_tr(case_a):
    metrics = rc2pi.analyze(case_a)
    assert 0.06 < metrics.vmax_exact <= 0.075 + 1e-12


def _two_pi_transient(m: TwoPiModel, t_stop: float):
    _, tv = rc2pi.dominant_pole_metrics(m)
    dt = m.tr / math.ceil(m.tr / (min(m.tr, tv) / 200.0))
    cfg = SimConfig(dt=dt, t_stop=t_stop, input=InputWave(kind="ramp", tr=m.tr, vdd=m.vdd))
    return ladder_sim.transient(ladder_sim.build_two_pi(m), cfg)["out"]


def test_exact_waveform_matches_circuit_integration_case_a(case_a):
    """
    This test:
    - Integrates the 6-element circuit itself over [0, 500 ps].
    - Samples the pole/residue waveform every 1 ps.
    - Requires agreement within 0.5% of the peak.
    """
    sim = _two_pi_transient(case_a, 500e-12)
    t = np.arange(0.0, 500e-12, 1e-12)
    exact = rc2pi.exact_waveform_for(case_a, t)
    peak = np.max(np.abs(exact))
    assert np.max(np.abs(sim.at(t) - exact)) <= 0.005 * peak


def test_exact_waveform_matches_circuit_integration_random():
    for m in _random_models(50, seed=9):
        _, tv = rc2pi.dominant_pole_metrics(m)
        sim = _two_pi_transient(m, m.tr + 6 * tv)
        t = sim.times()
        exact = rc2pi.exact_waveform_for(m, t)
        assert np.max(np.abs(sim.samples - exact)) <= 0.005 * np.max(np.abs(exact))


# ---------- closed forms ----------

def test_dominant_pole_metrics_case_a(case_a):
    tx, tv = rc2pi.dominant_pole_metrics(case_a)
    assert tx == pytest.approx(7.5e-12, rel=1e-12)
    assert tv == pytest.approx(17e-12, rel=1e-12)


def test_dominant_pole_metrics_degenerate(case_a):
    assert rc2pi.dominant_pole_metrics(case_a.model_copy(update={"cx": 0.0}))[0] == 0.0
    tiny = case_a.model_copy(update={"rd": 1e-12, "rs": 0.0})
    assert rc2pi.dominant_pole_metrics(tiny)[0] == pytest.approx(0.0, abs=1e-24)


def test_peak_noise_case_a(case_a):
    vmax, t_peak = rc2pi.peak_noise(case_a)
    assert vmax == pytest.approx(0.0748, abs=5e-5)
    assert t_peak == case_a.tr


def test_peak_noise_limits(case_a):
    assert rc2pi.peak_noise(case_a.model_copy(update={"cx": 0.0}))[0] == 0.0

    fast = case_a.model_copy(update={"tr": 1e-20})
    tx, tv = rc2pi.dominant_pole_metrics(fast)
    assert rc2pi.peak_noise(fast)[0] == pytest.approx(tx / tv, rel=1e-6)
    assert rc2pi.peak_noise_first_order(fast) == pytest.approx(tx / tv, rel=1e-6)


def test_first_order_peak_case_a(case_a):
    assert rc2pi.peak_noise_first_order(case_a) == pytest.approx(7.5 / 67, rel=1e-9)


@pytest.mark.parametrize("ratio", [0.05, 0.1, 0.2, 0.35, 0.5])
def test_first_order_agrees_for_slow_victims(case_a, ratio):
    _, tv = rc2pi.dominant_pole_metrics(case_a)
    m = case_a.model_copy(update={"tr": ratio * tv})
    vmax, _ = rc2pi.peak_noise(m)
    assert abs(vmax - rc2pi.peak_noise_first_order(m)) / vmax <= 0.02


@pytest.mark.parametrize("ratio", [5.0, 10.0, 20.0, 50.0])
def test_first_order_overestimates_for_fast_victims(case_a, ratio):
    _, tv = rc2pi.dominant_pole_metrics(case_a)
    m = case_a.model_copy(update={"tr": ratio * tv})
    vmax, _ = rc2pi.peak_noise(m)
    fo = rc2pi.peak_noise_first_order(m)
    assert fo > vmax
    assert (fo - vmax) / vmax >= 0.30


def test_first_order_within_one_percent_at_small_ratio(case_a):
    _, tv = rc2pi.dominant_pole_metrics(case_a)
    m = case_a.model_copy(update={"tr": 0.2 * tv})
    vmax, _ = rc2pi.peak_noise(m)
    assert abs(vmax - rc2pi.peak_noise_first_order(m)) / vmax <= 0.01


# ---------- noise width ----------

def test_noise_width_case_a(case_a):
    expected = 100e-12 + 17e-12 * math.log(1 + math.exp(-100 / 17))
    assert rc2pi.noise_width(case_a) == pytest.approx(expected, rel=1e-12)
    assert rc2pi.noise_width(case_a) == pytest.approx(100.047e-12, abs=1e-15)


def test_noise_width_tends_to_rise_time(case_a):
    slow_ramp = case_a.model_copy(update={"tr": 1e-6})
    assert rc2pi.noise_width(slow_ramp) / slow_ramp.tr == pytest.approx(1.0, rel=1e-9)


def test_threshold_above_peak_is_rejected(case_a):
    vmax, _ = rc2pi.peak_noise(case_a)
    with pytest.raises(ThresholdAbovePeakError, match="threshold above peak"):
        rc2pi.noise_width(case_a, vmax * 1.01)


def test_general_threshold_reduces_to_half_peak(case_a):
    vmax, _ = rc2pi.peak_noise(case_a)
    assert rc2pi.noise_width(case_a, vmax / 2) == pytest.approx(rc2pi.noise_width(case_a), rel=1e-9)


def test_width_identity_and_numeric_width_on_random_models():
    """
    This test:
    - Finds the half-peak crossings of the dominant-pole waveform by bisection.
    - Compares the closed-form width to 1e-6 and the log1p identity to 1e-12.
    """
    for m in _random_models(100, seed=17):
        vmax, _ = rc2pi.peak_noise(m)
        _, tv = rc2pi.dominant_pole_metrics(m)
        half = vmax / 2
        f = lambda t: rc2pi.dominant_waveform(m, t) - half
        t1 = brentq(f, 0.0, m.tr, xtol=1e-24, rtol=1e-15)
        t2 = brentq(f, m.tr, m.tr + 60 * tv, xtol=1e-24, rtol=1e-15)

        width = rc2pi.noise_width(m)
        assert width == pytest.approx(t2 - t1, rel=1e-6)
        assert width == pytest.approx(rc2pi.half_peak_width_identity(m), rel=1e-12)


def test_uncoupled_net_has_zero_width(case_a):
    m = case_a.model_copy(update={"cx": 0.0})
    assert rc2pi.peak_noise(m)[0] == 0.0
    assert rc2pi.noise_width(m) == 0.0
    assert rc2pi.half_peak_width_identity(m) == 0.0
    with pytest.raises(ThresholdAbovePeakError):
        rc2pi.noise_width(m, 0.01)
    with pytest.raises(ThresholdAbovePeakError):
        rc2pi.crossing_times(m, 0.01)


# ---------- dominant waveform shape ----------

def test_dominant_waveform_rises_then_decays():
    """
    This test:
    - Samples the dominant-pole waveform on 2001 points over [0, tr + 8 tv].
    - Checks it never decreases before tr and never increases after it.
    - Checks the sampled maximum sits within one sample of tr.
    """
    for m in _random_models(50, seed=23):
        _, tv = rc2pi.dominant_pole_metrics(m)
        t = np.linspace(0.0, m.tr + 8 * tv, 2001)
        dt = t[1] - t[0]
        v = rc2pi.dominant_waveform(m, t)
        slack = 1e-12 * np.max(v)
        assert np.all(np.diff(v[t <= m.tr]) >= -slack)
        assert np.all(np.diff(v[t >= m.tr]) <= slack)
        assert abs(t[int(np.argmax(v))] - m.tr) <= dt


@pytest.mark.parametrize("alpha, beta", [(2.0, 1.0), (1.0, 3.0), (0.5, 4.0)])
def test_metrics_scale_with_rc_product(case_a, alpha, beta):
    """
    This test:
    - Multiplica resistencias por alpha y capacitancias por beta.
    - Polos escalan por 1/(alpha beta); tx, tv y el ancho por alpha beta.
    - Con tr escalado igual, vmax no cambia.
    """
    k = alpha * beta
    scaled = case_a.model_copy(update={
        "rd": alpha * case_a.rd, "rs": alpha * case_a.rs, "re": alpha * case_a.re,
        "c1": beta * case_a.c1, "c2": beta * case_a.c2, "cl": beta * case_a.cl, "cx": beta * case_a.cx,
        "tr": k * case_a.tr,
    })

    p0 = np.sort_complex(rc2pi.poles(rc2pi.transfer_coeffs(case_a)))
    p1 = np.sort_complex(rc2pi.poles(rc2pi.transfer_coeffs(scaled)))
    np.testing.assert_allclose(p1, p0 / k, rtol=1e-9)

    tx0, tv0 = rc2pi.dominant_pole_metrics(case_a)
    tx1, tv1 = rc2pi.dominant_pole_metrics(scaled)
    assert (tx1, tv1) == pytest.approx((k * tx0, k * tv0), rel=1e-12)
    assert rc2pi.peak_noise(scaled)[0] == pytest.approx(rc2pi.peak_noise(case_a)[0], rel=1e-12)
    assert rc2pi.noise_width(scaled) == pytest.approx(k * rc2pi.noise_width(case_a), rel=1e-12)


def test_sampled_dominant_waveform_matches_closed_forms(case_a):

    """
    This test:
    - Samples the dominant-pole waveform at 0.05 ps.
    - Measures it with waveform_metrics and checks peak and width to 1e-3.
    """
    _, tv = rc2pi.dominant_pole_metrics(case_a)
    n = int((case_a.tr + 10 * tv) / 0.05e-12)
    w = ladder_sim.Waveform.sample(lambda t: rc2pi.dominant_waveform(case_a, t), 0.0, 0.05e-12, n)
    metrics = ladder_sim.waveform_metrics(w)

    vmax, _ = rc2pi.peak_noise(case_a)
    assert metrics.peak == pytest.approx(vmax, rel=1e-3)
    assert metrics.width == pytest.approx(rc2pi.noise_width(case_a), rel=1e-3)


def test_analyze_case_a(case_a):
    metrics = rc2pi.analyze(case_a)
    assert metrics.tx == pytest.approx(7.5e-12)
    assert metrics.tv == pytest.approx(17e-12)
    assert metrics.vmax == pytest.approx(0.0748, abs=5e-5)
    assert metrics.vmax_first_order == pytest.approx(0.1119, abs=5e-5)
    assert metrics.width == pytest.approx(100.047e-12, abs=1e-15)
