import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resq.errors import MalformedStepsError, ValidationError
from resq.model import AttenuationChain, NotchModelParams, loaded_q, photon_number, s21_notch
from resq.synth import (
    NoiseSpec,
    SweepDesign,
    gen_power_sweep,
    gen_rocking,
    gen_rt,
    gen_trace,
    solve_photon_number,
)
from resq.tls import TLSParams, tls_delta
from resq.xrd import PseudoVoigtParams, half_max_width

NBTA = TLSParams(11.3e-7, 0.69e-7, 3.9, 0.40)
DESIGN = SweepDesign(6e9, 1e5, 0.1, 0.9, 0.4, 30e-9)
CHAIN = AttenuationChain((60.0, 40.0))
P = NotchModelParams.from_internal(6e9, 5e5, 1e5, 0.2, 0.7, 1.0, 25e-9)


# --- gen_trace -----------------------------------------------------------


def test_noiseless_trace_is_exact_model():
    tr = gen_trace(P, 257)
    assert np.array_equal(tr.s21, s21_notch(P, tr.frequencies))
    assert tr.frequencies[128] == pytest.approx(P.f_r, rel=1e-15)
    assert tr.span == pytest.approx(20 * P.f_r / P.q_l)


def test_trace_determinism_and_seed_sensitivity():
    n = NoiseSpec("complex-gaussian", 0.01, 42)
    a, b = gen_trace(P, 501, noise=n), gen_trace(P, 501, noise=n)
    assert np.array_equal(a.s21, b.s21)
    c = gen_trace(P, 501, noise=NoiseSpec("complex-gaussian", 0.01, 43))
    assert not np.array_equal(a.s21, c.s21)


def test_complex_noise_level():
    p = NotchModelParams.from_internal(6e9, 5e5, 1e5, 0.0, 1.0)
    tr = gen_trace(p, 10_000, noise=NoiseSpec("complex-gaussian", 0.01, 1))
    resid = tr.s21 - s21_notch(p, tr.frequencies)
    assert np.sqrt(np.mean(np.abs(resid) ** 2)) == pytest.approx(0.01, rel=0.05)


def test_trace_preconditions():
    with pytest.raises(ValidationError):
        gen_trace(P, 15)
    with pytest.raises(ValidationError):
        gen_trace(P, 100, span=0.0)
    with pytest.raises(ValidationError):
        gen_trace(P, 100, noise=NoiseSpec("poisson-like", 0.1))
    with pytest.raises(ValidationError):
        NoiseSpec("gaussian", 0.1)
    with pytest.raises(ValidationError):
        NoiseSpec("multiplicative", -0.1)


def test_spawned_children_match_documented_rule():
    kids = NoiseSpec("complex-gaussian", 0.01, 7).spawn(3)
    seqs = np.random.SeedSequence(7).spawn(3)
    for kid, seq in zip(kids, seqs):
        ref = np.random.Generator(np.random.PCG64(seq)).standard_normal(4)
        assert np.array_equal(kid.rng().standard_normal(4), ref)


# --- power sweep -----------------------------------------------------------


def test_power_independent_limit():
    tls = TLSParams(0.0, 2e-6, 1.0, 0.5)
    sw = gen_power_sweep(tls, DESIGN, [-80, -40, 0], CHAIN, n_points=64)
    for o in sw.oracle:
        assert o.q_i == pytest.approx(5e5, rel=1e-12)


def test_sweep_oracle_consistency():
    powers = np.linspace(-60, 0, 30)
    sw = gen_power_sweep(NBTA, DESIGN, powers, CHAIN, n_points=64)
    n = np.array([o.n for o in sw.oracle])
    q = np.array([o.q_i for o in sw.oracle])
    assert np.log10(n.max() / n.min()) >= 5
    assert np.all(np.diff(q) >= 0)
    for o in sw.oracle:
        assert tls_delta(o.n, NBTA) * o.q_i == pytest.approx(1.0, rel=1e-9)
        assert o.residual < 1e-9
        ql = loaded_q(o.q_i, DESIGN.q_c_mag, DESIGN.phi)
        assert o.n == pytest.approx(photon_number(o.p_in, DESIGN.f_r, ql, DESIGN.q_c_mag),
                                    rel=1e-8)
    assert [t.vna_power for t in sw.traces] == list(powers)
    assert all(t.total_attenuation == 100.0 for t in sw.traces)


def test_sweep_children_are_independent_and_reproducible():
    noise = NoiseSpec("complex-gaussian", 0.01, 5)
    a = gen_power_sweep(NBTA, DESIGN, [-50, -50], CHAIN, noise, n_points=64)
    b = gen_power_sweep(NBTA, DESIGN, [-50, -50], CHAIN, noise, n_points=64)
    assert not np.array_equal(a.traces[0].s21, a.traces[1].s21)
    for x, y in zip(a.traces, b.traces):
        assert np.array_equal(x.s21, y.s21)


def test_fixed_point_solver_reports_iterations():
    n, q_i, q_l, it, step = solve_photon_number(1e-17, NBTA, DESIGN)
    assert it >= 1 and step < 1e-9
    assert q_l == pytest.approx(loaded_q(q_i, DESIGN.q_c_mag, DESIGN.phi))


# --- rocking ---------------------------------------------------------------


def test_rocking_noiseless_exact():
    p = PseudoVoigtParams(20.0, 1.4, 0.3, 5.0, 0.1)
    s = gen_rocking(p, (13.0, 27.0), 281)
    x = np.linspace(13.0, 27.0, 281)
    u = (x - 20.0) / 0.7
    ref = 5.0 * (0.3 / (1 + u * u) + 0.7 * np.exp(-np.log(2) * u * u)) + 0.1
    assert np.allclose(s.intensities, ref, rtol=1e-14, atol=0)
    assert s.mode == "rocking"


@pytest.mark.parametrize("w", [1.4, 5.2, 8.2])
def test_rocking_half_height_span(w):
    s = gen_rocking(PseudoVoigtParams(20.0, w, 0.5), (20 - 5 * w, 20 + 5 * w), 401)
    step = s.angles[1] - s.angles[0]
    assert abs(half_max_width(s.angles, s.intensities, 0.0) - w) <= step


def test_rocking_poisson_noise_clipped_and_seeded():
    p = PseudoVoigtParams(20.0, 5.2, 0.5, 100.0, 0.0)
    n = NoiseSpec("poisson-like", 3.0, 8)
    a = gen_rocking(p, (0.0, 40.0), 401, n)
    assert np.array_equal(a.intensities, gen_rocking(p, (0.0, 40.0), 401, n).intensities)
    assert a.intensities.min() >= 0
    with pytest.raises(ValidationError):
        gen_rocking(p, (0.0, 40.0), 9)


# --- R(T) --------------------------------------------------------------------


def test_rt_two_plateaus():
    t = np.linspace(7, 9, 201)
    tr = gen_rt([(7.9, 0.5)], 5.0, 1e-3, t)
    assert set(np.unique(tr.resistances)) == {0.5, 5.0}
    assert np.all(tr.resistances[t < 7.9] == 0.5)


def test_rt_empty_steps_constant():
    tr = gen_rt([], 5.0, 1e-3, np.linspace(7, 9, 50))
    assert np.all(tr.resistances == 5.0)


def test_rt_floor():
    tr = gen_rt([(8.0, 0.0)], 5.0, 1e-3, np.linspace(7, 9, 50))
    assert tr.resistances.min() == 1e-3


def test_rt_malformed():
    with pytest.raises(MalformedStepsError):
        gen_rt([(7.7, 0.5), (7.9, 1e-3)], 5.0, 1e-3, np.linspace(7, 9, 50))
    with pytest.raises(MalformedStepsError):
        gen_rt([(7.9, 0.5), (7.7, 0.6)], 5.0, 1e-3, np.linspace(7, 9, 50))
    with pytest.raises(MalformedStepsError):
        gen_rt([(7.9, 6.0)], 5.0, 1e-3, np.linspace(7, 9, 50))


@settings(max_examples=20)
@given(seed=st.integers(0, 2**64 - 1))
def test_generators_are_deterministic(seed):
    n = NoiseSpec("multiplicative", 0.05, seed)
    t = np.linspace(7, 9, 60)
    assert np.array_equal(gen_rt([(7.9, 0.5)], 5.0, 1e-3, t, n).resistances,
                          gen_rt([(7.9, 0.5)], 5.0, 1e-3, t, n).resistances)
    c = NoiseSpec("complex-gaussian", 0.01, seed)
    assert np.array_equal(gen_trace(P, 32, noise=c).s21, gen_trace(P, 32, noise=c).s21)
