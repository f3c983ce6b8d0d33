import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resq.errors import EmptyResultError, ValidationError
from resq.tls import (
    BinningScheme,
    EnsembleCurve,
    PhotonPoint,
    TLSParams,
    bin_by_photon,
    compare_losses,
    exclude_nonlinear,
    fit_tls,
    low_power_q,
    tls_delta,
)

ROWS = {
    "Nb": (15e-7, 1.6e-7, 0.2, 0.29),
    "Nb-Ta": (11.3e-7, 0.69e-7, 3.9, 0.40),
    "TaN-Ta": (29.1e-7, 0.5e-7, 11.0, 0.24),
    "Ta": (16e-7, 178e-7, 3.0, 0.7),
}
N_GRID = np.logspace(-2, 6, 30)


def _direct(n, fd, d0, nc, beta):
    return fd / math.sqrt(1 + (n / nc) ** beta) + d0


def _curve(p, n=N_GRID):
    return EnsembleCurve.from_arrays(n, 1.0 / tls_delta(n, TLSParams(*p)))


# --- binning ---------------------------------------------------------------


def test_single_point_single_bin():
    c = bin_by_photon([PhotonPoint(3.0, 5e5)])
    assert len(c) == 1 and c.bins[0].std_q_i == 0 and c.bins[0].count == 1
    assert c.n[0] == pytest.approx(3.0)


def test_two_point_statistics():
    c = bin_by_photon([PhotonPoint(1.0, 1e6), PhotonPoint(1.01, 2e6)])
    assert len(c) == 1
    assert c.bins[0].mean_q_i == pytest.approx(1.5e6)
    assert c.bins[0].std_q_i == pytest.approx(0.5e6)


def test_constant_q_every_bin():
    rng = np.random.default_rng(4)
    n = 10 ** rng.uniform(-1, 3, 1000)
    pts = [PhotonPoint(x, 7e5) for x in n]
    c = bin_by_photon(pts, BinningScheme(5))
    assert np.allclose(c.mean_q_i, 7e5, rtol=1e-12)
    # brute-force oracle for membership
    edges = 10 ** (np.arange(-5, 16) / 5)
    counts = np.histogram(n, edges)[0]
    assert list(c.count) == [int(x) for x in counts if x]


def test_binning_spec_parse():
    assert BinningScheme.parse("log:7").per_decade == 7
    for bad in ("lin:5", "log:", "log:x", "log:0"):
        with pytest.raises(ValidationError):
            BinningScheme.parse(bad)


def test_empty_points():
    with pytest.raises(EmptyResultError):
        bin_by_photon([])


@given(st.lists(st.floats(-3, 6), min_size=1, max_size=30, unique=True))
def test_one_bin_per_point_is_identity(logs):
    # 1000 bins per decade keeps distinct points separate
    logs = sorted(set(round(x, 2) for x in logs))
    pts = [PhotonPoint(10**x, 1e5 * (1 + i)) for i, x in enumerate(logs)]
    c = bin_by_photon(pts, BinningScheme(1000))
    assert len(c) == len(pts)
    assert np.allclose(c.n, [p.n for p in pts], rtol=1e-12)
    assert np.allclose(c.mean_q_i, [p.q_i for p in pts], rtol=1e-12)


def test_curve_invariants():
    with pytest.raises(ValidationError):
        EnsembleCurve.from_arrays([1, 1], [1e5, 1e5])
    with pytest.raises(ValidationError):
        EnsembleCurve.from_arrays([1, 2], [1e5, 1e5], count=[1, 0])


# --- tls_delta -------------------------------------------------------------


def test_delta_at_zero_and_nc():
    p = TLSParams(*ROWS["Nb-Ta"])
    assert tls_delta(0.0, p) == pytest.approx(p.f_delta_tls + p.delta0, rel=1e-15)
    assert tls_delta(p.n_c, p) == pytest.approx(p.f_delta_tls / math.sqrt(2) + p.delta0,
                                                rel=1e-14)


@pytest.mark.parametrize("row", ROWS)
def test_delta_matches_direct(row):
    p = ROWS[row]
    for n in (1e-3, 1.0, 47.0, 1e5):
        assert tls_delta(n, TLSParams(*p)) == pytest.approx(_direct(n, *p), rel=1e-14)


@pytest.mark.parametrize("row", ROWS)
def test_delta_limit_and_monotone(row):
    p = TLSParams(*ROWS[row])
    d = tls_delta(np.logspace(-4, 12, 400), p)
    assert np.all(np.diff(d) <= 0)
    # with beta ~ 0.25 the saturation term still holds ~1 % of f_delta_tls at
    # n = 1e12, so the limit is checked further out
    assert abs(tls_delta(1e30, p) - p.delta0) < 1e-3 * p.f_delta_tls
    assert tls_delta(1e12, p) - p.delta0 == pytest.approx(
        p.f_delta_tls / math.sqrt(1 + (1e12 / p.n_c) ** p.beta), rel=1e-9)


def test_params_bounds():
    for bad in [(-1e-7, 1e-7, 1, 0.3), (1e-7, 1e-7, 0, 0.3), (1e-7, 1e-7, 1, 0), (1e-7, 1e-7, 1, 2.5)]:
        with pytest.raises(ValidationError):
            TLSParams(*bad)


# --- fit_tls ---------------------------------------------------------------


@pytest.mark.parametrize("row", ROWS)
def test_fit_noiseless_round_trip(row):
    p = ROWS[row]
    r = fit_tls(_curve(p))
    for got, want in zip(r.values, p):
        assert got == pytest.approx(want, rel=0.01)


def test_fit_never_worse_than_truth():
    for p in ROWS.values():
        c = _curve(p)
        r = fit_tls(c)
        d = 1.0 / c.mean_q_i
        res_fit = np.sum((tls_delta(c.n, r) - d) ** 2)
        res_true = np.sum((tls_delta(c.n, TLSParams(*p)) - d) ** 2)
        assert res_fit <= res_true + 1e-12


@settings(max_examples=10)
@given(c=st.floats(0.1, 10))
def test_scale_covariance(c):
    p = ROWS["Nb-Ta"]
    base = _curve(p)
    scaled = EnsembleCurve.from_arrays(base.n, c * base.mean_q_i)
    r0, r1 = fit_tls(base), fit_tls(scaled)
    assert r1.f_delta_tls == pytest.approx(r0.f_delta_tls / c, rel=1e-3)
    assert r1.delta0 == pytest.approx(r0.delta0 / c, rel=1e-3)
    assert r1.n_c == pytest.approx(r0.n_c, rel=1e-3)
    assert r1.beta == pytest.approx(r0.beta, rel=1e-3)


def test_constant_curve_flags_unidentifiable():
    c = EnsembleCurve.from_arrays(N_GRID, np.full(N_GRID.size, 5e5))
    r = fit_tls(c)
    assert r.f_delta_tls < 1e-3 * r.delta0
    assert r.delta0 == pytest.approx(2e-6, rel=1e-6)
    text = " ".join(r.warnings)
    assert "n_c" in text and "beta" in text


def test_fit_errors_scale_with_noise():
    p = ROWS["Nb-Ta"]
    base = _curve(p)
    rng = np.random.default_rng(2)
    noisy = EnsembleCurve.from_arrays(base.n, base.mean_q_i * (1 + 0.02 * rng.standard_normal(30)))
    r = fit_tls(noisy)
    assert all(math.isfinite(v) and v > 0 for v in r.std_errors.values())


def test_few_bins_warns():
    p = ROWS["Nb-Ta"]
    r = fit_tls(_curve(p, np.array([0.1, 1.0, 3.0, 10.0])))
    assert any("bins" in w for w in r.warnings)


# --- summaries ------------------------------------------------------------


def test_low_power_exact_bin():
    c = EnsembleCurve.from_arrays([0.1, 1.0, 10.0], [1e5, 2e5, 3e5], [1, 2, 3])
    assert low_power_q(c) == (2e5, 2.0)


def test_low_power_nb_row_in_band():
    q, _ = low_power_q(_curve(ROWS["Nb"], np.logspace(-2, 4, 31)))
    assert q == pytest.approx(1 / 1.0911954132715e-6, rel=1e-9)
    assert 8e5 - 1.4e5 <= q <= 8e5 + 1.4e5


def test_low_power_tie_break():
    c = EnsembleCurve.from_arrays([0.5, 2.0], [1e5, 2e5])
    assert low_power_q(c)[0] == 1e5
    assert low_power_q(c, target_n=2.0)[0] == 2e5


def test_exclude_nonlinear():
    c = EnsembleCurve.from_arrays(np.arange(1, 11), np.full(10, 1e5))
    assert exclude_nonlinear(c, 0) == c
    kept = exclude_nonlinear(c, 2)
    assert list(kept.n) == list(range(1, 9))
    with pytest.raises(EmptyResultError):
        exclude_nonlinear(c, 10)
    with pytest.raises(ValidationError):
        exclude_nonlinear(c, -1)


def test_compare_losses():
    nb = TLSParams(15e-7, 1.6e-7, 0.2, 0.29)
    nb_boe = TLSParams(8e-7, 1.7e-7, 1.0, 0.30)
    assert compare_losses(nb, nb_boe)["f_delta_tls"] == pytest.approx(-0.4667, abs=5e-5)
    assert compare_losses(nb, nb) == {k: 0.0 for k in ("f_delta_tls", "delta0", "n_c", "beta")}
    zero = TLSParams(0.0, 1e-7, 1.0, 0.3)
    assert compare_losses(zero, nb)["f_delta_tls"] is None
