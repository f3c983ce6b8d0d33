"""Acceptance gate: one PASS/FAIL line per criterion, printed in the summary."""

import json
import math
import time

import numpy as np
import pytest

from resq.circlefit import fit_resonance
from resq.cli import main
from resq.errors import ResqError
from resq.model import NotchModelParams, photon_number
from resq.synth import NoiseSpec, gen_rocking, gen_rt, gen_trace
from resq.tls import EnsembleCurve, TLSParams, compare_losses, fit_tls, tls_delta
from resq.transport import detect_transitions
from resq.xrd import ALPHA_LABEL, BETA_LABEL, PseudoVoigtParams, fit_peak, identify_phase

ROWS = {
    "Nb": (15e-7, 1.6e-7, 0.2, 0.29),
    "Nb-Ta": (11.3e-7, 0.69e-7, 3.9, 0.40),
    "TaN-Ta": (29.1e-7, 0.5e-7, 11.0, 0.24),
    "Ta": (16e-7, 178e-7, 3.0, 0.7),
}
N_GRID = np.logspace(-2, 6, 30)
HBAR = 1.054571817e-34


def _draw(rng):
    """One notch-model draw from the round-trip box."""
    return NotchModelParams.from_internal(
        rng.uniform(4e9, 8e9),
        10 ** rng.uniform(4, 7),
        10 ** rng.uniform(4, 6),
        rng.uniform(-0.5, 0.5),
        rng.uniform(0.1, 2.0),
        rng.uniform(-math.pi, math.pi),
        rng.uniform(0.0, 50e-9),
    )


def _rel(a, b):
    return abs(a / b - 1.0)


def _run(argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:
        return exc.code


def test_c1_circle_fit_round_trip(criterion):
    fit_resonance(gen_trace(_draw(np.random.default_rng(0)), 1001))  # JIT warm-up
    rng = np.random.default_rng(1)
    draws = [_draw(rng) for _ in range(200)]
    worst = dict(f_r=0.0, q_l=0.0, q_c=0.0, q_i=0.0)
    failures = 0
    t0 = time.perf_counter()
    for p in draws:
        try:
            r = fit_resonance(gen_trace(p, 1001))
        except ResqError:
            failures += 1
            continue
        worst["f_r"] = max(worst["f_r"], _rel(r.params.f_r, p.f_r))
        worst["q_l"] = max(worst["q_l"], _rel(r.params.q_l, p.q_l))
        worst["q_c"] = max(worst["q_c"], _rel(r.params.q_c_mag, p.q_c_mag))
        worst["q_i"] = max(worst["q_i"], _rel(r.q_i, p.q_i))
    elapsed = time.perf_counter() - t0
    ok = (failures == 0 and worst["f_r"] < 1e-9 and worst["q_l"] < 1e-3
          and worst["q_c"] < 1e-3 and worst["q_i"] < 1e-3 and elapsed < 10.0)
    criterion(1, ok, f"200 draws, {failures} failed, worst rel f_r {worst['f_r']:.1e} "
                     f"Q_l {worst['q_l']:.1e} Q_c {worst['q_c']:.1e} Q_i {worst['q_i']:.1e}, "
                     f"{elapsed:.2f} s")
    assert ok


def test_c2_noisy_fit_calibration(criterion):
    rng = np.random.default_rng(20261016)
    errors, per_set, ratios = [], [], []
    for _ in range(10):
        p = _draw(rng)
        errs, q, se = [], [], []
        for seed in range(100):
            tr = gen_trace(p, 1001, noise=NoiseSpec("complex-gaussian", 0.01, seed))
            try:
                r = fit_resonance(tr)
            except ResqError:
                errs.append(math.inf)  # a failed fit counts as an unbounded error
                continue
            errs.append(_rel(r.q_i, p.q_i))
            q.append(r.q_i)
            se.append(r.q_i_std_error)
        errors += errs
        per_set.append(float(np.median(errs)))
        ratios.append(float(np.median(se) / np.std(q, ddof=1)))
    med = float(np.median(errors))
    calibrated = all(1 / 3 <= x <= 3 for x in ratios)
    ok = med < 0.05 and calibrated
    criterion(2, ok, f"median |Q_i err| {med:.2%} over 1000 fits (per set "
                     f"{min(per_set):.2%}..{max(per_set):.2%}), reported/empirical scatter "
                     f"{min(ratios):.2f}..{max(ratios):.2f}")
    assert ok


def test_c3_tls_spot_value(criterion):
    fd, d0, nc, beta = ROWS["Nb"]
    oracle = fd / math.sqrt(1.0 + (1.0 / nc) ** beta) + d0
    got = float(tls_delta(1.0, TLSParams(*ROWS["Nb"])))
    q_i = 1.0 / got
    ok = (abs(got - oracle) < 1e-9 and abs(got - 1.0912e-6) < 1e-9
          and abs(oracle - 1.0911954132715e-6) < 1e-18 and 6.6e5 <= q_i <= 9.4e5)
    criterion(3, ok, f"tls_delta(1) = {got:.10e} (oracle {oracle:.10e}), Q_i = {q_i:.4g}")
    assert ok


def _noisy_curve(p, seed):
    q = 1.0 / tls_delta(N_GRID, TLSParams(*p))
    rng = np.random.default_rng(seed)
    return EnsembleCurve.from_arrays(N_GRID, q * (1.0 + 0.05 * rng.standard_normal(q.size)))


def test_c4_tls_fit_round_trip(criterion):
    t0 = time.perf_counter()
    lines, ok = [], True
    for name, p in ROWS.items():
        clean = fit_tls(EnsembleCurve.from_arrays(N_GRID, 1.0 / tls_delta(N_GRID, TLSParams(*p))))
        clean_ok = all(_rel(g, w) < 0.01 for g, w in zip(clean.values, p))
        est = np.array([fit_tls(_noisy_curve(p, s)).values for s in range(50)])
        fd, d0, _, beta = np.median(est, axis=0)
        e_fd, e_d0, e_beta = _rel(fd, p[0]), _rel(d0, p[1]), abs(beta - p[3])
        row_ok = clean_ok and e_fd < 0.10 and e_d0 < 0.10 and e_beta < 0.1
        ok &= row_ok
        lines.append(f"{name}{'' if row_ok else '(x)'} noiseless {'ok' if clean_ok else 'off'} "
                     f"fd {e_fd:.1%} d0 {e_d0:.1%} beta {e_beta:.3f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 30.0
    criterion(4, ok, "; ".join(lines) + f"; {elapsed:.1f} s")
    assert ok


def test_c5_boe_comparison(criterion):
    nb = compare_losses(TLSParams(*ROWS["Nb"]), TLSParams(8e-7, *ROWS["Nb"][1:]))
    nbta = compare_losses(TLSParams(*ROWS["Nb-Ta"]), TLSParams(7.6e-7, *ROWS["Nb-Ta"][1:]))
    a, b = 100 * nb["f_delta_tls"], 100 * nbta["f_delta_tls"]
    ok = round(a, 1) == -46.7 and round(b, 1) == -32.7 and a < -30 and b < -30
    criterion(5, ok, f"Nb {a:.1f} %, Nb-Ta {b:.1f} %")
    assert ok


def test_c6_photon_number(criterion):
    hand = 2 * 9.0909e4**2 * 1e-17 / (HBAR * (2 * math.pi * 6e9) ** 2 * 1e5)
    got = float(photon_number(1e-17, 6e9, 9.0909e4, 1e5))
    ok = _rel(got, 11.03) < 1e-3 and _rel(got, hand) < 1e-12
    criterion(6, ok, f"n = {got:.4f} (hand {hand:.4f})")
    assert ok


def test_c7_rocking_widths_and_labels(criterion):
    worst = {}
    for w in (1.4, 5.2, 8.2):
        p = PseudoVoigtParams(19.0, w, 0.5, 1e4, 50.0)
        errs = []
        for seed in range(10):
            s = gen_rocking(p, (0.0, 38.0), 401, NoiseSpec("poisson-like", 1.0, seed))
            errs.append(_rel(fit_peak(s, weighting="poisson").fwhm, w))
        worst[w] = max(errs)
    labels = {}
    for c in (38.32, 33.68):
        s = gen_rocking(PseudoVoigtParams(c, 0.4, 0.5, 1e4, 50.0), (30.0, 42.0), 601,
                        NoiseSpec("poisson-like", 1.0, 0), mode="theta2theta")
        labels[c] = identify_phase(fit_peak(s, (c - 2.0, c + 2.0), weighting="poisson").center)
    ok = (all(v < 0.02 for v in worst.values()) and labels[38.32] == ALPHA_LABEL
          and labels[33.68] == BETA_LABEL)
    criterion(7, ok, "worst width error " + ", ".join(f"{w} deg {e:.2%}" for w, e in worst.items())
              + f"; labels {labels[38.32]}, {labels[33.68]}")
    assert ok


def test_c8_transport(criterion):
    t = np.round(np.arange(6.0, 12.0 + 1e-9, 0.01), 10)
    step = 0.01
    two = [x.t_c for x in detect_transitions(
        gen_rt([(7.9, 0.5), (7.7, 1e-3)], 5.0, 1e-3, t)).transitions]
    one = [x.t_c for x in detect_transitions(gen_rt([(9.2, 0.0)], 2.0, 1e-4, t)).transitions]
    ok = (len(two) == 2 and abs(two[0] - 7.9) <= step and abs(two[1] - 7.7) <= step
          and len(one) == 1 and abs(one[0] - 9.2) <= step)
    criterion(8, ok, f"two-step T_c {two}, single-step T_c {one}, spacing {step} K")
    assert ok


@pytest.mark.slow
def test_c9_end_to_end(tmp_path, criterion):
    truth = dict(zip(("f_delta_tls", "delta0", "n_c", "beta"), ROWS["Nb-Ta"]))
    doc = {"tls": truth,
           "design": {"f_r": 6e9, "q_c_mag": 1e5, "phi": 0.1, "a": 0.9, "alpha": 0.4,
                      "tau": 3e-8},
           "powers": {"start": -60, "stop": 0, "count": 30},
           "attenuators": [60, 40], "temperature_k": 0.02, "resonator_id": "NbTa"}
    (tmp_path / "sweep.json").write_text(json.dumps(doc))
    t0 = time.perf_counter()
    codes = [
        _run(["synth", "sweep", "-i", tmp_path / "sweep.json", "-o", tmp_path / "sweep",
              "--seed", 0]),
        _run(["power-sweep", "-i", tmp_path / "sweep" / "manifest.json",
              "-o", tmp_path / "ps.json"]),
        _run(["tls-fit", "-i", tmp_path / "ps.json", "-o", tmp_path / "tls.json"]),
    ]
    elapsed = time.perf_counter() - t0
    ps = json.loads((tmp_path / "ps.json").read_text())
    fit = json.loads((tmp_path / "tls.json").read_text())["tls"]
    complete = len(ps["results"]) + len(ps["discarded"]) == ps["n_inputs"] == 30
    errs = {k: _rel(fit[k], v) for k, v in truth.items()}
    ok = codes == [0, 0, 0] and complete and max(errs.values()) < 0.01 and elapsed < 60.0
    criterion(9, ok, f"exit codes {codes}, complete {complete}, rel errors "
              + ", ".join(f"{k} {v:.1e}" for k, v in errs.items()) + f", {elapsed:.1f} s")
    assert ok
