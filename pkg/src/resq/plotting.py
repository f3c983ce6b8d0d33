"""Static SVG renderings of report contents."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import InputOutputError  # noqa: E402
from .model import ComplexTransmissionTrace, NotchModelParams, s21_notch  # noqa: E402
from .tls import EnsembleCurve, TLSParams, tls_delta  # noqa: E402
from .xrd import DiffractionScan, PseudoVoigtParams, pseudo_voigt  # noqa: E402

_SVG_META = {"Date": None, "Creator": None}


def _save(fig, path):
    plt.rcParams["svg.hashsalt"] = "resq"
    try:
        fig.savefig(path, format="svg", metadata=_SVG_META)
    except OSError as exc:
        raise InputOutputError(exc.strerror or str(exc), path=path) from exc
    finally:
        plt.close(fig)


def plot_trace(path, trace: ComplexTransmissionTrace, params: NotchModelParams):
    """Complex-plane data with the fitted circle, and |S21|(f)."""
    f = trace.frequencies
    fine = np.linspace(f[0], f[-1], 2000)
    model = s21_notch(params, fine)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4.5))
    ax1.plot(trace.s21.real, trace.s21.imag, ".", ms=2, label="data")
    ax1.plot(model.real, model.imag, "-", lw=1, label="fit")
    ax1.set_aspect("equal", adjustable="datalim")
    ax1.set_xlabel("Re S21")
    ax1.set_ylabel("Im S21")
    ax1.legend()
    ghz = 1e-9
    ax2.plot(f * ghz, 20 * np.log10(np.abs(trace.s21)), ".", ms=2, label="data")
    ax2.plot(fine * ghz, 20 * np.log10(np.abs(model)), "-", lw=1, label="fit")
    ax2.set_xlabel("frequency (GHz)")
    ax2.set_ylabel("|S21| (dB)")
    ax2.set_title(f"Q_i = {params.q_i:.4g}, Q_l = {params.q_l:.4g}")
    fig.tight_layout()
    _save(fig, path)


def plot_tls(path, curve: EnsembleCurve, fit: TLSParams, excluded: EnsembleCurve | None = None):
    """<Q_i>(n) on log axes with the fitted TLS model."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.errorbar(curve.n, curve.mean_q_i, yerr=curve.std_q_i, fmt="o", ms=4, label="binned <Q_i>")
    if excluded is not None and len(excluded):
        ax.plot(excluded.n, excluded.mean_q_i, "x", color="grey", label="excluded")
    lo = curve.n.min() if excluded is None or not len(excluded) else min(curve.n.min(), excluded.n.min())
    hi = curve.n.max() if excluded is None or not len(excluded) else max(curve.n.max(), excluded.n.max())
    n = np.logspace(np.log10(lo) - 0.5, np.log10(hi) + 0.5, 300)
    ax.plot(n, 1.0 / tls_delta(n, fit), "-", label="TLS model")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("photon number n")
    ax.set_ylabel("Q_i")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def plot_peak(path, scan: DiffractionScan, fit: PseudoVoigtParams):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(scan.angles, scan.intensities, ".", ms=3, label="data")
    x = np.linspace(scan.angles[0], scan.angles[-1], 2000)
    ax.plot(x, pseudo_voigt(x, fit), "-", label=f"pseudo-Voigt, FWHM {fit.fwhm:.3g} deg")
    ax.set_xlabel("2theta (deg)" if scan.mode == "theta2theta" else "omega (deg)")
    ax.set_ylabel("normalized intensity")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def plot_rt(path, temperatures, resistances, t_cs):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.semilogy(temperatures, resistances, ".-", ms=3)
    for t in t_cs:
        ax.axvline(t, color="C1", lw=1, ls="--")
    ax.set_xlabel("T (K)")
    ax.set_ylabel("R (Ohm)")
    fig.tight_layout()
    _save(fig, path)
