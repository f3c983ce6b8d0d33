"""Pseudo-Voigt peak fitting for theta-2theta scans and rocking curves, and
Ta phase labelling from the 2theta peak position."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.optimize import least_squares

from . import _kernels
from .errors import ConvergenceError, ValidationError, WindowTooNarrowError

ALPHA_TA_110 = 38.32  # deg 2theta, cubic alpha-Ta (110)
BETA_TA_002 = 33.68  # deg 2theta, tetragonal beta-Ta (002)

ALPHA_LABEL = "alpha-Ta(110)"
BETA_LABEL = "beta-Ta(002)"
UNCLASSIFIED = "unclassified"
AMBIGUOUS = "ambiguous"

PV_NAMES = ("center", "fwhm", "eta", "amplitude", "background")
MIN_WINDOW_POINTS = 10


@dataclass(frozen=True)
class DiffractionScan:
    angles: np.ndarray
    intensities: np.ndarray
    mode: str = "theta2theta"
    detector_angle: Optional[float] = None

    def __post_init__(self):
        a = np.array(self.angles, dtype=float)
        y = np.array(self.intensities, dtype=float)
        if a.ndim != 1 or a.shape != y.shape:
            raise ValidationError("angles and intensities must be 1-D and of equal length")
        if not np.all(np.isfinite(a)) or not np.all(np.diff(a) > 0):
            raise ValidationError("angles must be finite and strictly increasing")
        if not np.all(np.isfinite(y)) or np.any(y < 0):
            raise ValidationError("intensities must be finite and non-negative")
        if self.mode not in ("theta2theta", "rocking"):
            raise ValidationError(f"mode must be 'theta2theta' or 'rocking', got {self.mode!r}")
        a.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "angles", a)
        object.__setattr__(self, "intensities", y)


@dataclass(frozen=True)
class PseudoVoigtParams:
    center: float
    fwhm: float
    eta: float = 0.5
    amplitude: float = 1.0
    background: float = 0.0
    std_errors: Dict[str, float] = field(default_factory=dict)
    warnings: Tuple[str, ...] = ()

    def __post_init__(self):
        if not (self.fwhm > 0 and math.isfinite(self.fwhm)):
            raise ValidationError("fwhm must be finite and > 0")
        if not (0.0 <= self.eta <= 1.0):
            raise ValidationError("eta must lie in [0, 1]")
        if not self.amplitude > 0:
            raise ValidationError("amplitude must be > 0")
        if not self.background >= 0:
            raise ValidationError("background must be >= 0")

    def as_dict(self):
        return {"center": self.center, "fwhm": self.fwhm, "eta": self.eta,
                "amplitude": self.amplitude, "background": self.background,
                "std_errors": dict(self.std_errors), "warnings": list(self.warnings)}


def normalize_scan(scan: DiffractionScan) -> DiffractionScan:
    """Divide intensities by their maximum."""
    peak = scan.intensities.max()
    if not peak > 0:
        raise ValidationError("cannot normalize an all-zero scan")
    return DiffractionScan(scan.angles, scan.intensities / peak, scan.mode, scan.detector_angle)


def pseudo_voigt(x, p: PseudoVoigtParams):
    """amplitude * [eta * L + (1 - eta) * G] + background, where L and G have
    unit peak height and share center and FWHM."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    val, _ = _kernels.pseudo_voigt(np.ascontiguousarray(x), p.center, p.fwhm, p.eta,
                                   p.amplitude, p.background, False)
    return val


def half_max_width(x, y, background=None):
    """Width between the outermost linear-interpolated half-height crossings
    around the maximum. Returns ``nan`` when a side never drops below half."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    b = float(np.min(y)) if background is None else background
    i = int(np.argmax(y))
    half = b + 0.5 * (y[i] - b)
    left = np.nonzero(y[:i] < half)[0]
    right = np.nonzero(y[i:] < half)[0]
    if not left.size or not right.size:
        return float("nan")
    j = left[-1]
    xl = x[j] + (half - y[j]) * (x[j + 1] - x[j]) / (y[j + 1] - y[j])
    k = i + right[0]
    xr = x[k - 1] + (half - y[k - 1]) * (x[k] - x[k - 1]) / (y[k] - y[k - 1])
    return float(xr - xl)


def fit_peak(scan: DiffractionScan, window: Optional[Tuple[float, float]] = None,
             weighting: str = "uniform", max_iter: int = 1000) -> PseudoVoigtParams:
    """Least-squares pseudo-Voigt fit inside ``window`` (degrees, inclusive).

    The window must contain the scan maximum and at least 10 samples.
    ``weighting="poisson"`` uses sigma = sqrt(I + 1) per sample.
    """
    x_all, y_all = scan.angles, scan.intensities
    if window is None:
        window = (x_all[0], x_all[-1])
    lo, hi = window
    if not lo < hi:
        raise ValidationError(f"window lower bound must be below upper bound, got {window}")
    sel = (x_all >= lo) & (x_all <= hi)
    x, y = x_all[sel], y_all[sel]
    if x.size < MIN_WINDOW_POINTS:
        raise WindowTooNarrowError(
            f"window {lo}:{hi} holds {x.size} samples; at least {MIN_WINDOW_POINTS} needed",
            stage="fit_peak")
    imax = int(np.argmax(y_all))
    if not sel[imax]:
        raise WindowTooNarrowError(
            f"window {lo}:{hi} excludes the scan maximum at {x_all[imax]:.4f} deg",
            stage="fit_peak")
    if weighting == "uniform":
        sigma = np.ones_like(y)
    elif weighting == "poisson":
        sigma = np.sqrt(y + 1.0)
    else:
        raise ValidationError(f"unknown weighting {weighting!r}")

    bg0 = float(y.min())
    amp0 = float(y.max() - bg0)
    if amp0 <= 0:
        raise ConvergenceError("flat scan: no peak to fit", stage="fit_peak")
    c0 = float(x[np.argmax(y)])
    w0 = half_max_width(x, y, bg0)
    if not (w0 > 0):
        w0 = 0.25 * (x[-1] - x[0])
    step = float(np.median(np.diff(x)))
    x = np.ascontiguousarray(x)

    def fun(p):
        return (_kernels.pseudo_voigt(x, *p, False)[0] - y) / sigma

    def jac(p):
        return _kernels.pseudo_voigt(x, *p, True)[1] / sigma[:, None]

    lb = [x[0], 0.1 * step, 0.0, 0.0, 0.0]
    ub = [x[-1], 10.0 * (x[-1] - x[0]), 1.0, np.inf, np.inf]
    p0 = np.clip([c0, w0, 0.5, amp0, bg0], lb, ub)
    sol = least_squares(fun, p0, jac=jac, bounds=(lb, ub), method="trf", x_scale="jac",
                        xtol=1e-12, ftol=1e-15, gtol=1e-15, max_nfev=max_iter)
    if sol.status <= 0:
        raise ConvergenceError(f"pseudo-Voigt fit did not converge within {max_iter} evaluations",
                               stage="fit_peak")
    center, fwhm, eta, amp, bg = (float(v) for v in sol.x)

    dof = x.size - 5
    se = np.full(5, np.inf)
    if dof > 0:
        J = sol.jac
        norms = np.linalg.norm(J, axis=0)
        if np.all(norms > 0):
            _, sv, vt = np.linalg.svd(J / norms, full_matrices=False)
            if sv[-1] > sv[0] * 1e-12:
                cov = (vt.T / sv**2) @ vt / np.outer(norms, norms) * (2.0 * sol.cost / dof)
                se = np.sqrt(np.clip(np.diag(cov), 0, None))
    warnings = []
    if not se[3] < amp:
        warnings.append("peak amplitude is not identifiable above the noise")
    if amp <= 0:
        raise ConvergenceError("fit collapsed to zero amplitude: no peak in window",
                               stage="fit_peak")
    if fwhm < 2.0 * step:
        raise ConvergenceError(
            f"no resolvable peak: fitted FWHM {fwhm:.3g} deg is below two sample steps",
            stage="fit_peak")
    return PseudoVoigtParams(center, fwhm, eta, amp, bg,
                             {k: float(v) for k, v in zip(PV_NAMES, se)}, tuple(warnings))


def identify_phase(center: float, tolerance: float = 0.5) -> str:
    """Label a 2theta peak as alpha-Ta(110), beta-Ta(002), ambiguous or unclassified."""
    if not tolerance > 0:
        raise ValidationError("tolerance must be > 0")
    is_alpha = abs(center - ALPHA_TA_110) <= tolerance
    is_beta = abs(center - BETA_TA_002) <= tolerance
    if is_alpha and is_beta:
        return AMBIGUOUS
    if is_alpha:
        return ALPHA_LABEL
    if is_beta:
        return BETA_LABEL
    return UNCLASSIFIED
