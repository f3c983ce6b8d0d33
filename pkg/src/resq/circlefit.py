"""Circle-fit extraction of notch resonator parameters from complex S21.

Pipeline: remove the electrical delay, fit a circle to the canonical
resonance locus, fit the phase of the locus seen from the circle center
versus frequency, read the baseline and the coupling Q off the geometry, then
polish all seven parameters with a joint Levenberg-Marquardt fit on the
complex residuals. The covariance of that joint fit supplies the standard
errors used by the relative-error discard rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np
from scipy.optimize import least_squares

from . import _kernels
from .errors import (
    CollinearPointsError,
    ConvergenceError,
    DegenerateTraceError,
    ResqError,
    SingularCovarianceError,
    UnphysicalParametersError,
)
from .model import (
    PARAM_NAMES,
    ComplexTransmissionTrace,
    NotchModelParams,
    ResonatorFitResult,
    internal_q,
    wrap_phase,
)

MAX_ITER = 1000
XTOL = 1e-10
COLLINEAR_TOL = 1e-12
DEFAULT_DISCARD_THRESHOLD = 0.20


@dataclass(frozen=True)
class CircleGeometry:
    center: complex
    radius: float

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise CollinearPointsError(f"circle radius must be finite and > 0, got {self.radius!r}")


# ---------------------------------------------------------------------------
# delay


def _delay_objective(f_rel, zr, zi, tau):
    return float(_kernels.delay_scan(f_rel, zr, zi, tau, 0.0, 1)[0])


def _phase_slope_delay(f_rel, z, tau_max):
    """Delay from the unwrapped phase of the outer 30 % on each side.

    The resonance leaves a tail ~ 1/(f - f_r) in the wing phase that would
    otherwise read as extra slope, so the fit carries 1/(f - f_r) and
    1/(f - f_r)**2 terms, with f_r taken where the locus moves fastest.
    """
    n = f_rel.size
    m = max(3, (3 * n) // 10)
    ph = np.unwrap(np.angle(z))
    idx = np.r_[0:m, n - m:n]
    speed = np.abs(np.diff(z))
    k = int(np.argmax(speed))
    f0 = 0.5 * (f_rel[k] + f_rel[k + 1])
    x = f_rel[idx]
    u = x - f0
    u = np.where(np.abs(u) < 1e-300, 1e-300, u)
    span = f_rel[-1] - f_rel[0]
    A = np.column_stack([np.ones_like(x), x / span, span / u / n, (span / u / n) ** 2])
    try:
        coef = np.linalg.lstsq(A, ph[idx], rcond=None)[0]
        slope = coef[1] / span
    except np.linalg.LinAlgError:
        slope = np.polyfit(x, ph[idx], 1)[0]
    if not np.isfinite(slope):
        slope = 0.0
    return float(np.clip(-slope / (2.0 * np.pi), -tau_max, tau_max))


def remove_delay(
    trace: ComplexTransmissionTrace,
    grid_points: int = 41,
    grid_halfwidth: float = 0.5,
) -> Tuple[ComplexTransmissionTrace, float]:
    """Estimate and remove the cable delay.

    The search range is the alias-free interval ``|tau| < N / (2 span)``. A
    wing phase-slope estimate locates the delay within that range; grids of
    ``grid_points`` delays spanning ``grid_halfwidth / span`` and 1/25 of that
    on each side, a few zooming grids around the best point and a final
    golden-section search minimize the RMS geometric residual of the
    Taubin circle. Returns the corrected trace (multiplied by
    ``exp(+2 pi i f tau)``) and ``tau``.
    """
    f = trace.frequencies
    z = trace.s21
    if np.ptp(z.real) == 0.0 and np.ptp(z.imag) == 0.0:
        raise DegenerateTraceError("all S21 samples are identical", stage="remove_delay")
    n = f.size
    span = trace.span
    f_c = 0.5 * (f[0] + f[-1])
    f_rel = f - f_c
    zr = np.ascontiguousarray(z.real)
    zi = np.ascontiguousarray(z.imag)
    tau_max = n / (2.0 * span)

    tau_guess = _phase_slope_delay(f_rel, z, tau_max)
    # small circles give a very narrow minimum, so a fine grid around the
    # guess runs alongside the coarse one
    best = None
    for half in (grid_halfwidth, grid_halfwidth / 25.0):
        step = 2.0 * half / span / (grid_points - 1)
        tau0 = tau_guess - half / span
        scan = _kernels.delay_scan(f_rel, zr, zi, tau0, step, grid_points)
        j = int(np.argmin(scan))
        if best is None or scan[j] < best[0]:
            best = (scan[j], tau0 + j * step, step)
    _, center, step = best
    for _ in range(3):
        tau0 = center - step
        step = 2.0 * step / (grid_points - 1)
        scan = _kernels.delay_scan(f_rel, zr, zi, tau0, step, grid_points)
        center = tau0 + int(np.argmin(scan)) * step
    tau = _golden_min(lambda t: _delay_objective(f_rel, zr, zi, t), center - step,
                      center + step, tol=1e-4 * step)
    if abs(tau) > tau_max:
        tau = math.copysign(tau_max, tau)
    corrected = z * np.exp(2j * np.pi * f * tau)
    return trace.with_s21(corrected), float(tau)


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_min(fun, lo, hi, tol):
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fun(c), fun(d)
    while abs(b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


# ---------------------------------------------------------------------------
# circle and phase


def fit_circle(points) -> CircleGeometry:
    """Taubin algebraic circle fit to complex points."""
    z = np.asarray(points, dtype=np.complex128)
    if z.size < 3:
        raise CollinearPointsError("need at least 3 points to fit a circle", stage="fit_circle")
    x = np.ascontiguousarray(z.real)
    y = np.ascontiguousarray(z.imag)
    scale = max(np.ptp(x), np.ptp(y))
    if scale == 0.0:
        raise DegenerateTraceError("all points coincide", stage="fit_circle")
    xc, yc, r, degeneracy = _kernels.taubin_circle(x, y)
    if not degeneracy > COLLINEAR_TOL or not math.isfinite(r):
        raise CollinearPointsError(
            "points are collinear; the algebraic circle system is rank-deficient",
            stage="fit_circle",
        )
    return CircleGeometry(complex(xc, yc), float(r))


def phase_model(f, theta0, q_l, f_r):
    """Angle of the resonance locus seen from the circle center."""
    return theta0 + 2.0 * np.arctan(2.0 * q_l * (1.0 - np.asarray(f) / f_r))


def _phase_guess(f, theta):
    """Initial (f_r, q_l, theta0) from the wrapped angles of the centered locus."""
    n = f.size
    m = max(2, n // 10)
    wing = np.exp(1j * theta[:m]).sum() + np.exp(1j * theta[-m:]).sum()
    theta0 = float(np.angle(wing)) + np.pi
    d = wrap_phase(theta - theta0)
    # the locus sweeps d from +pi (below f_r) to -pi (above f_r); f_r is where
    # d crosses zero and the half-width points are d = +-pi/2
    k = int(np.argmin(np.abs(d)))
    f_r = float(f[k])
    up = np.nonzero(np.abs(d - np.pi / 2) < np.pi / 4)[0]
    dn = np.nonzero(np.abs(d + np.pi / 2) < np.pi / 4)[0]
    if up.size and dn.size:
        f_lo = f[up[np.argmin(np.abs(d[up] - np.pi / 2))]]
        f_hi = f[dn[np.argmin(np.abs(d[dn] + np.pi / 2))]]
        width = abs(f_hi - f_lo)
    else:
        width = 0.0
    if width <= 0.0:
        width = 10.0 * (f[-1] - f[0]) / n
    return f_r, f_r / width, theta0


def fit_phase(trace: ComplexTransmissionTrace, circle: CircleGeometry, max_iter: int = MAX_ITER):
    """Fit ``theta(f) = theta0 + 2 arctan(2 q_l (1 - f/f_r))`` to the angle of
    the delay-corrected points around ``circle.center``.

    Returns ``(f_r, q_l, theta0)``.
    """
    f = trace.frequencies
    theta = np.angle(trace.s21 - circle.center)
    f_r0, q_l0, theta00 = _phase_guess(f, theta)
    f_c = 0.5 * (f[0] + f[-1])

    # unknowns: theta0, log q_l, (f_r - f_c) in units of the initial linewidth
    lw = f_r0 / q_l0

    def unpack(x):
        return x[0], math.exp(x[1]), f_c + x[2] * lw

    def resid(x):
        t0, ql, fr = unpack(x)
        return wrap_phase(theta - phase_model(f, t0, ql, fr))

    x0 = np.array([theta00, math.log(q_l0), (f_r0 - f_c) / lw])
    try:
        sol = least_squares(resid, x0, method="lm", xtol=XTOL, ftol=1e-15, gtol=1e-15,
                            max_nfev=max_iter * 4)
    except (ValueError, FloatingPointError) as exc:
        raise ConvergenceError(f"phase fit failed: {exc}", stage="fit_phase") from exc
    if sol.status == 0 or not np.all(np.isfinite(sol.x)):
        raise ConvergenceError(
            f"phase fit did not converge within {max_iter} iterations", stage="fit_phase"
        )
    t0, ql, fr = unpack(sol.x)
    if not (f[0] <= fr <= f[-1]):
        raise ConvergenceError(
            f"phase fit placed f_r = {fr:.9g} Hz outside the sweep", stage="fit_phase"
        )
    return float(fr), float(ql), float(wrap_phase(t0))


# ---------------------------------------------------------------------------
# parameters and errors


def _staged_params(trace, tau, circle, f_r, q_l, theta0) -> NotchModelParams:
    off_res = circle.center + circle.radius * np.exp(1j * (theta0 + np.pi))
    a = abs(off_res)
    alpha = float(np.angle(off_res))
    q_c_mag = q_l * a / (2.0 * circle.radius)
    phi = wrap_phase(theta0 - alpha - np.pi)
    return NotchModelParams(f_r, q_l, q_c_mag, phi, a, alpha, tau)


def extract_params(trace, tau, circle, f_r, q_l, theta0) -> ResonatorFitResult:
    """Read a, alpha, |Q_c| and phi off the fitted circle and package a result.

    ``trace`` is the raw (not delay-corrected) trace; it is used for the
    residuals and the error estimate.
    """
    try:
        params = _staged_params(trace, tau, circle, f_r, q_l, theta0)
    except UnphysicalParametersError as exc:
        exc.stage = "extract_params"
        raise
    return _result_from(params, trace)


def _result_from(params, trace) -> ResonatorFitResult:
    q_i = internal_q(params.q_l, params.q_c_mag, params.phi)
    errs, q_i_err = estimate_errors(params, trace)
    res = _residuals(params, trace)
    return ResonatorFitResult(
        params=params,
        q_i=q_i,
        std_errors=errs,
        q_i_rel_error=q_i_err / q_i,
        residual_rms=float(np.sqrt(np.mean(res * res) * 2.0)),
        q_i_std_error=q_i_err,
    )


def _f_ref(trace):
    f = trace.frequencies
    return 0.5 * (f[0] + f[-1])


def _pack(params: NotchModelParams, f_ref):
    alpha_ref = params.alpha - 2.0 * np.pi * f_ref * params.tau
    return np.array([params.f_r, params.q_l, params.q_c_mag, params.phi, params.a,
                     wrap_phase(alpha_ref), params.tau])


def _unpack(x, f_ref) -> NotchModelParams:
    fr, ql, qc, phi, a, alpha_ref, tau = (float(v) for v in x)
    alpha = wrap_phase(alpha_ref + 2.0 * np.pi * f_ref * tau)
    if a < 0:
        a, alpha = -a, wrap_phase(alpha + np.pi)
    return NotchModelParams(fr, ql, qc, phi, a, alpha, tau)


def _residuals(params, trace):
    f = trace.frequencies
    z = np.asarray(trace.s21)
    res, _ = _kernels.notch_residuals(_pack(params, _f_ref(trace)), f,
                                      np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag),
                                      _f_ref(trace), False)
    return res


def refine(params: NotchModelParams, trace: ComplexTransmissionTrace,
           max_iter: int = MAX_ITER) -> NotchModelParams:
    """Joint Levenberg-Marquardt fit of all seven parameters to the complex data."""
    f = trace.frequencies
    z = trace.s21
    zr = np.ascontiguousarray(z.real)
    zi = np.ascontiguousarray(z.imag)
    f_ref = _f_ref(trace)

    def fun(x):
        return _kernels.notch_residuals(x, f, zr, zi, f_ref, False)[0]

    def jac(x):
        return _kernels.notch_residuals(x, f, zr, zi, f_ref, True)[1]

    x0 = _pack(params, f_ref)
    try:
        sol = least_squares(fun, x0, jac=jac, method="lm", x_scale="jac", xtol=XTOL,
                            ftol=1e-15, gtol=1e-15, max_nfev=max_iter)
    except (ValueError, FloatingPointError) as exc:
        raise ConvergenceError(f"joint refinement failed: {exc}", stage="refine") from exc
    if sol.status == 0:
        raise ConvergenceError(
            f"joint refinement did not converge within {max_iter} iterations", stage="refine"
        )
    if not np.all(np.isfinite(sol.x)):
        raise ConvergenceError("joint refinement diverged", stage="refine")
    try:
        return _unpack(sol.x, f_ref)
    except UnphysicalParametersError as exc:
        exc.stage = "refine"
        raise


def estimate_errors(result, trace) -> Tuple[dict, float]:
    """Standard errors from the Jacobian covariance of the joint problem.

    ``result`` may be a :class:`ResonatorFitResult` or bare
    :class:`NotchModelParams`; ``trace`` needs ``frequencies`` and ``s21``.
    Returns ``(std_errors, q_i_std_error)`` where ``std_errors`` maps each
    parameter name to its standard error. The residual variance uses
    ``2N - 7`` degrees of freedom.
    """
    params = result.params if isinstance(result, ResonatorFitResult) else result
    f = np.asarray(trace.frequencies, dtype=float)
    z = np.asarray(trace.s21, dtype=complex)
    f_ref = 0.5 * (f.min() + f.max())
    x = _pack(params, f_ref)
    res, J = _kernels.notch_residuals(x, f, np.ascontiguousarray(z.real),
                                      np.ascontiguousarray(z.imag), f_ref, True)
    dof = res.size - 7
    if dof <= 0:
        raise SingularCovarianceError("not enough samples for a covariance estimate",
                                      stage="estimate_errors")
    s2 = float(res @ res) / dof
    norms = np.linalg.norm(J, axis=0)
    if np.any(norms == 0) or not np.all(np.isfinite(J)):
        raise SingularCovarianceError("Jacobian has a zero column", stage="estimate_errors")
    Js = J / norms
    u, sv, vt = np.linalg.svd(Js, full_matrices=False)
    if sv[-1] <= sv[0] * 1e-13:
        raise SingularCovarianceError(
            f"Jacobian is rank-deficient (condition {sv[0] / max(sv[-1], 1e-300):.2e})",
            stage="estimate_errors",
        )
    cov_s = (vt.T / sv**2) @ vt
    cov = cov_s / np.outer(norms, norms) * s2
    # alpha = alpha_ref + 2 pi f_ref tau
    T = np.eye(7)
    T[5, 6] = 2.0 * np.pi * f_ref
    cov = T @ cov @ T.T
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    errors = {name: float(v) for name, v in zip(PARAM_NAMES, se)}

    q_i = internal_q(params.q_l, params.q_c_mag, params.phi)
    grad = np.zeros(7)
    grad[1] = q_i**2 / params.q_l**2
    grad[2] = -(q_i**2) * math.cos(params.phi) / params.q_c_mag**2
    grad[3] = -(q_i**2) * math.sin(params.phi) / params.q_c_mag
    q_i_err = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    return errors, q_i_err


# ---------------------------------------------------------------------------
# full pipeline


def fit_resonance(trace: ComplexTransmissionTrace, refine_joint: bool = True,
                  max_iter: int = MAX_ITER) -> ResonatorFitResult:
    """Full circle-fit pipeline on one windowed resonance.

    Any failure raises a :class:`~resq.errors.ResqError` whose ``stage``
    attribute names the failing step.
    """
    stage = "remove_delay"
    try:
        corrected, tau = remove_delay(trace)
        stage = "fit_circle"
        circle = fit_circle(corrected.s21)
        scale = float(np.max(np.abs(corrected.s21)))
        if circle.radius < 1e-9 * scale:
            raise DegenerateTraceError("no resonance: fitted circle radius is negligible")
        stage = "fit_phase"
        f_r, q_l, theta0 = fit_phase(corrected, circle, max_iter=max_iter)
        stage = "extract_params"
        params = _staged_params(trace, tau, circle, f_r, q_l, theta0)
        if refine_joint:
            stage = "refine"
            params = refine(params, trace, max_iter=max_iter)
        stage = "estimate_errors"
        return _result_from(params, trace)
    except ResqError as exc:
        if exc.stage is None:
            exc.stage = stage
        raise


def filter_by_error(results: Iterable[ResonatorFitResult],
                    threshold: float = DEFAULT_DISCARD_THRESHOLD) -> List[ResonatorFitResult]:
    """Keep results whose relative Q_i standard error is at most ``threshold``."""
    if not threshold >= 0:
        raise ValueError("threshold must be >= 0")
    return [r for r in results if r.q_i_rel_error <= threshold]
