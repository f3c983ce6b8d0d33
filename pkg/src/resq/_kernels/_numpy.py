"""Pure-numpy kernels. Reference path and fallback when numba is disabled."""

import numpy as np

NAME = "numpy"

_FOUR_LN2 = 4.0 * np.log(2.0)


def taubin_circle(x, y):
    """Taubin algebraic circle fit (Newton iteration on the characteristic
    polynomial). Returns ``(xc, yc, r, degeneracy)`` where ``degeneracy`` is
    the normalized determinant of the centered scatter matrix; it is ~0 for
    collinear input."""
    xm = x.mean()
    ym = y.mean()
    xi = x - xm
    yi = y - ym
    zi = xi * xi + yi * yi
    mxy = np.mean(xi * yi)
    mxx = np.mean(xi * xi)
    myy = np.mean(yi * yi)
    mxz = np.mean(xi * zi)
    myz = np.mean(yi * zi)
    mzz = np.mean(zi * zi)
    return _taubin_solve(xm, ym, mxx, myy, mxy, mxz, myz, mzz)


def _taubin_solve(xm, ym, mxx, myy, mxy, mxz, myz, mzz):
    mz = mxx + myy
    cov_xy = mxx * myy - mxy * mxy
    if mz <= 0.0:
        return xm, ym, 0.0, 0.0
    degeneracy = cov_xy / (mz * mz)
    a3 = 4.0 * mz
    a2 = -3.0 * mz * mz - mzz
    a1 = mzz * mz + 4.0 * cov_xy * mz - mxz * mxz - myz * myz - mz * mz * mz
    a0 = mxz * mxz * myy + myz * myz * mxx - mzz * cov_xy - 2.0 * mxz * myz * mxy + mz * mz * cov_xy
    a22 = a2 + a2
    a33 = a3 + a3 + a3
    xnew = 0.0
    ynew = 1e300
    for _ in range(100):
        yold = ynew
        ynew = a0 + xnew * (a1 + xnew * (a2 + xnew * a3))
        if abs(ynew) > abs(yold):
            xnew = 0.0
            break
        dy = a1 + xnew * (a22 + xnew * a33)
        if dy == 0.0:
            break
        xold = xnew
        xnew = xold - ynew / dy
        if xnew == 0.0 or abs((xnew - xold) / xnew) < 1e-14:
            break
        if xnew < 0.0:
            xnew = 0.0
            break
    det = xnew * xnew - xnew * mz + cov_xy
    if det == 0.0:
        return xm, ym, np.inf, degeneracy
    cx = (mxz * (myy - xnew) - myz * mxy) / det / 2.0
    cy = (myz * (mxx - xnew) - mxz * mxy) / det / 2.0
    r = np.sqrt(cx * cx + cy * cy + mz)
    return cx + xm, cy + ym, r, degeneracy


def circle_rms(x, y, xc, yc, r):
    d = np.hypot(x - xc, y - yc) - r
    return np.sqrt(np.mean(d * d))


def delay_scan(f_rel, zr, zi, tau0, dtau, count):
    """Geometric RMS residual of the Taubin circle after removing each delay
    on the grid ``tau0 + j*dtau``, j < count. ``f_rel`` should be centered on
    the sweep so the rotation angles stay small."""
    taus = tau0 + dtau * np.arange(count)
    out = np.empty(taus.size)
    z = zr + 1j * zi
    chunk = max(1, 2_000_000 // max(f_rel.size, 1))
    for s in range(0, taus.size, chunk):
        t = taus[s:s + chunk]
        rot = z[None, :] * np.exp(2j * np.pi * t[:, None] * f_rel[None, :])
        x = rot.real
        y = rot.imag
        xm = x.mean(axis=1, keepdims=True)
        ym = y.mean(axis=1, keepdims=True)
        xi = x - xm
        yi = y - ym
        zz = xi * xi + yi * yi
        mxx = np.mean(xi * xi, axis=1)
        myy = np.mean(yi * yi, axis=1)
        mxy = np.mean(xi * yi, axis=1)
        mxz = np.mean(xi * zz, axis=1)
        myz = np.mean(yi * zz, axis=1)
        mzz = np.mean(zz * zz, axis=1)
        for j in range(t.size):
            xc, yc, r, _ = _taubin_solve(
                xm[j, 0], ym[j, 0], mxx[j], myy[j], mxy[j], mxz[j], myz[j], mzz[j]
            )
            out[s + j] = circle_rms(x[j], y[j], xc, yc, r)
    return out


def notch_residuals(p, f, zr, zi, f_ref, jac):
    """Stacked (real, imag) residuals of the notch model against data, and
    optionally the (2N, 7) Jacobian. ``p`` is
    ``(f_r, q_l, q_c_mag, phi, a, alpha_ref, tau)`` with the baseline phase
    referenced to ``f_ref``."""
    fr, ql, qc, phi, a, alpha_ref, tau = p
    n = f.size
    df = f - f_ref
    env = a * np.exp(1j * (alpha_ref - 2.0 * np.pi * df * tau))
    x = f / fr - 1.0
    d = 1.0 + 2j * ql * x
    k = (ql / qc) * np.exp(1j * phi)
    kd = k / d
    m = env * (1.0 - kd)
    res = np.empty(2 * n)
    res[:n] = m.real - zr
    res[n:] = m.imag - zi
    if not jac:
        return res, None
    cols = np.empty((7, n), dtype=np.complex128)
    cols[0] = -env * kd / d * (2j * ql * f / (fr * fr))
    cols[1] = -env * (np.exp(1j * phi) / qc / d - kd / d * (2j * x))
    cols[2] = env * kd / qc
    cols[3] = -env * 1j * kd
    cols[4] = m / a
    cols[5] = 1j * m
    cols[6] = -2j * np.pi * df * m
    J = np.empty((2 * n, 7))
    J[:n] = cols.real.T
    J[n:] = cols.imag.T
    return res, J


def pseudo_voigt(x, center, fwhm, eta, amplitude, background, jac):
    """Shared-FWHM linear-mix pseudo-Voigt with unit-height components.
    Jacobian columns are ordered (center, fwhm, eta, amplitude, background)."""
    u = (x - center) / fwhm
    u2 = u * u
    lor = 1.0 / (1.0 + 4.0 * u2)
    gau = np.exp(-_FOUR_LN2 * u2)
    shape = eta * lor + (1.0 - eta) * gau
    val = amplitude * shape + background
    if not jac:
        return val, None
    # d shape / d u
    dlor = -8.0 * u * lor * lor
    dgau = -2.0 * _FOUR_LN2 * u * gau
    dshape_du = eta * dlor + (1.0 - eta) * dgau
    J = np.empty((x.size, 5))
    J[:, 0] = amplitude * dshape_du * (-1.0 / fwhm)
    J[:, 1] = amplitude * dshape_du * (-u / fwhm)
    J[:, 2] = amplitude * (lor - gau)
    J[:, 3] = shape
    J[:, 4] = 1.0
    return val, J


def best_split(y, start, stop, min_len):
    """Best single change point in ``y[start:stop]`` by squared-error gain.

    Returns ``(index, gain)``; ``index`` is the first sample of the right-hand
    segment, or -1 when no split leaves ``min_len`` samples on both sides."""
    seg = y[start:stop]
    n = seg.size
    if n < 2 * min_len:
        return -1, 0.0
    cs = np.concatenate(([0.0], np.cumsum(seg - seg.mean())))
    k = np.arange(min_len, n - min_len + 1)
    left = cs[k]
    # SSE reduction from splitting at k (segment centered, so right sum = -left)
    gain = left * left * n / (k * (n - k))
    j = int(np.argmax(gain))
    return start + int(k[j]), float(gain[j])
