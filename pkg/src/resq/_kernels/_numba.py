"""numba-compiled kernels; same signatures and results as ``_numpy``."""

import math

import numpy as np
from numba import njit

NAME = "numba"

_FOUR_LN2 = 4.0 * math.log(2.0)


@njit(cache=True)
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
    r = math.sqrt(cx * cx + cy * cy + mz)
    return cx + xm, cy + ym, r, degeneracy


@njit(cache=True)
def _moments(x, y):
    n = x.size
    xm = 0.0
    ym = 0.0
    for i in range(n):
        xm += x[i]
        ym += y[i]
    xm /= n
    ym /= n
    mxx = myy = mxy = mxz = myz = mzz = 0.0
    for i in range(n):
        xi = x[i] - xm
        yi = y[i] - ym
        zi = xi * xi + yi * yi
        mxx += xi * xi
        myy += yi * yi
        mxy += xi * yi
        mxz += xi * zi
        myz += yi * zi
        mzz += zi * zi
    return xm, ym, mxx / n, myy / n, mxy / n, mxz / n, myz / n, mzz / n


@njit(cache=True)
def taubin_circle(x, y):
    xm, ym, mxx, myy, mxy, mxz, myz, mzz = _moments(x, y)
    return _taubin_solve(xm, ym, mxx, myy, mxy, mxz, myz, mzz)


@njit(cache=True)
def circle_rms(x, y, xc, yc, r):
    s = 0.0
    for i in range(x.size):
        d = math.hypot(x[i] - xc, y[i] - yc) - r
        s += d * d
    return math.sqrt(s / x.size)


@njit(cache=True)
def delay_scan(f_rel, zr, zi, tau0, dtau, count):
    n = f_rel.size
    out = np.empty(count)
    x = np.empty(n)
    y = np.empty(n)
    # rotation e^{2 pi i tau f} advanced by recurrence along the tau grid,
    # resynchronized exactly every 128 steps to bound round-off drift
    rr = np.empty(n)
    ri = np.empty(n)
    sr = np.empty(n)
    si = np.empty(n)
    for i in range(n):
        w = 2.0 * math.pi * dtau * f_rel[i]
        sr[i] = math.cos(w)
        si[i] = math.sin(w)
    for j in range(count):
        if j % 128 == 0:
            tau = tau0 + j * dtau
            for i in range(n):
                w = 2.0 * math.pi * tau * f_rel[i]
                rr[i] = math.cos(w)
                ri[i] = math.sin(w)
        xm = 0.0
        ym = 0.0
        for i in range(n):
            xv = zr[i] * rr[i] - zi[i] * ri[i]
            yv = zr[i] * ri[i] + zi[i] * rr[i]
            x[i] = xv
            y[i] = yv
            xm += xv
            ym += yv
            t = rr[i] * sr[i] - ri[i] * si[i]
            ri[i] = rr[i] * si[i] + ri[i] * sr[i]
            rr[i] = t
        xm /= n
        ym /= n
        mxx = myy = mxy = mxz = myz = mzz = 0.0
        for i in range(n):
            xi = x[i] - xm
            yi = y[i] - ym
            zi2 = xi * xi + yi * yi
            mxx += xi * xi
            myy += yi * yi
            mxy += xi * yi
            mxz += xi * zi2
            myz += yi * zi2
            mzz += zi2 * zi2
        xc, yc, r, _ = _taubin_solve(xm, ym, mxx / n, myy / n, mxy / n, mxz / n, myz / n, mzz / n)
        out[j] = circle_rms(x, y, xc, yc, r)
    return out


@njit(cache=True)
def _notch_kernel(p, f, zr, zi, f_ref, jac, res, J):
    fr, ql, qc, phi, a, alpha_ref, tau = p[0], p[1], p[2], p[3], p[4], p[5], p[6]
    n = f.size
    eiphi = complex(math.cos(phi), math.sin(phi))
    k = (ql / qc) * eiphi
    for i in range(n):
        df = f[i] - f_ref
        ang = alpha_ref - 2.0 * math.pi * df * tau
        env = a * complex(math.cos(ang), math.sin(ang))
        x = f[i] / fr - 1.0
        d = complex(1.0, 2.0 * ql * x)
        kd = k / d
        m = env * (1.0 - kd)
        res[i] = m.real - zr[i]
        res[n + i] = m.imag - zi[i]
        if jac:
            c0 = -env * kd / d * complex(0.0, 2.0 * ql * f[i] / (fr * fr))
            c1 = -env * (eiphi / qc / d - kd / d * complex(0.0, 2.0 * x))
            c2 = env * kd / qc
            c3 = -env * 1j * kd
            c4 = m / a
            c5 = 1j * m
            c6 = complex(0.0, -2.0 * math.pi * df) * m
            J[i, 0] = c0.real
            J[i, 1] = c1.real
            J[i, 2] = c2.real
            J[i, 3] = c3.real
            J[i, 4] = c4.real
            J[i, 5] = c5.real
            J[i, 6] = c6.real
            J[n + i, 0] = c0.imag
            J[n + i, 1] = c1.imag
            J[n + i, 2] = c2.imag
            J[n + i, 3] = c3.imag
            J[n + i, 4] = c4.imag
            J[n + i, 5] = c5.imag
            J[n + i, 6] = c6.imag


def notch_residuals(p, f, zr, zi, f_ref, jac):
    n = f.size
    res = np.empty(2 * n)
    J = np.empty((2 * n, 7)) if jac else np.empty((0, 7))
    _notch_kernel(np.asarray(p, dtype=np.float64), f, zr, zi, float(f_ref), bool(jac), res, J)
    return res, (J if jac else None)


@njit(cache=True)
def _pv_kernel(x, center, fwhm, eta, amplitude, background, jac, val, J):
    for i in range(x.size):
        u = (x[i] - center) / fwhm
        u2 = u * u
        lor = 1.0 / (1.0 + 4.0 * u2)
        gau = math.exp(-_FOUR_LN2 * u2)
        shape = eta * lor + (1.0 - eta) * gau
        val[i] = amplitude * shape + background
        if jac:
            dshape_du = eta * (-8.0 * u * lor * lor) + (1.0 - eta) * (-2.0 * _FOUR_LN2 * u * gau)
            J[i, 0] = amplitude * dshape_du * (-1.0 / fwhm)
            J[i, 1] = amplitude * dshape_du * (-u / fwhm)
            J[i, 2] = amplitude * (lor - gau)
            J[i, 3] = shape
            J[i, 4] = 1.0


def pseudo_voigt(x, center, fwhm, eta, amplitude, background, jac):
    val = np.empty(x.size)
    J = np.empty((x.size, 5)) if jac else np.empty((0, 5))
    _pv_kernel(x, float(center), float(fwhm), float(eta), float(amplitude), float(background),
               bool(jac), val, J)
    return val, (J if jac else None)


@njit(cache=True)
def _split_kernel(y, start, stop, min_len):
    n = stop - start
    if n < 2 * min_len:
        return -1, 0.0
    mean = 0.0
    for i in range(start, stop):
        mean += y[i]
    mean /= n
    best_k = -1
    best = -1.0
    left = 0.0
    for k in range(1, n - min_len + 1):
        left += y[start + k - 1] - mean
        if k < min_len:
            continue
        g = left * left * n / (k * (n - k))
        if g > best:
            best = g
            best_k = k
    return start + best_k, best


def best_split(y, start, stop, min_len):
    idx, gain = _split_kernel(y, int(start), int(stop), int(min_len))
    return int(idx), float(gain)
