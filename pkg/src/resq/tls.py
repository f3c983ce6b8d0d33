"""Photon-number binning and the power-dependent TLS loss model.

    delta(n) = F*delta_TLS / sqrt(1 + (n / n_c)**beta) + delta_0

with delta = 1/Q_i. Only the product F*delta_TLS is identifiable from Q
data, so it is stored as one parameter (``f_delta_tls``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from .errors import ConvergenceError, EmptyResultError, ValidationError

TLS_NAMES = ("f_delta_tls", "delta0", "n_c", "beta")
N_C_BOUNDS = (1e-4, 1e8)
BETA_BOUNDS = (1e-6, 2.0)
MAX_ITER = 1000


@dataclass(frozen=True)
class PhotonPoint:
    n: float
    q_i: float
    q_i_rel_error: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.n) and self.n > 0):
            raise ValidationError(f"photon number must be finite and > 0, got {self.n!r}")
        if not (math.isfinite(self.q_i) and self.q_i > 0):
            raise ValidationError(f"q_i must be finite and > 0, got {self.q_i!r}")
        if not self.q_i_rel_error >= 0:
            raise ValidationError("q_i_rel_error must be >= 0")


@dataclass(frozen=True)
class CurveBin:
    n_center: float
    mean_q_i: float
    std_q_i: float = 0.0
    count: int = 1

    def as_dict(self):
        return {"n_center": self.n_center, "mean_q_i": self.mean_q_i,
                "std_q_i": self.std_q_i, "count": self.count}


@dataclass(frozen=True)
class EnsembleCurve:
    """Photon-number binned <Q_i>(n), bins sorted by ``n_center``."""

    bins: Tuple[CurveBin, ...]

    def __post_init__(self):
        bins = tuple(b if isinstance(b, CurveBin) else CurveBin(**b) for b in self.bins)
        n = [b.n_center for b in bins]
        if any(not (x > 0 and math.isfinite(x)) for x in n):
            raise ValidationError("n_center values must be finite and > 0")
        if any(b >= a for a, b in zip(n[1:], n[:-1])):
            raise ValidationError("n_center must be strictly increasing")
        for b in bins:
            if b.count < 1:
                raise ValidationError("every bin needs count >= 1")
            if not (b.std_q_i >= 0) or not (b.mean_q_i > 0):
                raise ValidationError("bins need mean_q_i > 0 and std_q_i >= 0")
        object.__setattr__(self, "bins", bins)

    def __len__(self):
        return len(self.bins)

    @property
    def n(self) -> np.ndarray:
        return np.array([b.n_center for b in self.bins])

    @property
    def mean_q_i(self) -> np.ndarray:
        return np.array([b.mean_q_i for b in self.bins])

    @property
    def std_q_i(self) -> np.ndarray:
        return np.array([b.std_q_i for b in self.bins])

    @property
    def count(self) -> np.ndarray:
        return np.array([b.count for b in self.bins], dtype=int)

    @classmethod
    def from_arrays(cls, n, mean_q_i, std_q_i=None, count=None) -> "EnsembleCurve":
        n = np.asarray(n, dtype=float)
        q = np.asarray(mean_q_i, dtype=float)
        s = np.zeros_like(q) if std_q_i is None else np.asarray(std_q_i, dtype=float)
        c = np.ones(q.size, dtype=int) if count is None else np.asarray(count, dtype=int)
        return cls(tuple(CurveBin(float(a), float(b), float(d), int(e))
                         for a, b, d, e in zip(n, q, s, c)))

    def as_dict(self):
        return {"bins": [b.as_dict() for b in self.bins]}


@dataclass(frozen=True)
class TLSParams:
    f_delta_tls: float
    delta0: float
    n_c: float
    beta: float
    std_errors: Dict[str, float] = field(default_factory=dict)
    warnings: Tuple[str, ...] = ()

    def __post_init__(self):
        if not (self.f_delta_tls >= 0 and self.delta0 >= 0):
            raise ValidationError("f_delta_tls and delta0 must be >= 0")
        if not (self.n_c > 0 and math.isfinite(self.n_c)):
            raise ValidationError("n_c must be finite and > 0")
        if not (0 < self.beta <= 2):
            raise ValidationError("beta must lie in (0, 2]")

    @property
    def values(self) -> Tuple[float, float, float, float]:
        return (self.f_delta_tls, self.delta0, self.n_c, self.beta)

    def as_dict(self):
        return {"f_delta_tls": self.f_delta_tls, "delta0": self.delta0, "n_c": self.n_c,
                "beta": self.beta, "std_errors": dict(self.std_errors),
                "warnings": list(self.warnings)}


@dataclass(frozen=True)
class BinningScheme:
    """Log-spaced bins with edges at 10**(k / per_decade)."""

    per_decade: int = 5

    def __post_init__(self):
        if self.per_decade < 1:
            raise ValidationError("per_decade must be >= 1")

    @classmethod
    def parse(cls, spec: str) -> "BinningScheme":
        kind, _, value = spec.partition(":")
        if kind != "log" or not value:
            raise ValidationError(f"binning spec must look like 'log:<per-decade>', got {spec!r}")
        try:
            return cls(int(value))
        except ValueError as exc:
            raise ValidationError(f"bad bins-per-decade {value!r}") from exc

    def index(self, n):
        return np.floor(np.log10(np.asarray(n, dtype=float)) * self.per_decade).astype(int)

    def center(self, k):
        return 10.0 ** ((np.asarray(k, dtype=float) + 0.5) / self.per_decade)


# ---------------------------------------------------------------------------


def bin_by_photon(points: Sequence[PhotonPoint], scheme: BinningScheme = BinningScheme()) -> EnsembleCurve:
    """Arithmetic mean and population std of Q_i per log-spaced photon bin.

    ``n_center`` is the geometric mean of the member photon numbers, so a
    bin holding a single point reproduces that point exactly.
    """
    if not len(points):
        raise EmptyResultError("no photon points to bin")
    n = np.array([p.n for p in points])
    q = np.array([p.q_i for p in points])
    k = scheme.index(n)
    bins = []
    for key in np.unique(k):
        sel = q[k == key]
        center = float(np.exp(np.log(n[k == key]).mean()))
        bins.append(CurveBin(center, float(sel.mean()),
                             float(sel.std()), int(sel.size)))
    return EnsembleCurve(tuple(bins))


def tls_delta(n, p: TLSParams):
    """Loss tangent at photon number ``n`` (scalar or array)."""
    f_delta, delta0, n_c, beta = p.values if isinstance(p, TLSParams) else p
    n = np.asarray(n, dtype=float)
    out = f_delta / np.sqrt(1.0 + (n / n_c) ** beta) + delta0
    return float(out) if out.ndim == 0 else out


def _model_and_jac(x, n, scale):
    fd, d0, lg_nc, beta = x
    n_c = 10.0**lg_nc
    q = (n / n_c) ** beta
    g = 1.0 / np.sqrt(1.0 + q)
    m = scale * (fd * g + d0)
    J = np.empty((n.size, 4))
    g3 = g * g * g
    J[:, 0] = scale * g
    J[:, 1] = scale
    J[:, 2] = scale * fd * beta * q * math.log(10.0) * 0.5 * g3
    J[:, 3] = -scale * fd * 0.5 * g3 * q * np.log(n / n_c)
    return m, J


def _delta_sigma(curve: EnsembleCurve) -> np.ndarray:
    """Per-bin sigma of delta = 1/<Q_i> by first-order propagation.

    Bins without a usable spread (singletons, zero std) get the median sigma
    of the others. If no bin has a spread, all bins get a relative sigma
    equal to their delta."""
    q = curve.mean_q_i
    s = curve.std_q_i
    delta = 1.0 / q
    sig = s / q**2
    ok = (curve.count > 1) & (s > 0)
    if not np.any(ok):
        return delta.copy()
    sig = np.where(ok, sig, np.median(sig[ok]))
    return sig


def _initial_guess(n, delta):
    order = np.argsort(n)
    n, delta = n[order], delta[order]
    d0 = float(delta[-1])
    fd = float(max(delta[0] - d0, 0.0))
    if fd > 0:
        target = d0 + fd / math.sqrt(2.0)
        below = np.nonzero(delta <= target)[0]
        if below.size and below[0] > 0:
            i = below[0]
            # log-linear interpolation between the bracketing samples
            t = (delta[i - 1] - target) / (delta[i - 1] - delta[i])
            n_c = 10 ** (math.log10(n[i - 1]) + t * (math.log10(n[i]) - math.log10(n[i - 1])))
        else:
            n_c = math.sqrt(n[0] * n[-1])
    else:
        n_c = math.sqrt(n[0] * n[-1])
    return fd, d0, float(np.clip(n_c, *N_C_BOUNDS)), 0.5


def _solve(x0, n, delta, sigma, scale, max_iter):
    def fun(x):
        return (_model_and_jac(x, n, scale)[0] - delta) / sigma

    def jac(x):
        return _model_and_jac(x, n, scale)[1] / sigma[:, None]

    lo = [0.0, 0.0, math.log10(N_C_BOUNDS[0]), BETA_BOUNDS[0]]
    hi = [np.inf, np.inf, math.log10(N_C_BOUNDS[1]), BETA_BOUNDS[1]]
    x0 = np.clip(x0, lo, hi)
    return least_squares(fun, x0, jac=jac, bounds=(lo, hi), method="trf", xtol=1e-12,
                         ftol=1e-15, gtol=1e-15, max_nfev=max_iter)


def fit_tls(curve: EnsembleCurve, init: Optional[TLSParams] = None,
            max_iter: int = MAX_ITER) -> TLSParams:
    """Weighted bounded least squares of delta = 1/<Q_i> against the TLS model.

    Standard errors come from the Jacobian covariance scaled by the reduced
    chi-square. A warning is attached (``TLSParams.warnings``) when n_c or
    beta is not identifiable, i.e. its standard error exceeds its value, and
    when there are fewer than 5 bins or less than two decades of n.
    """
    if len(curve) == 0:
        raise EmptyResultError("empty curve")
    n = curve.n
    delta = 1.0 / curve.mean_q_i
    sigma = _delta_sigma(curve)
    scale = float(delta.max())
    if init is None:
        fd, d0, n_c, beta = _initial_guess(n, delta)
    else:
        fd, d0, n_c, beta = init.values
    if fd <= 0:
        fd = 1e-6 * scale
    x0 = np.array([fd / scale, d0 / scale, math.log10(n_c), beta])

    sol = _solve(x0, n, delta, sigma, scale, max_iter)
    if sol.status <= 0:
        # multi-start from log-perturbed initializations
        rng = np.random.default_rng(0)
        best = None
        for _ in range(8):
            xs = x0 * np.r_[10 ** rng.uniform(-0.5, 0.5, 2), 1.0, 1.0]
            xs[2] = x0[2] + rng.uniform(-2, 2)
            xs[3] = float(np.clip(x0[3] * 10 ** rng.uniform(-0.5, 0.5), 0.05, 2.0))
            cand = _solve(xs, n, delta, sigma, scale, max_iter)
            if cand.status > 0 and (best is None or cand.cost < best.cost):
                best = cand
        if best is None:
            raise ConvergenceError(f"TLS fit did not converge within {max_iter} evaluations",
                                   stage="fit_tls")
        sol = best

    x = sol.x
    m = n.size
    warnings: List[str] = []
    J = sol.jac
    dof = m - 4
    se_x = np.full(4, np.inf)
    if dof > 0:
        s2 = 2.0 * sol.cost / dof
        norms = np.linalg.norm(J, axis=0)
        # a numerically null column means the data carry no information on it
        good = norms > 1e-8 * norms.max()
        if np.any(good):
            Js = J[:, good] / norms[good]
            _, sv, vt = np.linalg.svd(Js, full_matrices=False)
            keep = sv > sv[0] * 1e-10
            if np.all(keep):
                cov_s = (vt.T / sv**2) @ vt
                se_good = np.sqrt(np.clip(np.diag(cov_s), 0, None) * s2) / norms[good]
                se_x[good] = se_good
    else:
        warnings.append(f"only {m} bins for 4 parameters; parameters are not identifiable")
    if m < 5:
        warnings.append(f"curve has {m} bins; at least 5 are recommended")
    if m >= 2 and math.log10(n.max() / n.min()) < 2:
        warnings.append("curve spans less than two decades in photon number")

    f_delta = float(x[0] * scale)
    delta0 = float(x[1] * scale)
    n_c = float(10.0 ** x[2])
    beta = float(x[3])
    std = {
        "f_delta_tls": float(se_x[0] * scale),
        "delta0": float(se_x[1] * scale),
        "n_c": float(n_c * math.log(10.0) * se_x[2]),
        "beta": float(se_x[3]),
    }
    if not std["n_c"] <= n_c:
        warnings.append("n_c is not identifiable: its standard error exceeds its value")
    if not std["beta"] <= beta:
        warnings.append("beta is not identifiable: its standard error exceeds its value")
    return TLSParams(f_delta, delta0, n_c, beta, std, tuple(warnings))


def low_power_q(curve: EnsembleCurve, target_n: float = 1.0) -> Tuple[float, float]:
    """(mean, std) of the bin closest to ``target_n`` in log distance; ties go
    to the lower-n bin."""
    if len(curve) == 0:
        raise EmptyResultError("empty curve")
    dist = np.abs(np.log(curve.n) - math.log(target_n))
    # round so that mathematically equal log distances tie exactly
    dist = np.round(dist, 12)
    i = int(np.argmin(dist))  # first minimum is the lowest n
    b = curve.bins[i]
    return b.mean_q_i, b.std_q_i


def exclude_nonlinear(curve: EnsembleCurve, k: int) -> EnsembleCurve:
    """Drop the ``k`` highest-n bins."""
    if k < 0:
        raise ValidationError("k must be >= 0")
    if k >= len(curve):
        raise EmptyResultError(f"excluding {k} bins leaves nothing of a {len(curve)}-bin curve")
    if k == 0:
        return curve
    return EnsembleCurve(curve.bins[: len(curve) - k])


def compare_losses(before: TLSParams, after: TLSParams) -> Dict[str, Optional[float]]:
    """Relative change (after - before) / before per parameter; ``None`` when
    the before-value is zero."""
    out: Dict[str, Optional[float]] = {}
    for name, b, a in zip(TLS_NAMES, before.values, after.values):
        out[name] = None if b == 0 else (a - b) / b
    return out
