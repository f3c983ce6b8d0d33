"""Deterministic synthetic data for every analysis stage.

All randomness comes from ``numpy.random.Generator(PCG64)`` seeded through
``numpy.random.SeedSequence(seed)``, which is reproducible across platforms.
Generators that emit several traces give trace ``i`` the child seed
``SeedSequence(seed).spawn(count)[i]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConvergenceError, MalformedStepsError, ValidationError
from .model import (
    AttenuationChain,
    ComplexTransmissionTrace,
    NotchModelParams,
    coupling_q,
    input_power,
    loaded_q,
    photon_number,
    s21_notch,
)
from .tls import TLSParams, tls_delta
from .transport import ResistanceTrace
from .xrd import DiffractionScan, PseudoVoigtParams, pseudo_voigt

NOISE_KINDS = ("none", "complex-gaussian", "multiplicative", "poisson-like")


@dataclass(frozen=True)
class NoiseSpec:
    """``sigma`` is relative: to the baseline amplitude ``a`` for complex
    Gaussian noise (E|noise|^2 = (sigma a)^2), to the value for multiplicative
    noise, and a multiplier of sqrt(intensity) for poisson-like noise."""

    kind: str = "none"
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValidationError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if not self.sigma >= 0:
            raise ValidationError("noise sigma must be >= 0")

    def rng(self):
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))

    def spawn(self, count: int) -> List["NoiseSpec"]:
        """Per-task specs; child ``i`` draws from ``SeedSequence(seed).spawn(count)[i]``."""
        children = np.random.SeedSequence(self.seed).spawn(count)
        return [_ChildNoise(self.kind, self.sigma, self.seed, c) for c in children]

    def as_dict(self):
        return {"kind": self.kind, "sigma": self.sigma, "seed": self.seed}


@dataclass(frozen=True)
class _ChildNoise(NoiseSpec):
    seq: Optional[np.random.SeedSequence] = None

    def rng(self):
        return np.random.Generator(np.random.PCG64(self.seq))


def default_span(params: NotchModelParams, linewidths: float = 20.0) -> float:
    """Sweep width covering ``linewidths`` resonance linewidths (f_r / Q_l)."""
    return linewidths * params.f_r / params.q_l


def gen_trace(params: NotchModelParams, n_points: int = 1001, span: Optional[float] = None,
              noise: NoiseSpec = NoiseSpec(), vna_power: float = 0.0,
              total_attenuation: float = 0.0,
              temperature: Optional[float] = None) -> ComplexTransmissionTrace:
    """Notch-model trace on a uniform grid centered on ``params.f_r``.

    ``span`` defaults to +-10 linewidths.
    """
    if n_points < 16:
        raise ValidationError("n_points must be >= 16")
    if span is None:
        span = default_span(params)
    if not span > 0:
        raise ValidationError("span must be > 0")
    f = params.f_r + np.linspace(-0.5 * span, 0.5 * span, n_points)
    z = s21_notch(params, f)
    if noise.kind == "complex-gaussian" and noise.sigma > 0:
        rng = noise.rng()
        s = noise.sigma * params.a / math.sqrt(2.0)
        z = z + s * (rng.standard_normal(n_points) + 1j * rng.standard_normal(n_points))
    elif noise.kind == "multiplicative" and noise.sigma > 0:
        z = z * (1.0 + noise.sigma * noise.rng().standard_normal(n_points))
    elif noise.kind == "poisson-like":
        raise ValidationError("poisson-like noise is not defined for complex traces")
    return ComplexTransmissionTrace(f, z, vna_power, total_attenuation, temperature)


@dataclass(frozen=True)
class SweepDesign:
    """Power-independent resonator parameters of a power sweep."""

    f_r: float
    q_c_mag: float
    phi: float = 0.0
    a: float = 1.0
    alpha: float = 0.0
    tau: float = 0.0

    def as_dict(self):
        return {"f_r": self.f_r, "q_c_mag": self.q_c_mag, "phi": self.phi, "a": self.a,
                "alpha": self.alpha, "tau": self.tau}


@dataclass(frozen=True)
class SweepOracle:
    vna_power: float
    p_in: float
    n: float
    q_i: float
    q_l: float
    iterations: int
    residual: float


@dataclass(frozen=True)
class PowerSweep:
    traces: Tuple[ComplexTransmissionTrace, ...]
    oracle: Tuple[SweepOracle, ...]
    params: Tuple[NotchModelParams, ...]


def solve_photon_number(p_in: float, tls: TLSParams, design: SweepDesign,
                        qc_convention: str = "magnitude", damping: float = 0.5,
                        max_iter: int = 1000, rtol: float = 1e-9):
    """Self-consistent (n, Q_i) with Q_i = 1/delta(n) and n from the photon
    formula at Q_l(Q_i), by damped fixed-point iteration.

    Returns ``(n, q_i, q_l, iterations, last_relative_step)``.
    """
    qc = coupling_q(design.q_c_mag, design.phi, qc_convention)
    q_i = 1.0 / (tls.f_delta_tls + tls.delta0)
    n = photon_number(p_in, design.f_r, loaded_q(q_i, design.q_c_mag, design.phi), qc)
    step = math.inf
    for it in range(1, max_iter + 1):
        q_i = 1.0 / tls_delta(n, tls)
        target = photon_number(p_in, design.f_r, loaded_q(q_i, design.q_c_mag, design.phi), qc)
        n_new = (1.0 - damping) * n + damping * target
        step = abs(n_new - n) / n if n > 0 else 0.0
        n = n_new
        if step < rtol:
            break
    else:
        raise ConvergenceError(f"photon-number fixed point not reached in {max_iter} steps",
                               stage="gen_power_sweep")
    q_i = 1.0 / tls_delta(n, tls)
    return n, q_i, loaded_q(q_i, design.q_c_mag, design.phi), it, step


def gen_power_sweep(tls: TLSParams, design: SweepDesign, powers: Sequence[float],
                    chain: AttenuationChain, noise: NoiseSpec = NoiseSpec(),
                    n_points: int = 1001, span_linewidths: float = 20.0,
                    qc_convention: str = "magnitude") -> PowerSweep:
    """One notch trace per VNA power (dBm) with the TLS-model Q_i at the
    self-consistent photon number. Trace ``i`` uses child seed ``i``."""
    children = noise.spawn(len(powers))
    traces, oracle, plist = [], [], []
    for p_dbm, child in zip(powers, children):
        p_in = input_power(p_dbm, chain)
        n, q_i, q_l, it, step = solve_photon_number(p_in, tls, design, qc_convention)
        params = NotchModelParams(design.f_r, q_l, design.q_c_mag, design.phi, design.a,
                                  design.alpha, design.tau)
        traces.append(gen_trace(params, n_points, default_span(params, span_linewidths), child,
                                vna_power=float(p_dbm), total_attenuation=chain.total))
        oracle.append(SweepOracle(float(p_dbm), p_in, n, q_i, q_l, it, step))
        plist.append(params)
    return PowerSweep(tuple(traces), tuple(oracle), tuple(plist))


def gen_rocking(p: PseudoVoigtParams, angle_range: Tuple[float, float], n_points: int = 401,
                noise: NoiseSpec = NoiseSpec(), mode: str = "rocking") -> DiffractionScan:
    """Pseudo-Voigt samples on a uniform angle grid; poisson-like noise has
    standard deviation ``sigma * sqrt(intensity)`` and results are clipped at 0."""
    if n_points < 10:
        raise ValidationError("n_points must be >= 10")
    x = np.linspace(angle_range[0], angle_range[1], n_points)
    y = pseudo_voigt(x, p)
    if noise.kind == "poisson-like" and noise.sigma > 0:
        y = y + noise.sigma * np.sqrt(y) * noise.rng().standard_normal(n_points)
    elif noise.kind == "multiplicative" and noise.sigma > 0:
        y = y * (1.0 + noise.sigma * noise.rng().standard_normal(n_points))
    elif noise.kind == "complex-gaussian":
        raise ValidationError("complex-gaussian noise is not defined for diffraction scans")
    return DiffractionScan(x, np.clip(y, 0.0, None), mode)


def gen_rt(steps: Sequence[Tuple[float, float]], normal_resistance: float, noise_floor: float,
           temperatures, noise: NoiseSpec = NoiseSpec()) -> ResistanceTrace:
    """Piecewise-constant R(T).

    Above the first ``t_c`` the trace sits at ``normal_resistance``; below each
    ``(t_c, level)`` step it drops to ``level``. Values are floored at
    ``noise_floor``, so a final level of 0 ends the trace at the floor.
    Optional multiplicative noise.
    """
    t = np.asarray(temperatures, dtype=float)
    tcs = [float(s[0]) for s in steps]
    levels = [float(s[1]) for s in steps]
    if any(b >= a for a, b in zip(tcs[:-1], tcs[1:])):
        raise MalformedStepsError("step temperatures must be strictly decreasing")
    chain = [normal_resistance] + levels
    if any(b >= a for a, b in zip(chain[:-1], chain[1:])):
        raise MalformedStepsError("step levels must strictly decrease from the normal resistance")
    if any(x < 0 for x in levels) or not noise_floor >= 0:
        raise MalformedStepsError("levels and noise floor must be >= 0")
    r = np.full(t.shape, float(normal_resistance))
    for tc, level in zip(tcs, levels):
        r[t < tc] = level
    r = np.maximum(r, noise_floor)
    if noise.kind == "multiplicative" and noise.sigma > 0:
        r = r * (1.0 + noise.sigma * noise.rng().standard_normal(t.size))
    elif noise.kind not in ("none", "multiplicative"):
        raise ValidationError(f"{noise.kind} noise is not defined for R(T) traces")
    return ResistanceTrace(t, r)
