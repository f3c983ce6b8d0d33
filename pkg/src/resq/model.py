"""Notch-type resonator transmission model, Q-factor algebra and photon numbers.

Everything here is a pure function of its arguments. Trace and parameter
containers are frozen dataclasses whose arrays are made read-only, so they
can be shared freely between worker processes and threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import UnphysicalParametersError, ValidationError

HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J / K

MIN_TRACE_POINTS = 16
THERMAL_WARNING_RATIO = 10.0


def _readonly(a, dtype):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ComplexTransmissionTrace:
    """A frequency sweep of complex S21 with its drive-power metadata.

    ``vna_power`` is in dBm at the instrument port, ``total_attenuation`` in dB
    is the sum of the wired attenuators between the port and the device.
    """

    frequencies: np.ndarray
    s21: np.ndarray
    vna_power: float = 0.0
    total_attenuation: float = 0.0
    temperature: Optional[float] = None

    def __post_init__(self):
        f = _readonly(self.frequencies, np.float64)
        z = _readonly(self.s21, np.complex128)
        if f.ndim != 1 or z.ndim != 1:
            raise ValidationError("frequencies and s21 must be one-dimensional")
        if f.size < MIN_TRACE_POINTS:
            raise ValidationError(
                f"trace has {f.size} points; at least {MIN_TRACE_POINTS} are required"
            )
        if z.size != f.size:
            raise ValidationError(
                f"s21 has {z.size} samples but there are {f.size} frequencies"
            )
        if not np.all(np.isfinite(f)):
            raise ValidationError("frequencies must be finite")
        if not np.all(np.diff(f) > 0):
            raise ValidationError("frequencies must be strictly increasing")
        if not np.all(np.isfinite(z)):
            raise ValidationError("s21 samples must be finite")
        if not (self.total_attenuation >= 0):
            raise ValidationError("total_attenuation must be >= 0 dB")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "s21", z)

    def __len__(self):
        return self.frequencies.size

    @property
    def span(self) -> float:
        return float(self.frequencies[-1] - self.frequencies[0])

    def with_s21(self, s21) -> "ComplexTransmissionTrace":
        return ComplexTransmissionTrace(
            self.frequencies, s21, self.vna_power, self.total_attenuation, self.temperature
        )


@dataclass(frozen=True)
class NotchModelParams:
    """Seven-parameter notch resonance.

    f_r [Hz], q_l (loaded Q), q_c_mag (|Q_c|), phi [rad] impedance-mismatch
    rotation, a and alpha [rad] the baseline, tau [s] the electrical delay.
    """

    f_r: float
    q_l: float
    q_c_mag: float
    phi: float = 0.0
    a: float = 1.0
    alpha: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        for name in ("f_r", "q_l", "q_c_mag", "a"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise UnphysicalParametersError(f"{name} must be finite and > 0, got {v!r}")
        if not (abs(self.phi) < math.pi / 2):
            raise UnphysicalParametersError(f"phi must lie in (-pi/2, pi/2), got {self.phi!r}")
        if not (math.isfinite(self.alpha) and math.isfinite(self.tau)):
            raise UnphysicalParametersError("alpha and tau must be finite")
        internal_q(self.q_l, self.q_c_mag, self.phi)

    @property
    def q_i(self) -> float:
        return internal_q(self.q_l, self.q_c_mag, self.phi)

    @classmethod
    def from_internal(cls, f_r, q_i, q_c_mag, phi=0.0, a=1.0, alpha=0.0, tau=0.0):
        """Build parameters from Q_i instead of Q_l."""
        return cls(f_r, loaded_q(q_i, q_c_mag, phi), q_c_mag, phi, a, alpha, tau)

    def as_dict(self) -> dict:
        return {
            "f_r": self.f_r,
            "q_l": self.q_l,
            "q_c_mag": self.q_c_mag,
            "phi": self.phi,
            "a": self.a,
            "alpha": self.alpha,
            "tau": self.tau,
        }


PARAM_NAMES = ("f_r", "q_l", "q_c_mag", "phi", "a", "alpha", "tau")


@dataclass(frozen=True)
class ResonatorFitResult:
    params: NotchModelParams
    q_i: float
    std_errors: dict
    q_i_rel_error: float
    residual_rms: float
    q_i_std_error: float = float("nan")

    def as_dict(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "q_i": self.q_i,
            "std_errors": dict(self.std_errors),
            "q_i_std_error": self.q_i_std_error,
            "q_i_rel_error": self.q_i_rel_error,
            "residual_rms": self.residual_rms,
        }


@dataclass(frozen=True)
class AttenuationChain:
    attenuators: tuple = field(default_factory=tuple)

    def __post_init__(self):
        att = tuple(float(x) for x in self.attenuators)
        if any(not (x >= 0 and math.isfinite(x)) for x in att):
            raise ValidationError("attenuator values must be finite and >= 0 dB")
        object.__setattr__(self, "attenuators", att)

    @property
    def total(self) -> float:
        return math.fsum(self.attenuators)


def s21_notch(params: NotchModelParams, f):
    """Complex transmission of a side-coupled resonator.

    S21 = a e^{i alpha} e^{-2 pi i f tau} [1 - (Q_l/|Q_c|) e^{i phi} / (1 + 2i Q_l (f/f_r - 1))]

    Accepts scalar or array ``f``.
    """
    f = np.asarray(f, dtype=np.float64)
    p = params
    env = p.a * np.exp(1j * (p.alpha - 2.0 * np.pi * f * p.tau))
    dip = (p.q_l / p.q_c_mag) * np.exp(1j * p.phi) / (1.0 + 2j * p.q_l * (f / p.f_r - 1.0))
    out = env * (1.0 - dip)
    return out[()] if out.ndim == 0 else out


def internal_q(q_l: float, q_c_mag: float, phi: float = 0.0) -> float:
    """Q_i from 1/Q_i = 1/Q_l - cos(phi)/|Q_c|."""
    if not (q_l > 0 and q_c_mag > 0):
        raise UnphysicalParametersError("q_l and q_c_mag must be > 0")
    if not (abs(phi) < math.pi / 2):
        raise UnphysicalParametersError("phi must lie in (-pi/2, pi/2)")
    inv = 1.0 / q_l - math.cos(phi) / q_c_mag
    if not inv > 0:
        raise UnphysicalParametersError(
            f"1/q_l - cos(phi)/q_c_mag = {inv:.3e} <= 0; internal Q would be negative or infinite"
        )
    return 1.0 / inv


def loaded_q(q_i: float, q_c_mag: float, phi: float = 0.0) -> float:
    """Inverse of :func:`internal_q` for fixed |Q_c| and phi."""
    return 1.0 / (1.0 / q_i + math.cos(phi) / q_c_mag)


def coupling_q(q_c_mag: float, phi: float = 0.0, convention: str = "magnitude") -> float:
    """Scalar Q_c entering the photon-number formula.

    ``"magnitude"`` uses |Q_c| as fitted, ``"real"`` uses the diameter-corrected
    |Q_c|/cos(phi), i.e. 1/Re(1/Q_c).
    """
    if convention == "magnitude":
        return q_c_mag
    if convention == "real":
        return q_c_mag / math.cos(phi)
    raise ValidationError(f"unknown Q_c convention {convention!r}")


def dbm_to_watt(p_dbm):
    return 1e-3 * 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0)


def input_power(vna_power: float, chain: AttenuationChain | Sequence[float]) -> float:
    """Power at the device [W] from the VNA port power [dBm] and the wired attenuation.

    Cable losses are ignored, so this is an upper bound on the delivered power.
    """
    if not isinstance(chain, AttenuationChain):
        chain = AttenuationChain(tuple(chain))
    return float(dbm_to_watt(vna_power - chain.total))


def photon_number(p_in, f_r: float, q_l: float, q_c_mag: float):
    """Mean intracavity photon number n = 2 Q_l^2 P_in / (hbar w_r^2 Q_c)."""
    w_r = 2.0 * math.pi * f_r
    return 2.0 / (HBAR * w_r**2) * (q_l**2 / q_c_mag) * p_in


def thermal_validity(f_r: float, temperature: float) -> float:
    """hbar w_r / (k_B T). Values below ``THERMAL_WARNING_RATIO`` mean thermal
    photons are no longer negligible."""
    if not (f_r > 0 and temperature > 0):
        raise ValidationError("f_r and temperature must be > 0")
    return HBAR * 2.0 * math.pi * f_r / (K_B * temperature)


def wrap_phase(x):
    """Wrap to (-pi, pi]."""
    y = -((-np.asarray(x) + np.pi) % (2.0 * np.pi) - np.pi)
    return float(y) if np.ndim(y) == 0 else y
