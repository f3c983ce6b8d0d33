"""Superconducting transition detection in resistance-versus-temperature data."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from . import _kernels
from .errors import (
    NoNormalStateError,
    NoTransitionError,
    TooFewPointsError,
    ValidationError,
)

MIN_POINTS = 20
MIN_SEGMENT = 5
MAX_SEGMENTS = 64
CRITERIA = {"midpoint": 0.5, "onset": 0.9, "zero": 0.01}


@dataclass(frozen=True)
class ResistanceTrace:
    """R(T) samples. Temperatures must be strictly monotone in either direction."""

    temperatures: np.ndarray
    resistances: np.ndarray

    def __post_init__(self):
        t = np.array(self.temperatures, dtype=float)
        r = np.array(self.resistances, dtype=float)
        if t.ndim != 1 or t.shape != r.shape:
            raise ValidationError("temperatures and resistances must be 1-D and of equal length")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(r))):
            raise ValidationError("temperatures and resistances must be finite")
        d = np.diff(t)
        if t.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise ValidationError("temperatures must be strictly monotone")
        t.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "temperatures", t)
        object.__setattr__(self, "resistances", r)

    def ascending(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.temperatures.size > 1 and self.temperatures[0] > self.temperatures[-1]:
            return self.temperatures[::-1], self.resistances[::-1]
        return self.temperatures, self.resistances


@dataclass(frozen=True)
class Transition:
    t_c: float
    drop_decades: float


@dataclass(frozen=True)
class TransitionReport:
    transitions: Tuple[Transition, ...]
    normal_resistance: float
    noise_floor: float

    def as_dict(self):
        return {
            "transitions": [{"t_c": t.t_c, "drop_decades": t.drop_decades}
                            for t in self.transitions],
            "normal_resistance": self.normal_resistance,
            "noise_floor": self.noise_floor,
        }


def _segment(y, min_drop, min_len):
    """Greedy binary segmentation. A split is admissible when both sides keep
    ``min_len`` samples and their means differ by at least ``min_drop``."""
    bounds = [0, y.size]
    cache = {}
    while len(bounds) - 1 < MAX_SEGMENTS:
        best = None
        for s, e in zip(bounds[:-1], bounds[1:]):
            if (s, e) not in cache:
                k, gain = _kernels.best_split(y, s, e, min_len)
                ok = k > 0 and abs(y[s:k].mean() - y[k:e].mean()) >= min_drop
                cache[(s, e)] = (k, gain) if ok else None
            cand = cache[(s, e)]
            if cand is not None and (best is None or cand[1] > best[1]):
                best = cand
        if best is None:
            break
        bounds.append(best[0])
        bounds.sort()
    return bounds


def _merge(y, bounds, min_drop):
    segs = [[s, e] for s, e in zip(bounds[:-1], bounds[1:])]
    merged = True
    while merged and len(segs) > 1:
        merged = False
        levels = [y[s:e].mean() for s, e in segs]
        diffs = [abs(b - a) for a, b in zip(levels[:-1], levels[1:])]
        i = int(np.argmin(diffs))
        if diffs[i] < min_drop:
            segs[i][1] = segs[i + 1][1]
            del segs[i + 1]
            merged = True
    return segs


def _crossing(t, y, level, lo, hi, near):
    """Temperature where ``y`` crosses ``level`` between indices lo..hi-1,
    choosing the crossing closest to index ``near``."""
    best = None
    for k in range(lo, hi - 1):
        a, b = y[k] - level, y[k + 1] - level
        if (a < 0) != (b < 0):
            dist = abs(k - (near - 1))
            if best is None or dist < best[0]:
                frac = a / (a - b)
                best = (dist, t[k] + frac * (t[k + 1] - t[k]))
    if best is None:
        return 0.5 * (t[near - 1] + t[near])
    return float(best[1])


def detect_transitions(trace: ResistanceTrace, min_drop_decades: float = 0.3,
                       min_segment: int = MIN_SEGMENT) -> TransitionReport:
    """Locate resistance drops of at least ``min_drop_decades`` on cooling.

    log10(R + eps), with eps the smallest positive resistance as noise-floor
    estimate, is segmented into plateaus; adjacent plateaus closer than
    ``min_drop_decades`` are merged. Each remaining downward step on cooling
    is a transition whose ``t_c`` is where log R crosses the midpoint between
    the two plateau levels.
    """
    if not min_drop_decades > 0:
        raise ValidationError("min_drop_decades must be > 0")
    t, r = trace.ascending()
    if t.size < MIN_POINTS:
        raise TooFewPointsError(f"R(T) trace has {t.size} points; at least {MIN_POINTS} needed")
    pos = r[r > 0]
    if not pos.size:
        raise NoNormalStateError("no positive resistance in trace; it sits entirely at the noise floor")
    eps = float(pos.min())
    top = max(1, int(math.ceil(0.1 * t.size)))
    normal = float(np.median(r[-top:]))
    if not normal > 0:
        raise NoNormalStateError("high-temperature resistance is not positive; no normal state")
    y = np.log10(np.clip(r, 0.0, None) + eps)

    bounds = _segment(y, min_drop_decades, min_segment)
    segs = _merge(y, bounds, min_drop_decades)
    found: List[Transition] = []
    for (s0, e0), (s1, e1) in zip(segs[:-1], segs[1:]):
        lo_level = y[s0:e0].mean()
        hi_level = y[s1:e1].mean()
        drop = hi_level - lo_level
        if drop < min_drop_decades:
            continue
        t_c = _crossing(t, y, 0.5 * (lo_level + hi_level), s0, e1, s1)
        found.append(Transition(t_c, float(drop)))
    found.sort(key=lambda x: -x.t_c)
    return TransitionReport(tuple(found), normal, eps)


def critical_temperature(trace: ResistanceTrace, criterion: str = "midpoint",
                         report: TransitionReport | None = None) -> float:
    """Summary T_c: highest temperature at which R falls below 90 % (onset),
    50 % (midpoint) or 1 % (zero) of the normal-state resistance, linearly
    interpolated between samples."""
    if criterion not in CRITERIA:
        raise ValidationError(f"criterion must be one of {sorted(CRITERIA)}, got {criterion!r}")
    if report is None:
        report = detect_transitions(trace)
    if not report.transitions:
        raise NoTransitionError("no superconducting transition detected")
    t, r = trace.ascending()
    level = CRITERIA[criterion] * report.normal_resistance
    below = np.nonzero(r < level)[0] if criterion != "zero" else np.nonzero(r <= level)[0]
    if not below.size:
        raise NoTransitionError(f"resistance never falls to {CRITERIA[criterion]:.0%} of normal")
    k = int(below[-1])
    if k == t.size - 1:
        return float(t[k])
    # R[k] is below the level, R[k+1] is not
    frac = (level - r[k]) / (r[k + 1] - r[k])
    return float(t[k] + frac * (t[k + 1] - t[k]))
