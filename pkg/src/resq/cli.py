"""Command-line frontend.

Exit codes: 0 success, 1 usage, 2 input/parse, 3 fit/convergence, 4 I/O.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from . import io as rio
from .circlefit import DEFAULT_DISCARD_THRESHOLD, fit_resonance
from .errors import InputOutputError, ParseError, ResqError, ValidationError
from .model import (
    AttenuationChain,
    NotchModelParams,
    THERMAL_WARNING_RATIO,
    coupling_q,
    input_power,
    photon_number,
    thermal_validity,
)
from .synth import NoiseSpec, SweepDesign, gen_power_sweep, gen_rocking, gen_rt, gen_trace
from .tls import (
    BinningScheme,
    PhotonPoint,
    TLSParams,
    bin_by_photon,
    exclude_nonlinear,
    fit_tls,
    low_power_q,
)
from .transport import CRITERIA, critical_temperature, detect_transitions
from .xrd import PseudoVoigtParams, fit_peak, identify_phase, normalize_scan

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_FIT, EXIT_IO = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config_hash(config: dict) -> str:
    blob = json.dumps(rio.jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _provenance(config: dict, inputs: dict, seeds: Optional[dict] = None) -> dict:
    return {
        "tool": "resq",
        "version": __version__,
        "config": config,
        "config_hash": _config_hash(config),
        "inputs": {str(k): v for k, v in inputs.items()},
        "seeds": seeds or {},
    }


def _emit(doc, output):
    if output is None:
        sys.stdout.write(rio.dumps(doc))
    else:
        rio.write_json(output, doc)


def _window(text):
    lo, sep, hi = text.partition(":")
    try:
        if not sep:
            raise ValueError
        lo, hi = float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like lo:hi, got {text!r}") from None
    if not lo < hi:
        raise argparse.ArgumentTypeError(f"window lower bound must be below upper bound: {text!r}")
    return lo, hi


def _bins(text):
    try:
        return BinningScheme.parse(text)
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _nonneg_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a value >= 0, got {text!r}")
    return v


def _nonneg_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 0, got {text!r}")
    return v


def _pos_int(text):
    v = _nonneg_int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("expected an integer >= 1")
    return v


def _seed(text):
    v = _nonneg_int(text)
    if v >= 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


# ---------------------------------------------------------------------------
# fit-trace


def cmd_fit_trace(args) -> int:
    trace = rio.read_trace(args.input, args.format)
    result = fit_resonance(trace)
    config = {"command": "fit-trace", "format": args.format}
    doc = {
        "report_type": "fit-trace",
        "input": str(args.input),
        "result": result.as_dict(),
        "provenance": _provenance(config, {args.input: rio.sha256_file(args.input)}),
    }
    _emit(doc, args.output)
    if args.plot:
        from .plotting import plot_trace

        plot_trace(args.plot, trace, result.params)
    return EXIT_OK


# ---------------------------------------------------------------------------
# power-sweep


def _fit_job(trace):
    """Worker: returns ("ok", result) or ("error", message)."""
    try:
        return "ok", fit_resonance(trace)
    except ResqError as exc:
        return "error", f"{type(exc).__name__}: {exc}"
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return "error", f"{type(exc).__name__}: {exc}"


def _run_fits(traces, jobs):
    if jobs <= 1 or len(traces) <= 1:
        return [_fit_job(t) for t in traces]
    with ProcessPoolExecutor(max_workers=min(jobs, len(traces))) as pool:
        return list(pool.map(_fit_job, traces))


def cmd_power_sweep(args) -> int:
    manifest = rio.read_manifest(args.input)
    base = Path(args.input).parent
    chain = AttenuationChain(manifest.attenuators)
    total_att = chain.total
    inputs = {args.input: rio.sha256_file(args.input)}

    def rel(p):
        return os.path.relpath(p, base)

    loaded, discarded = [], []
    for idx, entry in enumerate(manifest.traces):
        try:
            inputs[rel(entry.path)] = rio.sha256_file(entry.path)
            tr = rio.read_trace(entry.path, args.format, entry.vna_power_dbm, total_att,
                                manifest.temperature_k)
        except ResqError as exc:
            if not args.partial_results:
                raise
            discarded.append((idx, {"path": rel(entry.path), "vna_power_dbm": entry.vna_power_dbm,
                                    "reason": f"unreadable: {exc}"}))
            continue
        loaded.append((idx, entry, tr))

    outcomes = _run_fits([t for _, _, t in loaded], args.jobs)
    warnings: List[str] = []
    results, points = [], []
    for (idx, entry, tr), (status, payload) in zip(loaded, outcomes):
        base_rec = {"path": rel(entry.path), "vna_power_dbm": entry.vna_power_dbm}
        if status != "ok":
            discarded.append((idx, dict(base_rec, reason=f"fit failed: {payload}")))
            continue
        res = payload
        p = res.params
        p_in = input_power(entry.vna_power_dbm, chain)
        n = float(photon_number(p_in, p.f_r, p.q_l, coupling_q(p.q_c_mag, p.phi, args.qc_convention)))
        rec = dict(base_rec, p_in_w=p_in, photon_number=n, fit=res.as_dict())
        if manifest.temperature_k is not None:
            ratio = thermal_validity(p.f_r, manifest.temperature_k)
            rec["thermal_ratio"] = ratio
            if ratio < THERMAL_WARNING_RATIO:
                warnings.append(f"{rec['path']}: hbar*omega/(k_B*T) = {ratio:.3g} < "
                                f"{THERMAL_WARNING_RATIO:g}; thermal population not negligible")
        if not res.q_i_rel_error <= args.discard_rel_err:
            discarded.append((idx, dict(rec, reason=(
                f"relative Q_i error {res.q_i_rel_error:.4g} exceeds threshold "
                f"{args.discard_rel_err:g}"))))
            continue
        results.append((idx, rec))
        points.append(PhotonPoint(n, res.q_i, res.q_i_rel_error))

    results.sort(key=lambda x: x[0])
    discarded.sort(key=lambda x: x[0])
    curve = tls = None
    tls_error = None
    if points:
        curve = bin_by_photon(points, args.bins)
        try:
            fit_curve = exclude_nonlinear(curve, args.exclude_top)
            tls = fit_tls(fit_curve)
        except ResqError as exc:
            tls_error = str(exc)
    else:
        tls_error = "no traces survived filtering"

    config = {
        "command": "power-sweep",
        "format": args.format,
        "bins": f"log:{args.bins.per_decade}",
        "discard_rel_err": args.discard_rel_err,
        "exclude_top": args.exclude_top,
        "partial_results": args.partial_results,
        "qc_convention": args.qc_convention,
        "discard_metric": "relative standard error of Q_i (interpretation of 'fitting error')",
        "manifest": manifest.as_dict(relative_to=base),
    }
    doc = {
        "report_type": "power-sweep",
        "resonator_id": manifest.resonator_id,
        "n_inputs": len(manifest.traces),
        "results": [r for _, r in results],
        "discarded": [d for _, d in discarded],
        "curve": curve.as_dict() if curve is not None else None,
        "excluded_top": args.exclude_top,
        "tls": tls.as_dict() if tls is not None else None,
        "tls_error": tls_error,
        "warnings": warnings,
        "provenance": _provenance(config, inputs, {"tls_multistart": 0}),
    }
    assert len(doc["results"]) + len(doc["discarded"]) == len(manifest.traces)
    _emit(doc, args.output)
    if args.plot and curve is not None and tls is not None:
        from .plotting import plot_tls

        k = args.exclude_top
        kept = exclude_nonlinear(curve, k)
        excl = type(curve)(curve.bins[len(curve) - k:]) if k else None
        plot_tls(args.plot, kept, tls, excl)
    return EXIT_OK


# ---------------------------------------------------------------------------
# tls-fit


def cmd_tls_fit(args) -> int:
    curve = rio.read_curve(args.input)
    kept = exclude_nonlinear(curve, args.exclude_top)
    tls = fit_tls(kept)
    q_lp, q_lp_std = low_power_q(kept)
    excluded = list(curve.bins[len(kept):])
    config = {"command": "tls-fit", "exclude_top": args.exclude_top}
    doc = {
        "report_type": "tls-fit",
        "tls": tls.as_dict(),
        "bins_used": len(kept),
        "excluded_top": args.exclude_top,
        "excluded_bins": [b.as_dict() for b in excluded],
        "low_power_q": {"target_n": 1.0, "mean_q_i": q_lp, "std_q_i": q_lp_std},
        "provenance": _provenance(config, {args.input: rio.sha256_file(args.input)},
                                  {"tls_multistart": 0}),
    }
    _emit(doc, args.output)
    if args.plot:
        from .plotting import plot_tls

        plot_tls(args.plot, kept, tls, type(curve)(tuple(excluded)) if excluded else None)
    return EXIT_OK


# ---------------------------------------------------------------------------
# xrd


def cmd_xrd(args) -> int:
    scan = normalize_scan(rio.read_scan(args.input, args.mode))
    peak = fit_peak(scan, args.window)
    label = identify_phase(peak.center) if args.mode == "theta2theta" else None
    config = {"command": "xrd", "mode": args.mode,
              "window": list(args.window) if args.window else None}
    doc = {
        "report_type": "xrd",
        "mode": args.mode,
        "peak": peak.as_dict(),
        "width_convention": "fwhm",
        "phase": label,
        "provenance": _provenance(config, {args.input: rio.sha256_file(args.input)}),
    }
    _emit(doc, args.output)
    if args.plot:
        from .plotting import plot_peak

        plot_peak(args.plot, scan, peak)
    return EXIT_OK


# ---------------------------------------------------------------------------
# tc


def cmd_tc(args) -> int:
    trace = rio.read_rt(args.input)
    report = detect_transitions(trace)
    t_c = critical_temperature(trace, args.criterion, report) if report.transitions else None
    config = {"command": "tc", "criterion": args.criterion}
    doc = {
        "report_type": "tc",
        **report.as_dict(),
        "criterion": args.criterion,
        "t_c": t_c,
        "provenance": _provenance(config, {args.input: rio.sha256_file(args.input)}),
    }
    _emit(doc, args.output)
    if args.plot:
        from .plotting import plot_rt

        plot_rt(args.plot, trace.temperatures, trace.resistances,
                [t.t_c for t in report.transitions])
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth


def _noise(doc, seed, path) -> NoiseSpec:
    spec = doc.get("noise") or {}
    if not isinstance(spec, dict):
        raise ParseError("'noise' must be an object", path)
    try:
        return NoiseSpec(str(spec.get("kind", "none")), float(spec.get("sigma", 0.0)), seed)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ResqError):
            raise ParseError(str(exc), path) from None
        raise ParseError(f"bad noise spec: {exc}", path) from None


def _grid(spec, path, what):
    if isinstance(spec, list):
        return np.array(spec, dtype=float)
    if isinstance(spec, dict) and {"start", "stop", "count"} <= spec.keys():
        return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["count"]))
    raise ParseError(f"'{what}' must be a list or {{start, stop, count}}", path)


def _notch_params(d, path) -> NotchModelParams:
    try:
        if "q_i" in d and "q_l" not in d:
            return NotchModelParams.from_internal(
                float(d["f_r"]), float(d["q_i"]), float(d["q_c_mag"]), float(d.get("phi", 0.0)),
                float(d.get("a", 1.0)), float(d.get("alpha", 0.0)), float(d.get("tau", 0.0)))
        return NotchModelParams(float(d["f_r"]), float(d["q_l"]), float(d["q_c_mag"]),
                                float(d.get("phi", 0.0)), float(d.get("a", 1.0)),
                                float(d.get("alpha", 0.0)), float(d.get("tau", 0.0)))
    except KeyError as exc:
        raise ParseError(f"params missing key {exc}", path) from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ResqError):
            raise
        raise ParseError(f"bad resonator params: {exc}", path) from None


def _synth_trace(doc, noise, out: Path, path):
    params = _notch_params(doc.get("params", {}), path)
    n_points = int(doc.get("n_points", 1001))
    span = doc.get("span")
    if span is None:
        span = float(doc.get("span_linewidths", 20.0)) * params.f_r / params.q_l
    trace = gen_trace(params, n_points, float(span), noise)
    fmt = doc.get("format", "csv")
    name = "trace.s2p" if fmt == "touchstone" else "trace.csv"
    (rio.write_touchstone if fmt == "touchstone" else rio.write_trace)(out / name, trace)
    return {"files": [name], "params": params.as_dict(), "q_i": params.q_i,
            "n_points": n_points, "span": float(span)}


def _synth_sweep(doc, noise, out: Path, path):
    t = doc.get("tls")
    d = doc.get("design")
    if not isinstance(t, dict) or not isinstance(d, dict):
        raise ParseError("sweep params need 'tls' and 'design' objects", path)
    try:
        tls = TLSParams(float(t["f_delta_tls"]), float(t["delta0"]), float(t["n_c"]),
                        float(t["beta"]))
        design = SweepDesign(float(d["f_r"]), float(d["q_c_mag"]), float(d.get("phi", 0.0)),
                             float(d.get("a", 1.0)), float(d.get("alpha", 0.0)),
                             float(d.get("tau", 0.0)))
    except KeyError as exc:
        raise ParseError(f"sweep params missing key {exc}", path) from None
    powers = [float(p) for p in _grid(doc.get("powers"), path, "powers")]
    chain = AttenuationChain(tuple(doc.get("attenuators", [])))
    sweep = gen_power_sweep(tls, design, powers, chain, noise,
                            int(doc.get("n_points", 1001)),
                            float(doc.get("span_linewidths", 20.0)))
    names = []
    for i, tr in enumerate(sweep.traces):
        name = f"trace_{i:03d}.csv"
        rio.write_trace(out / name, tr)
        names.append(name)
    manifest = rio.SweepManifest(
        tuple(rio.ManifestEntry(out / nm, p) for nm, p in zip(names, powers)),
        chain.attenuators, doc.get("temperature_k"), str(doc.get("resonator_id", "synth")))
    rio.write_manifest(out / "manifest.json", manifest)
    return {
        "files": names + ["manifest.json"],
        "tls": tls.as_dict(),
        "design": design.as_dict(),
        "traces": [
            {"path": nm, "vna_power_dbm": o.vna_power, "p_in_w": o.p_in, "n": o.n, "q_i": o.q_i,
             "q_l": o.q_l, "iterations": o.iterations, "fixed_point_residual": o.residual}
            for nm, o in zip(names, sweep.oracle)
        ],
    }


def _synth_rocking(doc, noise, out: Path, path):
    pk = doc.get("peak")
    if not isinstance(pk, dict):
        raise ParseError("rocking params need a 'peak' object", path)
    try:
        p = PseudoVoigtParams(float(pk["center"]), float(pk["fwhm"]), float(pk.get("eta", 0.5)),
                              float(pk.get("amplitude", 1.0)), float(pk.get("background", 0.0)))
        lo, hi = (float(v) for v in doc["angle_range"])
    except KeyError as exc:
        raise ParseError(f"rocking params missing key {exc}", path) from None
    scan = gen_rocking(p, (lo, hi), int(doc.get("n_points", 401)), noise,
                       str(doc.get("mode", "rocking")))
    rio.write_scan(out / "scan.csv", scan)
    return {"files": ["scan.csv"], "peak": p.as_dict(), "angle_range": [lo, hi]}


def _synth_rt(doc, noise, out: Path, path):
    try:
        steps = [(float(a), float(b)) for a, b in doc.get("steps", [])]
        normal = float(doc["normal_resistance"])
        floor = float(doc["noise_floor"])
    except KeyError as exc:
        raise ParseError(f"rt params missing key {exc}", path) from None
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad steps: {exc}", path) from None
    temps = _grid(doc.get("temperatures"), path, "temperatures")
    trace = gen_rt(steps, normal, floor, temps, noise)
    rio.write_rt(out / "rt.csv", trace)
    return {"files": ["rt.csv"], "steps": steps, "normal_resistance": normal,
            "noise_floor": floor}


_SYNTH = {"trace": _synth_trace, "sweep": _synth_sweep, "rocking": _synth_rocking,
          "rt": _synth_rt}


def cmd_synth(args) -> int:
    doc = rio.read_params(args.input)
    out = Path(args.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputOutputError(exc.strerror or str(exc), path=out) from exc
    noise = _noise(doc, args.seed, args.input)
    oracle = _SYNTH[args.kind](doc, noise, out, args.input)
    oracle = {"report_type": f"synth-{args.kind}", **oracle, "noise": noise.as_dict(),
              "provenance": _provenance({"command": "synth", "kind": args.kind, "params": doc},
                                        {args.input: rio.sha256_file(args.input)},
                                        {"seed": args.seed})}
    rio.write_json(out / "oracle.json", oracle)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="resq", description="Resonator, TLS, XRD and transport analysis.")
    p.add_argument("--version", action="version", version=f"resq {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, plot=True):
        sp.add_argument("--input", "-i", required=True, help="input file")
        sp.add_argument("--output", "-o", help="report path (default: stdout)")
        if plot:
            sp.add_argument("--plot", help="optional SVG output")

    s = sub.add_parser("fit-trace", help="circle-fit one S21 trace")
    common(s)
    s.add_argument("--format", choices=("auto", "csv", "touchstone"), default="auto")
    s.set_defaults(func=cmd_fit_trace)

    s = sub.add_parser("power-sweep", help="fit all traces of a manifest and bin by photon number")
    common(s)
    s.add_argument("--format", choices=("auto", "csv", "touchstone"), default="auto")
    s.add_argument("--bins", type=_bins, default=BinningScheme(5), help="log:<per-decade>")
    s.add_argument("--discard-rel-err", type=_nonneg_float, default=DEFAULT_DISCARD_THRESHOLD)
    s.add_argument("--exclude-top", type=_nonneg_int, default=0)
    s.add_argument("--jobs", type=_pos_int, default=os.cpu_count() or 1)
    s.add_argument("--partial-results", action="store_true",
                   help="record unreadable traces as discarded instead of aborting")
    s.add_argument("--qc-convention", choices=("magnitude", "real"), default="magnitude")
    s.set_defaults(func=cmd_power_sweep)

    s = sub.add_parser("tls-fit", help="fit the TLS loss model to a binned curve")
    common(s)
    s.add_argument("--exclude-top", type=_nonneg_int, default=0)
    s.set_defaults(func=cmd_tls_fit)

    s = sub.add_parser("xrd", help="pseudo-Voigt peak fit and phase label")
    common(s)
    s.add_argument("--mode", choices=("theta2theta", "rocking"), default="theta2theta")
    s.add_argument("--window", type=_window, help="lo:hi in degrees")
    s.set_defaults(func=cmd_xrd)

    s = sub.add_parser("tc", help="superconducting transition detection")
    common(s)
    s.add_argument("--criterion", choices=sorted(CRITERIA), default="midpoint")
    s.set_defaults(func=cmd_tc)

    s = sub.add_parser("synth", help="generate synthetic data plus an oracle sidecar")
    s.add_argument("kind", choices=sorted(_SYNTH))
    s.add_argument("--input", "-i", required=True, help="JSON parameter file")
    s.add_argument("--output", "-o", required=True, help="output directory")
    s.add_argument("--seed", type=_seed, default=0)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ResqError as exc:
        print(f"resq: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"resq: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
