"""Command-line runner: ``lorentzqm <command> --config run.json --out results/``.

Each run reads one JSON config, writes CSV data files and a ``summary.json``
into the output directory.  Every CSV starts with comment lines carrying the
tool version, the SHA-256 of the canonical config and a column schema.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import LorentzQMError, NumericalFailure, PropagatorOverflowError
from .evolution import evolve
from .generator import build_generator, eigensolve, from_mdecomp, random_stable_generator, verify_completeness
from .geometry import (
    ParameterPath,
    adiabatic_sweep,
    berry_phase_loop,
    curvature_map,
    flux_density_profile,
    total_flux,
)
from .minkowski import MinkowskiMetric, SpinorState
from .models import (
    AfmParams,
    FermiGasParams,
    VortexField,
    afm_dispersion,
    afm_generator,
    fermi_gas_generator,
    fermi_stability_map,
    vortex_berry_phase,
    vortex_generator,
    vortex_mdecomp,
)

COMMANDS = ("spectrum", "evolve", "berry", "flux", "model", "adiabatic")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(LorentzQMError, ValueError):
    pass


# ---------------------------------------------------------------- I/O helpers

def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


class RunContext:
    """Output directory, config identity and worker pool for one run."""

    def __init__(self, command: str, cfg: dict, out: Path):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.hash = config_hash(cfg)
        self.threads = int(cfg.get("threads") or os.cpu_count() or 1)
        self.files: list[str] = []

    def write_csv(self, name: str, columns: list[str], rows) -> Path:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            fh.write(f"# lorentzqm {__version__} command={self.command}\n")
            fh.write(f"# config_sha256 {self.hash}\n")
            fh.write(f"# config {canonical_json(self.cfg)}\n")
            fh.write(f"# columns {','.join(columns)}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
        self.files.append(name)
        return path

    def map(self, fn, items):
        """Order-preserving parallel map."""
        items = list(items)
        if self.threads <= 1 or len(items) <= 1:
            return [fn(i) for i in items]
        with ThreadPoolExecutor(max_workers=self.threads) as ex:
            return list(ex.map(fn, items))

    def summary(self, data: dict) -> dict:
        out = {
            "tool": "lorentzqm",
            "version": __version__,
            "command": self.command,
            "config_sha256": self.hash,
            "config": self.cfg,
            "files": self.files,
        }
        out.update(data)
        with open(self.out / "summary.json", "w") as fh:
            json.dump(_jsonable(out), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return out


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _check(value, threshold, passed=None) -> dict:
    ok = bool(value <= threshold) if passed is None else bool(passed)
    return {"value": float(value), "threshold": float(threshold), "pass": ok}


# ---------------------------------------------------------------- config parsing

def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing config field {key!r}")
    return cfg[key]


def _complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ConfigError(f"complex value must be [re, im], got {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        try:
            return complex(v.replace(" ", "").replace("i", "j"))
        except ValueError as e:
            raise ConfigError(f"cannot parse complex {v!r}") from e
    return complex(v)


def _linspace(spec, name: str) -> np.ndarray:
    if isinstance(spec, dict):
        return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
    if isinstance(spec, (list, tuple)) and len(spec) == 3 and isinstance(spec[2], int) and not isinstance(spec[2], bool):
        return np.linspace(float(spec[0]), float(spec[1]), int(spec[2]))
    raise ConfigError(f"{name} must be {{start, stop, num}} or [start, stop, num]")


def parse_generator(spec: dict, rng: np.random.Generator | None = None):
    """Generator from ``{"mdecomp": [...], "trace_part": t}``, ``{"H": [[...]], "metric": [m, n]}``,
    ``{"model": name, "params": {...}}`` or ``{"random": [m, n]}``."""
    if not isinstance(spec, dict):
        raise ConfigError("generator must be an object")
    if "mdecomp" in spec:
        m = spec["mdecomp"]
        if len(m) != 3:
            raise ConfigError("mdecomp needs three entries")
        return from_mdecomp(*map(float, m), trace_part=float(spec.get("trace_part", 0.0)))
    if "H" in spec:
        H = np.array([[_complex(v) for v in row] for row in spec["H"]])
        metric = MinkowskiMetric(*spec["metric"]) if "metric" in spec else None
        return build_generator(H, metric)
    if "model" in spec:
        name = spec["model"]
        params = spec.get("params", {})
        if name == "fermi":
            return fermi_gas_generator(FermiGasParams(**params))
        if name == "afm":
            return afm_generator(AfmParams(**params))
        if name == "vortex":
            f = _vortex_field(params)
            return vortex_generator(f, params.get("r_c", (1.0, 0.0)), params.get("q", (0.0, 0.0)))
        raise ConfigError(f"unknown model {name!r}")
    if "random" in spec:
        if rng is None:
            raise ConfigError("random generator needs a seed")
        return random_stable_generator(MinkowskiMetric(*spec["random"]), rng)
    raise ConfigError("generator needs one of mdecomp, H, model, random")


def _vortex_field(p: dict) -> VortexField:
    kind = p.get("profile", "synthetic")
    common = {k: p[k] for k in ("g", "mu") if k in p}
    if "omega" in p:
        common["omega"] = tuple(map(float, p["omega"]))
    if "potential" in p:
        V = float(p["potential"])
        common["potential"] = lambda x, y: np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, V)
    center = tuple(p.get("center", (0.0, 0.0)))
    winding = int(p.get("winding", 1))
    if kind == "synthetic":
        return VortexField.synthetic(p.get("n_inf", 1.0), p.get("xi", 1.0), winding, center, **common)
    if kind == "uniform":
        return VortexField.uniform(p.get("n", 1.0), winding, center, **common)
    raise ConfigError(f"unknown vortex profile {kind!r}")


def _loop(spec: dict) -> tuple[ParameterPath, dict]:
    kind = spec.get("type", "theta_circle")
    if kind == "theta_circle":
        n = int(spec.get("resolution", 4096))
        return ParameterPath.theta_circle(float(_require(spec, "theta")), n, float(spec.get("radius", 1.0)),
                                          int(spec.get("cap", 1))), {}
    if kind == "polyline":
        return ParameterPath.polyline(np.asarray(_require(spec, "points"), float)), {}
    raise ConfigError(f"unknown loop type {kind!r}")


def _loop_with_resolution(spec: dict, n: int) -> ParameterPath:
    s = dict(spec)
    s["resolution"] = n
    return _loop(s)[0]


# ---------------------------------------------------------------- commands

def cmd_spectrum(ctx: RunContext) -> dict:
    cfg = ctx.cfg
    rng = np.random.default_rng(cfg.get("seed"))
    if "grid" in cfg:
        g = cfg["grid"]
        m1 = _linspace(_require(g, "m1"), "m1")
        m3 = _linspace(_require(g, "m3"), "m3")
        m2 = float(g.get("m2", 0.0))
        tp = float(g.get("trace_part", 0.0))
        pts = [(a, c) for a in m1 for c in m3]

        def row(p):
            gen = from_mdecomp(p[0], m2, p[1], tp)
            e = eigensolve(gen)
            E = e.eigenvalues
            sig = e.signatures if e.signatures is not None else (0, 0)
            return (p[0], m2, p[1], tp, gen.cone_distance, e.stability.value,
                    E[0].real, E[0].imag, E[1].real, E[1].imag, sig[0], sig[1])

        rows = ctx.map(row, pts)
        cols = ["m1", "m2", "m3", "trace_part", "cone_distance", "stability",
                "E1_re", "E1_im", "E2_re", "E2_im", "signature1", "signature2"]
        ctx.write_csv("spectrum_grid.csv", cols, rows)
        counts = {s: sum(r[5] == s for r in rows) for s in ("stable", "on-cone", "unstable")}
        return ctx.summary({"points": len(rows), "stability_counts": counts})
    gen = parse_generator(_require(cfg, "generator"), rng)
    e = eigensolve(gen)
    rows = []
    for j, E in enumerate(e.eigenvalues):
        sig = e.signatures[j] if e.signatures is not None else 0
        rows.append((j, E.real, E.imag, sig, e.stability.value))
    ctx.write_csv("spectrum.csv", ["index", "E_re", "E_im", "signature", "stability"], rows)
    checks = {}
    if e.is_stable:
        checks["normalization"] = _check(e.normalization_residual(), 1e-10)
        checks["orthogonality"] = _check(e.orthogonality_residual(), 1e-9)
        checks["completeness"] = _check(verify_completeness(e), 1e-9)
    return ctx.summary({
        "stability": e.stability.value,
        "cone_distance": gen.cone_distance,
        "mdecomp": gen.mdecomp,
        "taudecomp": gen.taudecomp,
        "trace_part": gen.trace_part,
        "checks": checks,
    })


def _psi0(cfg: dict, dim: int, metric, rng) -> SpinorState:
    spec = cfg.get("psi0", "random")
    if spec == "random":
        a = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    else:
        a = np.array([_complex(v) for v in spec])
    return SpinorState(a, metric)


def cmd_evolve(ctx: RunContext) -> dict:
    cfg = ctx.cfg
    rng = np.random.default_rng(cfg.get("seed"))
    gen = parse_generator(_require(cfg, "generator"), rng)
    psi0 = _psi0(cfg, gen.dim, gen.metric, rng)
    times = np.asarray(cfg["times"], float) if "times" in cfg else _linspace(_require(cfg, "t"), "t")
    hbar = float(cfg.get("units", {}).get("hbar", 1.0))
    status, failure = "ok", None
    try:
        trace = evolve(psi0, gen, times / hbar)
    except PropagatorOverflowError as e:
        trace, status = e.trace, "overflow"
        failure = {"error": "PropagatorOverflowError", "message": str(e), "growth_exponent": e.growth_exponent}
    d = gen.dim
    cols = ["t"] + [f"a{j + 1}_{p}" for j in range(d) for p in ("re", "im")] + ["interval", "drift", "growth"]
    rows = []
    for k in range(len(trace)):
        a = trace.amplitudes[k]
        rows.append([times[k]] + [x for z in a for x in (z.real, z.imag)]
                    + [trace.intervals[k], trace.interval_drift[k], trace.growth[k]])
    ctx.write_csv("trace.csv", cols, rows)
    drift = float(np.max(trace.interval_drift)) if len(trace) else 0.0
    size = float(np.max(trace.growth)) ** 2 if len(trace) else 1.0
    summary = ctx.summary({
        "status": status,
        "failure": failure,
        "samples": len(trace),
        "requested_samples": len(times),
        "checks": {"interval_drift": _check(drift / max(1.0, size), float(cfg.get("tol") or 1e-8))},
    })
    if failure is not None:
        raise _InBandFailure(failure)
    return summary


class _InBandFailure(NumericalFailure):
    def __init__(self, detail: dict):
        super().__init__(detail["message"])
        self.detail = detail


def cmd_berry(ctx: RunContext) -> dict:
    cfg = ctx.cfg
    band = int(cfg.get("band", 0))
    loop = _require(cfg, "loop")
    if loop.get("type") == "vortex":
        return _berry_vortex(ctx, loop)
    path, _ = _loop(loop)
    res = berry_phase_loop(path, band)
    rows = [tuple(R) + tuple(A) for R, A in zip(path.samples, res.connection_samples)]
    ctx.write_csv("connection.csv", ["m1", "m2", "m3", "A1", "A2", "A3"], rows)
    ladder = []
    if "ladder" in cfg:
        if loop.get("type", "theta_circle") != "theta_circle":
            raise ConfigError("a resolution ladder needs a theta_circle loop")
        ns = [int(n) for n in cfg["ladder"]]
        results = ctx.map(lambda n: berry_phase_loop(_loop_with_resolution(loop, n), band), ns)
        ref = results[-1].phase_unreduced
        for n, r in zip(ns, results):
            ladder.append({"resolution": n, "phase_overlap": r.phase_unreduced,
                           "phase_quadrature": r.phase_quadrature,
                           "change_vs_finest": abs(r.phase_unreduced - ref)})
        ctx.write_csv("ladder.csv", ["resolution", "phase_overlap", "phase_quadrature", "change_vs_finest"],
                      [tuple(d.values()) for d in ladder])
    tol = max(1e-6, 10 / res.resolution**2)
    return ctx.summary({
        "band": band,
        "signature": res.signature,
        "resolution": res.resolution,
        "phase": res.phase,
        "phase_unreduced": res.phase_unreduced,
        "phase_quadrature": res.phase_quadrature,
        "discretization_error": res.discretization_error,
        "ladder": ladder,
        "checks": {
            "estimators_agree": _check(res.discretization_error, tol),
            "connection_reality": _check(res.reality_residual, 1e-10),
        },
    })


def _vortex_points(loop: dict) -> np.ndarray:
    n = int(loop.get("resolution", 4096))
    r = float(loop.get("radius", 2.0))
    cx, cy = loop.get("loop_center", (0.0, 0.0))
    th = np.linspace(0, 2 * np.pi, n + 1)
    P = np.stack([cx + r * np.cos(th), cy + r * np.sin(th)], axis=1)
    P[-1] = P[0]
    return P


def _berry_vortex(ctx: RunContext, loop: dict) -> dict:
    f = _vortex_field(loop.get("field", {}))
    q = tuple(map(float, loop.get("q", (0.3, 0.1))))
    P = _vortex_points(loop)
    vr = vortex_berry_phase(f, P, q)
    m, _ = vortex_mdecomp(f, P, q)
    rows = [tuple(p) + tuple(mm) + tuple(A) + (t,) for p, mm, A, t in
            zip(P, m, vr.berry.connection_samples, vr.two_v2)]
    ctx.write_csv("connection.csv", ["x", "y", "m1", "m2", "m3", "A1", "A2", "A3", "two_v2"], rows)
    return ctx.summary({
        "phase_unreduced": vr.phase,
        "phase_quadrature": vr.berry.phase_quadrature,
        "reference_minus_integral_2v2_dalpha": vr.reference,
        "winding": vr.winding,
        "zeta_implied": float(np.mean(vr.zeta)),
        "checks": {
            "phase_vs_reference": _check(abs(vr.phase - vr.reference), 1e-5),
            "identification_per_point": _check(vr.identification_residual, 1e-6),
            "interval_plus_one": _check(vr.interval_residual, 1e-10),
        },
    })


def cmd_flux(ctx: RunContext) -> dict:
    cfg = ctx.cfg
    th = (np.asarray(cfg["theta_values"], float) if "theta_values" in cfg
          else _linspace(cfg.get("theta", [0.0, 0.7, 15]), "theta"))
    if np.any(th < 0) or np.any(th >= np.pi / 4):
        raise ConfigError("theta values must lie in [0, pi/4)")
    tol = float(cfg.get("tol") or 1e-6)
    n0 = int(cfg.get("n0", 512))
    profiles = ctx.map(lambda t: flux_density_profile([t], n0=n0, tol=tol), th)
    rows = []
    for t, p in zip(th, profiles):
        rows.append((t, p.closed_form[0, 0], p.measured[0, 0], p.closed_form[0, 1], p.measured[0, 1],
                     p.measured[0, 0] / p.closed_form[0, 0], p.step_error[0, 0], p.ladder_change[0, 0],
                     p.resolution[0, 0], bool(p.converged.all())))
    ctx.write_csv("flux_profile.csv",
                  ["theta", "flux_density_closed_form_band0", "flux_density_measured_band0",
                   "flux_density_closed_form_band1", "flux_density_measured_band1",
                   "measured_over_closed_band0", "step_doubling_error", "ladder_change", "resolution",
                   "converged"], rows)
    theta_max = float(cfg.get("theta_max", 0.75 * np.pi / 4))
    totals = ctx.map(lambda b: total_flux(b, theta_max, int(cfg.get("resolution", 2048))), (0, 1))
    tot = {}
    for b, T in zip((0, 1), totals):
        tot[f"band{b}"] = {
            "theta_max": T.theta_max,
            "measured_quadrature": T.measured_quadrature,
            "measured_stokes": T.measured_stokes,
            "upper_cap": T.upper,
            "lower_cap": T.lower,
            "closed_form": T.closed_form,
            "measured_extrapolation": T.measured_extrapolation,
            "closed_form_extrapolation": T.closed_form_extrapolation,
            "claimed_total": (2 * np.pi) if b == 0 else (-2 * np.pi),
        }
        ctx.write_csv(f"flux_ladder_band{b}.csv", ["theta_max", "measured_total", "closed_form_total"],
                      zip(T.ladder_theta, T.ladder_measured, T.ladder_closed_form))
    if "curvature_grid" in cfg:
        cg = cfg["curvature_grid"]
        axes = [_linspace(cg[k], k) for k in ("m1", "m2", "m3")]
        grid = curvature_map(axes, int(cg.get("band", 0)))
        rows = [tuple(grid.positions[i]) + tuple(grid.B[i]) + (grid.theta[i], grid.flux_density[i],
                                                               bool(grid.reliable[i]))
                for i in np.ndindex(grid.theta.shape)]
        ctx.write_csv("curvature_grid.csv", ["m1", "m2", "m3", "B1", "B2", "B3", "theta",
                                             "flux_density_measured", "reliable"], rows)
    conv = all(bool(p.converged.all()) for p in profiles)
    return ctx.summary({
        "profile_points": len(th),
        "total_flux": tot,
        "checks": {"profile_converged": {"value": conv, "threshold": tol, "pass": conv}},
    })


def cmd_model(ctx: RunContext) -> dict:
    cfg = ctx.cfg
    name = _require(cfg, "model")
    p = cfg.get("params", {})
    if name == "afm":
        n = int(p.get("k_points", 256))
        k = np.pi * np.arange(-n // 2 + 1, n // 2 + 1) / (n // 2)
        d = afm_dispersion(k, float(p.get("J", 1.0)), float(p.get("S", 0.5)), int(p.get("Z", 2)))
        rows = zip(k / np.pi, d.E, d.E_closed_form, d.u.real, d.u.imag, d.v.real, d.v.imag,
                   d.u_closed_form, d.v_closed_form, d.v_sign, d.v_sign_closed_form, d.gapless)
        ctx.write_csv("afm_dispersion.csv",
                      ["k_over_pi", "E", "E_closed_form", "u_re", "u_im", "v_re", "v_im", "abs_u_closed_form",
                       "abs_v_closed_form", "v_sign", "v_sign_closed_form", "gapless"], rows)
        ok = ~d.gapless
        return ctx.summary({
            "gapless_points": int(d.gapless.sum()),
            "v_sign_agreement_fraction": float(np.mean(d.sign_agrees[ok])),
            "checks": {
                "dispersion": _check(float(np.max(np.abs(d.E[ok] - d.E_closed_form[ok]))), 1e-9),
                "abs_u": _check(float(np.max(np.abs(np.abs(d.u[ok]) - d.u_closed_form[ok]))), 1e-9),
                "abs_v": _check(float(np.max(np.abs(np.abs(d.v[ok]) - d.v_closed_form[ok]))), 1e-9),
                "interval": _check(d.interval_residual, 1e-9),
            },
        })
    if name == "fermi":
        g2 = _linspace(p.get("g2", [0.0, 12.0, 25]), "g2")
        g4 = _linspace(p.get("g4", [-3.0, 3.0, 25]), "g4")
        sm = fermi_stability_map(float(p.get("v_F", 1.0)), float(p.get("q", 1.0)), g2, g4)
        rows = [(sm["g2"][i], sm["g4"][i], sm["cone_distance"][i], sm["stability"][i], bool(sm["predicate"][i]))
                for i in np.ndindex(sm["g2"].shape)]
        ctx.write_csv("fermi_stability.csv", ["g2", "g4", "cone_distance", "stability", "predicate_stable"], rows)
        mismatch = sum(1 for r in rows if (r[3] == "unstable") == r[4])
        return ctx.summary({"points": len(rows),
                            "checks": {"predicate_matches_eigensolve": _check(mismatch, 0)}})
    if name == "vortex":
        windings = [int(w) for w in p.get("windings", [1, 2, 3])]
        loop = dict(p.get("loop", {}))

        def run(w):
            fp = dict(p.get("field", {"profile": "uniform", "mu": -1.0}))
            fp["winding"] = w
            return vortex_berry_phase(_vortex_field(fp), _vortex_points(loop),
                                      tuple(map(float, loop.get("q", (0.3, 0.1)))))

        res = ctx.map(run, windings)
        ctx.write_csv("vortex_scan.csv", ["winding", "phase", "reference", "two_v2_mean", "zeta_implied"],
                      [(w, r.phase, r.reference, float(np.mean(r.two_v2)), float(np.mean(r.zeta)))
                       for w, r in zip(windings, res)])
        worst = max(abs(r.phase - r.reference) for r in res)
        return ctx.summary({"checks": {"phase_vs_reference": _check(worst, 1e-5)}})
    raise ConfigError(f"unknown model {name!r}")


def cmd_adiabatic(ctx: RunContext) -> dict:
    cfg = ctx.cfg
    band = int(cfg.get("band", 0))
    path, _ = _loop(cfg.get("loop", {"type": "theta_circle", "theta": 0.3, "resolution": 4096}))
    hbar = float(cfg.get("units", {}).get("hbar", 1.0))
    Ts = [float(T) for T in cfg.get("T", [50.0, 100.0, 200.0])]
    tol = float(cfg.get("tol") or 1e-7)
    loop_phase = berry_phase_loop(path, band).phase
    results = ctx.map(lambda T: adiabatic_sweep(path, T / hbar, band, tol=tol), Ts)
    rows, trace_rows = [], []
    for T, r in zip(Ts, results):
        rows.append((T, r.final_infidelity, r.endpoint_infidelity, r.geometric_phase, loop_phase, r.steps,
                     r.error_estimate))
        trace_rows.extend((T, t * hbar, f, l) for t, f, l in zip(r.times, r.fidelity, r.leakage))
    ctx.write_csv("adiabatic.csv", ["T", "final_infidelity", "endpoint_infidelity", "geometric_phase",
                                    "loop_phase", "steps", "error_estimate"], rows)
    ctx.write_csv("fidelity_traces.csv", ["T", "t", "fidelity", "leakage"], trace_rows)
    extracted = None
    if len(Ts) >= 2:
        (T1, r1), (T2, r2) = list(zip(Ts, results))[-2:]
        b1 = r1.geometric_phase
        b2 = b1 + float(np.angle(np.exp(1j * (r2.geometric_phase - b1))))
        extracted = float(np.angle(np.exp(1j * (T2 * b2 - T1 * b1) / (T2 - T1))))
    checks = {}
    if extracted is not None:
        checks["geometric_phase"] = _check(abs(extracted - loop_phase), 5e-2)
    return ctx.summary({"loop_phase": loop_phase, "extracted_geometric_phase": extracted,
                        "ratios": [results[i].final_infidelity / results[i + 1].final_infidelity
                                   for i in range(len(results) - 1)],
                        "checks": checks})


HANDLERS = {
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "berry": cmd_berry,
    "flux": cmd_flux,
    "model": cmd_model,
    "adiabatic": cmd_adiabatic,
}


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lorentzqm", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"lorentzqm {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path, help="JSON run config (default: empty)")
    ap.add_argument("--out", type=Path, default=Path("."), help="output directory")
    ap.add_argument("--seed", type=int, help="random seed (overrides config)")
    ap.add_argument("--threads", type=int, help="worker threads (overrides config)")
    ap.add_argument("--tol", type=float, help="tolerance (overrides config)")
    return ap


def load_config(path: Path | None, overrides: dict) -> dict:
    cfg = {}
    if path is not None:
        try:
            cfg = json.loads(Path(path).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON in config: {e}") from e
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    for k, v in overrides.items():
        if v is not None:
            cfg[k] = v
    if "seed" in cfg and (not isinstance(cfg["seed"], int) or cfg["seed"] < 0):
        raise ConfigError("seed must be a non-negative integer")
    return cfg


def _fail(code: int, exc: BaseException, extra: dict | None = None) -> int:
    detail = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if extra:
        detail.update(extra)
    sys.stderr.write(json.dumps(_jsonable(detail), sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, {"seed": args.seed, "threads": args.threads, "tol": args.tol})
        args.out.mkdir(parents=True, exist_ok=True)
        ctx = RunContext(args.command, cfg, args.out)
        HANDLERS[args.command](ctx)
    except _InBandFailure as e:
        return _fail(EXIT_NUMERIC, e, e.detail)
    except NumericalFailure as e:
        return _fail(EXIT_NUMERIC, e)
    except (ValueError, KeyError, TypeError) as e:
        return _fail(EXIT_CONFIG, e)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
