"""Batch command-line front end.

One JSON config per run, one subcommand per experiment family:

    memobs <command> --config cfg.json [--out dir] [--threads n]
                     [--set key=value ...]

Artifacts are JSON and CSV files with a fixed field order and floats printed
with 17 significant digits, so identical configs produce byte-identical
files regardless of thread count.  Every artifact embeds the sha256 of the
effective config (file plus --set overrides).  Timings and library versions
go to run_meta.json, which is metadata, not an artifact: it is the one file
allowed to differ between reruns.

Exit status: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import NumericalError, ValidationError
from .evolution import ModalCache, decomposition_residual, propagate
from .inverse_control import (
    ObservationData,
    backward_uniqueness_certificate,
    impulse_control,
    reconstruct_initial,
    simulate_controlled,
    simulate_observations,
)
from .kernels import ExponentialKernel, UniformGrid, kernel_from_spec
from .modal import (
    closed_form_exp,
    nodal_set_exp_closed,
    nodal_set_numeric,
    series_solution_grid,
    solve_modal_richardson,
    solve_modal_volterra,
)
from .sampling import (
    SamplingPlan,
    check_geometric_condition,
    check_kernel_nonvanishing,
    constants_table,
    probe_upper_bound,
)
from .spectral import SpectralBasis, SpectralField

ENV_OUT = "MEMOBS_OUT"
EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


# ---------------------------------------------------------------------------
# deterministic serialization


def _fmt_float(v: float) -> str:
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    return "%.17g" % v


def _json_text(obj, indent: int = 0) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, (np.floating, float)):
        return _fmt_float(float(obj))
    if isinstance(obj, (np.integer, int)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = ",\n".join(inner + _json_text(v, indent + 1) for v in obj)
        return "[\n" + items + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f"{inner}{json.dumps(str(k))}: {_json_text(v, indent + 1)}"
            for k, v in obj.items()
        )
        return "{\n" + items + "\n" + pad + "}"
    raise ValidationError(f"cannot serialize value of type {type(obj).__name__}")


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (np.floating, float)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return "%.17g" % f
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return str(int(v))
    return str(v)


@dataclass
class Report:
    """One named result, rendered to <name>.json and/or <name>.csv."""

    name: str
    json_payload: object | None = None
    csv_header: list[str] | None = None
    csv_rows: list | None = None


def emit_report(
    results: list[Report],
    out_dir,
    formats=("json", "csv"),
    config_sha: str | None = None,
) -> list[Path]:
    """Write the artifacts with stable ordering and float formatting."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for rep in results:
        if "json" in formats and rep.json_payload is not None:
            payload = rep.json_payload
            if isinstance(payload, dict) and config_sha is not None:
                payload = {"config_sha256": config_sha, **payload}
            path = out / f"{rep.name}.json"
            path.write_text(_json_text(payload) + "\n", encoding="utf-8")
            written.append(path)
        if "csv" in formats and rep.csv_header is not None:
            lines = []
            if config_sha is not None:
                lines.append(f"# config_sha256={config_sha}")
            lines.append(",".join(rep.csv_header))
            for row in rep.csv_rows or []:
                lines.append(",".join(_csv_cell(c) for c in row))
            path = out / f"{rep.name}.csv"
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(path)
    return written


# ---------------------------------------------------------------------------
# config handling


@dataclass
class ExperimentConfig:
    command: str
    data: dict
    sha256: str
    out_dir: str
    threads: int
    sources: dict = dc_field(default_factory=dict)

    @classmethod
    def load(cls, command, config_path, out_flag, threads, overrides):
        try:
            text = Path(config_path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ValidationError(f"cannot read config {config_path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {config_path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ValidationError("config root must be a JSON object")
        for item in overrides or []:
            _apply_override(data, item)
        sha = hashlib.sha256(
            json.dumps(data, sort_keys=True, separators=(",", ":")).encode("utf-8")
        ).hexdigest()
        out_dir = (
            out_flag
            or data.get("out")
            or os.environ.get(ENV_OUT)
            or "memobs-out"
        )
        if not isinstance(out_dir, str):
            raise ValidationError("out must be a directory path string")
        if int(threads) != threads or threads < 1:
            raise ValidationError("--threads must be a positive integer")
        return cls(
            command=command,
            data=data,
            sha256=sha,
            out_dir=out_dir,
            threads=int(threads),
        )


def _apply_override(data: dict, item: str) -> None:
    if "=" not in item:
        raise ValidationError(f"--set expects key=value, got {item!r}")
    key, raw = item.split("=", 1)
    parts = [p for p in key.split(".") if p]
    if not parts:
        raise ValidationError(f"--set has an empty key in {item!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = data
    for p in parts[:-1]:
        nxt = node.get(p)
        if nxt is None:
            nxt = node[p] = {}
        if not isinstance(nxt, dict):
            raise ValidationError(f"--set path {key!r} crosses a non-object value")
        node = nxt
    node[parts[-1]] = value


def _check_keys(d, path: str, required: set, optional: set = frozenset()) -> dict:
    if not isinstance(d, dict):
        raise ValidationError(f"{path} must be a JSON object")
    missing = required - d.keys()
    if missing:
        raise ValidationError(f"{path}: missing required fields {sorted(missing)}")
    unknown = d.keys() - required - optional
    if unknown:
        raise ValidationError(f"{path}: unknown fields {sorted(unknown)}")
    return d


def _num(sec, path, key, default=None, positive=False, nonneg=False):
    if key not in sec:
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(f"{path}.{key} must be a number")
    v = float(v)
    if not math.isfinite(v):
        raise ValidationError(f"{path}.{key} must be finite")
    if positive and v <= 0:
        raise ValidationError(f"{path}.{key} must be positive")
    if nonneg and v < 0:
        raise ValidationError(f"{path}.{key} must be nonnegative")
    return v


def _int(sec, path, key, default=None, lo=None):
    if key not in sec:
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValidationError(f"{path}.{key} must be an integer")
    if lo is not None and v < lo:
        raise ValidationError(f"{path}.{key} must be >= {lo}")
    return int(v)


def _bool(sec, path, key, default):
    v = sec.get(key, default)
    if not isinstance(v, bool):
        raise ValidationError(f"{path}.{key} must be true or false")
    return v


def _choice(sec, path, key, allowed, default):
    v = sec.get(key, default)
    if v not in allowed:
        raise ValidationError(f"{path}.{key} must be one of {sorted(allowed)}")
    return v


def _build_basis(cfg) -> SpectralBasis:
    sec = _check_keys(cfg["basis"], "basis", {"L", "K"})
    L = _num(sec, "basis", "L", positive=True)
    K = _int(sec, "basis", "K", lo=1)
    return SpectralBasis(L, K)


def _build_kernel(cfg):
    try:
        return kernel_from_spec(cfg["kernel"])
    except ValidationError as exc:
        raise ValidationError(f"kernel: {exc}") from exc


def _build_plan(cfg, basis: SpectralBasis) -> SamplingPlan:
    try:
        return SamplingPlan.from_json(cfg["plan"], L=basis.L)
    except ValidationError as exc:
        raise ValidationError(f"plan: {exc}") from exc


def _field_from_spec(basis: SpectralBasis, spec, path: str) -> SpectralField:
    _check_keys(spec, path, set(), {"mode", "coeffs"})
    has_mode = "mode" in spec
    has_coeffs = "coeffs" in spec
    if has_mode == has_coeffs:
        raise ValidationError(f'{path} needs exactly one of "mode" or "coeffs"')
    if has_mode:
        k = _int(spec, path, "mode", lo=1)
        if k > basis.K:
            raise ValidationError(f"{path}.mode must be <= K = {basis.K}")
        coeffs = np.zeros(basis.K)
        coeffs[k - 1] = 1.0
        return SpectralField(basis, coeffs)
    raw = spec["coeffs"]
    if not isinstance(raw, list) or len(raw) != basis.K:
        raise ValidationError(f"{path}.coeffs must be a list of length K = {basis.K}")
    try:
        return SpectralField(basis, np.asarray(raw, dtype=float))
    except (ValidationError, ValueError) as exc:
        raise ValidationError(f"{path}.coeffs: {exc}") from exc


# ---------------------------------------------------------------------------
# command runners


def _run_modal(cfg, threads):
    M = _build_kernel(cfg)
    sec = _check_keys(
        cfg["modal"], "modal", {"lam", "T"}, {"n_steps", "method", "richardson", "tol"}
    )
    lam = _num(sec, "modal", "lam", positive=True)
    T = _num(sec, "modal", "T", positive=True)
    n_steps = _int(sec, "modal", "n_steps", default=2048, lo=8)
    method = _choice(sec, "modal", "method", {"march", "series", "closed"}, "march")
    richardson = _bool(sec, "modal", "richardson", True)
    tol = _num(sec, "modal", "tol", default=1e-12, positive=True)
    if method == "march":
        if richardson:
            t, x = solve_modal_richardson(lam, M, T, n_steps)
        else:
            traj = solve_modal_volterra(lam, M, T, n_steps)
            t, x = traj.t, traj.x
    elif method == "series":
        grid = UniformGrid(n_steps, T)
        t = grid.nodes()
        x = series_solution_grid(lam, M, grid, tol)
    else:
        if not isinstance(M, ExponentialKernel):
            raise ValidationError(
                "modal.method: the closed form exists only for exponential kernels"
            )
        t = UniformGrid(n_steps, T).nodes()
        x = closed_form_exp(lam, M.c, M.alpha, t)
    payload = {
        "command": "modal",
        "kernel": M.spec_dict(),
        "lam": lam,
        "T": T,
        "n_steps": n_steps,
        "method": method,
        "x_final": float(x[-1]),
        "sup_abs": float(np.max(np.abs(x))),
    }
    rows = list(zip(t.tolist(), x.tolist()))
    return [Report("modal", payload, ["t", "x"], rows)]


def _run_nodal(cfg, threads):
    M = _build_kernel(cfg)
    sec = _check_keys(
        cfg["nodal"], "nodal", {"lam", "T_max"}, {"resolution", "refine_tol", "method"}
    )
    lam = _num(sec, "nodal", "lam", positive=True)
    T_max = _num(sec, "nodal", "T_max", positive=True)
    resolution = _int(sec, "nodal", "resolution", default=2048, lo=64)
    refine_tol = _num(sec, "nodal", "refine_tol", default=1e-10, positive=True)
    method = _choice(sec, "nodal", "method", {"numeric", "closed"}, "numeric")
    if method == "closed":
        if not isinstance(M, ExponentialKernel):
            raise ValidationError(
                "nodal.method: the closed form exists only for exponential kernels"
            )
        ns = nodal_set_exp_closed(lam, M.c, M.alpha, T_max)
    else:
        ns = nodal_set_numeric(lam, M, T_max, resolution, refine_tol)
    payload = {
        "command": "nodal",
        "kernel": M.spec_dict(),
        "lam": lam,
        "T_max": T_max,
        "method": method,
        "count": len(ns),
        "zeros": ns.zeros.tolist(),
        "flags": list(ns.flags),
    }
    rows = list(zip(ns.zeros.tolist(), ns.flags))
    return [Report("nodal", payload, ["zero", "flag"], rows)]


def _run_propagate(cfg, threads):
    basis = _build_basis(cfg)
    M = _build_kernel(cfg)
    sec = _check_keys(cfg["propagate"], "propagate", {"t", "y0"})
    t = _num(sec, "propagate", "t", nonneg=True)
    y0 = _field_from_spec(basis, sec["y0"], "propagate.y0")
    out = propagate(y0, M, t, threads=threads)
    payload = {
        "command": "propagate",
        "t": t,
        "K": basis.K,
        "L": basis.L,
        "l2_norm": out.hs_norm(0.0),
        "h_minus4_norm": out.hs_norm(-4.0),
    }
    rows = [
        (k + 1, float(basis.eigenvalues[k]), float(out.coefficients[k]))
        for k in range(basis.K)
    ]
    return [Report("propagate", payload, ["k", "lam", "coeff"], rows)]


def _run_residual(cfg, threads):
    basis = _build_basis(cfg)
    M = _build_kernel(cfg)
    sec = _check_keys(cfg["residual"], "residual", {"t"}, {"ks", "hlam_max"})
    t = _num(sec, "residual", "t", positive=True)
    hlam_max = _num(sec, "residual", "hlam_max", default=0.125, positive=True)
    ks = sec.get("ks")
    if ks is not None and (
        not isinstance(ks, list)
        or not all(isinstance(k, int) and not isinstance(k, bool) for k in ks)
    ):
        raise ValidationError("residual.ks must be a list of integers")
    table = decomposition_residual(
        M, t, basis, ks=ks, threads=threads, hlam_max=hlam_max
    )
    payload = {
        "command": "residual",
        "t": t,
        "kernel_at_t": float(M(t)),
        "slope": table.slope,
        "sup_lambda2_x": table.sup_lambda2_x,
    }
    return [Report("residual", payload, ["k", "lam", "x", "residual"], table.rows)]


def _run_check_plan(cfg, threads):
    basis = _build_basis(cfg)
    M = _build_kernel(cfg)
    plan = _build_plan(cfg, basis)
    nonvanishing, active = check_kernel_nonvanishing(plan, M)
    verdict = check_geometric_condition(plan, M, basis.L)
    payload = {
        "command": "check-plan",
        "m": plan.m,
        "times": plan.times,
        "kernel_nonvanishing": nonvanishing,
        "active_instants": active,
        "verdict": verdict.kind,
        "uncovered_intervals": [
            {"a": float(iv[0]), "b": float(iv[1])} for iv in verdict.uncovered_intervals
        ],
        "uncovered_points": [float(p) for p in verdict.uncovered_points],
    }
    return [Report("plan_check", payload)]


def _run_constants(cfg, threads):
    basis = _build_basis(cfg)
    M = _build_kernel(cfg)
    plan = _build_plan(cfg, basis)
    sec = _check_keys(cfg.get("constants", {}), "constants", set(), {"K_list"})
    K_list = sec.get("K_list", [basis.K])
    if (
        not isinstance(K_list, list)
        or not K_list
        or not all(isinstance(k, int) and not isinstance(k, bool) for k in K_list)
    ):
        raise ValidationError("constants.K_list must be a nonempty list of integers")
    cache = ModalCache()
    table = constants_table(plan, M, basis, K_list, cache=cache, threads=threads)
    payload = {
        "command": "constants",
        "m": plan.m,
        "entries": [
            {
                "K": c.K,
                "c_min": c.c_min,
                "c_max": c.c_max,
                "lower_bracket": c.lower_bracket,
                "upper_bracket": c.upper_bracket,
                "mu_min": c.mu_min,
                "mu_min_upper": c.mu_min_upper,
                "mu_max": c.mu_max,
                "clamped": c.clamped,
                "warnings": list(c.warnings),
            }
            for c in table
        ],
    }
    rows = [
        (c.K, c.c_min, c.c_max, c.lower_bracket, c.upper_bracket) for c in table
    ]
    return [
        Report(
            "constants",
            payload,
            ["K", "c_min", "c_max", "lower_bracket", "upper_bracket"],
            rows,
        )
    ]


def _run_probe(cfg, threads):
    basis = _build_basis(cfg)
    M = _build_kernel(cfg)
    plan = _build_plan(cfg, basis)
    sec = _check_keys(cfg["probe"], "probe", {"x0", "radii"})
    x0 = _num(sec, "probe", "x0")
    radii = sec["radii"]
    if not isinstance(radii, list) or not radii:
        raise ValidationError("probe.radii must be a nonempty list of numbers")
    result = probe_upper_bound(plan, M, basis, x0, radii, threads=threads)
    payload = {
        "command": "probe",
        "x0": result.x0,
        "radii": list(result.radii),
        "ratios": list(result.ratios),
    }
    return [Report("probe", payload, ["radius", "ratio"], result.rows)]


def _run_certify(cfg, threads):
    basis = _build_basis(cfg)
    M = _build_kernel(cfg)
    sec = _check_keys(cfg["certify"], "certify", {"times"}, {"K", "tol"})
    times = sec["times"]
    if not isinstance(times, list) or not times:
        raise ValidationError("certify.times must be a nonempty list of numbers")
    K = _int(sec, "certify", "K", default=basis.K, lo=1)
    tol = _num(sec, "certify", "tol", default=1e-10, positive=True)
    cert = backward_uniqueness_certificate(times, M, basis, K=K, tol=tol, threads=threads)
    payload = {"command": "certify", **cert.to_json()}
    rows = [
        (
            w.k,
            w.lam,
            w.witness_index,
            w.witness_time,
            w.value,
            w.sup,
            w.threshold,
        )
        for w in cert.modes
    ]
    header = ["k", "lam", "witness_index", "witness_time", "value", "sup", "threshold"]
    return [Report("certificate", payload, header, rows)]


def _run_reconstruct(cfg, threads):
    basis = _build_basis(cfg)
    M = _build_kernel(cfg)
    plan = _build_plan(cfg, basis)
    sec = _check_keys(
        cfg["reconstruct"],
        "reconstruct",
        set(),
        {"y0", "data_file", "samples_per_unit", "sigma", "seed", "K", "reg"},
    )
    has_y0 = "y0" in sec
    has_file = "data_file" in sec
    if has_y0 == has_file:
        raise ValidationError(
            'reconstruct needs exactly one of "y0" or "data_file"'
        )
    K = _int(sec, "reconstruct", "K", default=basis.K, lo=1)
    reg = _num(sec, "reconstruct", "reg", default=0.0, nonneg=True)
    cache = ModalCache()
    reports = []
    truth = None
    data_sha = None
    if has_y0:
        truth = _field_from_spec(basis, sec["y0"], "reconstruct.y0")
        spu = _int(sec, "reconstruct", "samples_per_unit", default=64, lo=16)
        sigma = _num(sec, "reconstruct", "sigma", default=0.0, nonneg=True)
        seed = _int(sec, "reconstruct", "seed", default=0)
        data = simulate_observations(
            truth, plan, M, spu, sigma, seed, cache=cache, threads=threads
        )
        reports.append(Report("observations", data.to_json()))
    else:
        path = sec["data_file"]
        if not isinstance(path, str):
            raise ValidationError("reconstruct.data_file must be a path string")
        try:
            blob = Path(path).read_bytes()
        except OSError as exc:
            raise ValidationError(f"cannot read data_file {path}: {exc}") from exc
        data_sha = hashlib.sha256(blob).hexdigest()
        try:
            raw = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValidationError(f"data_file {path} is not valid JSON: {exc}") from exc
        if isinstance(raw, dict):
            raw.pop("config_sha256", None)  # stamp added by the artifact writer
        data = ObservationData.from_json(raw, L=basis.L)
        if data.plan != plan:
            raise ValidationError("reconstruct.data_file holds a different plan")
    result = reconstruct_initial(
        data, M, basis, K=K, reg=reg, cache=cache, threads=threads
    )
    payload = {
        "command": "reconstruct",
        "K": K,
        "reg": reg,
        "sigma": data.sigma,
        "seed": data.seed,
        "condition": result.condition,
        "residual": result.residual,
        "data_norm": result.data_norm,
    }
    if data_sha is not None:
        payload["data_sha256"] = data_sha
    sub = result.field.basis
    header = ["k", "lam", "recovered"]
    rows = [
        [k + 1, float(sub.eigenvalues[k]), float(result.coefficients[k])]
        for k in range(K)
    ]
    if truth is not None:
        ref = SpectralField(sub, truth.coefficients[:K])
        denom = ref.hs_norm(-4.0)
        if denom > 0:
            payload["relative_h_minus4_error"] = (result.field - ref).hs_norm(
                -4.0
            ) / denom
        l2 = ref.hs_norm(0.0)
        if l2 > 0:
            payload["relative_l2_error"] = (result.field - ref).hs_norm(0.0) / l2
        header.append("true")
        for k in range(K):
            rows[k].append(float(truth.coefficients[k]))
    reports.append(Report("reconstruction", payload, header, rows))
    return reports


def _run_control(cfg, threads):
    basis = _build_basis(cfg)
    M = _build_kernel(cfg)
    plan = _build_plan(cfg, basis)
    sec = _check_keys(
        cfg["control"],
        "control",
        {"y0", "y1", "T"},
        {"K", "rank_rtol", "verify"},
    )
    T = _num(sec, "control", "T", positive=True)
    K = _int(sec, "control", "K", default=basis.K, lo=1)
    rank_rtol = _num(sec, "control", "rank_rtol", default=1e-10, positive=True)
    verify = _bool(sec, "control", "verify", True)
    y0 = _field_from_spec(basis, sec["y0"], "control.y0")
    y1 = _field_from_spec(basis, sec["y1"], "control.y1")
    cache = ModalCache()
    result = impulse_control(
        y0, y1, plan, T, M, K=K, rank_rtol=rank_rtol, cache=cache, threads=threads
    )
    payload = {
        "command": "control",
        "T": T,
        "K": K,
        "energy": result.energy,
        "cost": result.cost,
        "duality_gap": abs(result.energy - result.cost),
        "rank": result.rank,
        "unreachable_modes": list(result.unreachable_modes),
        "reach_residual": result.reach_residual,
        "target_reachable": result.target_reachable,
        "notes": list(result.notes),
        "achieved": result.achieved.coefficients.tolist(),
    }
    if verify:
        sim = simulate_controlled(y0, result, M)
        target = y1.coefficients[:K]
        denom = max(float(np.linalg.norm(target)), 1e-300)
        payload["simulated"] = sim.coefficients.tolist()
        payload["closed_loop_error_l2"] = (
            float(np.linalg.norm(sim.coefficients - target)) / denom
        )
    rows = []
    for j, imp in enumerate(result.impulses):
        for k in range(K):
            rows.append(
                (
                    j,
                    imp.tau,
                    imp.t,
                    k + 1,
                    float(imp.profile[k]),
                    float(imp.applied[k]),
                )
            )
    header = ["j", "tau", "t", "k", "profile", "applied"]
    return [Report("control", payload, header, rows)]


_COMMANDS = {
    "modal": (_run_modal, {"kernel", "modal"}, set()),
    "nodal": (_run_nodal, {"kernel", "nodal"}, set()),
    "propagate": (_run_propagate, {"basis", "kernel", "propagate"}, set()),
    "residual": (_run_residual, {"basis", "kernel", "residual"}, set()),
    "check-plan": (_run_check_plan, {"basis", "kernel", "plan"}, set()),
    "constants": (_run_constants, {"basis", "kernel", "plan"}, {"constants"}),
    "probe": (_run_probe, {"basis", "kernel", "plan", "probe"}, set()),
    "certify": (_run_certify, {"basis", "kernel", "certify"}, set()),
    "reconstruct": (
        _run_reconstruct,
        {"basis", "kernel", "plan", "reconstruct"},
        set(),
    ),
    "control": (_run_control, {"basis", "kernel", "plan", "control"}, set()),
}


def run_command(name: str, config: ExperimentConfig) -> int:
    """Dispatch one command, write its artifacts and run metadata."""
    if name not in _COMMANDS:
        raise ValidationError(f"unknown command {name!r}")
    runner, required, optional = _COMMANDS[name]
    _check_keys(config.data, "config", required, optional | {"out"})
    t0 = time.perf_counter()
    reports = runner(config.data, config.threads)
    paths = emit_report(reports, config.out_dir, config_sha=config.sha256)
    meta = {
        "command": name,
        "config_sha256": config.sha256,
        "threads": config.threads,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "memobs": __version__,
        },
        "timings": {"total_s": time.perf_counter() - t0},
        "artifacts": sorted(p.name for p in paths),
    }
    meta_path = Path(config.out_dir) / "run_meta.json"
    meta_path.write_text(_json_text(meta) + "\n", encoding="utf-8")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="memobs", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config entry (dotted path, JSON value)",
        )
    return parser


def main(argv=None) -> int:
    try:
        ns = _build_parser().parse_args(argv)
        config = ExperimentConfig.load(
            ns.command, ns.config, ns.out, ns.threads, ns.set
        )
        return run_command(ns.command, config)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
