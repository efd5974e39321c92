"""Built-in geometries, scenario configuration and the end-to-end pipeline.

A scenario is a YAML document::

    name: sphere-latitude          # optional, used for output file names
    geometry: sphere2              # or {name: torsion-const, params: {kappa: 0.3}}
    path: {kind: latitude, theta0: 1.0471975511965976}
    steps_per_unit: 2000
    s0: null                       # defaults to the path's s_start
    B: null                        # defaults to the identity
    seed: 0
    transverse_step: 1.0e-4
    report_stride: 0               # 0 picks a stride giving about 500 rows
    tolerances: {residual: 1.0e-8, transition: 1.0e-7, all_fields: 5.0e-6,
                 jacobian: 5.0e-6, holonomic: 1.0e-5}
    outputs: [csv, summary]

Unknown keys are rejected.  An inline geometry gives constant coefficients
as 1-based ``[i, j, k, value]`` entries::

    geometry: {name: inline, dimension: 2, coefficients: [[1, 1, 2, 0.3]]}
"""
from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import yaml

from .derivations import ConnectionField
from .errors import ConfigError, GeometryError, PathFramesError
from .extension import (
    extend_to_coordinates,
    holonomicity_on_path,
    torsion_norms_on_path,
)
from .geometry import ChartDomain, affine_tube, circle_path, latitude_path, line_path
from .ivp import STEPS_PER_UNIT, uniform_grid
from .special_frames import (
    special_frame_all_fields,
    special_frame_along_path,
    tangent_components,
    verify_transition_constancy,
)

TWO_PI = 2 * math.pi

DEFAULT_TOLERANCES = {
    "residual": 1e-8,
    "transition": 1e-7,
    "all_fields": 5e-6,
    "jacobian": 5e-6,
    "holonomic": 1e-5,
}


@dataclass(frozen=True)
class Geometry:
    name: str
    dimension: int
    coordinates: tuple
    chart: ChartDomain
    formulas: dict
    paths: tuple
    build: Callable[[dict], Callable]
    params: dict = field(default_factory=dict)
    metric: Optional[Callable] = None
    periods: dict = field(default_factory=dict)

    def connection(self, params=None):
        merged = dict(self.params)
        merged.update(params or {})
        return ConnectionField(self.build(merged), self.chart, self.name)


def _flat(params):
    zeros = np.zeros((2, 2, 2))
    return lambda x: zeros


def _polar(params):
    def G(x):
        r = x[0]
        out = np.zeros((2, 2, 2))
        out[0, 1, 1] = -r
        out[1, 0, 1] = out[1, 1, 0] = 1.0 / r
        return out
    return G


def _sphere(params):
    def G(x):
        th = x[0]
        out = np.zeros((2, 2, 2))
        out[0, 1, 1] = -math.sin(th) * math.cos(th)
        out[1, 0, 1] = out[1, 1, 0] = math.cos(th) / math.sin(th)
        return out
    return G


def _torsion_const(params):
    out = np.zeros((2, 2, 2))
    out[0, 0, 1] = float(params["kappa"])
    return lambda x: out


GEOMETRIES = {
    "flat": Geometry(
        "flat", 2, ("x", "y"), ChartDomain([-10.0, -10.0], [10.0, 10.0]),
        {"all": "0"},
        ({"kind": "line", "start": [0.0, 0.0], "end": [1.0, 2.0]},
         {"kind": "circle", "center": [0.0, 0.0], "radius": 1.0, "s_start": 0.0, "s_end": 1.2}),
        _flat, metric=lambda x: np.eye(2)),
    "polar-flat": Geometry(
        "polar-flat", 2, ("r", "phi"), ChartDomain([0.05, -10.0], [10.0, 20.0]),
        {"Gamma^r_{phi phi}": "-r", "Gamma^phi_{r phi}": "1/r", "Gamma^phi_{phi r}": "1/r"},
        ({"kind": "latitude", "theta0": 1.0, "s_start": 0.0, "s_end": TWO_PI},
         {"kind": "line", "start": [0.5, 0.3], "end": [2.0, 1.0]}),
        _polar, metric=lambda x: np.diag([1.0, x[0] ** 2]), periods={1: TWO_PI}),
    "sphere2": Geometry(
        "sphere2", 2, ("theta", "phi"), ChartDomain([0.05, -10.0], [math.pi - 0.05, 20.0]),
        {"Gamma^theta_{phi phi}": "-sin(theta) cos(theta)",
         "Gamma^phi_{theta phi}": "cot(theta)", "Gamma^phi_{phi theta}": "cot(theta)"},
        ({"kind": "latitude", "theta0": math.pi / 3, "s_start": 0.0, "s_end": TWO_PI},
         {"kind": "line", "start": [0.6, 0.0], "end": [1.3, 1.0]}),
        _sphere, metric=lambda x: np.diag([1.0, math.sin(x[0]) ** 2]), periods={1: TWO_PI}),
    "torsion-const": Geometry(
        "torsion-const", 2, ("x", "y"), ChartDomain([-10.0, -10.0], [10.0, 10.0]),
        {"Gamma^1_{12}": "kappa"},
        ({"kind": "line", "start": [0.0, 0.0], "end": [1.0, 1.0]},
         {"kind": "circle", "center": [0.0, 0.0], "radius": 1.0, "s_start": 0.0, "s_end": 1.2}),
        _torsion_const, params={"kappa": 0.3}),
}

PATH_KEYS = {
    "line": {"start", "end"},
    "circle": {"center", "radius", "s_start", "s_end"},
    "latitude": {"theta0", "s_start", "s_end"},
}


def list_geometries():
    return sorted(GEOMETRIES)


def describe(name):
    """Registry metadata for a built-in geometry."""
    try:
        g = GEOMETRIES[name]
    except KeyError:
        raise ConfigError(f"unknown geometry '{name}'; choose from {list_geometries()}") from None
    return {
        "name": g.name,
        "dimension": g.dimension,
        "coordinates": list(g.coordinates),
        "chart": {"lower": g.chart.lower.tolist(), "upper": g.chart.upper.tolist()},
        "coefficients": dict(g.formulas),
        "nonzero_only": True,
        "params": dict(g.params),
        "default_paths": [dict(p) for p in g.paths],
    }


# -- configuration -----------------------------------------------------------

TOP_KEYS = {"name", "geometry", "path", "steps_per_unit", "s0", "B", "seed",
            "transverse_step", "report_stride", "tolerances", "outputs"}


def _floats(value, what):
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"{what} must be a list of numbers") from None


def _number(value, what):
    if isinstance(value, bool):
        raise ConfigError(f"{what} must be a number")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{what} must be a number") from None


def _normalize_geometry(item):
    if isinstance(item, str):
        item = {"name": item}
    if not isinstance(item, dict) or "name" not in item:
        raise ConfigError("geometry must be a name or a mapping with 'name'")
    name = item["name"]
    if name == "inline":
        extra = set(item) - {"name", "dimension", "coefficients", "chart"}
        if extra:
            raise ConfigError(f"unknown inline geometry keys: {sorted(extra)}")
        n = int(item.get("dimension", 0))
        if n < 1:
            raise ConfigError("inline geometry needs a positive 'dimension'")
        coeffs = []
        for entry in item.get("coefficients", []):
            if len(entry) != 4:
                raise ConfigError("inline coefficients are [i, j, k, value] entries")
            i, j, k = (int(v) for v in entry[:3])
            if not all(1 <= v <= n for v in (i, j, k)):
                raise ConfigError(f"coefficient index out of range in {entry}")
            coeffs.append([i, j, k, float(entry[3])])
        chart = item.get("chart", {"lower": [-10.0] * n, "upper": [10.0] * n})
        if set(chart) != {"lower", "upper"}:
            raise ConfigError("inline chart needs exactly 'lower' and 'upper'")
        return {"name": "inline", "dimension": n, "coefficients": coeffs,
                "chart": {"lower": _floats(chart["lower"], "chart.lower"),
                          "upper": _floats(chart["upper"], "chart.upper")}}
    if name not in GEOMETRIES:
        raise ConfigError(f"unknown geometry '{name}'; choose from {list_geometries()}")
    extra = set(item) - {"name", "params"}
    if extra:
        raise ConfigError(f"unknown geometry keys: {sorted(extra)}")
    g = GEOMETRIES[name]
    params = dict(g.params)
    for key, value in (item.get("params") or {}).items():
        if key not in g.params:
            raise ConfigError(f"geometry '{name}' has no parameter '{key}'")
        params[key] = _number(value, f"geometry parameter {key}")
    return {"name": name, "params": params}


def _normalize_path(item, geometry):
    defaults = {}
    if geometry["name"] in GEOMETRIES:
        defaults = {p["kind"]: p for p in GEOMETRIES[geometry["name"]].paths}
    if item is None:
        if not defaults:
            raise ConfigError("inline geometries need an explicit path")
        item = {"kind": next(iter(defaults))}
    if isinstance(item, str):
        item = {"kind": item}
    if not isinstance(item, dict) or item.get("kind") not in PATH_KEYS:
        raise ConfigError(f"path kind must be one of {sorted(PATH_KEYS)}")
    kind = item["kind"]
    extra = set(item) - PATH_KEYS[kind] - {"kind"}
    if extra:
        raise ConfigError(f"unknown keys for path '{kind}': {sorted(extra)}")
    merged = dict(defaults.get(kind, {}))
    merged.update(item)
    out = {"kind": kind}
    if kind == "line":
        for key in ("start", "end"):
            if key not in merged:
                raise ConfigError(f"line path needs '{key}'")
            out[key] = _floats(merged[key], f"path.{key}")
    elif kind == "circle":
        out["center"] = _floats(merged.get("center", [0.0, 0.0]), "path.center")
        out["radius"] = _number(merged.get("radius", 1.0), "path.radius")
        out["s_start"] = _number(merged.get("s_start", 0.0), "path.s_start")
        out["s_end"] = _number(merged.get("s_end", TWO_PI), "path.s_end")
    else:
        if "theta0" not in merged:
            raise ConfigError("latitude path needs 'theta0'")
        out["theta0"] = _number(merged["theta0"], "path.theta0")
        out["s_start"] = _number(merged.get("s_start", 0.0), "path.s_start")
        out["s_end"] = _number(merged.get("s_end", TWO_PI), "path.s_end")
    return out


def normalize_config(raw):
    """Validate a parsed scenario and fill in every default."""
    if not isinstance(raw, dict):
        raise ConfigError("scenario must be a mapping")
    extra = set(raw) - TOP_KEYS
    if extra:
        raise ConfigError(f"unknown scenario keys: {sorted(extra)}")
    if "geometry" not in raw:
        raise ConfigError("scenario needs a 'geometry'")
    geometry = _normalize_geometry(raw["geometry"])
    path = _normalize_path(raw.get("path"), geometry)
    tolerances = dict(DEFAULT_TOLERANCES)
    for key, value in (raw.get("tolerances") or {}).items():
        if key not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown tolerance '{key}'")
        tolerances[key] = _number(value, f"tolerance {key}")
    outputs = list(raw.get("outputs", ["csv", "summary"]))
    if not set(outputs) <= {"csv", "summary"}:
        raise ConfigError("outputs may contain 'csv' and 'summary' only")
    steps = int(raw.get("steps_per_unit", STEPS_PER_UNIT))
    if steps < 1:
        raise ConfigError("steps_per_unit must be positive")
    B = raw.get("B")
    if B is not None:
        B = [_floats(row, "B row") for row in B]
    s0 = raw.get("s0")
    name = raw.get("name") or f"{geometry['name']}-{path['kind']}"
    return {
        "name": str(name),
        "geometry": geometry,
        "path": path,
        "steps_per_unit": steps,
        "s0": None if s0 is None else _number(s0, "s0"),
        "B": B,
        "seed": int(raw.get("seed", 0)),
        "transverse_step": _number(raw.get("transverse_step", 1e-4), "transverse_step"),
        "report_stride": int(raw.get("report_stride", 0)),
        "tolerances": tolerances,
        "outputs": outputs,
    }


def load_config(source):
    """Parse YAML text or a file path into a normalized scenario."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                     and Path(source).exists()):
        text = Path(source).read_text()
    else:
        text = source
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse scenario: {exc}") from None
    return normalize_config(raw)


def dump_config(config):
    return yaml.safe_dump(config, sort_keys=True, default_flow_style=None)


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def build_connection(geometry):
    if geometry["name"] == "inline":
        n = geometry["dimension"]
        G = np.zeros((n, n, n))
        for i, j, k, value in geometry["coefficients"]:
            G[i - 1, j - 1, k - 1] = value
        chart = ChartDomain(geometry["chart"]["lower"], geometry["chart"]["upper"])
        return ConnectionField(lambda x: G, chart, "inline")
    return GEOMETRIES[geometry["name"]].connection(geometry["params"])


def build_path(path, chart, grid_size=1000):
    kind = path["kind"]
    if kind == "line":
        return line_path(path["start"], path["end"], grid_size, chart)
    if kind == "circle":
        return circle_path(path["center"], path["radius"], path["s_start"], path["s_end"],
                           grid_size, chart)
    return latitude_path(path["theta0"], path["s_start"], path["s_end"], grid_size, chart)


# -- holonomy ----------------------------------------------------------------

def holonomy_deficit(transport, metric):
    """Rotation angle in ``[0, 2pi)`` of the closed-loop transport map.

    The map ``A(s_end) A(s_start)^{-1}`` is expressed in an orthonormal basis
    of ``metric`` at the base point (two dimensions only).
    """
    P = transport.A_grid[-1] @ np.linalg.inv(transport.A_grid[0])
    L = np.linalg.cholesky(metric).T
    R = L @ P @ np.linalg.inv(L)
    angle = math.atan2(R[1, 0], R[0, 0]) % TWO_PI
    if angle > TWO_PI - 1e-12:
        angle -= TWO_PI
    return angle


def _is_closed(path, periods):
    delta = np.asarray(path.gamma(path.s_end)) - np.asarray(path.gamma(path.s_start))
    for axis, period in periods.items():
        delta[axis] = (delta[axis] + period / 2) % period - period / 2
    return bool(np.max(np.abs(delta)) < 1e-9)


# -- pipeline ----------------------------------------------------------------

@dataclass
class RunReport:
    name: str
    columns: list
    rows: list
    summary: dict
    files: list = field(default_factory=list)

    @property
    def passed(self):
        return self.summary["status"] == "pass"

    def csv_text(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _fmt(value):
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


class StageError(PathFramesError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the error."""

    def __init__(self, stage, exc):
        super().__init__(f"stage '{stage}' failed: {exc}")
        self.stage = stage
        self.original = exc


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except GeometryError:
        raise
    except PathFramesError as exc:
        raise StageError(name, exc) from exc


def run_scenario(config, out_dir=None):
    """Run the full pipeline for a normalized (or raw) scenario.

    Stages: transport along the tangent, transition constancy, all-fields
    frame on a tube, holonomicity verdict against the torsion gate, and
    coordinate extension of the transported frame.  Returns a ``RunReport``;
    files are written when ``out_dir`` is given.
    """
    if "tolerances" not in config or "report_stride" not in config:
        config = normalize_config(config)
    tol = config["tolerances"]
    conn = build_connection(config["geometry"])
    chart = conn.chart
    path = build_path(config["path"], chart)
    n = path.n
    grid = uniform_grid(path.s_start, path.s_end, config["steps_per_unit"])
    stride = config["report_stride"] or max(1, math.ceil((grid.size - 1) / 500))
    s0 = path.s_start if config["s0"] is None else config["s0"]
    if config["s0"] is not None:
        # snap the base point onto the grid
        s0 = float(grid[int(np.argmin(np.abs(grid - s0)))])
    B = np.eye(n) if config["B"] is None else np.array(config["B"], dtype=float)
    path = path.with_grid_size(grid.size - 1)

    verdicts = {}
    diagnostics = {}
    W = tangent_components(conn, path)
    transport = _stage("transport", special_frame_along_path, W, s0, B, grid,
                       tol["residual"], path)
    report_idx = np.arange(0, grid.size, stride)
    if report_idx[-1] != grid.size - 1:
        report_idx = np.append(report_idx, grid.size - 1)
    report_grid = grid[report_idx]
    residual_rows = transport.residual[report_idx]
    verdicts["transport_residual"] = _verdict(np.max(residual_rows) < tol["residual"])
    diagnostics["transport_residual_max_full_grid"] = transport.max_residual

    rng = np.random.default_rng(config["seed"])
    B2 = rng.normal(size=(n, n)) + n * np.eye(n)
    other = _stage("transition", special_frame_along_path, W, s0, B2, grid,
                   tol["residual"], path)
    drift = verify_transition_constancy(transport, other)
    diagnostics["transition_derivative_max"] = drift
    verdicts["transition_constancy"] = _verdict(drift < tol["transition"])

    g = GEOMETRIES.get(config["geometry"]["name"])
    if g is not None and g.metric is not None and _is_closed(path, g.periods):
        diagnostics["holonomy_deficit"] = holonomy_deficit(transport, g.metric(path.point(path.s_start)))

    torsion_rows = torsion_norms_on_path(conn, path, grid=report_grid)
    torsion_free = bool(np.max(torsion_rows) < tol["holonomic"])
    diagnostics["torsion_free"] = torsion_free

    commutator_rows = np.full(report_grid.size, np.nan)
    holonomicity = "skipped"
    try:
        tube = affine_tube(path)
        tube.check_injective()
    except GeometryError as exc:
        tube = None
        diagnostics["tube"] = f"skipped: {exc}"
    if tube is not None:
        tube_frame = _stage("all_fields", special_frame_all_fields, conn, tube, B, grid,
                            config["transverse_step"], s0, tol["all_fields"],
                            check_stride=stride, transport_tol=tol["residual"])
        diagnostics["all_fields_residual_max"] = tube_frame.max_residual
        verdicts["all_fields_residual"] = _verdict(tube_frame.max_residual < tol["all_fields"])
        holo = _stage("holonomicity", holonomicity_on_path, tube_frame.frame, path,
                      report_grid, None, tol["holonomic"])
        commutator_rows = holo.norms
        holonomicity = holo.verdict
        consistent = (holonomicity == "holonomic" and torsion_free) or (
            holonomicity == "anholonomic" and not torsion_free)
        verdicts["torsion_holonomy_dichotomy"] = _verdict(consistent)

        ext = _stage("extension", extend_to_coordinates, transport.frame_at, tube, s0, None,
                     grid, transport.derivative_at, 1e-5, stride, tol["jacobian"])
        coord_holo = holonomicity_on_path(ext.coordinate_frame(), path, report_grid,
                                          None, tol["holonomic"])
        diagnostics["extension_jacobian_mismatch_max"] = float(np.max(ext.jacobian_mismatch))
        diagnostics["extension_basis_mismatch_max"] = float(np.max(ext.basis_mismatch))
        diagnostics["extension_det_ratio"] = list(ext.det_ratio)
        diagnostics["extension_commutator_max"] = coord_holo.max_norm
        verdicts["coordinate_extension"] = _verdict(
            np.max(ext.jacobian_mismatch) < tol["jacobian"]
            and np.max(ext.basis_mismatch) < tol["jacobian"]
            and ext.det_ratio[0] > 0
            and coord_holo.verdict == "holonomic")
    else:
        for key in ("all_fields_residual", "torsion_holonomy_dichotomy", "coordinate_extension"):
            verdicts[key] = "skipped"

    columns = (["s"] + [f"x{i + 1}" for i in range(n)]
               + [f"A{i + 1}{j + 1}" for i in range(n) for j in range(n)]
               + ["residual", "commutator_norm", "torsion_norm"])
    rows = []
    for a, k in enumerate(report_idx):
        s = float(grid[k])
        rows.append([s] + [float(v) for v in path.gamma(s)]
                    + [float(v) for v in transport.A_grid[k].ravel()]
                    + [float(residual_rows[a]), float(commutator_rows[a]), float(torsion_rows[a])])

    status = "fail" if "fail" in verdicts.values() else "pass"
    summary = {
        "name": config["name"],
        "status": status,
        "verdicts": verdicts,
        "holonomicity": holonomicity,
        "diagnostics": diagnostics,
        "provenance": {
            "config_hash": config_hash(config),
            "config": config,
            "transport_step": float(grid[1] - grid[0]),
            "grid_nodes": int(grid.size),
            "report_stride": int(stride),
            "transverse_step": config["transverse_step"],
            "finite_difference_step": "1e-5 * max(1, |x|_inf)",
        },
    }
    report = RunReport(config["name"], columns, rows, summary)
    if out_dir is not None:
        write_report(report, out_dir, config["outputs"])
    return report


def _verdict(ok):
    return "pass" if bool(ok) else "fail"


def recompute_verdicts(report):
    """Row-derived verdicts (residual, commutator and torsion maxima)."""
    cols = {name: i for i, name in enumerate(report.columns)}
    tol = report.summary["provenance"]["config"]["tolerances"]
    residual = max(row[cols["residual"]] for row in report.rows)
    out = {"transport_residual": _verdict(residual < tol["residual"])}
    comm = [row[cols["commutator_norm"]] for row in report.rows]
    if not any(math.isnan(c) for c in comm):
        worst = max(comm)
        out["holonomicity"] = ("holonomic" if worst < tol["holonomic"] else
                               "anholonomic" if worst > 10 * tol["holonomic"] else "inconclusive")
    torsion = max(row[cols["torsion_norm"]] for row in report.rows)
    out["torsion_free"] = torsion < tol["holonomic"]
    return out


def write_report(report, out_dir, outputs=("csv", "summary")):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if "csv" in outputs:
        target = out / f"{report.name}.csv"
        target.write_text(report.csv_text())
        report.files.append(str(target))
    if "summary" in outputs:
        target = out / f"{report.name}.summary.json"
        target.write_text(json.dumps(report.summary, indent=2, sort_keys=True) + "\n")
        report.files.append(str(target))
    return report.files


def default_scenarios():
    """Two scenarios per built-in geometry, one per default path."""
    out = []
    for name in list_geometries():
        for p in GEOMETRIES[name].paths:
            out.append(normalize_config({"name": f"{name}-{p['kind']}",
                                         "geometry": name, "path": copy.deepcopy(p)}))
    return out
