"""Command-line driver.

Subcommands: homogenize, spectra, phase-diagram, classify, oracle.  Every
command reads a JSON config (validated against a fixed schema), writes results
into an output directory, and exits 0 on success, 1 on a configuration
problem, 2 on a solver failure.  Failures print a single machine-readable
JSON object to stderr.  Set ELLIPTHOM_LOG to error|info|debug for progress
chatter on stderr.

The phase-diagram sweep runs a fixed family of microstructures (laminates,
the checkerboard, and two disk arrangements -- strong inclusions "disks_A"
and weak inclusions "disks_B") over strong-phase fractions, flags rows whose
homogenized tensor has lost rank-one positivity, and writes CSV/SVG/JSON.
"""

import argparse
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import jsonschema
import numpy as np

from ._json import dump_canonical, dumps_canonical, load_json
from .errors import ConfigError, ConstraintViolation, EllipthomError
from .fem import homogenized_tensor
from .laminate import LaminateSpec, laminate_corrector, laminate_lstar
from .microstructure import (
    PixelGrid,
    checkerboard,
    classify,
    disks,
    grid_from_json_dict,
    grid_to_json_dict,
    laminate,
    random_disks,
)
from .spectra import compute_spectral_report, lambda4, lambda6
from .tensors import LameParams, iso_tensor, make_gutierrez, rank_one_min

log = logging.getLogger("ellipthom.cli")

_BASIS_MATS = {
    "11": np.array([[1.0, 0.0], [0.0, 0.0]]),
    "12": np.array([[0.0, 1.0], [0.0, 0.0]]),
    "21": np.array([[0.0, 0.0], [1.0, 0.0]]),
    "22": np.array([[0.0, 0.0], [0.0, 1.0]]),
}

_DEFAULT_SOLVER = {
    "tol": 1e-10,
    "max_iter": 20000,
    "angle_samples": 64,
    "bisect_tol": 1e-6,
    "gamma_grid": 8,
    "method": "auto",
}
_DEFAULT_OUTPUT = {
    "dir": "out",
    "formats": ["json", "csv", "svg"],
    "loss_threshold": 1e-6,
    "timing": "wall",
}
_SWEEP_KINDS = ["laminate", "checkerboard", "disks_A", "disks_B"]
_SWEEP_THETAS = [0.25, 0.5, 0.75]

# 2x2 lattice of periodic disk centers used by the sweep's disk rows.
_DISK_LATTICE = [[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]]
# Disks on that lattice stay disjoint while radius < 0.25; keep a half-pixel
# of slack so pixelation cannot fuse neighbours.
_DISK_RADIUS_CAP = 0.24

_SCHEMA = {
    "type": "object",
    "required": ["grid", "phases"],
    "additionalProperties": False,
    "properties": {
        "grid": {
            "type": "object",
            "required": ["kind", "n"],
            "additionalProperties": False,
            "properties": {
                "kind": {
                    "enum": ["laminate", "checkerboard", "disks", "random_disks"]
                },
                "n": {"type": "integer", "minimum": 2, "maximum": 1024},
                "theta": {"type": "number", "minimum": 0.0, "maximum": 1.0},
                "axis": {"enum": [1, 2]},
                "seed": {"type": "integer", "minimum": 0},
                "radius": {"type": "number", "exclusiveMinimum": 0.0},
                "centers": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "items": {"type": "number"},
                        "minItems": 2,
                        "maxItems": 2,
                    },
                },
                "strong_inside": {"type": "boolean"},
                "min_gap": {"type": "number", "minimum": 0.0},
            },
        },
        "phases": {
            "type": "object",
            "required": ["mu1", "lambda1", "mu2", "lambda2"],
            "additionalProperties": False,
            "properties": {
                "mu1": {"type": "number"},
                "lambda1": {"type": "number"},
                "mu2": {"type": "number"},
                "lambda2": {"type": "number"},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0.0, "maximum": 1e-2},
                "max_iter": {"type": "integer", "minimum": 1},
                "angle_samples": {"type": "integer", "minimum": 16},
                "bisect_tol": {"type": "number", "exclusiveMinimum": 0.0},
                "gamma_grid": {"type": "integer", "minimum": 4},
                "method": {"enum": ["auto", "dense", "matrix_free"]},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "formats": {
                    "type": "array",
                    "items": {"enum": ["json", "csv", "svg"]},
                },
                "loss_threshold": {"type": "number", "exclusiveMinimum": 0.0},
                "timing": {"enum": ["wall", "none"]},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kinds": {
                    "type": "array",
                    "items": {
                        "enum": ["laminate", "checkerboard", "disks_A", "disks_B"]
                    },
                },
                "thetas": {
                    "type": "array",
                    "items": {
                        "type": "number",
                        "exclusiveMinimum": 0.0,
                        "exclusiveMaximum": 1.0,
                    },
                },
            },
        },
    },
}


@dataclass
class RunConfig:
    grid_spec: dict
    phases: dict
    solver: dict
    output: dict
    sweep: dict
    pair: object
    gutierrez: bool
    out_dir: str
    seed_override: int | None


def _load_config_file(path: str) -> dict:
    try:
        data = load_json(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return data


def _build_pair(phases: dict):
    """Return ((form1, form2) or GutierrezPair, is_gutierrez)."""
    p1 = LameParams(lam=float(phases["lambda1"]), mu=float(phases["mu1"]))
    p2 = LameParams(lam=float(phases["lambda2"]), mu=float(phases["mu2"]))
    for name, p in (("phase 1", p1), ("phase 2", p2)):
        if p.mu <= 0:
            raise ConfigError(f"{name}: mu must be positive, got {p.mu}")
        if p.lam + 2.0 * p.mu <= 0:
            raise ConfigError(
                f"{name}: lambda + 2 mu must be positive for strong ellipticity, "
                f"got {p.lam + 2.0 * p.mu}"
            )
    try:
        return make_gutierrez(p1.mu, p1.lam, p2.mu, p2.lam), True
    except ConstraintViolation:
        log.info("phases do not form a strong/weak pair; using them as given")
        return (iso_tensor(p1), iso_tensor(p2)), False


def _resolve_config(raw: dict, args) -> RunConfig:
    try:
        jsonschema.validate(raw, _SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "(root)"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc

    solver = dict(_DEFAULT_SOLVER)
    solver.update(raw.get("solver", {}))
    output = dict(_DEFAULT_OUTPUT)
    output.update(raw.get("output", {}))
    sweep = {
        "kinds": list(raw.get("sweep", {}).get("kinds", _SWEEP_KINDS)),
        "thetas": [float(t) for t in raw.get("sweep", {}).get("thetas", _SWEEP_THETAS)],
    }
    grid_spec = dict(raw["grid"])
    if args.seed is not None:
        grid_spec["seed"] = args.seed
    pair, is_gut = _build_pair(raw["phases"])
    out_dir = args.out if args.out is not None else output["dir"]
    return RunConfig(
        grid_spec=grid_spec,
        phases=dict(raw["phases"]),
        solver=solver,
        output=output,
        sweep=sweep,
        pair=pair,
        gutierrez=is_gut,
        out_dir=out_dir,
        seed_override=args.seed,
    )


def _build_grid(gs: dict) -> PixelGrid:
    kind = gs["kind"]
    n = int(gs["n"])
    try:
        if kind == "laminate":
            if "theta" not in gs:
                raise ConfigError("laminate grid needs theta")
            return laminate(n, float(gs["theta"]), int(gs.get("axis", 1)))
        if kind == "checkerboard":
            if "theta" in gs and abs(float(gs["theta"]) - 0.5) > 1e-12:
                raise ConfigError("checkerboard has theta = 0.5 by construction")
            return checkerboard(n)
        if kind == "disks":
            if "centers" not in gs or "radius" not in gs:
                raise ConfigError("disks grid needs centers and radius")
            return disks(
                n,
                gs["centers"],
                float(gs["radius"]),
                bool(gs.get("strong_inside", True)),
            )
        if kind == "random_disks":
            if "theta" not in gs:
                raise ConfigError("random_disks grid needs theta (target fraction)")
            radius_px = float(gs["radius"]) * n if "radius" in gs else 4.0
            return random_disks(
                n,
                int(gs.get("seed", 0)),
                float(gs["theta"]),
                float(gs.get("min_gap", 0.0)),
                radius_px=radius_px,
            )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    except EllipthomError as exc:
        # Precondition failures while *constructing* the grid (odd n, theta not
        # representable, ...) are configuration problems, not solver failures.
        # Packing stalls are the exception: the config is legal, the RSA draw
        # failed, so let them surface as a runtime failure.
        from .errors import PackingStalled

        if isinstance(exc, PackingStalled):
            raise
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown grid kind {kind!r}")


def _corrector_method(solver: dict) -> str:
    return "dense" if solver["method"] == "dense" else "matrix_free"


def _ensure_out(cfg: RunConfig) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return cfg.out_dir


def _common_meta(cfg: RunConfig) -> dict:
    return {
        "phases": cfg.phases,
        "gutierrez_pair": cfg.gutierrez,
        "solver": {
            k: cfg.solver[k]
            for k in ("tol", "max_iter", "angle_samples", "bisect_tol", "gamma_grid", "method")
        },
    }


def cmd_homogenize(cfg: RunConfig) -> int:
    grid = _build_grid(cfg.grid_spec)
    hom = homogenized_tensor(
        grid,
        cfg.pair,
        tol=cfg.solver["tol"],
        max_iter=cfg.solver["max_iter"],
        method=_corrector_method(cfg.solver),
    )
    r1, (a, b) = rank_one_min(hom.lstar)
    payload = {
        "schema": "ellipthom/homogenized/v1",
        "bound_type": "discrete_upper",
        "theta": hom.theta,
        "lstar": hom.lstar.coeffs,
        "per_direction_energy": hom.per_direction_energy,
        "rank_one_min": r1,
        "rank_one_argmin": {"a": list(a), "b": list(b)},
        "diagnostics": hom.diagnostics,
        "grid": grid_to_json_dict(grid),
    }
    payload.update(_common_meta(cfg))
    out = _ensure_out(cfg)
    path = os.path.join(out, "homogenized.json")
    dump_canonical(payload, path)
    log.info("wrote %s", path)
    print(path)
    return 0


def cmd_spectra(cfg: RunConfig) -> int:
    grid = _build_grid(cfg.grid_spec)
    seed = cfg.seed_override if cfg.seed_override is not None else 0
    rep = compute_spectral_report(
        grid,
        cfg.pair,
        tol=cfg.solver["tol"],
        max_iter=cfg.solver["max_iter"],
        angle_samples=cfg.solver["angle_samples"],
        bisect_tol=cfg.solver["bisect_tol"],
        gamma_grid=cfg.solver["gamma_grid"],
        seed=seed,
        method=cfg.solver["method"],
    )
    payload = {
        "schema": "ellipthom/spectra/v1",
        "bound_type": "discrete_upper",
        "lambda6": rep.lambda6,
        "lambda4": rep.lambda4,
        "lambda4_angles": list(rep.lambda4_angles),
        "lambda4_direction": [list(rep.lambda4_direction[0]), list(rep.lambda4_direction[1])],
        "lambda1": rep.lambda1,
        "lambda1_gamma": list(rep.lambda1_gamma),
        "lambda5": rep.lambda5,
        "lambda5_residual": rep.lambda5_residual,
        "lambda3": {str(k): v for k, v in rep.lambda3.items()},
        "lstar_rank_one_min": rep.lstar_rank_one_min,
        "orderings": rep.orderings,
        "constants": rep.diagnostics["constants"],
        "diagnostics": rep.diagnostics,
        "grid": grid_to_json_dict(grid),
    }
    payload.update(_common_meta(cfg))
    out = _ensure_out(cfg)
    path = os.path.join(out, "spectra.json")
    dump_canonical(payload, path)
    log.info("wrote %s", path)
    print(path)
    return 0


def cmd_oracle(cfg: RunConfig) -> int:
    gs = cfg.grid_spec
    if gs["kind"] != "laminate":
        raise ConfigError("oracle needs grid.kind = laminate")
    if "theta" not in gs:
        raise ConfigError("laminate grid needs theta")
    spec = LaminateSpec(
        theta=float(gs["theta"]),
        normal_axis=int(gs.get("axis", 1)),
        pair=cfg.pair,
    )
    L = laminate_lstar(spec)
    correctors = {}
    for key, M in _BASIS_MATS.items():
        c1, c2 = laminate_corrector(spec, M)
        correctors[key] = {"c1": list(c1), "c2": list(c2)}
    r1, (a, b) = rank_one_min(L)
    payload = {
        "schema": "ellipthom/oracle/v1",
        "bound_type": "exact",
        "theta": spec.theta,
        "normal_axis": spec.normal_axis,
        "lstar": L.coeffs,
        "correctors": correctors,
        "rank_one_min": r1,
        "rank_one_argmin": {"a": list(a), "b": list(b)},
    }
    payload.update(_common_meta(cfg))
    out = _ensure_out(cfg)
    path = os.path.join(out, "oracle.json")
    dump_canonical(payload, path)
    log.info("wrote %s", path)
    print(path)
    return 0


def cmd_classify(config_path: str) -> int:
    data = _load_config_file(config_path)
    if "chi_packed" in data:
        grid = grid_from_json_dict(data)
    elif isinstance(data.get("grid"), dict) and "chi_packed" in data["grid"]:
        grid = grid_from_json_dict(data["grid"])
    elif isinstance(data.get("grid"), dict):
        grid = _build_grid(data["grid"])
    else:
        raise ConfigError("no grid found: expected chi_packed or a grid section")
    print(classify(grid))
    return 0


# --- phase-diagram sweep ---------------------------------------------------


def _disk_radius(frac: float) -> float:
    return math.sqrt(frac / (len(_DISK_LATTICE) * math.pi))


def _sweep_grid(kind: str, theta: float, n: int) -> PixelGrid:
    if kind == "laminate":
        return laminate(n, theta)
    if kind == "checkerboard":
        return checkerboard(n)
    if kind == "disks_A":
        return disks(n, _DISK_LATTICE, _disk_radius(theta), strong_inside=True)
    if kind == "disks_B":
        return disks(n, _DISK_LATTICE, _disk_radius(1.0 - theta), strong_inside=False)
    raise ConfigError(f"unknown sweep kind {kind!r}")


def _representable(kind: str, theta: float, n: int) -> bool:
    """Whether (kind, theta) maps to an honest pixel microstructure at size n."""
    if not 0.0 < theta < 1.0:
        return False
    if kind == "laminate":
        return abs(theta * n - round(theta * n)) <= 1e-9
    if kind == "checkerboard":
        return n % 2 == 0 and abs(theta - 0.5) <= 1e-12
    if kind in ("disks_A", "disks_B"):
        frac = theta if kind == "disks_A" else 1.0 - theta
        r = _disk_radius(frac)
        return r <= _DISK_RADIUS_CAP and r * n >= 1.5
    return False


def _sweep_plan(cfg: RunConfig, n: int) -> list:
    rows = [
        (kind, theta)
        for kind in cfg.sweep["kinds"]
        for theta in cfg.sweep["thetas"]
        if _representable(kind, theta, n)
    ]
    if not rows:
        raise ConfigError("phase-diagram sweep is empty: no (kind, theta) is representable")
    return rows


def _compute_row(kind: str, theta: float, n: int, cfg: RunConfig) -> dict:
    t0 = time.perf_counter()
    row = {
        "kind": kind,
        "theta": theta,
        "n": n,
        "lambda6": None,
        "lambda4": None,
        "lambda_star": None,
        "loss_flag": None,
        "seconds": 0.0,
        "status": "ok",
    }
    try:
        grid = _sweep_grid(kind, theta, n)
        s = cfg.solver
        lam6 = lambda6(grid, cfg.pair, tol=s["tol"], method=s["method"])
        hom = homogenized_tensor(
            grid, cfg.pair, tol=s["tol"], max_iter=s["max_iter"],
            method=_corrector_method(s),
        )
        l4 = lambda4(
            grid,
            cfg.pair,
            angle_samples=s["angle_samples"],
            bisect_tol=s["bisect_tol"],
            tol=s["tol"],
            max_iter=s["max_iter"],
            lambda6_value=lam6,
            hom=hom,
            method=s["method"],
        )
        lam_star, _ = rank_one_min(hom.lstar)
        row["lambda6"] = lam6
        row["lambda4"] = l4.value
        row["lambda_star"] = lam_star
        row["loss_flag"] = bool(lam_star <= cfg.output["loss_threshold"])
    except EllipthomError as exc:
        row["status"] = type(exc).__name__
        log.error("row (%s, %.3f) failed: %s", kind, theta, exc)
    if cfg.output["timing"] == "wall":
        row["seconds"] = time.perf_counter() - t0
    log.info(
        "row %s theta=%.3f done: lambda_star=%s status=%s",
        kind, theta, row["lambda_star"], row["status"],
    )
    return row


_CSV_HEADER = "kind,theta,n,lambda6,lambda4,lambda_star,loss_flag,seconds,status"


def _csv_cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    return "%.17g" % x


def _write_rows_csv(rows: list, path: str) -> None:
    lines = [_CSV_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                [
                    r["kind"],
                    _csv_cell(r["theta"]),
                    _csv_cell(r["n"]),
                    _csv_cell(r["lambda6"]),
                    _csv_cell(r["lambda4"]),
                    _csv_cell(r["lambda_star"]),
                    _csv_cell(r["loss_flag"]),
                    "%.6f" % r["seconds"],
                    r["status"].replace(",", ";"),
                ]
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


_KIND_COLORS = {
    "laminate": "#1f77b4",
    "checkerboard": "#ff7f0e",
    "disks_A": "#2ca02c",
    "disks_B": "#d62728",
}
_LOSS_FILL = "#d62728"
_OK_FILL = "#4caf50"
_FAIL_FILL = "#9e9e9e"


def _svg_phase_diagram(rows: list, n: int, threshold: float) -> str:
    """800x600 figure: loss map (theta vs kind) plus lambda4-vs-theta curves.

    Cell colors: green = rank-one positivity kept, red = lost
    (lambda_star <= threshold), gray = row failed.
    """
    kinds = sorted({r["kind"] for r in rows}, key=_SWEEP_KINDS.index)
    thetas = sorted({r["theta"] for r in rows})
    by_key = {(r["kind"], r["theta"]): r for r in rows}

    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="800" height="600" '
        'viewBox="0 0 800 600">',
        "<desc>Left: loss map over (theta, kind); green = rank-one positive, "
        "red = loss of strong ellipticity, gray = failed row. "
        "Right: lambda4 vs theta per kind.</desc>",
        '<rect x="0" y="0" width="800" height="600" fill="#ffffff"/>',
        f'<text x="400" y="28" font-family="sans-serif" font-size="17" '
        f'text-anchor="middle">loss map and shifted constant, n={n}, '
        f"threshold={threshold:g}</text>",
    ]

    # left panel: theta columns x kind rows
    px0, py0, pw, ph = 60.0, 70.0, 300.0, 440.0
    cw = pw / max(len(thetas), 1)
    chh = ph / max(len(kinds), 1)
    for i, kind in enumerate(kinds):
        y = py0 + i * chh
        parts.append(
            f'<text x="{px0 - 8:.2f}" y="{y + chh / 2 + 4:.2f}" font-family="sans-serif" '
            f'font-size="12" text-anchor="end">{kind}</text>'
        )
        for j, th in enumerate(thetas):
            x = px0 + j * cw
            r = by_key.get((kind, th))
            if r is None:
                continue
            if r["status"] != "ok":
                fill = _FAIL_FILL
            elif r["loss_flag"]:
                fill = _LOSS_FILL
            else:
                fill = _OK_FILL
            parts.append(
                f'<rect x="{x + 2:.2f}" y="{y + 2:.2f}" width="{cw - 4:.2f}" '
                f'height="{chh - 4:.2f}" fill="{fill}" stroke="#333" stroke-width="1"/>'
            )
    for j, th in enumerate(thetas):
        x = px0 + (j + 0.5) * cw
        parts.append(
            f'<text x="{x:.2f}" y="{py0 + ph + 18:.2f}" font-family="sans-serif" '
            f'font-size="12" text-anchor="middle">{th:.2f}</text>'
        )
    parts.append(
        f'<text x="{px0 + pw / 2:.2f}" y="{py0 + ph + 38:.2f}" font-family="sans-serif" '
        f'font-size="13" text-anchor="middle">strong-phase fraction</text>'
    )

    # right panel: lambda4 vs theta, one polyline per kind
    qx0, qy0, qw, qh = 440.0, 70.0, 320.0, 440.0
    ok_rows = [r for r in rows if r["status"] == "ok"]
    vmax = max((r["lambda4"] for r in ok_rows), default=1.0)
    vmax = max(vmax * 1.1, 1e-6)
    parts.append(
        f'<rect x="{qx0:.2f}" y="{qy0:.2f}" width="{qw:.2f}" height="{qh:.2f}" '
        'fill="none" stroke="#333" stroke-width="1"/>'
    )

    def sx(th):
        return qx0 + (th - 0.0) / 1.0 * qw

    def sy(v):
        return qy0 + qh - (v / vmax) * qh

    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = frac * vmax
        y = sy(v)
        parts.append(
            f'<line x1="{qx0:.2f}" y1="{y:.2f}" x2="{qx0 + qw:.2f}" y2="{y:.2f}" '
            'stroke="#ddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{qx0 - 6:.2f}" y="{y + 4:.2f}" font-family="sans-serif" '
            f'font-size="11" text-anchor="end">{v:.3g}</text>'
        )
    for kind in kinds:
        pts = sorted(
            ((r["theta"], r["lambda4"]) for r in ok_rows if r["kind"] == kind),
        )
        if not pts:
            continue
        color = _KIND_COLORS.get(kind, "#333")
        if len(pts) > 1:
            path = " ".join(f"{sx(t):.2f},{sy(v):.2f}" for t, v in pts)
            parts.append(
                f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>'
            )
        for t, v in pts:
            parts.append(
                f'<circle cx="{sx(t):.2f}" cy="{sy(v):.2f}" r="4" fill="{color}"/>'
            )
    for th in thetas:
        parts.append(
            f'<text x="{sx(th):.2f}" y="{qy0 + qh + 18:.2f}" font-family="sans-serif" '
            f'font-size="12" text-anchor="middle">{th:.2f}</text>'
        )
    parts.append(
        f'<text x="{qx0 + qw / 2:.2f}" y="{qy0 + qh + 38:.2f}" font-family="sans-serif" '
        f'font-size="13" text-anchor="middle">shifted constant vs fraction</text>'
    )
    for i, kind in enumerate(kinds):
        lx, ly = qx0 + 10, qy0 + 16 + 18 * i
        color = _KIND_COLORS.get(kind, "#333")
        parts.append(
            f'<rect x="{lx:.2f}" y="{ly - 9:.2f}" width="12" height="12" fill="{color}"/>'
        )
        parts.append(
            f'<text x="{lx + 18:.2f}" y="{ly + 2:.2f}" font-family="sans-serif" '
            f'font-size="12">{kind}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_phase_diagram(cfg: RunConfig, jobs: int) -> int:
    n = int(cfg.grid_spec["n"])
    plan = _sweep_plan(cfg, n)
    log.info("sweep: %d rows at n=%d, jobs=%d", len(plan), n, jobs)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(lambda kt: _compute_row(kt[0], kt[1], n, cfg), plan))
    else:
        rows = [_compute_row(kind, theta, n, cfg) for kind, theta in plan]

    out = _ensure_out(cfg)
    formats = cfg.output["formats"]
    written = []
    if "csv" in formats:
        path = os.path.join(out, "phase_diagram.csv")
        _write_rows_csv(rows, path)
        written.append(path)
    if "svg" in formats:
        path = os.path.join(out, "phase_diagram.svg")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_svg_phase_diagram(rows, n, cfg.output["loss_threshold"]))
        written.append(path)
    if "json" in formats:
        payload = {
            "schema": "ellipthom/phase_diagram/v1",
            "n": n,
            "loss_threshold": cfg.output["loss_threshold"],
            "timing": cfg.output["timing"],
            "rows": rows,
        }
        payload.update(_common_meta(cfg))
        path = os.path.join(out, "phase_diagram.json")
        dump_canonical(payload, path)
        written.append(path)
    for path in written:
        log.info("wrote %s", path)
        print(path)
    failed = [r for r in rows if r["status"] != "ok"]
    if failed and len(failed) == len(rows):
        raise EllipthomError("every sweep row failed")
    return 0


# --- entry point -------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # route usage errors through the config exit code instead of argparse's 2
    def error(self, message):
        raise ConfigError(message)


def _make_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="ellipthom",
        description="Homogenization and ellipticity constants for periodic "
        "two-phase elastic composites.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("homogenize", "compute the homogenized stiffness of one cell"),
        ("spectra", "compute the full set of ellipticity constants"),
        ("phase-diagram", "sweep microstructures and flag ellipticity loss"),
        ("classify", "print the connectivity class of a grid"),
        ("oracle", "closed-form laminate homogenization"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--jobs", type=int, default=1, help="concurrent sweep rows")
        p.add_argument("--seed", type=int, default=None, help="grid seed override")
    return parser


def _emit_error(category: str, exc: BaseException) -> None:
    payload = {
        "error": category,
        "type": type(exc).__name__,
        "message": str(exc),
    }
    sys.stderr.write(dumps_canonical(payload) + "\n")


def _setup_logging() -> None:
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    name = os.environ.get("ELLIPTHOM_LOG", "error").strip().lower()
    logging.basicConfig(
        level=levels.get(name, logging.ERROR),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv=None) -> int:
    _setup_logging()
    parser = _make_parser()
    try:
        args = parser.parse_args(argv)
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
        if args.command == "classify":
            return cmd_classify(args.config)
        cfg = _resolve_config(_load_config_file(args.config), args)
        if args.command == "homogenize":
            return cmd_homogenize(cfg)
        if args.command == "spectra":
            return cmd_spectra(cfg)
        if args.command == "oracle":
            return cmd_oracle(cfg)
        if args.command == "phase-diagram":
            return cmd_phase_diagram(cfg, args.jobs)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        _emit_error("config", exc)
        return 1
    except EllipthomError as exc:
        _emit_error("solver", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
