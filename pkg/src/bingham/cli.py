"""Experiment driver for the pipe-flow convergence studies.

``bingham run`` executes one study: a uniform or adaptive refinement loop
on the circle (errors against the closed-form solution) or on the unit
square (estimator only, no closed-form solution), writing a results table,
mesh snapshots, sampled solution fields and a log-log convergence plot.
``bingham rates`` fits a least-squares slope to a results column.

Exit codes: 0 on success, 2 for an invalid configuration, 3 when the
fixed-point solver fails to converge.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, replace

import numpy as np

from .analysis import CircleExact, estimate, h1_error, mark, multiplier_error
from .assembly import scalar_values_per_cell, vector_values_per_cell
from .mesh import (
    generate_circle,
    generate_square,
    laplacian_smooth,
    locate_points,
    rgb_refine,
    uniform_refine,
    validate_mesh,
    write_mesh_text,
)
from .solver import BinghamParams, UzawaConvergenceError, project_ball, uzawa_solve
from .spaces import build_space, family

SCHEMA_VERSION = "bingham-results-v1"
CSV_COLUMNS = [
    "step", "h_max", "ndof_velocity", "ndof_multiplier", "N_total",
    "uzawa_iters", "h1_semi_err", "h1_full_err", "mult_err",
    "eta_T_total", "eta_E_total", "eta_con_total", "eta_global", "effectivity",
]

# defaults from the reference parameter sets of the two geometries
GEOMETRY_DEFAULTS = {
    "circle": dict(g=0.1, f=0.5, rho=10.0),
    "square": dict(g=1.25, f=3.6, rho=1.5),
}
SOLUTION_GRID = 256


@dataclass
class ExperimentConfig:
    geometry: str
    method: str
    mode: str
    steps: int
    output_dir: str
    mu: float = 1.0
    g: float = None
    f: float = None
    rho: float = None
    tol: float = 1e-7
    theta: float = 0.5
    robust_estimator: bool = False
    warm_start: bool = True
    seed: int = 0

    def validated(self):
        cfg = self
        if cfg.geometry not in ("circle", "square"):
            raise ValueError(f"unknown geometry {cfg.geometry!r}")
        if cfg.mode not in ("uniform", "adaptive"):
            raise ValueError(f"unknown mode {cfg.mode!r}")
        family(cfg.method)  # raises for unknown methods
        defaults = GEOMETRY_DEFAULTS[cfg.geometry]
        for key, value in defaults.items():
            if getattr(cfg, key) is None:
                cfg = replace(cfg, **{key: value})
        if cfg.steps < 0:
            raise ValueError("steps must be non-negative")
        if not 0.0 <= cfg.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        BinghamParams(mu=cfg.mu, g=cfg.g, f=cfg.f, rho=cfg.rho, tol=cfg.tol)
        if not cfg.output_dir:
            raise ValueError("an output directory is required")
        return cfg


def base_mesh(cfg):
    # coarse canonical bases; adaptive marking grows the square mesh by
    # roughly a factor of three per step, so it starts from little
    if cfg.geometry == "circle":
        return generate_circle(0, segments=6)
    return generate_square(2)


def _fmt(x):
    return "" if x is None else f"{x:.12e}"


def _transfer(result, new_mesh, fam):
    """Warm start on a refined mesh: nodal interpolation plus reprojection."""
    old_mesh = result.u.space.mesh
    V = build_space(new_mesh, fam, "velocity")
    Q = build_space(new_mesh, fam, "multiplier")

    tris, bary = locate_points(old_mesh, V.node_coords)
    u_vals = scalar_values_per_cell(result.u, tris, bary[:, None, 1:])[:, 0]
    if V.kind == "p1b":
        nv = new_mesh.n_vertices
        u_new = np.concatenate([
            u_vals[:nv],
            u_vals[nv:] - u_vals[new_mesh.triangles].mean(axis=1)])
    else:
        u_new = u_vals
    u_new[V.boundary_dofs] = 0.0

    tris, bary = locate_points(old_mesh, Q.node_coords)
    lam_vals = vector_values_per_cell(result.lam, tris, bary[:, None, 1:])[:, 0]
    lam_new = project_ball(lam_vals).ravel()
    return u_new, lam_new


def _sample_solution(result, mesh, path):
    """u_h and |L_h| on a uniform grid over the unit square."""
    xs = np.linspace(0.0, 1.0, SOLUTION_GRID)
    X, Y = np.meshgrid(xs, xs)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    tris, bary = locate_points(mesh, pts)
    u = scalar_values_per_cell(result.u, tris, bary[:, None, 1:])[:, 0]
    lam = vector_values_per_cell(result.lam, tris, bary[:, None, 1:])[:, 0]
    mag = np.hypot(lam[:, 0], lam[:, 1])
    mag[mag > 1.0 - 1e-6] = 1.0
    with open(path, "w") as fh:
        fh.write("x,y,u,lam_norm\n")
        for row in zip(pts[:, 0], pts[:, 1], u, mag):
            fh.write(f"{row[0]:.8g},{row[1]:.8g},{row[2]:.12e},{row[3]:.12e}\n")


def run_experiment(cfg):
    """Run one refinement study; returns a process exit status."""
    import os

    try:
        cfg = cfg.validated()
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2

    os.makedirs(cfg.output_dir, exist_ok=True)
    fam = family(cfg.method)
    params = BinghamParams(mu=cfg.mu, g=cfg.g, f=cfg.f, rho=cfg.rho, tol=cfg.tol)
    exact = CircleExact(R=1.0, f=cfg.f, g=cfg.g, mu=cfg.mu) \
        if cfg.geometry == "circle" else None

    mesh = base_mesh(cfg)
    init = None
    rows = []
    csv_path = os.path.join(cfg.output_dir, "results.csv")
    with open(csv_path, "w", newline="") as fh:
        fh.write(f"# {SCHEMA_VERSION}\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        fh.flush()
        for step in range(cfg.steps + 1):
            try:
                res = uzawa_solve(mesh, fam, params, init=init)
            except UzawaConvergenceError as exc:
                print(f"solver failed at step {step}: {exc}", file=sys.stderr)
                return 3
            report = estimate(res.u, res.lam, params, robust=cfg.robust_estimator)
            eta_t, eta_e, eta_c = report.totals()
            if exact is not None:
                semi, full = h1_error(res.u, exact)
                merr = multiplier_error(res.lam, exact)
                eff = report.eta_global / (full + merr)
            else:
                semi = full = merr = eff = None
            row = [step, _fmt(mesh.diameters().max()), res.u.space.ndof,
                   res.lam.space.ndof, res.u.space.ndof + res.lam.space.ndof,
                   res.iterations, _fmt(semi), _fmt(full), _fmt(merr),
                   _fmt(eta_t), _fmt(eta_e), _fmt(eta_c),
                   _fmt(report.eta_global), _fmt(eff)]
            writer.writerow(row)
            fh.flush()
            rows.append(row)
            write_mesh_text(mesh, os.path.join(cfg.output_dir, f"mesh_step_{step}.txt"))
            if cfg.geometry == "square":
                _sample_solution(res, mesh,
                                 os.path.join(cfg.output_dir,
                                              f"solution_step_{step}.csv"))
            if step < cfg.steps:
                if cfg.mode == "uniform":
                    new_mesh = uniform_refine(mesh)
                else:
                    marked = mark(report, mesh, cfg.theta)
                    new_mesh = laplacian_smooth(rgb_refine(mesh, marked), 1)
                validate_mesh(new_mesh)
                if cfg.mode == "adaptive" and cfg.warm_start:
                    init = _transfer(res, new_mesh, fam)
                mesh = new_mesh
    _write_convergence_svg(cfg, rows)
    return 0


# -- rate fitting -----------------------------------------------------------------


def fit_rate(x, y):
    """Least-squares slope of log(y) against log(x), first point excluded.

    The first row of a refinement study is treated as pre-asymptotic.  For
    errors decaying against sqrt(N) the slope is negative; its magnitude is
    the convergence rate.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3 or len(y) != len(x):
        raise ValueError("rate fit needs at least 3 matching rows")
    x, y = x[1:], y[1:]
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("rate fit needs positive data")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def read_results(path):
    """Columns of a results.csv as a dict of float arrays (NaN for blanks)."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    cols = {name: [] for name in reader.fieldnames}
    for record in reader:
        for name, val in record.items():
            cols[name].append(float(val) if val not in ("", None) else np.nan)
    return {name: np.array(vals) for name, vals in cols.items()}


def _rates_command(args):
    cols = read_results(args.csv)
    if args.y not in cols:
        print(f"no column {args.y!r} in {args.csv}", file=sys.stderr)
        return 2
    x = cols["h_max"] if args.x == "h" else np.sqrt(cols["N_total"])
    y = cols[args.y]
    keep = ~np.isnan(y)
    try:
        slope = fit_rate(x[keep], y[keep])
    except ValueError as exc:
        print(f"cannot fit rate: {exc}", file=sys.stderr)
        return 2
    print(f"{slope:.6f}")
    return 0


# -- svg plot ----------------------------------------------------------------------


def _write_convergence_svg(cfg, rows):
    """Minimal hand-emitted log-log plot of errors and estimator."""
    import os

    def column(idx):
        vals = [row[idx] for row in rows]
        return np.array([float(v) if v not in ("", None) else np.nan for v in vals])

    if cfg.mode == "uniform":
        x = column(1)
        xlabel = "h"
    else:
        x = np.sqrt(column(4))
        xlabel = "sqrt(N)"
    series = []
    for name, idx, colour in (("H1 seminorm error", 6, "#1f77b4"),
                              ("multiplier error", 8, "#d62728"),
                              ("estimator", 12, "#2ca02c")):
        y = column(idx)
        keep = ~np.isnan(y) & (y > 0)
        if keep.sum() >= 2:
            series.append((name, x[keep], y[keep], colour))
    path = os.path.join(cfg.output_dir, "convergence.svg")
    if not series:
        with open(path, "w") as fh:
            fh.write('<svg xmlns="http://www.w3.org/2000/svg" width="640" '
                     'height="480"><text x="20" y="40">no positive data</text></svg>')
        return

    width, height, m = 640, 480, 60
    all_x = np.concatenate([s[1] for s in series])
    all_y = np.concatenate([s[2] for s in series])
    lx0, lx1 = np.log10(all_x.min()) - 0.1, np.log10(all_x.max()) + 0.1
    ly0, ly1 = np.log10(all_y.min()) - 0.2, np.log10(all_y.max()) + 0.2

    def px(v):
        return m + (np.log10(v) - lx0) / (lx1 - lx0) * (width - 2 * m)

    def py(v):
        return height - m - (np.log10(v) - ly0) / (ly1 - ly0) * (height - 2 * m)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" font-family="sans-serif" font-size="12">',
             f'<rect x="{m}" y="{m}" width="{width - 2 * m}" '
             f'height="{height - 2 * m}" fill="none" stroke="black"/>']
    for d in range(int(np.floor(lx0)), int(np.ceil(lx1)) + 1):
        v = 10.0 ** d
        if lx0 <= d <= lx1:
            parts.append(f'<line x1="{px(v):.1f}" y1="{height - m}" '
                         f'x2="{px(v):.1f}" y2="{height - m + 5}" stroke="black"/>')
            parts.append(f'<text x="{px(v):.1f}" y="{height - m + 18}" '
                         f'text-anchor="middle">1e{d}</text>')
    for d in range(int(np.floor(ly0)), int(np.ceil(ly1)) + 1):
        if ly0 <= d <= ly1:
            v = 10.0 ** d
            parts.append(f'<line x1="{m - 5}" y1="{py(v):.1f}" x2="{m}" '
                         f'y2="{py(v):.1f}" stroke="black"/>')
            parts.append(f'<text x="{m - 8}" y="{py(v):.1f}" '
                         f'text-anchor="end" dominant-baseline="middle">1e{d}</text>')
    parts.append(f'<text x="{width / 2:.0f}" y="{height - 10}" '
                 f'text-anchor="middle">{xlabel}</text>')
    for i, (name, xs, ys, colour) in enumerate(series):
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" '
                     f'stroke-width="1.5"/>')
        for a, b in zip(xs, ys):
            parts.append(f'<circle cx="{px(a):.1f}" cy="{py(b):.1f}" r="3" '
                         f'fill="{colour}"/>')
        parts.append(f'<text x="{width - m - 5}" y="{m + 16 + 14 * i}" '
                     f'text-anchor="end" fill="{colour}">{name}</text>')
    # reference slope triangle between the last two decades of the first series
    xs, ys = series[0][1], series[0][2]
    if len(xs) >= 2:
        x0, x1 = xs[-1], xs[-2]
        y0 = ys[-1]
        for slope, dash in ((1, "4,3"), (2, "1,3")):
            y1 = y0 * (x1 / x0) ** slope
            parts.append(f'<polyline points="{px(x0):.1f},{py(y0):.1f} '
                         f'{px(x1):.1f},{py(y0):.1f} {px(x1):.1f},{py(y1):.1f} '
                         f'{px(x0):.1f},{py(y0):.1f}" fill="none" stroke="gray" '
                         f'stroke-dasharray="{dash}"/>')
            parts.append(f'<text x="{px(x1):.1f}" y="{py(y1):.1f}" fill="gray" '
                         f'font-size="10">{slope}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))


# -- argument parsing ---------------------------------------------------------------


def _read_config_file(path):
    values = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line {raw!r}")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    return values

_BOOL = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}
_CONFIG_TYPES = {
    "geometry": str, "method": str, "mode": str, "steps": int,
    "mu": float, "g": float, "f": float, "rho": float, "tol": float,
    "theta": float, "robust_estimator": None, "warm_start": None,
    "output_dir": str, "out": str, "seed": int,
}


def build_config(args):
    values = {}
    if args.config:
        for key, raw in _read_config_file(args.config).items():
            if key not in _CONFIG_TYPES:
                raise ValueError(f"unknown config key {key!r}")
            conv = _CONFIG_TYPES[key]
            values["output_dir" if key == "out" else key] = \
                _BOOL[raw.lower()] if conv is None else conv(raw)

    flag_map = dict(geometry=args.geometry, method=args.method, mode=args.mode,
                    steps=args.steps, mu=args.mu, g=args.g, f=args.f, rho=args.rho,
                    tol=args.tol, theta=args.theta, output_dir=args.out,
                    seed=args.seed)
    for key, val in flag_map.items():
        if val is not None:
            values[key] = val
    if args.robust_estimator:
        values["robust_estimator"] = True
    if args.no_warm_start:
        values["warm_start"] = False

    required = ("geometry", "method", "mode", "steps", "output_dir")
    missing = [key for key in required if key not in values]
    if missing:
        raise ValueError(f"missing required options: {', '.join(missing)}")
    defaults = dict(mu=1.0, tol=1e-7, theta=0.5, robust_estimator=False,
                    warm_start=True, seed=0, g=None, f=None, rho=None)
    defaults.update(values)
    return ExperimentConfig(**defaults)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="bingham",
                                     description="viscoplastic pipe-flow studies")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a refinement study")
    run.add_argument("--geometry", choices=["circle", "square"])
    run.add_argument("--method", choices=["p2p0", "p3p1", "mini"])
    run.add_argument("--mode", choices=["uniform", "adaptive"])
    run.add_argument("--steps", type=int)
    run.add_argument("--mu", type=float)
    run.add_argument("--g", type=float)
    run.add_argument("--f", type=float)
    run.add_argument("--rho", type=float)
    run.add_argument("--tol", type=float)
    run.add_argument("--theta", type=float)
    run.add_argument("--robust-estimator", action="store_true")
    run.add_argument("--no-warm-start", action="store_true")
    run.add_argument("--out")
    run.add_argument("--config")
    run.add_argument("--seed", type=int)

    rates = sub.add_parser("rates", help="fit a convergence rate from results.csv")
    rates.add_argument("--csv", required=True)
    rates.add_argument("--x", choices=["h", "sqrtN"], default="h")
    rates.add_argument("--y", required=True)

    args = parser.parse_args(argv)
    if args.command == "rates":
        return _rates_command(args)
    try:
        cfg = build_config(args)
    except (ValueError, OSError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    return run_experiment(cfg)


if __name__ == "__main__":
    sys.exit(main())
