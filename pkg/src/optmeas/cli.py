"""Command-line experiment runner.

Exit codes: 0 success, 1 soft failure (artifacts still written), 2 usage or
configuration error, 3 infeasible problem (rank or scale guard).
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from math import comb, factorial
from pathlib import Path

import numpy as np

from . import __version__, formats
from .asymptotics import (
    concavity_check,
    convergence_report,
    derivative_check,
    diameter_estimate,
    perturbation_curve,
    reference_equilibrium,
    vdm_square_integral,
)
from .design_solver import SolverConfig, solve_optimal
from .extremal_points import (
    MAX_SUBSETS,
    DegenerateSequenceError,
    SearchTooLargeError,
    brute_force_fekete,
    leja_sequence,
)
from .measures import (
    AdmissibilityError,
    AdmissibleWeight,
    DiscreteMeasure,
    christoffel,
    christoffel_via_inverse,
    gram,
    weight_by_name,
)
from .poly_basis import PointSet, basis_size, graded_basis, interval_grid, polar_grid

log = logging.getLogger("optmeas")

EXIT_OK, EXIT_SOFT, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2, 3

REFERENCE_ALIASES = {
    "arcsine": "arcsine_interval",
    "arcsine_interval": "arcsine_interval",
    "uniform_circle": "uniform_circle",
    "circle": "uniform_circle",
}


class ConfigError(ValueError):
    pass


class InfeasibleError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

DOMAIN_KEYS = {
    "interval": {"kind", "a", "b", "points"},
    "disk": {"kind", "radial_points", "angular_points"},
    "custom": {"kind", "csv_path"},
}
WEIGHT_KEYS = {
    "constant": {"kind"},
    "gaussian": {"kind", "c"},
    "power": {"kind", "a"},
    "custom": {"kind", "csv_path"},
}
TOP_KEYS = {"domain", "weight", "degrees", "solver", "outputs", "seed", "workers",
            "points", "reference", "check"}
SOLVER_KEYS = {"tolerance", "max_iterations", "algorithm", "prune_threshold"}
POINTS_KEYS = {"kind", "count"}
CHECK_KEYS = {"tolerance"}

DEFAULT_CONFIG = {
    "domain": {"kind": "interval", "a": -1.0, "b": 1.0, "points": 201},
    "weight": {"kind": "constant"},
    "degrees": [1, 2, 3, 4],
    "solver": {},
    "outputs": "optmeas_out",
    "seed": 0,
    "workers": 1,
}


@dataclass
class ExperimentConfig:
    domain: dict
    weight: dict
    degrees: list
    solver: SolverConfig
    outputs: str
    seed: int = 0
    workers: int = 1
    points: dict = field(default_factory=dict)
    reference: str | None = None
    check: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    def echo(self) -> dict:
        out = {
            "domain": self.domain,
            "weight": self.weight,
            "degrees": list(self.degrees),
            "solver": asdict(self.solver),
            "outputs": self.outputs,
            "seed": self.seed,
            "workers": self.workers,
        }
        if self.points:
            out["points"] = self.points
        if self.reference is not None:
            out["reference"] = self.reference
        if self.check:
            out["check"] = self.check
        return out


def _strict(section: dict, allowed: set, where: str):
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def parse_config(raw: dict, base_dir: Path = Path(".")) -> ExperimentConfig:
    _strict(raw, TOP_KEYS, "config")
    merged = copy.deepcopy(DEFAULT_CONFIG)
    merged.update(copy.deepcopy(raw))

    dom = merged["domain"]
    if not isinstance(dom, dict) or dom.get("kind") not in DOMAIN_KEYS:
        raise ConfigError(f"domain.kind must be one of {sorted(DOMAIN_KEYS)}")
    _strict(dom, DOMAIN_KEYS[dom["kind"]], "domain")
    missing = DOMAIN_KEYS[dom["kind"]] - set(dom)
    if missing:
        raise ConfigError(f"domain is missing {sorted(missing)}")

    wt = merged["weight"]
    if not isinstance(wt, dict) or wt.get("kind") not in WEIGHT_KEYS:
        raise ConfigError(f"weight.kind must be one of {sorted(WEIGHT_KEYS)}")
    _strict(wt, WEIGHT_KEYS[wt["kind"]], "weight")
    if wt["kind"] == "custom" and "csv_path" not in wt:
        raise ConfigError("custom weight needs csv_path")

    degrees = merged["degrees"]
    if (not isinstance(degrees, list) or not degrees
            or not all(isinstance(k, int) and not isinstance(k, bool) and k >= 0 for k in degrees)):
        raise ConfigError("degrees must be a nonempty list of nonnegative integers")
    if any(b <= a for a, b in zip(degrees, degrees[1:])):
        raise ConfigError("degrees must be strictly increasing")

    _strict(merged["solver"], SOLVER_KEYS, "solver")
    try:
        solver = SolverConfig(**merged["solver"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from exc

    _strict(merged.get("points") or {}, POINTS_KEYS, "points")
    _strict(merged.get("check") or {}, CHECK_KEYS, "check")
    for key in ("seed", "workers"):
        if not isinstance(merged[key], int) or isinstance(merged[key], bool):
            raise ConfigError(f"{key} must be an integer")
    if merged["workers"] < 1:
        raise ConfigError("workers must be >= 1")
    if not isinstance(merged["outputs"], str):
        raise ConfigError("outputs must be a path string")
    return ExperimentConfig(
        domain=dom,
        weight=wt,
        degrees=degrees,
        solver=solver,
        outputs=merged["outputs"],
        seed=merged["seed"],
        workers=merged["workers"],
        points=merged.get("points") or {},
        reference=merged.get("reference"),
        check=merged.get("check") or {},
        base_dir=base_dir,
    )


def load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return parse_config({})
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(raw, base_dir=Path(path).resolve().parent)


def build_domain(cfg: ExperimentConfig) -> PointSet:
    dom = cfg.domain
    try:
        if dom["kind"] == "interval":
            return interval_grid(float(dom["a"]), float(dom["b"]), int(dom["points"]))
        if dom["kind"] == "disk":
            return polar_grid(int(dom["radial_points"]), int(dom["angular_points"]))
        return formats.read_points_csv(cfg.base_dir / dom["csv_path"])
    except (OSError, ValueError) as exc:
        raise ConfigError(f"domain: {exc}") from exc


def build_weight(cfg: ExperimentConfig, points: PointSet) -> AdmissibleWeight:
    wt = cfg.weight
    try:
        if wt["kind"] == "custom":
            return formats.read_weight_csv(cfg.base_dir / wt["csv_path"], len(points))
        param = wt.get("c", wt.get("a"))
        return weight_by_name(wt["kind"], points, None if param is None else float(param))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"weight: {exc}") from exc


def _check_grid(points: PointSet, degrees):
    need = basis_size(points.d, max(degrees))
    if len(points) < need:
        raise InfeasibleError(
            f"{len(points)} candidates cannot carry degree {max(degrees)} (N={need})"
        )


# ---------------------------------------------------------------------------
# degree-level jobs
# ---------------------------------------------------------------------------

def _solve_job(args):
    points, weight, n, solver = args
    return solve_optimal(points, weight, graded_basis(points.d, n), solver)


def solve_degrees(cfg: ExperimentConfig, points, weight, workers: int):
    jobs = [(points, weight, n, cfg.solver) for n in cfg.degrees]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            return list(pool.map(_solve_job, jobs))
    return [_solve_job(j) for j in jobs]


class Manifest:
    def __init__(self, command: str, cfg: ExperimentConfig, out: Path):
        self.out = out
        self.data = {
            "command": command,
            "version": __version__,
            "config": cfg.echo(),
            "artifacts": {},
            "timing": {},
        }
        self._t = time.perf_counter()

    def stage(self, name: str):
        now = time.perf_counter()
        self.data["timing"][name] = now - self._t
        self._t = now

    def add(self, key, paths):
        self.data["artifacts"].setdefault(str(key), []).extend(
            os.path.relpath(p, self.out) for p in paths
        )

    def write(self):
        formats.write_json(self.out / "manifest.json", self.data)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_design(cfg: ExperimentConfig, out: Path, workers: int) -> int:
    man = Manifest("design", cfg, out)
    points = build_domain(cfg)
    weight = build_weight(cfg, points)
    _check_grid(points, cfg.degrees)
    man.stage("setup")
    results = solve_degrees(cfg, points, weight, workers)
    man.stage("solve")
    for res in results:
        man.add(res.n, formats.write_design(out, res))
    man.stage("write")
    man.write()
    for res in results:
        print(f"n={res.n}: converged={res.converged} kw_gap={res.kw_gap:.3e} "
              f"log_det={res.log_det:.12g} support={res.support_indices.size}")
    return EXIT_OK if all(r.converged for r in results) else EXIT_SOFT


def cmd_points(cfg: ExperimentConfig, out: Path, kind: str, count: int | None) -> int:
    man = Manifest(f"points:{kind}", cfg, out)
    points = build_domain(cfg)
    weight = build_weight(cfg, points)
    _check_grid(points, cfg.degrees)
    if count is not None and not 1 <= count <= basis_size(points.d, min(cfg.degrees)):
        raise ConfigError(f"count must lie in [1, N] for every degree; got {count}")
    man.stage("setup")
    for n in cfg.degrees:
        basis = graded_basis(points.d, n)
        if kind == "fekete":
            fam = brute_force_fekete(points, weight, basis)
        else:
            fam = leja_sequence(points, weight, basis, count)
        man.add(n, formats.write_family(out, fam))
        print(f"{kind} n={n}: {len(fam.points)} points, log weighted VDM {fam.log_weighted_vdm:.12g}")
    man.stage("points")
    man.write()
    return EXIT_OK


def cmd_diameter(cfg: ExperimentConfig, out: Path, workers: int) -> int:
    man = Manifest("diameter", cfg, out)
    points = build_domain(cfg)
    weight = build_weight(cfg, points)
    _check_grid(points, cfg.degrees)
    degrees = [n for n in cfg.degrees if n > 0]
    if not degrees:
        raise ConfigError("diameter needs at least one positive degree")
    cfg_pos = copy.copy(cfg)
    cfg_pos.degrees = degrees
    results = solve_degrees(cfg_pos, points, weight, workers)
    man.stage("solve")
    rows, violated = [], False
    for res in results:
        basis = graded_basis(points.d, res.n)
        if comb(len(points), basis.N) <= MAX_SUBSETS:
            fam = brute_force_fekete(points, weight, basis)
        else:
            fam = leja_sequence(points, weight, basis)
        est = diameter_estimate(res, fam, basis)
        lo_ok = est.lower_holds(slack=1e-9 * max(1.0, abs(est.log_det)))
        hi_ok = est.upper_holds(rel_slack=1e-6)
        violated |= not (lo_ok and hi_ok)
        rows.append((res.n, est.points_kind, est.delta_from_points, est.delta_from_gram,
                     est.sandwich_lo, float(np.exp(est.log_det)), est.sandwich_hi,
                     est.log_lo, est.log_det, est.log_hi, int(lo_ok), int(hi_ok)))
    man.stage("estimate")
    header = ["n", "points_kind", "delta_from_points", "delta_from_gram", "sandwich_lo",
              "det_gram", "sandwich_hi", "log_lo", "log_det", "log_hi", "lower_ok", "upper_ok"]
    paths = [formats.write_csv(out / "diameter.csv", header, rows)]
    paths.append(formats.write_json(out / "diameter.json",
                                    [dict(zip(header, r)) for r in rows]))
    for col in ("delta_from_points", "delta_from_gram"):
        k = header.index(col)
        paths.append(formats.write_plot_data(out / f"plot_{col}.dat",
                                             [r[0] for r in rows], [r[k] for r in rows]))
    man.add("diameter", paths)
    for res in results:
        man.add(res.n, formats.write_design(out, res))
    man.write()
    print(formats.csv_text(header, rows), end="")
    if violated:
        return EXIT_SOFT
    return EXIT_OK if all(r.converged for r in results) else EXIT_SOFT


def cmd_converge(cfg: ExperimentConfig, out: Path, workers: int, reference: str | None) -> int:
    name = reference or cfg.reference or "arcsine_interval"
    if name not in REFERENCE_ALIASES:
        raise ConfigError(f"unknown reference {name!r}; choose from {sorted(REFERENCE_ALIASES)}")
    ref = reference_equilibrium(REFERENCE_ALIASES[name])
    man = Manifest("converge", cfg, out)
    points = build_domain(cfg)
    if points.d != 1:
        raise ConfigError("convergence reports need a univariate domain")
    weight = build_weight(cfg, points)
    _check_grid(points, cfg.degrees)
    results = solve_degrees(cfg, points, weight, workers)
    man.stage("solve")
    rep = convergence_report(results, ref)
    cols = [f"err_{a}_{b}" for a, b in rep.moment_indices]
    header = ["n"] + cols + [f"mass_abs_ge_{rep.radius:g}", "first_moment_modulus"]
    rows = []
    for k, res in enumerate(results):
        z = res.measure.candidates.points[:, 0]
        first = abs(np.dot(res.weights, z))
        rows.append([res.n] + [float(v) for v in rep.moment_errors[k]]
                    + [float(rep.mass_outside_region[k]), float(first)])
    paths = [formats.write_csv(out / "convergence.csv", header, rows)]
    paths.append(formats.write_json(out / "convergence.json", {
        "reference": rep.reference_label,
        "rows": [dict(zip(header, r)) for r in rows],
    }))
    for col in ("err_2_0", "err_4_0", f"mass_abs_ge_{rep.radius:g}"):
        if col in header:
            k = header.index(col)
            paths.append(formats.write_plot_data(out / f"plot_{col}.dat",
                                                 [r[0] for r in rows], [r[k] for r in rows]))
    man.add("convergence", paths)
    for res in results:
        man.add(res.n, formats.write_design(out, res))
    man.stage("report")
    man.write()
    print(f"reference: {rep.reference_label}")
    print(formats.csv_text(header, rows), end="")
    return EXIT_OK if all(r.converged for r in results) else EXIT_SOFT


def _random_measure(rng, size, zeros=0):
    w = rng.random(size) + 0.05
    if zeros:
        w[rng.choice(size, zeros, replace=False)] = 0.0
    return w / w.sum()


def run_invariants(cfg: ExperimentConfig, seed: int):
    """Cross-module invariant suite; returns rows (name, ok, worst value, tolerance)."""
    rng = np.random.default_rng(seed)
    override = cfg.check.get("tolerance")

    def tol(default):
        return default if override is None else float(override)

    rows = []

    worst = 0.0
    worst_route = 0.0
    for _ in range(20):
        d = int(rng.integers(1, 3))
        n = int(rng.integers(0, 4))
        basis = graded_basis(d, n)
        pts = PointSet(rng.uniform(-1, 1, (basis.N + 6, d)) + 1j * rng.uniform(-1, 1, (basis.N + 6, d)))
        meas = DiscreteMeasure(pts, _random_measure(rng, len(pts)))
        wt = AdmissibleWeight(rng.uniform(0, 0.5, len(pts)))
        fact = gram(basis, meas, wt)
        kv = christoffel(fact, basis, pts, wt).values
        worst = max(worst, abs(float(np.dot(meas.weights, kv)) - basis.N) / basis.N)
        j = int(rng.integers(len(pts)))
        alt = christoffel_via_inverse(fact, basis, pts.points[j], float(wt.phi[j]))
        worst_route = max(worst_route, abs(alt - kv[j]) / kv[j])
    rows.append(("mass_identity", worst <= tol(1e-10), worst, tol(1e-10)))
    rows.append(("christoffel_routes", worst_route <= tol(1e-8), worst_route, tol(1e-8)))

    worst = 0.0
    for _ in range(10):
        d = int(rng.integers(1, 3))
        basis = graded_basis(d, int(rng.integers(1, 4)))
        pts = PointSet(rng.uniform(-1, 1, (basis.N + 4, d)))
        meas = DiscreteMeasure(pts, _random_measure(rng, len(pts)))
        wt = AdmissibleWeight(np.zeros(len(pts)))
        a = rng.normal(size=(basis.N, basis.N)) + 1j * rng.normal(size=(basis.N, basis.N))
        lhs = gram(basis, meas, wt).log_det
        rhs = gram(basis, meas, wt, transform=a).log_det
        _, logabs = np.linalg.slogdet(a)
        worst = max(worst, abs(np.expm1(rhs - 2 * logabs - lhs)))
    rows.append(("change_of_basis", worst <= tol(1e-8), worst, tol(1e-8)))

    worst = 0.0
    for _ in range(10):
        basis = graded_basis(1, int(rng.integers(1, 3)))
        pts = PointSet(rng.uniform(-1, 1, int(rng.integers(basis.N, 6))))
        meas = DiscreteMeasure(pts, _random_measure(rng, len(pts)))
        wt = AdmissibleWeight(rng.uniform(0, 0.3, len(pts)))
        lhs = vdm_square_integral(basis, meas, wt)
        rhs = factorial(basis.N) * np.exp(gram(basis, meas, wt).log_det)
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    rows.append(("gram_vdm_identity", worst <= tol(1e-8), worst, tol(1e-8)))

    points = build_domain(cfg)
    weight = build_weight(cfg, points)
    _check_grid(points, cfg.degrees)
    n0 = max(1, cfg.degrees[0])
    mult = solve_optimal(points, weight, graded_basis(points.d, n0),
                         SolverConfig(tolerance=1e-12, max_iterations=200,
                                      algorithm="multiplicative"))
    steps = np.diff([ld for _, ld, _ in mult.trace])
    drop = float(max(0.0, -steps.min())) if steps.size else 0.0
    rows.append(("det_monotonicity", drop <= tol(1e-12), drop, tol(1e-12)))

    designs = [solve_optimal(points, weight, graded_basis(points.d, n), cfg.solver)
               for n in cfg.degrees]
    gap = max(r.kw_gap / graded_basis(points.d, r.n).N for r in designs)
    rows.append(("kw_certificate", gap <= tol(cfg.solver.tolerance), gap, tol(cfg.solver.tolerance)))

    u = np.abs(points.points[:, 0]) ** 2
    v = points.points[:, 0].real
    worst_d, worst_c = 0.0, -np.inf
    for res in designs:
        if res.n == 0:
            continue
        basis = graded_basis(points.d, res.n)
        curve = perturbation_curve(res, weight, u, basis, [-1e-4, 0.0, 1e-4])
        worst_d = max(worst_d, derivative_check(curve, basis).discrepancy)
        curve = perturbation_curve(res, weight, v, basis, np.linspace(-1, 1, 21))
        worst_c = max(worst_c, concavity_check(curve).max_second_difference)
    rows.append(("derivative_formula", worst_d <= tol(1e-4), worst_d, tol(1e-4)))
    rows.append(("concavity", worst_c <= tol(1e-8), worst_c, tol(1e-8)))
    return rows


def cmd_check(cfg: ExperimentConfig, seed: int) -> int:
    rows = run_invariants(cfg, seed)
    width = max(len(r[0]) for r in rows)
    for name, ok, value, limit in rows:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  value={value:.3e}  tol={limit:.1e}")
    failed = [r[0] for r in rows if not r[1]]
    if failed:
        print("failing invariants: " + ", ".join(failed))
        return EXIT_SOFT
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _setup_logging():
    level = os.environ.get("OPTMEAS_LOG", "quiet").strip().lower()
    levels = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON experiment config")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
    common.add_argument("--workers", type=int, metavar="INT", help="parallel degree jobs")
    common.add_argument("--seed", type=int, metavar="INT", help="seed for randomized checks")

    parser = _Parser(prog="optmeas", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("design", parents=[common], help="solve optimal measures per degree")
    pts = sub.add_parser("points", parents=[common], help="Fekete or Leja point families")
    pts.add_argument("--kind", choices=["fekete", "leja"])
    pts.add_argument("--count", type=int, help="Leja sequence length (default N)")
    sub.add_parser("diameter", parents=[common], help="transfinite diameter estimates")
    conv = sub.add_parser("converge", parents=[common], help="moment convergence report")
    conv.add_argument("--reference", help="arcsine_interval | uniform_circle")
    sub.add_parser("check", parents=[common], help="run the invariant suite")
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            cfg.workers = args.workers
        if args.seed is not None:
            cfg.seed = args.seed
        out = Path(args.out) if args.out else (cfg.base_dir / cfg.outputs)
        if args.command == "design":
            return cmd_design(cfg, out, cfg.workers)
        if args.command == "points":
            kind = args.kind or cfg.points.get("kind", "leja")
            if kind not in ("fekete", "leja"):
                raise ConfigError(f"points.kind must be fekete or leja, got {kind!r}")
            count = args.count if args.count is not None else cfg.points.get("count")
            return cmd_points(cfg, out, kind, count)
        if args.command == "diameter":
            return cmd_diameter(cfg, out, cfg.workers)
        if args.command == "converge":
            return cmd_converge(cfg, out, cfg.workers, args.reference)
        return cmd_check(cfg, cfg.seed)
    except ConfigError as exc:
        print(f"optmeas: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleError, AdmissibilityError, SearchTooLargeError, DegenerateSequenceError) as exc:
        print(f"optmeas: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
