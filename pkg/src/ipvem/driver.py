"""Adaptive SOLVE -> ESTIMATE -> MARK -> REFINE loop, uniform studies and report files."""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from .adapt import hanging_audit, mark_and_refine, refine_uniform
from .estimator import EstimatorConfig, EstimatorResult, estimate
from .mesh import PolygonalMesh, generate_square_mesh, load_mesh, save_mesh
from .penalty import VARIANTS
from .problems import PROBLEMS, BenchmarkProblem, get_problem
from .system import (Discretization, SchemeConfig, Solution, assemble, compute_errh2, impose_dirichlet,
                     solve)

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass
class AdaptiveConfig:
    problem: str = "ex1"
    k: int = 2
    theta: float = 0.4
    lam: float = 10.0
    max_iters: int = 15
    max_dofs: int = 20000
    estimator: str = "grad"
    hess_eta1: bool = False
    delta: float = 1e-6
    mesh_path: str | None = None
    n0: int = 8
    out_dir: str | None = None
    parallel: bool = False

    def validate(self) -> None:
        if not 0.0 < self.theta < 1.0:
            raise ConfigError(f"theta must lie in (0, 1), got {self.theta}")
        if self.k not in (2, 3):
            raise ConfigError(f"k must be 2 or 3, got {self.k}")
        if not self.lam >= 1.0:
            raise ConfigError(f"lambda must be >= 1, got {self.lam}")
        if self.estimator not in VARIANTS:
            raise ConfigError(f"estimator must be one of {VARIANTS}, got {self.estimator!r}")
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {PROBLEMS}")
        if self.max_iters < 1 or self.max_dofs < 1 or self.n0 < 1:
            raise ConfigError("max_iters, max_dofs and n0 must be positive")
        if self.problem == "ex3" and not self.delta > 0:
            raise ConfigError("ex3 needs delta > 0")

    def scheme(self) -> SchemeConfig:
        return SchemeConfig(k=self.k, lam=self.lam, variant=self.estimator, parallel=self.parallel)

    def estimator_config(self) -> EstimatorConfig:
        return EstimatorConfig(self.estimator, self.hess_eta1)

    def make_problem(self) -> BenchmarkProblem:
        return get_problem(self.problem, delta=self.delta)

    def initial_mesh(self, problem: BenchmarkProblem) -> PolygonalMesh:
        if self.mesh_path:
            return load_mesh(Path(self.mesh_path).read_text())
        return generate_square_mesh(self.n0, problem.domain)


@dataclass
class IterationRecord:
    iteration: int
    ndofs: int
    hmax: float
    errh2: float
    eta: float
    eta1: float
    eta2: float
    eta3: float
    eta4: float
    eta5: float
    eta6: float
    effectivity: float
    wall_time: float


LOG_FIELDS = tuple(f.name for f in fields(IterationRecord))


@dataclass
class ConvergenceLog:
    config: dict = field(default_factory=dict)
    records: list[IterationRecord] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_FIELDS)
        for r in self.records:
            w.writerow([repr(getattr(r, f)) for f in LOG_FIELDS])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "records": [asdict(r) for r in self.records]}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> ConvergenceLog:
        data = json.loads(text)
        return cls(data["config"], [IterationRecord(**r) for r in data["records"]])

    def without_timing(self) -> ConvergenceLog:
        """Copy with wall times zeroed, for run-to-run comparisons."""
        recs = [IterationRecord(**{**asdict(r), "wall_time": 0.0}) for r in self.records]
        return ConvergenceLog(dict(self.config), recs)


def fit_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x)."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(x) < 2 or np.any(x <= 0) or np.any(y <= 0):
        return float("nan")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class StepResult:
    disc: Discretization
    solution: Solution
    estimate: EstimatorResult
    errh2: float


def solve_and_estimate(mesh: PolygonalMesh, problem: BenchmarkProblem, scheme: SchemeConfig,
                       est_cfg: EstimatorConfig | None = None) -> StepResult:
    """One SOLVE + ESTIMATE pass on a fixed mesh."""
    disc = Discretization(mesh, scheme)
    g_d = None if problem.homogeneous else problem.g_d
    g_n = None if problem.homogeneous else problem.g_n
    A, F = assemble(disc, problem.f, g_n)
    sol = solve(disc, impose_dirichlet(disc, A, F, g_d))
    est = estimate(sol, problem.f, g_n, est_cfg or EstimatorConfig(scheme.variant))
    return StepResult(disc, sol, est, compute_errh2(sol, problem.hessian))


def _record(it: int, step: StepResult, t0: float) -> IterationRecord:
    comp = step.estimate.component_totals()
    eta = step.estimate.eta
    return IterationRecord(
        iteration=it, ndofs=step.disc.n_dofs, hmax=float(step.disc.mesh.diameters.max()),
        errh2=step.errh2, eta=eta, **comp,
        effectivity=eta / step.errh2 if step.errh2 > 0 else float("inf"),
        wall_time=time.perf_counter() - t0,
    )


@dataclass
class AdaptiveResult:
    log: ConvergenceLog
    mesh: PolygonalMesh
    step: StepResult
    audits: list[list[str]]


def run_adaptive(config: AdaptiveConfig,
                 on_iteration: Callable[[int, StepResult], None] | None = None) -> AdaptiveResult:
    """Run the adaptive loop until max_iters solves or the DoF budget is reached.

    If the solver fails, the error propagates with ``exc.partial_log`` holding
    the iterations completed so far.
    """
    config.validate()
    problem = config.make_problem()
    mesh = config.initial_mesh(problem)
    scheme, est_cfg = config.scheme(), config.estimator_config()
    clog = ConvergenceLog(asdict(config))
    audits = []
    out = Path(config.out_dir) if config.out_dir else None
    step = None
    for it in range(config.max_iters):
        t0 = time.perf_counter()
        audits.append(hanging_audit(mesh))
        try:
            step = solve_and_estimate(mesh, problem, scheme, est_cfg)
        except Exception as exc:
            exc.partial_log = clog
            raise
        clog.records.append(_record(it, step, t0))
        r = clog.records[-1]
        log.info("iter %d: N=%d errH2=%.3e eta=%.3e", it, r.ndofs, r.errh2, r.eta)
        if out is not None:
            write_snapshot(out, it, mesh, step.estimate)
        if on_iteration is not None:
            on_iteration(it, step)
        if it == config.max_iters - 1 or step.disc.n_dofs >= config.max_dofs:
            break
        marks = mark_and_refine(mesh, step.estimate.eta_k, config.theta)
        if not marks[1].cells:
            break
        mesh = marks[0]
    if out is not None:
        emit_reports(clog, out)
    return AdaptiveResult(clog, mesh, step, audits)


def run_uniform(config: AdaptiveConfig, ns=(8, 16, 32, 64)) -> tuple[ConvergenceLog, dict]:
    """Solve on a sequence of uniform meshes; returns the log and fitted h-slopes.

    For generated meshes ``ns`` are grid sizes; with ``mesh_path`` the loaded
    mesh is refined uniformly ``len(ns) - 1`` times.
    """
    config.validate()
    problem = config.make_problem()
    scheme, est_cfg = config.scheme(), config.estimator_config()
    clog = ConvergenceLog({**asdict(config), "ns": list(ns)})
    mesh = None
    for it, n in enumerate(ns):
        t0 = time.perf_counter()
        if config.mesh_path:
            mesh = config.initial_mesh(problem) if mesh is None else refine_uniform(mesh)
        else:
            mesh = generate_square_mesh(n, problem.domain)
        step = solve_and_estimate(mesh, problem, scheme, est_cfg)
        clog.records.append(_record(it, step, t0))
    h = clog.column("hmax")
    slopes = {"errh2": fit_slope(h, clog.column("errh2")), "eta": fit_slope(h, clog.column("eta"))}
    if config.out_dir:
        emit_reports(clog, Path(config.out_dir), x="hmax")
    return clog, slopes


def write_snapshot(out: Path, it: int, mesh: PolygonalMesh, est: EstimatorResult) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / f"mesh_{it:03d}.txt").write_text(save_mesh(mesh))
    (out / f"estimator_{it:03d}.csv").write_text(est.to_csv())


def emit_reports(clog: ConvergenceLog, out: Path, x: str = "ndofs") -> list[Path]:
    """Write convergence.csv, convergence.json and whitespace-separated plot data.

    The plot files hold x, the quantity, and a reference power law through the
    first point (slope -1/2 in N for adaptive runs, 1 in h for uniform ones).
    """
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / "convergence.csv", out / "convergence.json"]
        paths[0].write_text(clog.to_csv())
        paths[1].write_text(clog.to_json())
        xs = clog.column(x)
        rate = -0.5 if x == "ndofs" else 1.0
        for name in ("eta", "errh2"):
            ys = clog.column(name)
            ref = ys[0] * (xs / xs[0]) ** rate if len(xs) else xs
            p = out / f"plot_{name}.dat"
            lines = [f"# {x} {name} reference_slope_{rate:g}"]
            lines += [f"{a!r} {b!r} {c!r}" for a, b, c in zip(xs.tolist(), ys.tolist(), np.asarray(ref).tolist())]
            p.write_text("\n".join(lines) + "\n")
            paths.append(p)
    except OSError as exc:
        raise OSError(f"could not write reports to {out}: {exc}") from exc
    return paths
