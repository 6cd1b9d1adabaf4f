# services/run_service.py
from core.exceptions import ArchiveError, ConfigError
from core.run_config import RunConfig
from models.costs import CostReport
from models.online import OnlineResponse, OnlineResult, as_pair
from models.parameters import ParameterGrid, ParameterPoint
from models.problem import TruthProblem
from models.reduced_basis import DualBasis, ReducedBasis
from models.run_result import OfflineSummary
from models.validation import ValidationRow
from services.analytic_service import error_norms, exact_field
from services.cost_service import Stopwatch, cost_report, online_cost_model
from services.external import archive_handler, results_handler
from services.linsolve_service import factorize, x_norm
from services.problem_service import build_problem
from services.rbm_service import (
    classify_effectivity,
    corrected_output,
    dual_build,
    error_estimator,
    greedy_build,
    online_solve,
    orthonormalize_ops,
    output_bounds,
)
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union
import logging
import time
import numpy as np

logger = logging.getLogger(__name__)

BASIS_FILE = "basis.npz"
TIMING_BATCH = 100
OFFLINE_PHASES = ("assembly", "greedy", "dual")
AGGREGATED = (
    "x_error", "rel_x_error", "delta", "eta", "output_error", "output_error_pd", "output_bound",
    "output_bound_pd", "dual_residual", "linf", "l2", "h1", "rel_linf", "rel_l2", "rel_h1",
)


def build_training_set(cfg: Union[RunConfig, ParameterGrid]) -> List[ParameterPoint]:
    """Cartesian product of the k and M progressions (endpoints included), row-major in k then M."""
    grid = cfg.grid if isinstance(cfg, RunConfig) else cfg
    ks = np.linspace(grid.k_min, grid.k_max, grid.n_k)
    Ms = np.linspace(grid.M_min, grid.M_max, grid.n_M)
    return [ParameterPoint(k=float(k), M=float(M)) for k in ks for M in Ms]


def uniform_batch(grid: ParameterGrid, n: int = TIMING_BATCH, seed: int = 0) -> List[ParameterPoint]:
    """Seeded uniform sample of the parameter box, used for online timings."""
    rng = np.random.default_rng(seed)
    ks = rng.uniform(min(grid.k_min, grid.k_max), max(grid.k_min, grid.k_max), n)
    Ms = rng.uniform(min(grid.M_min, grid.M_max), max(grid.M_min, grid.M_max), n)
    return [ParameterPoint(k=float(k), M=float(M)) for k, M in zip(ks, Ms)]


def _check_dofs(problem: TruthProblem, rb: ReducedBasis) -> None:
    if problem.n_dofs != rb.n_dofs:
        raise ArchiveError(f"Run config yields {problem.n_dofs} interior dofs, the basis archive has {rb.n_dofs}.")


# --- Online stage ---

def online_query(
    rb: ReducedBasis,
    dual: Optional[DualBasis],
    mu: ParameterPoint,
    problem: Optional[TruthProblem] = None,
    grid: Optional[ParameterGrid] = None,
    stopwatch: Optional[Stopwatch] = None,
) -> OnlineResult:
    """
    One online evaluation: reduced solve, estimator and outputs. Affine
    right-hand sides touch only reduced quantities; non-affine ones assemble
    F(mu) and evaluate the residual directly (phase labels say so).
    """
    extrapolated = grid is not None and not grid.contains(mu)
    if extrapolated:
        logger.warning(f"Query {mu} lies outside the configured parameter box; result is extrapolated")
    stopwatch = stopwatch or Stopwatch()
    started = time.perf_counter()
    rhs_vector, offset = None, None
    if not rb.affine_rhs:
        if problem is None:
            raise ValueError("A non-affine right-hand side needs the truth problem online")
        with stopwatch.phase("assemble_rhs"):
            rhs_vector = problem.rhs_at(mu)
            offset = problem.output_offset(mu)
    with stopwatch.phase("online_solve"):
        xi = online_solve(rb, mu, rhs_vector)
    with stopwatch.phase("online_estimator" if rb.affine_rhs else "direct_residual"):
        delta = error_estimator(rb, mu, None if rb.affine_rhs else problem, xi=xi, rhs_vector=rhs_vector)
    s_N = s_pd = None
    if rb.M_l:
        with stopwatch.phase("online_output"):
            pair = corrected_output(rb, dual, mu, xi=xi, rhs_vector=rhs_vector, offset=offset)
        s_N, s_pd = as_pair(pair.s_N), as_pair(pair.s_pd)
    seconds = time.perf_counter() - started
    logger.debug(f"Online query {mu}: N={rb.N}, delta={delta:.6e}, {seconds * 1e3:.3f} ms")
    return OnlineResult(
        k=mu.k,
        M=mu.M,
        xi=[as_pair(z) for z in xi],
        delta=delta,
        s_N=s_N,
        s_pd=s_pd,
        seconds=seconds,
        extrapolated=extrapolated,
    )


def online_batch(
    rb: ReducedBasis,
    dual: Optional[DualBasis],
    queries: Sequence[ParameterPoint],
    problem: Optional[TruthProblem] = None,
    grid: Optional[ParameterGrid] = None,
    stopwatch: Optional[Stopwatch] = None,
) -> OnlineResponse:
    results = [online_query(rb, dual, mu, problem, grid, stopwatch) for mu in queries]
    mean = float(np.mean([r.seconds for r in results])) if results else 0.0
    return OnlineResponse(dimension=rb.N, results=results, mean_seconds=mean)


# --- Commands ---

def run_offline(cfg: RunConfig, config_path: Optional[str] = None) -> OfflineSummary:
    """
    Greedy offline stage: builds the truth problem and the (primal and dual)
    reduced bases, writes the basis archive, trace.csv and costs.csv.

    Raises:
        MeshError, ConfigError, NumericalError: From the stages they name.
    """
    out = Path(cfg.output_dir)
    stopwatch = Stopwatch()
    with stopwatch.phase("assembly"):
        problem = build_problem(cfg)
    training = build_training_set(cfg)
    with stopwatch.phase("greedy"):
        rb, trace = greedy_build(problem, training, cfg.greedy, stopwatch)
    dual = None
    if cfg.greedy.build_dual:
        with stopwatch.phase("dual"):
            dual = dual_build(problem, rb.snapshot_params, rb, stopwatch=stopwatch)
    C_off = sum(stopwatch.total(label) for label in OFFLINE_PHASES)

    # Galerkin reference: mean truth-solve seconds of the greedy iterations
    galerkin_seconds = float(np.mean([r.galerkin_seconds for r in trace.records]))
    timing = online_batch(rb, dual, uniform_batch(cfg.grid, seed=cfg.greedy.seed), problem if not rb.affine_rhs else None)
    C_on = timing.mean_seconds
    speedup = galerkin_seconds / C_on if C_on > 0 else None

    C_truth = factorize(problem.operator_at(training[len(training) // 2])).solve_ops
    model = dict(
        N=rb.N,
        n_dofs=problem.n_dofs,
        M_a=rb.M_a,
        M_f=rb.M_f,
        C_truth=C_truth,
        C_res=orthonormalize_ops(rb.N, problem.x_inner),
        C_riesz=problem.x_factorization().solve_ops,
    )
    C_off_ops = trace.records[-1].offline_ops
    C_on_ops = online_cost_model(rb.N, rb.M_a, rb.M_f)
    reports = [
        cost_report("seconds", C_off, C_on, galerkin_seconds, stopwatch=stopwatch),
        cost_report("operations", C_off_ops, C_on_ops, C_truth, model=model),
    ]
    costs = dict(
        C_off_seconds=C_off,
        C_galerkin_seconds=galerkin_seconds,
        C_off_operations=float(C_off_ops),
        C_galerkin_operations=float(C_truth),
    )

    basis_path = archive_handler.save_basis(rb, out / BASIS_FILE, dual, config_path=config_path, costs=costs)
    trace_path = results_handler.write_trace(trace, out / "trace.csv", timings=cfg.write_timings)
    costs_path = results_handler.write_costs(reports, out / "costs.csv")
    if speedup is not None:
        logger.info(f"Online query {C_on * 1e3:.3f} ms vs Galerkin solve {galerkin_seconds * 1e3:.3f} ms: speed-up {speedup:.1f}x")
    return OfflineSummary(
        basis_path=str(basis_path),
        trace_path=str(trace_path),
        costs_path=str(costs_path),
        N=rb.N,
        N_du=dual.N_du if dual is not None else 0,
        stopped=trace.stopped,
        final_residuum=trace.final_residuum,
        speedup=speedup,
        costs=reports,
    )


def run_online(
    cfg: RunConfig, basis_path: str | Path, queries: Optional[Sequence[ParameterPoint]] = None
) -> OnlineResponse:
    """
    Online stage for a list of queries (default: the config's query list).
    Writes online.csv and costs.csv, plus field CSV/VTK files when configured.

    Raises:
        ArchiveError: If the archive is unreadable or does not match the config.
    """
    out = Path(cfg.output_dir)
    rb, dual, header = archive_handler.load_basis(basis_path)
    queries = list(cfg.queries if queries is None else queries)
    problem = None
    if not rb.affine_rhs or cfg.write_fields:
        problem = build_problem(cfg)
        _check_dofs(problem, rb)

    stopwatch = Stopwatch()
    response = online_batch(rb, dual, queries, problem, cfg.grid, stopwatch)
    results_handler.write_online(response.results, out / "online.csv", timings=cfg.write_timings)

    if cfg.write_fields:
        for r in response.results:
            mu = ParameterPoint(k=r.k, M=r.M)
            xi = np.array([complex(re, im) for re, im in r.xi])
            u = problem.reconstruct(rb.expand(xi), mu)
            stem = f"field_{r.k:g}_{r.M:g}"
            results_handler.write_field(problem.mesh, u, out / f"{stem}.csv")
            results_handler.write_vtk(problem.mesh, u, out / f"{stem}.vtk")

    costs = header.costs
    reports = [
        cost_report(
            "seconds",
            costs.get("C_off_seconds", 0.0),
            response.mean_seconds,
            costs.get("C_galerkin_seconds", 0.0),
            stopwatch=stopwatch,
        ),
        cost_report(
            "operations",
            costs.get("C_off_operations", 0.0),
            online_cost_model(rb.N, rb.M_a, rb.M_f),
            costs.get("C_galerkin_operations", 0.0),
        ),
    ]
    results_handler.write_costs(reports, out / "costs.csv")
    logger.info(f"Online stage: {len(queries)} queries, mean {response.mean_seconds * 1e3:.3f} ms, N={rb.N}")
    return response


def aggregate_rows(rows: Sequence[ValidationRow]) -> Dict[str, Dict[str, float]]:
    """Max and mean of every error column over the rows where it is defined."""
    aggregates: Dict[str, Dict[str, float]] = {"max": {}, "mean": {}}
    for name in AGGREGATED:
        values = [getattr(r, name) for r in rows if getattr(r, name) is not None]
        if values:
            aggregates["max"][name] = float(np.max(values))
            aggregates["mean"][name] = float(np.mean(values))
    return aggregates


def run_validate(cfg: RunConfig, basis_path: str | Path) -> List[ValidationRow]:
    """
    Compares the reduced solution with the truth solution at every validation
    parameter: X-norm error, estimator, effectivity, outputs with their
    bounds, and error norms against the configured exact field. Writes
    validate.csv with max/mean aggregate rows.

    Raises:
        ConfigError: If the config lists no validation parameters.
    """
    if not cfg.validation:
        raise ConfigError("Validation needs a non-empty 'validation' parameter list")
    rb, dual, _ = archive_handler.load_basis(basis_path)
    problem = build_problem(cfg)
    _check_dofs(problem, rb)

    rows = []
    for mu in cfg.validation:
        F = problem.rhs_at(mu)
        u = factorize(problem.operator_at(mu)).solve(F)
        rhs_vector = None if rb.affine_rhs else F
        xi = online_solve(rb, mu, rhs_vector)
        u_N = rb.expand(xi)
        error = x_norm(problem.x_inner, u - u_N)
        norm = x_norm(problem.x_inner, u)
        delta = error_estimator(rb, mu, problem, xi=xi, rhs_vector=rhs_vector)
        eff = classify_effectivity(delta, error, norm)
        row = dict(
            k=mu.k, M=mu.M, N=rb.N, x_error=error, rel_x_error=error / norm if norm > 0 else None,
            delta=delta, eta=eff.eta, eta_status=eff.status,
        )

        if rb.M_l and problem.output is not None:
            offset = problem.output_offset(mu)
            s_truth = complex(np.vdot(problem.output_at(mu), u)) + offset
            pair = corrected_output(rb, dual, mu, xi=xi, rhs_vector=rhs_vector, offset=offset)
            bound, bound_pd, dual_residual = output_bounds(rb, dual, problem, mu, delta)
            row.update(
                s_truth=s_truth, s_N=pair.s_N, s_pd=pair.s_pd,
                output_error=abs(s_truth - pair.s_N), output_error_pd=abs(s_truth - pair.s_pd),
                output_bound=bound, output_bound_pd=bound_pd, dual_residual=dual_residual,
            )

        exact = exact_field(cfg.exact, mu, cfg.source)
        if exact is not None and problem.mesh is not None:
            norms = error_norms(problem.mesh, problem.reconstruct(u_N, mu), exact, problem.physical_mask)
            row.update(norms.model_dump())
        rows.append(ValidationRow(**row))
        logger.info(f"Validated {mu}: X error {error:.3e}, delta {delta:.3e}, eta {eff.eta}")

    results_handler.write_validation(rows, Path(cfg.output_dir) / "validate.csv", aggregate_rows(rows))
    return rows
