# services/rbm_service.py
from core.config import settings
from core.exceptions import DegenerateTrainingSetError, ReducedSystemError, RoundOffError
from models.affine import AffineForm
from models.greedy import GreedyRecord, GreedyTrace
from models.parameters import ParameterPoint
from models.problem import TruthProblem
from models.reduced_basis import DualBasis, ReducedBasis
from models.run_spec import GreedySettings
from models.validation import EffectivityResult, OutputPair
from services.cost_service import Stopwatch, offline_cost_model
from services.linsolve_service import MatrixOrFactor, dual_norm, factorize, x_norm
from typing import Callable, List, Optional, Sequence, Tuple, Union
import logging
import time
import warnings
import numpy as np
import scipy.linalg as sla

logger = logging.getLogger(__name__)

RhsLike = Union[AffineForm, Callable[[ParameterPoint], np.ndarray]]


def _rhs_vector(rhs: RhsLike, mu: ParameterPoint) -> np.ndarray:
    if isinstance(rhs, AffineForm):
        return rhs.evaluate(mu)
    return np.asarray(rhs(mu), dtype=np.complex128)


# --- Truth solves ---

def truth_solve(operator: AffineForm, rhs: RhsLike, mu: ParameterPoint) -> np.ndarray:
    """
    Full-order solution of A(mu) u = F(mu) on interior dofs.

    Raises:
        SingularMatrixError: If A(mu) is singular.
    """
    return factorize(operator.evaluate(mu)).solve(_rhs_vector(rhs, mu))


# --- Basis construction ---

def orthonormalize(phi: np.ndarray, snapshot: np.ndarray, X, tol: Optional[float] = None) -> Optional[np.ndarray]:
    """
    Modified Gram-Schmidt of `snapshot` against the X-orthonormal columns of
    `phi`, with one re-orthogonalization pass.

    Returns:
        The normalized new column, or None when the remainder's X-norm is
        below tol times the snapshot's X-norm.
    """
    tol = settings.rejection_tolerance if tol is None else tol
    v = np.array(snapshot, dtype=np.complex128, copy=True)
    norm0 = x_norm(X, v)
    if norm0 == 0.0:
        return None
    X_phi = X @ phi
    for _ in range(2):
        for j in range(phi.shape[1]):
            v -= phi[:, j] * np.vdot(X_phi[:, j], v)
    norm = x_norm(X, v)
    if norm < tol * norm0:
        return None
    return v / norm


def new_basis(problem: TruthProblem, beta_const: float = 1.0) -> ReducedBasis:
    """Empty basis carrying the N-independent offline data (Riesz representatives of F_m, gram_ff)."""
    x_factor = problem.x_factorization()
    F = np.column_stack(problem.rhs.blocks)
    riesz_f = x_factor.solve(F)
    gram_ff = riesz_f.conj().T @ F
    gram_ff = 0.5 * (gram_ff + gram_ff.conj().T)
    output_ids = problem.output.coefficient_ids if problem.output is not None else ()
    offset = problem.output_offset(None) if (problem.output is not None and problem.affine_rhs) else 0j
    rb = ReducedBasis.empty(
        problem.n_dofs,
        problem.operator.coefficient_ids,
        problem.rhs.coefficient_ids,
        output_ids,
        problem_kind=problem.kind,
        affine_rhs=problem.affine_rhs,
        beta_const=beta_const,
        output_offset=offset,
    )
    rb.gram_ff = gram_ff
    rb.riesz_f = riesz_f
    rb.riesz_a = np.zeros((problem.n_dofs, 0), dtype=np.complex128)
    return rb


def extend_basis(rb: ReducedBasis, column: np.ndarray, mu: ParameterPoint, problem: TruthProblem) -> ReducedBasis:
    """
    Appends an X-normalized column and extends reduced blocks, reduced
    vectors and Gram data incrementally (snapshot-major ordering).
    """
    phi_old = rb.phi
    N_old = rb.N
    blocks = problem.operator.blocks

    A_col = np.column_stack([A @ column for A in blocks])                # (n, Ma)
    AH_col = np.column_stack([A.conj().T @ column for A in blocks])      # (n, Ma)

    reduced_blocks = np.zeros((rb.M_a, N_old + 1, N_old + 1), dtype=np.complex128)
    reduced_blocks[:, :N_old, :N_old] = rb.reduced_blocks
    reduced_blocks[:, :N_old, N_old] = (phi_old.conj().T @ A_col).T
    reduced_blocks[:, N_old, :N_old] = (phi_old.conj().T @ AH_col).T.conj()
    reduced_blocks[:, N_old, N_old] = column.conj() @ A_col

    reduced_rhs = np.column_stack([rb.reduced_rhs, [np.vdot(column, F) for F in problem.rhs.blocks]])
    out_blocks = problem.output.blocks if problem.output is not None else []
    reduced_output = np.column_stack([rb.reduced_output, [np.vdot(L, column) for L in out_blocks]]).reshape(rb.M_l, N_old + 1)

    riesz_new = problem.x_factorization().solve(A_col)                    # (n, Ma)
    fa_new = rb.riesz_f.conj().T @ A_col
    aa_cross = rb.riesz_a.conj().T @ A_col                               # (Ma N_old, Ma)
    aa_corner = riesz_new.conj().T @ A_col
    aa_corner = 0.5 * (aa_corner + aa_corner.conj().T)
    gram_aa = np.block([[rb.gram_aa, aa_cross], [aa_cross.conj().T, aa_corner]])

    return rb.model_copy(
        update=dict(
            phi=np.column_stack([phi_old, column]),
            snapshot_params=[*rb.snapshot_params, mu],
            reduced_blocks=reduced_blocks,
            reduced_rhs=reduced_rhs,
            reduced_output=reduced_output,
            gram_fa=np.column_stack([rb.gram_fa, fa_new]),
            gram_aa=gram_aa,
            riesz_a=np.column_stack([rb.riesz_a, riesz_new]),
        )
    )


def orthonormalize_extend(
    rb: ReducedBasis, snapshot: np.ndarray, problem: TruthProblem, mu: ParameterPoint, tol: Optional[float] = None
) -> Optional[ReducedBasis]:
    """Orthonormalizes a snapshot in X and extends the basis, or returns None when it is rejected."""
    column = orthonormalize(rb.phi, snapshot, problem.x_inner, tol)
    if column is None:
        return None
    return extend_basis(rb, column, mu, problem)


# --- Online stage ---

def reduced_rhs(rb: ReducedBasis, mu: ParameterPoint, rhs_vector: Optional[np.ndarray] = None) -> np.ndarray:
    if rb.affine_rhs and rhs_vector is None:
        return rb.theta_f(mu) @ rb.reduced_rhs
    if rhs_vector is None:
        raise ValueError("A non-affine right-hand side needs the assembled F(mu)")
    return rb.phi.conj().T @ rhs_vector


def solve_reduced(matrix: np.ndarray, vector: np.ndarray, mu: ParameterPoint) -> np.ndarray:
    """
    Dense solve of a reduced system.

    Raises:
        ReducedSystemError: If the system is singular or ill-conditioned to working precision.
    """
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", sla.LinAlgWarning)
            return sla.solve(matrix, vector)
    except (sla.LinAlgError, sla.LinAlgWarning) as e:
        raise ReducedSystemError(f"Singular reduced system: {e}", mu=mu, dimension=matrix.shape[0]) from e


def online_solve(rb: ReducedBasis, mu: ParameterPoint, rhs_vector: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Reduced coefficients xi(mu) of the Galerkin projection
    (sum theta_a,m Phi^H A_m Phi) xi = Phi^H F(mu).

    Raises:
        ReducedSystemError: If the basis is empty or the reduced system singular.
    """
    if rb.N == 0:
        raise ReducedSystemError("Online solve needs a nonempty basis", mu=mu, dimension=0)
    A_N = np.tensordot(rb.theta_a(mu), rb.reduced_blocks, axes=1)
    return solve_reduced(A_N, reduced_rhs(rb, mu, rhs_vector), mu)


def residual_coefficients(rb: ReducedBasis, mu: ParameterPoint, xi: np.ndarray) -> np.ndarray:
    """Coefficients [theta_f ; -theta_a,m xi_j] in snapshot-major order."""
    return np.concatenate([rb.theta_f(mu), -np.outer(xi, rb.theta_a(mu)).ravel()])


def _online_quadratic(rb: ReducedBasis, mu: ParameterPoint, xi: np.ndarray) -> Tuple[float, float]:
    """c^H G c and the magnitude sum |c|^H |G| |c| it cancels down from."""
    if not rb.affine_rhs:
        raise ValueError("Online residual norms need an affine right-hand side")
    c = residual_coefficients(rb, mu, np.asarray(xi))
    G = rb.gram()
    value = float(np.real(np.vdot(c, G @ c)))
    scale = float(np.abs(c) @ np.abs(G) @ np.abs(c))
    return value, scale


def residual_norm_online(rb: ReducedBasis, mu: ParameterPoint, xi: np.ndarray, clamp: Optional[float] = None) -> float:
    """
    |e(mu)|_X from the Gram data alone, independent of the number of dofs.

    Raises:
        ValueError: If the basis has a non-affine right-hand side.
        RoundOffError: If the squared norm is negative beyond the round-off clamp.
    """
    clamp = settings.round_off_clamp if clamp is None else clamp
    value, scale = _online_quadratic(rb, mu, xi)
    if value < 0.0:
        if value < -clamp * scale:
            raise RoundOffError(
                f"Online residual norm squared {value:.3e} at {mu} is below the round-off clamp (scale {scale:.3e})",
                value=value,
                scale=scale,
            )
        value = 0.0
    return float(np.sqrt(value))


def residual_norm_direct(
    operator: AffineForm, rhs: RhsLike, X: MatrixOrFactor, phi: np.ndarray, mu: ParameterPoint, xi: np.ndarray
) -> float:
    """|X^-1 (F(mu) - A(mu) Phi xi)|_X from full-order quantities."""
    r = _rhs_vector(rhs, mu) - operator.evaluate(mu) @ (phi @ xi)
    return dual_norm(X, r)


def error_estimator(
    rb: ReducedBasis,
    mu: ParameterPoint,
    problem: Optional[TruthProblem] = None,
    xi: Optional[np.ndarray] = None,
    rhs_vector: Optional[np.ndarray] = None,
) -> float:
    """
    Delta(mu) = |e(mu)|_X / beta_const.

    Affine right-hand sides use the online Gram evaluation and fall back to
    the direct residual (needs `problem`) when it breaches the round-off
    clamp or sits within cancellation noise of its term scale. Non-affine
    right-hand sides always use the direct residual.
    """
    if not rb.affine_rhs and problem is None:
        raise ValueError("A non-affine right-hand side needs the truth problem")
    if not rb.affine_rhs and rhs_vector is None:
        rhs_vector = problem.rhs_at(mu)
    if xi is None:
        xi = online_solve(rb, mu, rhs_vector) if rb.N else np.zeros(0, dtype=np.complex128)
    if rb.affine_rhs:
        value, scale = _online_quadratic(rb, mu, xi)
        if problem is None or value >= settings.cancellation_ratio * scale:
            try:
                return residual_norm_online(rb, mu, xi) / rb.beta_const
            except RoundOffError as e:
                if problem is None:
                    raise
                logger.warning(f"{e}; falling back to the direct residual")
        else:
            logger.debug(f"Online residual at {mu} is within cancellation noise; using the direct residual")
    rhs = problem.rhs_at if rhs_vector is None else (lambda _: rhs_vector)
    norm = residual_norm_direct(problem.operator, rhs, problem.x_factorization(), rb.phi, mu, xi)
    return norm / rb.beta_const


def effectivity(rb: ReducedBasis, problem: TruthProblem, mu: ParameterPoint, threshold: float = 1e-10) -> EffectivityResult:
    """
    eta(mu) = Delta(mu) / |u(mu) - u_N(mu)|_X. Reported as exact reproduction
    (eta undefined) when the error is below threshold times |u(mu)|_X.
    """
    F = problem.rhs_at(mu)
    u = factorize(problem.operator_at(mu)).solve(F)
    rhs_vector = None if rb.affine_rhs else F
    xi = online_solve(rb, mu, rhs_vector)
    error = x_norm(problem.x_inner, u - rb.expand(xi))
    delta = error_estimator(rb, mu, problem, xi=xi, rhs_vector=rhs_vector)
    return classify_effectivity(delta, error, x_norm(problem.x_inner, u), threshold)


def classify_effectivity(delta: float, error: float, scale: float, threshold: float = 1e-10) -> EffectivityResult:
    if error <= threshold * (scale or 1.0):
        logger.debug(f"Exact reproduction: error {error:.3e}, effectivity undefined")
        return EffectivityResult(delta=delta, error=error, eta=None, status="exact_reproduction")
    return EffectivityResult(delta=delta, error=error, eta=delta / error)


# --- Greedy ---

def first_index(n_train: int, greedy: GreedySettings) -> int:
    if greedy.first == "random":
        return int(np.random.default_rng(greedy.seed).integers(n_train))
    return n_train // 2


def orthonormalize_ops(N: int, X) -> int:
    """Operation model of orthonormalizing N snapshots: two passes of X-products per column."""
    return 2 * (2 * N) * (int(X.nnz) + X.shape[0])


def estimator_sweep(
    rb: ReducedBasis,
    problem: TruthProblem,
    training: Sequence[ParameterPoint],
    rhs_vectors: Optional[Sequence[np.ndarray]] = None,
) -> np.ndarray:
    """Delta over the training set; a singular reduced system counts as +inf."""
    deltas = np.empty(len(training))
    for i, mu in enumerate(training):
        rhs_vector = None if rhs_vectors is None else rhs_vectors[i]
        try:
            deltas[i] = error_estimator(rb, mu, problem, rhs_vector=rhs_vector)
        except ReducedSystemError as e:
            logger.warning(f"{e}; treating the estimator at {mu} as infinite")
            deltas[i] = np.inf
    return deltas


def greedy_build(
    problem: TruthProblem,
    training: Sequence[ParameterPoint],
    greedy: GreedySettings,
    stopwatch: Optional[Stopwatch] = None,
) -> Tuple[ReducedBasis, GreedyTrace]:
    """
    Greedy basis construction: truth-solve at the current parameter,
    orthonormalize, update the offline data, then move to the training
    parameter with the largest estimator. Stops once that maximum drops
    below the tolerance, the basis reaches n_max, or every training
    parameter has been visited. Ties go to the lowest training index.

    Raises:
        ValueError: If the training set is empty.
        DegenerateTrainingSetError: If the first snapshot is rejected.
    """
    if not training:
        raise ValueError("Training set is empty")
    stopwatch = stopwatch or Stopwatch()
    trace = GreedyTrace(tolerance=greedy.tolerance, n_max=greedy.n_max)
    visited = np.zeros(len(training), dtype=bool)
    index = first_index(len(training), greedy)
    logger.info(
        f"Greedy start: {len(training)} training parameters, tol={greedy.tolerance:.3e}, "
        f"n_max={greedy.n_max}, first mu={training[index]}"
    )

    with stopwatch.phase("riesz_rhs"):
        rb = new_basis(problem, greedy.beta_const)
    rhs_vectors = None
    if not problem.affine_rhs:
        with stopwatch.phase("assemble_rhs"):
            rhs_vectors = [problem.rhs_at(mu) for mu in training]
    x_ops = problem.x_factorization().solve_ops
    previous = np.inf
    iteration = 0
    while True:
        iteration += 1
        mu = training[index]
        visited[index] = True
        started = time.perf_counter()
        with stopwatch.phase("truth_solve"):
            t0 = time.perf_counter()
            factor = factorize(problem.operator_at(mu))
            F = rhs_vectors[index] if rhs_vectors is not None else problem.rhs_at(mu)
            snapshot = factor.solve(F)
            galerkin_seconds = time.perf_counter() - t0
        with stopwatch.phase("orthonormalize"):
            column = orthonormalize(rb.phi, snapshot, problem.x_inner)
        accepted = column is not None
        if accepted:
            with stopwatch.phase("gram_update"):
                rb = extend_basis(rb, column, mu, problem)
            logger.info(f"Greedy iteration {iteration}: accepted mu={mu}, N={rb.N}")
        elif rb.N == 0:
            raise DegenerateTrainingSetError(f"First snapshot at {mu} has zero X-norm; no basis can be built")
        else:
            logger.warning(f"Greedy iteration {iteration}: snapshot at {mu} rejected (linearly dependent), N={rb.N}")

        with stopwatch.phase("estimator_sweep"):
            deltas = estimator_sweep(rb, problem, training, rhs_vectors)
        residuum = float(np.max(deltas))

        ops = offline_cost_model(
            rb.N,
            problem.n_dofs,
            rb.M_f,
            rb.M_a,
            factor.solve_ops,
            orthonormalize_ops(rb.N, problem.x_inner),
            x_ops,
        )
        trace.records.append(
            GreedyRecord(
                iteration=iteration,
                mu=mu,
                residuum=residuum,
                dimension=rb.N,
                seconds=time.perf_counter() - started,
                galerkin_seconds=galerkin_seconds,
                offline_ops=int(ops),
                accepted=accepted,
            )
        )
        if residuum > previous + 1e-10:
            logger.warning(f"Greedy iteration {iteration}: max estimator increased from {previous:.6e} to {residuum:.6e}")
        previous = residuum

        if residuum < greedy.tolerance:
            trace.stopped = "tolerance"
            break
        if rb.N >= greedy.n_max:
            trace.stopped = "n_max"
            break
        if visited.all():
            trace.stopped = "exhausted"
            break
        index = int(np.argmax(np.where(visited, -np.inf, deltas)))
        logger.debug(f"Greedy iteration {iteration}: max estimator {residuum:.6e}, next mu={training[index]}")

    logger.info(f"Greedy finished ({trace.stopped}): N={rb.N}, final max estimator {trace.final_residuum:.6e}")
    return rb, trace


# --- Dual problem and corrected output ---

def _require_output(problem: TruthProblem) -> AffineForm:
    if problem.output is None:
        raise ValueError("The truth problem has no output functional")
    return problem.output


def dual_solve(problem: TruthProblem, mu: ParameterPoint) -> np.ndarray:
    """Full-order dual solution of A(mu)^H w = -L(mu)."""
    L = _require_output(problem).evaluate(mu)
    return factorize(problem.operator_at(mu).conj().T).solve(-L)


def dual_build(
    problem: TruthProblem,
    snapshot_params: Sequence[ParameterPoint],
    rb: ReducedBasis,
    tol: Optional[float] = None,
    stopwatch: Optional[Stopwatch] = None,
) -> DualBasis:
    """
    Dual basis from adjoint truth solves at the primal snapshot parameters,
    X-orthonormalized like the primal one, plus the reduced blocks of the
    dual system and the primal/dual cross terms.
    """
    output = _require_output(problem)
    stopwatch = stopwatch or Stopwatch()
    phi_du = np.zeros((problem.n_dofs, 0), dtype=np.complex128)
    accepted: List[ParameterPoint] = []
    for mu in snapshot_params:
        with stopwatch.phase("dual_truth_solve"):
            w = dual_solve(problem, mu)
        with stopwatch.phase("dual_orthonormalize"):
            column = orthonormalize(phi_du, w, problem.x_inner, tol)
        if column is None:
            logger.warning(f"Dual snapshot at {mu} rejected (linearly dependent), N_du={phi_du.shape[1]}")
            continue
        phi_du = np.column_stack([phi_du, column])
        accepted.append(mu)

    with stopwatch.phase("dual_reduce"):
        blocks = problem.operator.blocks
        dual = DualBasis(
            phi_du=phi_du,
            snapshot_params=accepted,
            reduced_blocks_du=np.array([phi_du.conj().T @ (A.conj().T @ phi_du) for A in blocks], dtype=np.complex128),
            reduced_output_du=np.array([phi_du.conj().T @ L for L in output.blocks]).reshape(output.n_blocks, -1),
            cross_blocks=np.array([phi_du.conj().T @ (A @ rb.phi) for A in blocks], dtype=np.complex128),
            cross_rhs=np.array([phi_du.conj().T @ F for F in problem.rhs.blocks]).reshape(problem.rhs.n_blocks, -1),
        )
    logger.info(f"Dual basis built: N_du={dual.N_du} from {len(snapshot_params)} snapshot parameters")
    return dual


def dual_online_solve(rb: ReducedBasis, dual: DualBasis, mu: ParameterPoint) -> np.ndarray:
    """Reduced dual coefficients of Phi_du^H A(mu)^H Phi_du xi_du = -Phi_du^H L(mu)."""
    if dual.N_du == 0:
        return np.zeros(0, dtype=np.complex128)
    matrix = np.tensordot(rb.theta_a(mu).conj(), dual.reduced_blocks_du, axes=1)
    vector = -(rb.theta_l(mu) @ dual.reduced_output_du)
    return solve_reduced(matrix, vector, mu)


def corrected_output(
    rb: ReducedBasis,
    dual: Optional[DualBasis],
    mu: ParameterPoint,
    xi: Optional[np.ndarray] = None,
    rhs_vector: Optional[np.ndarray] = None,
    offset: Optional[complex] = None,
) -> OutputPair:
    """
    Reduced output s_N = L(mu)^H Phi xi (+ boundary offset) and the
    dual-corrected s_pd = s_N - w_N^H (F(mu) - A(mu) Phi xi), evaluated
    through reduced quantities only. Non-affine right-hand sides pass the
    assembled F(mu) and the per-parameter offset.
    """
    if rb.M_l == 0:
        raise ValueError("The reduced basis carries no output functional")
    if xi is None:
        xi = online_solve(rb, mu, rhs_vector)
    offset = rb.output_offset if offset is None else offset
    s_N = complex(rb.theta_l(mu).conj() @ rb.reduced_output @ xi) + offset
    if dual is None or dual.N_du == 0:
        return OutputPair(s_N=s_N, s_pd=s_N)
    xi_du = dual_online_solve(rb, dual, mu)
    if rhs_vector is None:
        dual_rhs = rb.theta_f(mu) @ dual.cross_rhs
    else:
        dual_rhs = dual.phi_du.conj().T @ rhs_vector
    residual = dual_rhs - np.tensordot(rb.theta_a(mu), dual.cross_blocks, axes=1) @ xi
    return OutputPair(s_N=s_N, s_pd=s_N - complex(np.vdot(xi_du, residual)))


def dual_residual_norm(problem: TruthProblem, dual: DualBasis, mu: ParameterPoint, xi_du: np.ndarray) -> float:
    """|X^-1 (-L(mu) - A(mu)^H Phi_du xi_du)|_X."""
    L = _require_output(problem).evaluate(mu)
    r = -L - problem.operator_at(mu).conj().T @ (dual.phi_du @ xi_du)
    return dual_norm(problem.x_factorization(), r)


def output_bounds(
    rb: ReducedBasis, dual: Optional[DualBasis], problem: TruthProblem, mu: ParameterPoint, delta: float
) -> Tuple[float, float, float]:
    """
    Output error bounds |s - s_N| <= |L|_X' Delta and |s - s_pd| <= |e_du|_X Delta.

    Returns:
        (bound on s_N, bound on s_pd, dual residual norm).
    """
    L = _require_output(problem).evaluate(mu)
    bound = dual_norm(problem.x_factorization(), L) * delta
    if dual is None or dual.N_du == 0:
        return bound, bound, dual_norm(problem.x_factorization(), L)
    xi_du = dual_online_solve(rb, dual, mu)
    dual_residual = dual_residual_norm(problem, dual, mu, xi_du)
    return bound, dual_residual * delta, dual_residual
