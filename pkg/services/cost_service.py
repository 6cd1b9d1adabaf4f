# services/cost_service.py
from contextlib import contextmanager
from fractions import Fraction
from models.costs import CostReport, Marginal, PhaseTiming
from numbers import Real
from typing import Dict, Iterator, List, Optional
import logging
import math
import time

logger = logging.getLogger(__name__)


def residual_eval_cost(M_f: int, M_a: int, N: int) -> int:
    """Operations of one online residual-norm evaluation: 3 Mf^2 + 8 Mf Ma N + 5 Ma^2 N^2."""
    return 3 * M_f ** 2 + 8 * M_f * M_a * N + 5 * M_a ** 2 * N ** 2


def online_cost_model(N: int, M_a: int, M_f: int) -> int:
    """
    Operations of one online query: reduced matrix and vector assembly
    (2 Ma N^2 + 2 Mf N), dense LU solve (2N^3//3 + 2N^2) and the residual norm.
    """
    return 2 * M_a * N ** 2 + 2 * M_f * N + (2 * N ** 3) // 3 + 2 * N ** 2 + residual_eval_cost(M_f, M_a, N)


def offline_cost_model(N, n_dofs, M_f, M_a, C_truth, C_res, C_riesz):
    """
    Offline cost model

        N C_truth + C_res + (Mf + Ma N) C_riesz + (Mf^2 + 2 Mf Ma N + Ma^2 N^2)(2 n_dofs - 1).

    Integer inputs give an exact integer.
    """
    gram_entries = M_f ** 2 + 2 * M_f * M_a * N + M_a ** 2 * N ** 2
    return N * C_truth + C_res + (M_f + M_a * N) * C_riesz + gram_entries * (2 * n_dofs - 1)


def _exact(value: Real) -> Fraction:
    # decimal string of a float keeps the value as written (25.538, not its binary neighbour)
    return Fraction(value) if isinstance(value, (int, Fraction)) else Fraction(repr(float(value)))


def marginal_number(C_off: Real, C_galerkin: Real, C_on: Real) -> Marginal:
    """
    Smallest positive integer n with n >= C_off / (C_galerkin - C_on), i.e. the
    number of queries after which the reduced model is cheaper than repeated
    full solves; 'never' when C_galerkin <= C_on.

    Raises:
        ValueError: If any cost is negative.
    """
    if min(C_off, C_galerkin, C_on) < 0:
        raise ValueError("Costs must be nonnegative")
    off, galerkin, on = _exact(C_off), _exact(C_galerkin), _exact(C_on)
    if galerkin <= on:
        return "never"
    return max(1, math.ceil(off / (galerkin - on)))


class Stopwatch:
    """
    Wall-clock accounting per labeled phase. Phases may nest; totals
    aggregate additively over repeated uses of a label. Single owner.
    """

    def __init__(self):
        self._totals: Dict[str, float] = {}
        self._counts: Dict[str, int] = {}
        self._stack: List[str] = []

    @contextmanager
    def phase(self, label: str) -> Iterator[None]:
        start = time.perf_counter()
        self._stack.append(label)
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            self._stack.pop()
            self._totals[label] = self._totals.get(label, 0.0) + elapsed
            self._counts[label] = self._counts.get(label, 0) + 1

    def total(self, label: str) -> float:
        return self._totals.get(label, 0.0)

    def count(self, label: str) -> int:
        return self._counts.get(label, 0)

    def labels(self) -> List[str]:
        return list(self._totals)

    def merge(self, other: "Stopwatch") -> None:
        for label in other.labels():
            self._totals[label] = self.total(label) + other.total(label)
            self._counts[label] = self.count(label) + other.count(label)

    def report(self) -> List[PhaseTiming]:
        return [PhaseTiming(label=label, seconds=self._totals[label], count=self._counts[label]) for label in self._totals]


def cost_report(
    unit: str,
    C_off: float,
    C_on: float,
    C_galerkin: float,
    model: Optional[Dict[str, float]] = None,
    stopwatch: Optional[Stopwatch] = None,
) -> CostReport:
    """Assembles a CostReport in one unit and logs the marginal number."""
    marginal = marginal_number(C_off, C_galerkin, C_on)
    logger.info(
        f"Cost report ({unit}): C_off={C_off:.6g}, C_on={C_on:.6g}, C_galerkin={C_galerkin:.6g}, marginal number {marginal}"
    )
    return CostReport(
        unit=unit,
        C_off=C_off,
        C_on=C_on,
        C_galerkin=C_galerkin,
        marginal=marginal,
        model=model or {},
        phases=stopwatch.report() if stopwatch is not None else [],
    )
