"""Gradient descent on the data-driven h2 objective.

Each iteration assembles the data-driven gradients, stacks them into one
descent direction, and backtracks the step until the objective decreases
by the Armijo margin while the candidate stays inside the stability
annulus.  Only the two solves the objective needs (P and R) are repeated
per trial step; the remaining quantities are refreshed once per accepted
iterate.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .dataio import DataEnsemble
from .ddgrad import (DualData, GramianSet, data_gradients, objective_f,
                     reconstruct_dual, reconstruct_dual_known_input,
                     rom_gramians, solve_R, solve_S, solve_SB)
from .errors import (AssumptionViolated, NotStable, NoUniqueSolution,
                     SingularSystem)
from .matequ import solve_stein
from .sysmodel import GradientTriple, H2ErrorEvaluator, LtiSystem, Rom

__all__ = [
    "IterRecord",
    "OptimParams",
    "OptimResult",
    "StopReason",
    "run",
    "stack_direction",
]

logger = logging.getLogger(__name__)

# errors that merely disqualify a trial step during backtracking
_CANDIDATE_ERRORS = (AssumptionViolated, NotStable, NoUniqueSolution, SingularSystem)


class StopReason(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    ASSUMPTION_VIOLATED = "assumption_violated"
    BACKTRACK_EXHAUSTED = "backtrack_exhausted"


@dataclass(frozen=True)
class OptimParams:
    """Line-search and termination parameters.

    alpha0 : initial step size
    c      : Armijo decrease coefficient
    rho    : backtracking shrink factor
    tol    : stop once the squared direction norm D falls below this
    """

    alpha0: float = 1.0
    c: float = 1e-4
    rho: float = 0.5
    tol: float = 1e-3
    max_iters: int = 500
    max_backtracks: int = 60

    def __post_init__(self):
        if self.alpha0 <= 0 or not (0 < self.c < 1) or not (0 < self.rho < 1):
            raise ValueError("need alpha0 > 0 and c, rho in (0, 1)")
        if self.tol <= 0 or self.max_iters < 1 or self.max_backtracks < 1:
            raise ValueError("need tol > 0 and positive iteration bounds")


@dataclass(frozen=True)
class IterRecord:
    """One history row; ``rel_h2_error`` is None without an oracle system."""

    iter: int
    f: float
    D: float
    step: float
    backtracks: int
    rel_h2_error: float | None
    stable: bool


@dataclass(frozen=True)
class OptimResult:
    rom: Rom
    history: tuple[IterRecord, ...]
    stop_reason: StopReason
    initial_f: float
    initial_rel_h2_error: float | None = None


def stack_direction(g: GradientTriple) -> np.ndarray:
    """Negative gradients stacked into one (n + r) x (r + m) block matrix."""
    r, m = g.gA.shape[0], g.gB.shape[1]
    n = g.gC.shape[0]
    d = np.zeros((n + r, r + m))
    d[:r, :r] = -g.gA
    d[:r, r:] = -g.gB
    d[r:, :r] = -g.gC
    return d


def _record(history, sink, rec: IterRecord) -> None:
    history.append(rec)
    if sink is not None:
        sink(rec)


def run(ens: DataEnsemble, init: Rom, params: OptimParams = OptimParams(), *,
        known_input=None, oracle: LtiSystem | None = None, sink=None,
        dual: DualData | None = None, force: bool = False) -> OptimResult:
    """Descend the data-driven h2 objective starting from ``init``.

    Parameters
    ----------
    ens : snapshot ensemble driving the gradients
    init : starting reduced model; must lie inside the stability annulus
    known_input : optional (n, m) input matrix; when given, the dual
        reconstruction and SB use it directly and only X1 needs full rank
    oracle : optional full-order system used solely to log the true
        relative h2 error per iterate
    sink : optional callable receiving each IterRecord as it is produced
    dual : optionally inject an already reconstructed DualData
    force : proceed past failed rank checks in the reconstruction

    Returns
    -------
    OptimResult with the last accepted rom, the iteration history, and
    the stop reason.  Accepted iterates always satisfy the stability
    annulus; the objective column of the history is non-increasing.
    """
    if not init.satisfies_spectral_bounds():
        raise AssumptionViolated(
            "initial rom eigenvalues must lie strictly inside the annulus (0, 1)")
    if known_input is not None:
        known_input = np.atleast_2d(np.asarray(known_input, dtype=float))
    if dual is None:
        if known_input is not None:
            dual = reconstruct_dual_known_input(ens, known_input, force=force)
        else:
            dual = reconstruct_dual(ens, force=force)

    evaluator = H2ErrorEvaluator(oracle) if oracle is not None else None

    def rel_error(rom: Rom) -> float | None:
        return evaluator.relative_error(rom) if evaluator is not None else None

    history: list[IterRecord] = []
    rom = init
    initial_f = np.nan
    initial_rel = None
    stop = StopReason.MAX_ITERS

    for it in range(1, params.max_iters + 1):
        try:
            P, Q = rom_gramians(rom)
            R = solve_R(dual, rom)
            S = solve_S(dual, rom)
            if known_input is not None:
                SB = known_input.T @ S
            else:
                SB = solve_SB(ens, dual, S)
            g = data_gradients(rom, GramianSet(P, Q, R, S, SB))
        except AssumptionViolated:
            stop = StopReason.ASSUMPTION_VIOLATED
            break

        d = stack_direction(g)
        D = float(np.sum(d * d))
        f_curr = objective_f(rom, P, R)
        if it == 1:
            initial_f = f_curr
            initial_rel = rel_error(rom)
        logger.debug("iter %d: f=%.6e D=%.3e |rom|=%.3e", it, f_curr, D,
                     float(np.sqrt(np.sum(rom.Ahat**2) + np.sum(rom.Bhat**2)
                                   + np.sum(rom.Chat**2))))

        if D < params.tol:
            _record(history, sink, IterRecord(it, f_curr, D, 0.0, 0,
                                              rel_error(rom), True))
            stop = StopReason.CONVERGED
            break

        accepted = None
        alpha = params.alpha0
        for bt in range(params.max_backtracks):
            cand = rom.stepped(g, alpha)
            if cand.satisfies_spectral_bounds():
                try:
                    Pc = solve_stein(cand.Ahat, cand.Bhat @ cand.Bhat.T)
                    Rc = solve_R(dual, cand)
                    fc = objective_f(cand, Pc, Rc)
                    if np.isfinite(fc) and fc <= f_curr - params.c * alpha * D:
                        accepted = (cand, fc, alpha, bt)
                        break
                except _CANDIDATE_ERRORS:
                    pass
            alpha *= params.rho
        if accepted is None:
            stop = StopReason.BACKTRACK_EXHAUSTED
            break

        rom, f_new, alpha, bt = accepted
        _record(history, sink, IterRecord(it, f_new, D, alpha, bt,
                                          rel_error(rom), True))

    return OptimResult(rom=rom, history=tuple(history), stop_reason=stop,
                       initial_f=float(initial_f),
                       initial_rel_h2_error=initial_rel)
