"""Data-driven h2 objective and gradients from one-step snapshot data.

The adjoint (dual) state sequence initialized at the sampled states can be
reconstructed from the snapshots alone by one joint least-squares solve.
The cross-gramian equations then close over data-computable coefficients,
which makes the exact objective gradients available without access to the
system matrices.  On exact full-rank data the result coincides with the
model-based gradients of :mod:`.sysmodel`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dataio import DataEnsemble, check_assumptions
from .errors import AssumptionViolated, RankDeficientData, SingularAhat
from .matequ import (PencilReport, pencil_diagnostics, pseudoinverse,
                     solve_discrete_sylvester, solve_stein, spectral_separation)
from .sysmodel import GradientTriple, Rom

__all__ = [
    "DualData",
    "GramianSet",
    "GradientTriple",
    "data_gradients",
    "data_gradients_B_known",
    "data_gradients_from_ensemble",
    "objective_f",
    "pencil_conditions",
    "reconstruct_dual",
    "reconstruct_dual_known_input",
    "rom_gramians",
    "solve_R",
    "solve_S",
    "solve_SB",
]

# pseudoinverses in the reconstruction share the snapshot rank threshold
_RCOND = 1e-10
# minimum distance between data-pencil spectra and reciprocal rom poles
SEPARATION_TOL = 1e-10


@dataclass(frozen=True)
class DualData:
    """Reconstructed dual quantities and cached solve coefficients.

    Z2   (N, n)  second dual snapshot block
    ZB1  (m, N)  B^T applied to the first dual snapshots
    UB1  (N, n)  U1 B^T, the input block mapped through B
    MR   (n, n)  pinv(X1) @ Z2, coefficient of the R equation
    MS   (n, n)  pinv(X1) @ (X2 - UB1), coefficient of the S equation
    GB   (n, m)  pinv(X1) @ ZB1^T, input coefficient of the R equation

    The Schur factorizations and pencil spectra of MR and MS are cached
    because every gradient step reuses them.
    """

    Z2: np.ndarray
    ZB1: np.ndarray
    UB1: np.ndarray
    MR: np.ndarray
    MS: np.ndarray
    GB: np.ndarray
    mr_schur: tuple = None
    ms_schur: tuple = None
    mr_pencil: PencilReport = None
    ms_pencil: PencilReport = None

    @property
    def n(self) -> int:
        return self.MR.shape[0]


@dataclass(frozen=True)
class GramianSet:
    """Per-iterate solutions feeding the gradient assembly.

    P, Q are the reduced gramians; R, S the data-driven cross terms;
    SB the input-side contraction of S.
    """

    P: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    S: np.ndarray
    SB: np.ndarray


def _finish_dual(Z2, ZB1, UB1, MR, MS, GB) -> DualData:
    n = MR.shape[0]
    eye = np.eye(n)
    return DualData(
        Z2=Z2, ZB1=ZB1, UB1=UB1, MR=MR, MS=MS, GB=GB,
        mr_schur=scipy.linalg.schur(MR, output="real"),
        ms_schur=scipy.linalg.schur(MS, output="real"),
        mr_pencil=pencil_diagnostics(MR, eye),
        ms_pencil=pencil_diagnostics(MS, eye),
    )


def reconstruct_dual(ens: DataEnsemble, *, force: bool = False) -> DualData:
    """Recover the dual snapshots from data with unknown system matrices.

    Solves the joint least-squares system
    ``[X1 U1] [Z2^T; ZB1] = X2 X1^T`` and then
    ``X1 UB1^T = X1 X2^T - Z2 X1^T``.  Requires the stacked block
    [X1 U1] and X1 themselves to have full column rank.
    """
    report = check_assumptions(ens)
    if not (report.b1_holds and report.b2_holds) and not force:
        raise RankDeficientData(
            f"need rank [X1 U1] = {ens.n + ens.m} and rank X1 = {ens.n}, got "
            f"{report.rank_X1U1} and {report.rank_X1}")
    N, n = ens.N, ens.n
    stacked = pseudoinverse(np.hstack([ens.X1, ens.U1]), rcond=_RCOND) @ (ens.X2 @ ens.X1.T)
    Z2 = stacked[:n].T
    ZB1 = stacked[n:]
    x1_pinv = pseudoinverse(ens.X1, rcond=_RCOND)
    UB1 = (x1_pinv @ (ens.X1 @ ens.X2.T - Z2 @ ens.X1.T)).T
    MR = x1_pinv @ Z2
    MS = x1_pinv @ (ens.X2 - UB1)
    GB = x1_pinv @ ZB1.T
    return _finish_dual(Z2, ZB1, UB1, MR, MS, GB)


def reconstruct_dual_known_input(ens: DataEnsemble, B, *, force: bool = False) -> DualData:
    """Dual reconstruction when the input matrix B is known.

    ``UB1 = U1 B^T`` is then available directly, which drops the joint
    rank requirement down to full column rank of X1 alone (N >= n).
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape != (ens.n, ens.m):
        raise ValueError(f"B must have shape {(ens.n, ens.m)}, got {B.shape}")
    report = check_assumptions(ens)
    if not report.b2_holds and not force:
        raise RankDeficientData(
            f"need rank X1 = {ens.n}, got {report.rank_X1}")
    UB1 = ens.U1 @ B.T
    ZB1 = B.T @ ens.X1.T
    x1_pinv = pseudoinverse(ens.X1, rcond=_RCOND)
    MS = x1_pinv @ (ens.X2 - UB1)
    MR = MS.T
    Z2 = ens.X1 @ MS
    return _finish_dual(Z2, ZB1, UB1, MR, MS, B.copy())


def pencil_conditions(dual: DualData, rom: Rom) -> tuple[PencilReport, PencilReport]:
    """Separation of the MR/MS pencil spectra from the reciprocal rom poles."""
    eye_r = np.eye(rom.r)
    recip = pencil_diagnostics(eye_r, rom.Ahat).spectra
    reports = []
    for base in (dual.mr_pencil, dual.ms_pencil):
        if base is None:
            raise ValueError("dual data lacks cached pencil diagnostics")
        sep = spectral_separation(base.spectra, recip)
        reports.append(PencilReport(base.is_regular, base.spectra, sep))
    return tuple(reports)


def _require_separation(report: PencilReport, label: str,
                        separation_tol: float) -> None:
    if not report.is_regular:
        raise AssumptionViolated(f"{label} pencil is numerically singular")
    if report.min_separation < separation_tol:
        raise AssumptionViolated(
            f"{label} pencil spectrum within {report.min_separation:.3e} "
            f"of a reciprocal rom pole (tolerance {separation_tol:g})")


def solve_R(dual: DualData, rom: Rom, *,
            separation_tol: float = SEPARATION_TOL) -> np.ndarray:
    """Cross term R from data: ``MR R Ahat^T + GB Bhat^T = R``."""
    report, _ = pencil_conditions(dual, rom)
    _require_separation(report, "MR", separation_tol)
    return solve_discrete_sylvester(dual.MR, rom.Ahat.T, dual.GB @ rom.Bhat.T,
                                    m_schur=dual.mr_schur)


def solve_S(dual: DualData, rom: Rom, *,
            separation_tol: float = SEPARATION_TOL) -> np.ndarray:
    """Cross term S from data: ``MS S Ahat - Chat = S``."""
    _, report = pencil_conditions(dual, rom)
    _require_separation(report, "MS", separation_tol)
    if rom.p != dual.n:
        raise ValueError("rom must observe the full state (Chat with n rows)")
    return solve_discrete_sylvester(dual.MS, rom.Ahat, -rom.Chat,
                                    m_schur=dual.ms_schur)


def solve_SB(ens: DataEnsemble, dual: DualData, S: np.ndarray) -> np.ndarray:
    """Input-side contraction SB from ``U1 SB = UB1 S`` by least squares."""
    report = check_assumptions(ens)
    if not report.b3_holds:
        raise RankDeficientData(f"need rank U1 = {ens.m}, got {report.rank_U1}")
    return pseudoinverse(ens.U1, rcond=_RCOND) @ (dual.UB1 @ S)


def rom_gramians(rom: Rom) -> tuple[np.ndarray, np.ndarray]:
    """Reduced controllability and observability gramians (P, Q)."""
    P = solve_stein(rom.Ahat, rom.Bhat @ rom.Bhat.T)
    Q = solve_stein(rom.Ahat.T, rom.Chat.T @ rom.Chat)
    return P, Q


def objective_f(rom: Rom, P: np.ndarray, R: np.ndarray) -> float:
    """Reduced part of the squared h2 error: tr(Chat P Chat^T) - 2 tr(R Chat^T).

    The omitted full-order gramian term is constant in the rom, so this is
    the quantity the descent monitors; it may be negative.
    """
    return float(np.sum((rom.Chat @ P) * rom.Chat) - 2.0 * np.sum(R * rom.Chat))


def data_gradients(rom: Rom, grams: GramianSet) -> GradientTriple:
    """Gradient triple assembled from data-driven gramian solutions.

    The full-order product S^T A R is replaced by the data-computable
    ``(S^T R - SB^T Bhat^T) Ahat^{-T}``, which requires Ahat to be
    invertible.
    """
    mods = np.abs(np.linalg.eigvals(rom.Ahat))
    if mods.min(initial=np.inf) < 1e-12:
        raise SingularAhat("Ahat has an eigenvalue with modulus below 1e-12")
    P, Q, R, S, SB = grams.P, grams.Q, grams.R, grams.S, grams.SB
    cross = S.T @ R - SB.T @ rom.Bhat.T
    # cross @ inv(Ahat).T without forming the inverse
    cross = np.linalg.solve(rom.Ahat, cross.T).T
    gA = 2.0 * (Q @ rom.Ahat @ P + cross)
    gB = 2.0 * (SB.T + Q @ rom.Bhat)
    gC = 2.0 * (rom.Chat @ P - R)
    return GradientTriple(gA, gB, gC)


def _gradients(ens: DataEnsemble, dual: DualData, rom: Rom,
               known_input=None) -> GradientTriple:
    P, Q = rom_gramians(rom)
    R = solve_R(dual, rom)
    S = solve_S(dual, rom)
    if known_input is not None:
        SB = np.asarray(known_input, dtype=float).T @ S
    else:
        SB = solve_SB(ens, dual, S)
    return data_gradients(rom, GramianSet(P, Q, R, S, SB))


def data_gradients_from_ensemble(ens: DataEnsemble, rom: Rom, *,
                                 force: bool = False) -> GradientTriple:
    """Full data-driven gradient pipeline with unknown system matrices."""
    dual = reconstruct_dual(ens, force=force)
    return _gradients(ens, dual, rom)


def data_gradients_B_known(ens: DataEnsemble, B, rom: Rom, *,
                           force: bool = False) -> GradientTriple:
    """Gradient pipeline for known input matrix B.

    UB1 and SB come directly from B, so only X1 needs full column rank;
    otherwise the pipeline is identical to the unknown-B route and agrees
    with it whenever both are applicable.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    dual = reconstruct_dual_known_input(ens, B, force=force)
    return _gradients(ens, dual, rom, known_input=B)
