"""Discrete-time LTI systems, h2 norms and errors, and gradient oracles.

Systems follow the recursion ``x_{k+1} = A x_k + B u_k`` with output
``y_k = C x_k``.  The h2 norm is evaluated through the controllability
gramian, and the model-based objective gradients provide the reference
implementation against which the data-driven path is verified.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import GenerationFailed, SingularShift
from .matequ import solve_discrete_sylvester, solve_stein, spectral_radius

__all__ = [
    "ErrorGramians",
    "GradientTriple",
    "H2ErrorEvaluator",
    "LtiSystem",
    "Rom",
    "SyntheticSpec",
    "error_gramians",
    "generate_synthetic",
    "h2_error",
    "h2_norm",
    "markov_parameters",
    "model_based_gradients",
    "simulate",
    "transfer_eval",
]

# eigenvalue moduli must stay inside (_EIG_FLOOR, 1 - _EIG_CEIL_MARGIN)
# for every solve in the pipeline to be well posed in floating point
_EIG_FLOOR = 1e-12
_EIG_CEIL_MARGIN = 1e-12


def _matrix(value, name: str) -> np.ndarray:
    M = np.atleast_2d(np.asarray(value, dtype=float))
    if not np.isfinite(M).all():
        raise ValueError(f"{name} contains non-finite entries")
    return M


@dataclass(frozen=True)
class LtiSystem:
    """Full-order system (A, B, C) with ``y = C x``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = _matrix(self.A, "A")
        B = _matrix(self.B, "B")
        C = _matrix(self.C, "C")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("A must be square")
        if B.shape[0] != n:
            raise ValueError("B must have as many rows as A")
        if C.shape[1] != n:
            raise ValueError("C must have as many columns as A")
        for name, M in (("A", A), ("B", B), ("C", C)):
            M.flags.writeable = False
            object.__setattr__(self, name, M)

    @classmethod
    def with_identity_output(cls, A, B) -> "LtiSystem":
        A = _matrix(A, "A")
        return cls(A, B, np.eye(A.shape[0]))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def spectral_radius(self) -> float:
        return spectral_radius(self.A)

    def is_stable(self) -> bool:
        return self.spectral_radius() < 1.0 - _EIG_CEIL_MARGIN


@dataclass(frozen=True)
class Rom:
    """Reduced-order model (Ahat, Bhat, Chat)."""

    Ahat: np.ndarray
    Bhat: np.ndarray
    Chat: np.ndarray

    def __post_init__(self):
        Ahat = _matrix(self.Ahat, "Ahat")
        Bhat = _matrix(self.Bhat, "Bhat")
        Chat = _matrix(self.Chat, "Chat")
        r = Ahat.shape[0]
        if Ahat.shape != (r, r):
            raise ValueError("Ahat must be square")
        if Bhat.shape[0] != r:
            raise ValueError("Bhat must have as many rows as Ahat")
        if Chat.shape[1] != r:
            raise ValueError("Chat must have as many columns as Ahat")
        for name, M in (("Ahat", Ahat), ("Bhat", Bhat), ("Chat", Chat)):
            M.flags.writeable = False
            object.__setattr__(self, name, M)

    @property
    def r(self) -> int:
        return self.Ahat.shape[0]

    @property
    def m(self) -> int:
        return self.Bhat.shape[1]

    @property
    def p(self) -> int:
        return self.Chat.shape[0]

    def eig_moduli(self) -> np.ndarray:
        return np.abs(np.linalg.eigvals(self.Ahat))

    def satisfies_spectral_bounds(self, lower: float = _EIG_FLOOR) -> bool:
        """All eigenvalue moduli strictly inside the stability annulus."""
        mods = self.eig_moduli()
        return bool(np.all(mods > lower) and np.all(mods < 1.0 - _EIG_CEIL_MARGIN))

    def as_system(self) -> LtiSystem:
        return LtiSystem(self.Ahat, self.Bhat, self.Chat)

    def stepped(self, gradients: "GradientTriple", step: float) -> "Rom":
        """Gradient-descent update with the given step size."""
        return Rom(self.Ahat - step * gradients.gA,
                   self.Bhat - step * gradients.gB,
                   self.Chat - step * gradients.gC)


@dataclass(frozen=True)
class GradientTriple:
    """Objective gradients with respect to (Ahat, Bhat, Chat)."""

    gA: np.ndarray
    gB: np.ndarray
    gC: np.ndarray


@dataclass(frozen=True)
class ErrorGramians:
    """Blocks of the error-system gramians.

    SigmaC / SigmaO are the full-order controllability / observability
    gramians, P / Q their reduced-order counterparts, and R / S the
    cross terms coupling the two models.
    """

    SigmaC: np.ndarray
    SigmaO: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    S: np.ndarray


def _abc(sys_like) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(sys_like, Rom):
        return sys_like.Ahat, sys_like.Bhat, sys_like.Chat
    return sys_like.A, sys_like.B, sys_like.C


def transfer_eval(sys_like, z: complex) -> np.ndarray:
    """Evaluate the transfer function ``C (zI - A)^{-1} B`` at a point z."""
    A, B, C = _abc(sys_like)
    F = z * np.eye(A.shape[0]) - A
    lu, piv = scipy.linalg.lu_factor(F, check_finite=False)
    diag = np.abs(np.diag(lu))
    if not np.all(np.isfinite(diag)) or diag.min(initial=np.inf) < 1e-14 * max(1.0, diag.max(initial=0.0)):
        raise SingularShift(f"evaluation point {z} is numerically a pole")
    return C @ scipy.linalg.lu_solve((lu, piv), B.astype(complex), check_finite=False)


def simulate(sys: LtiSystem, x0, inputs) -> np.ndarray:
    """Run the state recursion; returns ``len(inputs) + 1`` states, x0 first."""
    x0 = np.asarray(x0, dtype=float).reshape(sys.n)
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if inputs.size and inputs.shape[1] != sys.m:
        raise ValueError(f"inputs must have {sys.m} columns")
    states = np.empty((inputs.shape[0] + 1, sys.n))
    states[0] = x0
    for k, u in enumerate(inputs):
        states[k + 1] = sys.A @ states[k] + sys.B @ u
    return states


def markov_parameters(sys_like, count: int) -> np.ndarray:
    """Impulse-response samples ``C A^{k-1} B`` for k = 1..count."""
    A, B, C = _abc(sys_like)
    out = np.empty((count, C.shape[0], B.shape[1]))
    ak_b = B
    for k in range(count):
        out[k] = C @ ak_b
        ak_b = A @ ak_b
    return out


def h2_norm(sys_like) -> float:
    """h2 norm from the controllability gramian: sqrt(tr(C Sigma_c C^T))."""
    A, B, C = _abc(sys_like)
    sigma_c = solve_stein(A, B @ B.T)
    return float(np.sqrt(max(np.trace(C @ sigma_c @ C.T), 0.0)))


def h2_error(sys: LtiSystem, rom: Rom) -> float:
    """h2 norm of the difference system, via its controllability gramian."""
    if rom.p != sys.p or rom.m != sys.m:
        raise ValueError("system and rom must share input/output dimensions")
    Ae = scipy.linalg.block_diag(sys.A, rom.Ahat)
    Be = np.vstack([sys.B, rom.Bhat])
    Ce = np.hstack([sys.C, -rom.Chat])
    Ec = solve_stein(Ae, Be @ Be.T)
    return float(np.sqrt(max(np.trace(Ce @ Ec @ Ce.T), 0.0)))


def error_gramians(sys: LtiSystem, rom: Rom) -> ErrorGramians:
    """Solve the individual block equations of the error-system gramians."""
    A, B, C = sys.A, sys.B, sys.C
    Ah, Bh, Ch = rom.Ahat, rom.Bhat, rom.Chat
    return ErrorGramians(
        SigmaC=solve_stein(A, B @ B.T),
        SigmaO=solve_stein(A.T, C.T @ C),
        P=solve_stein(Ah, Bh @ Bh.T),
        Q=solve_stein(Ah.T, Ch.T @ Ch),
        R=solve_discrete_sylvester(A, Ah.T, B @ Bh.T),
        S=solve_discrete_sylvester(A.T, Ah, -C.T @ Ch),
    )


def model_based_gradients(sys: LtiSystem, rom: Rom) -> GradientTriple:
    """Objective gradients computed from the full-order model.

    Uses the gramian blocks P, Q and the cross terms R, S; this is the
    reference the data-driven route must reproduce on exact data.
    """
    g = error_gramians(sys, rom)
    gA = 2.0 * (g.Q @ rom.Ahat @ g.P + g.S.T @ sys.A @ g.R)
    gB = 2.0 * (g.S.T @ sys.B + g.Q @ rom.Bhat)
    gC = 2.0 * (rom.Chat @ g.P - sys.C @ g.R)
    return GradientTriple(gA, gB, gC)


class H2ErrorEvaluator:
    """Repeated h2-error evaluations against one fixed full-order system.

    Caches the Schur factorization of A and the full-order gramian term so
    each call only solves the small reduced and cross equations.
    """

    def __init__(self, sys: LtiSystem):
        self._sys = sys
        self._a_schur = scipy.linalg.schur(sys.A, output="real")
        sigma_c = solve_stein(sys.A, sys.B @ sys.B.T, a_schur=self._a_schur)
        self._trace_full = float(np.trace(sys.C @ sigma_c @ sys.C.T))
        self._h2 = float(np.sqrt(max(self._trace_full, 0.0)))

    @property
    def system(self) -> LtiSystem:
        return self._sys

    @property
    def h2_norm(self) -> float:
        return self._h2

    def error(self, rom: Rom) -> float:
        sys = self._sys
        P = solve_stein(rom.Ahat, rom.Bhat @ rom.Bhat.T)
        R = solve_discrete_sylvester(sys.A, rom.Ahat.T, sys.B @ rom.Bhat.T,
                                     m_schur=self._a_schur)
        CR = sys.C @ R
        val = (self._trace_full + np.sum((rom.Chat @ P) * rom.Chat)
               - 2.0 * np.sum(CR * rom.Chat))
        return float(np.sqrt(max(val, 0.0)))

    def relative_error(self, rom: Rom) -> float:
        return self.error(rom) / self._h2


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters for the synthetic benchmark generator."""

    n: int
    m: int
    h: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be positive")
        if not self.h > 0:
            raise ValueError("h must be positive")


def _expm_integral(gen: np.ndarray, h: float) -> np.ndarray:
    """Integral of expm(gen * t) over [0, h]."""
    n = gen.shape[0]
    eah = scipy.linalg.expm(gen * h)
    try:
        sv = np.linalg.svd(gen, compute_uv=False)
        if sv[-1] > 1e-12 * max(1.0, sv[0]):
            return np.linalg.solve(gen, eah - np.eye(n))
    except np.linalg.LinAlgError:
        pass
    # series fallback for (numerically) singular generators:
    # h * sum_k (gen h)^k / (k+1)!
    total = np.eye(n)
    term = np.eye(n)
    for k in range(1, 60):
        term = term @ (gen * h) / (k + 1)
        total = total + term
        if np.abs(term).max() < 1e-16 * max(1.0, np.abs(total).max()):
            break
    return h * total


def generate_synthetic(spec: SyntheticSpec) -> LtiSystem:
    """Random stable benchmark system with identity output.

    A continuous-time generator ``(J - R) Q`` with skew-symmetric J and
    positive-definite R, Q is discretized exactly with step h: the state
    matrix is its exponential and the input matrix is the matching
    exponential integral applied to a Gaussian draw.
    """
    rng = np.random.default_rng(spec.seed)
    n, m = spec.n, spec.m
    for _ in range(10):
        G = rng.standard_normal((n, n))
        J = 0.5 * (G - G.T)
        G = rng.standard_normal((n, n))
        R = G @ G.T + 0.1 * np.eye(n)
        G = rng.standard_normal((n, n))
        Q = G @ G.T + 0.1 * np.eye(n)
        gen = (J - R) @ Q
        A = scipy.linalg.expm(gen * spec.h)
        B = _expm_integral(gen, spec.h) @ rng.standard_normal((n, m))
        if spectral_radius(A) < 1.0:
            return LtiSystem.with_identity_output(A, B)
    raise GenerationFailed("no stable draw in 10 attempts")
