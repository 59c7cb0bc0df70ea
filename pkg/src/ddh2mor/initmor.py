"""Reduced-model initializers: DMDc, Loewner interpolation, and a
Hankel-based data realization, plus the eigenvalue adjustments that push
any of their outputs into the stability annulus required downstream.

Frequency and impulse data can either be sampled from a known system
(harness mode) or supplied externally as JSON files.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import TrajectorySet, numerical_rank
from .errors import (FormatError, InsufficientData, SingularE,
                     StabilizationFailed)
from .sysmodel import Rom, markov_parameters, transfer_eval

__all__ = [
    "FreqSample",
    "ImpulseData",
    "impulse_from_system",
    "init_data_bt",
    "init_dmdc",
    "init_loewner",
    "load_frequency_samples",
    "load_impulse_data",
    "make_stable",
    "sample_frequency_data",
    "save_frequency_samples",
    "save_impulse_data",
]

logger = logging.getLogger(__name__)

_RANK_TOL = 1e-10


@dataclass(frozen=True)
class FreqSample:
    """One transfer-function evaluation: value = H(z), tagged left or right."""

    z: complex
    value: np.ndarray
    side: str

    def __post_init__(self):
        value = np.atleast_2d(np.asarray(self.value, dtype=complex))
        value.flags.writeable = False
        object.__setattr__(self, "z", complex(self.z))
        object.__setattr__(self, "value", value)
        if self.side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")


@dataclass(frozen=True)
class ImpulseData:
    """Markov parameters h_k = C A^{k-1} B for k = 1..T, shape (T, p, m)."""

    markov: np.ndarray

    def __post_init__(self):
        markov = np.asarray(self.markov, dtype=float)
        if markov.ndim != 3 or markov.shape[0] < 1:
            raise ValueError("markov must have shape (T, p, m) with T >= 1")
        markov = markov.copy()
        markov.flags.writeable = False
        object.__setattr__(self, "markov", markov)

    @property
    def T(self) -> int:
        return self.markov.shape[0]


def make_stable(rom: Rom, *, max_rounds: int = 5) -> Rom:
    """Push all eigenvalue moduli of Ahat strictly inside (0, 1).

    Spectral radii at or beyond one are removed by rescaling Ahat to
    radius 0.99; moduli at or below 1e-10 by adding 1e-6 times the
    identity.  Both adjustments are logged.  The input is returned
    unchanged when it already qualifies.
    """
    A = np.array(rom.Ahat)
    changed = False
    for _ in range(max_rounds):
        mods = np.abs(np.linalg.eigvals(A))
        rho, floor = mods.max(), mods.min()
        if rho < 1.0 - 1e-12 and floor > 1e-10:
            if not changed:
                return rom
            return Rom(A, rom.Bhat, rom.Chat)
        if rho >= 1.0 - 1e-12:
            logger.info("rescaling Ahat: spectral radius %.6f -> 0.99", rho)
            A = A * (0.99 / rho)
            changed = True
            mods = np.abs(np.linalg.eigvals(A))
            floor = mods.min()
        if floor <= 1e-10:
            logger.info("shifting Ahat: smallest eigenvalue modulus %.3e", floor)
            A = A + 1e-6 * np.eye(A.shape[0])
            changed = True
    mods = np.abs(np.linalg.eigvals(A))
    if mods.max() < 1.0 - 1e-12 and mods.min() > 1e-10:
        return Rom(A, rom.Bhat, rom.Chat)
    raise StabilizationFailed(
        f"eigenvalue moduli still span [{mods.min():.3e}, {mods.max():.6f}] "
        f"after {max_rounds} adjustment rounds")


def init_dmdc(trajs: TrajectorySet, r: int) -> Rom:
    """DMDc initializer: identify [A B] by least squares, then project
    onto the dominant left singular vectors of the successor snapshots."""
    X = np.hstack([t.states[:-1].T for t in trajs])
    Xp = np.hstack([t.states[1:].T for t in trajs])
    U = np.hstack([t.inputs.T for t in trajs])
    n = X.shape[0]
    if Xp.shape[1] < r or numerical_rank(Xp, _RANK_TOL) < r:
        raise InsufficientData(
            f"successor snapshots have rank below the target order {r}")

    Z = np.vstack([X, U])
    Uz, sz, Vzt = np.linalg.svd(Z, full_matrices=False)
    keep = max(r, int(np.count_nonzero(sz > _RANK_TOL * sz[0])))
    keep = min(keep, int(np.count_nonzero(sz > 1e-14 * sz[0])))
    if keep == 0:
        raise InsufficientData("identification snapshots are numerically zero")
    AB = Xp @ (Vzt[:keep].T / sz[:keep]) @ Uz[:, :keep].T

    Ux = np.linalg.svd(Xp, full_matrices=False)[0]
    basis = Ux[:, :r]
    return make_stable(Rom(basis.T @ AB[:, :n] @ basis,
                           basis.T @ AB[:, n:],
                           basis))


def _conjugate_groups(samples: list[FreqSample]) -> list[tuple[int, ...]]:
    """Group sample indices into real singletons and conjugate pairs."""
    groups: list[tuple[int, ...]] = []
    used = [False] * len(samples)
    for i, s in enumerate(samples):
        if used[i]:
            continue
        scale = max(1.0, abs(s.z))
        if abs(s.z.imag) <= 1e-14 * scale:
            used[i] = True
            groups.append((i,))
            continue
        partner = None
        for j in range(i + 1, len(samples)):
            if not used[j] and abs(samples[j].z - s.z.conjugate()) <= 1e-12 * scale:
                partner = j
                break
        if partner is None:
            raise ValueError(f"sample at z={s.z} lacks a conjugate partner")
        vdiff = np.abs(samples[partner].value - s.value.conjugate()).max()
        if vdiff > 1e-8 * max(1.0, np.abs(s.value).max()):
            raise ValueError(f"values at z={s.z} are not conjugate-consistent")
        used[i] = used[partner] = True
        groups.append((i, partner))
    return groups


_PAIR_UNITARY = np.array([[1.0, 1.0j], [1.0, -1.0j]]) / math.sqrt(2.0)


def _real_transform(groups) -> np.ndarray:
    """Block-diagonal unitary turning conjugate-paired data real."""
    size = sum(len(g) for g in groups)
    J = np.zeros((size, size), dtype=complex)
    pos = 0
    for g in groups:
        w = len(g)
        J[pos:pos + w, pos:pos + w] = _PAIR_UNITARY if w == 2 else 1.0
        pos += w
    return J


def _take_real(M: np.ndarray, label: str) -> np.ndarray:
    scale = max(1.0, np.abs(M).max(initial=0.0))
    if np.abs(M.imag).max(initial=0.0) > 1e-8 * scale:
        raise ValueError(f"{label} kept a significant imaginary part; "
                         "check conjugate closure of the samples")
    return np.ascontiguousarray(M.real)


def init_loewner(left: list[FreqSample], right: list[FreqSample], r: int) -> Rom:
    """Loewner-framework initializer from transfer-function samples.

    Builds the Loewner and shifted Loewner matrices from divided
    differences of the left/right sample values, maps conjugate pairs to
    real arithmetic, projects onto the dominant rank-r subspaces, and
    converts the resulting descriptor realization to standard form.
    """
    if not left or not right:
        raise ValueError("both left and right sample lists must be nonempty")
    p, m = left[0].value.shape
    if any(s.value.shape != (p, m) for s in left + right):
        raise ValueError("all sample values must share one shape")

    lg = _conjugate_groups(left)
    rg = _conjugate_groups(right)
    lo = [left[i] for g in lg for i in g]
    ro = [right[i] for g in rg for i in g]

    q, k = len(lo), len(ro)
    L = np.empty((q * p, k * m), dtype=complex)
    Ls = np.empty_like(L)
    for i, si in enumerate(lo):
        for j, sj in enumerate(ro):
            denom = si.z - sj.z
            if abs(denom) < 1e-12 * max(1.0, abs(si.z)):
                raise ValueError("left and right sample points must be disjoint")
            block = (si.value - sj.value) / denom
            L[i * p:(i + 1) * p, j * m:(j + 1) * m] = block
            Ls[i * p:(i + 1) * p, j * m:(j + 1) * m] = \
                (si.z * si.value - sj.z * sj.value) / denom
    V = np.vstack([s.value for s in lo])
    W = np.hstack([s.value for s in ro])

    JL = np.kron(_real_transform(lg), np.eye(p))
    JR = np.kron(_real_transform(rg), np.eye(m))
    Lr = _take_real(JL.conj().T @ L @ JR, "Loewner matrix")
    Lsr = _take_real(JL.conj().T @ Ls @ JR, "shifted Loewner matrix")
    Vr = _take_real(JL.conj().T @ V, "left data")
    Wr = _take_real(W @ JR, "right data")

    row_cat = np.hstack([Lr, Lsr])
    col_cat = np.vstack([Lr, Lsr])
    Uc, sc, _ = np.linalg.svd(row_cat, full_matrices=False)
    _, sr, Vrt = np.linalg.svd(col_cat, full_matrices=False)
    if (np.count_nonzero(sc > _RANK_TOL * sc[0]) < r
            or np.count_nonzero(sr > _RANK_TOL * sr[0]) < r):
        raise SingularE(f"Loewner matrices have rank below the target order {r}")
    Y = Uc[:, :r]
    X = Vrt[:r].T

    E = -Y.T @ Lr @ X
    se = np.linalg.svd(E, compute_uv=False)
    if se[-1] < 1e-12 * se[0]:
        raise SingularE("descriptor matrix is numerically singular at this order")
    Ad = -Y.T @ Lsr @ X
    return make_stable(Rom(np.linalg.solve(E, Ad),
                           np.linalg.solve(E, Y.T @ Vr),
                           Wr @ X))


def init_data_bt(imp: ImpulseData, r: int) -> Rom:
    """Balanced-truncation style initializer from impulse-response data.

    Factors the square-as-possible block Hankel matrix of the Markov
    parameters and reads the balanced realization off its rank-r SVD.
    """
    h = imp.markov
    T, p, m = h.shape
    if T < 2:
        raise InsufficientData("need at least two Markov parameters")
    q = (T + 1) // 2
    s = T - q
    H = np.block([[h[i + j] for j in range(s)] for i in range(q)])
    Hup = np.block([[h[i + j + 1] for j in range(s)] for i in range(q)])

    U, sv, Vt = np.linalg.svd(H, full_matrices=False)
    if np.count_nonzero(sv > _RANK_TOL * sv[0]) < r:
        raise InsufficientData(
            f"block Hankel matrix has rank below the target order {r}")
    root = np.sqrt(sv[:r])
    Ahat = (U[:, :r].T @ Hup @ Vt[:r].T) / np.outer(root, root)
    Bhat = (root[:, None] * Vt[:r])[:, :m]
    Chat = (U[:, :r] * root)[:p, :]
    return make_stable(Rom(Ahat, Bhat, Chat))


def sample_frequency_data(sys_like, n_left: int, n_right: int,
                          seed: int = 0) -> tuple[list[FreqSample], list[FreqSample]]:
    """Conjugate-closed unit-circle samples of a system's transfer function.

    Angles are drawn away from the real axis and each point is paired
    with its conjugate, so counts must be even.
    """
    if n_left < 2 or n_right < 2 or n_left % 2 or n_right % 2:
        raise ValueError("n_left and n_right must be even and at least 2")
    rng = np.random.default_rng(seed)
    half = (n_left + n_right) // 2
    for _ in range(100):
        theta = rng.uniform(0.05, math.pi - 0.05, size=half)
        if half == 1 or np.min(np.diff(np.sort(theta))) > 1e-6:
            break
    else:
        raise ValueError("could not draw distinct sample angles")

    def pair(angle: float, side: str) -> list[FreqSample]:
        z = complex(math.cos(angle), math.sin(angle))
        value = transfer_eval(sys_like, z)
        return [FreqSample(z, value, side),
                FreqSample(z.conjugate(), value.conjugate(), side)]

    left = [s for a in theta[:n_left // 2] for s in pair(float(a), "left")]
    right = [s for a in theta[n_left // 2:] for s in pair(float(a), "right")]
    return left, right


def impulse_from_system(sys_like, count: int = 10) -> ImpulseData:
    """Markov parameters of a known system packaged as impulse data."""
    return ImpulseData(markov_parameters(sys_like, count))


def _parse_scalar(value, where: str) -> complex:
    if isinstance(value, dict):
        try:
            return complex(float(value["re"]), float(value.get("im", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{where}: bad complex entry {value!r}") from exc
    if isinstance(value, (int, float)):
        return complex(value)
    raise FormatError(f"{where}: expected a number or {{re, im}} object")


def _parse_matrix(rows, where: str) -> np.ndarray:
    try:
        return np.array([[_parse_scalar(v, where) for v in row] for row in rows],
                        dtype=complex)
    except TypeError as exc:
        raise FormatError(f"{where}: expected a nested array of entries") from exc


def _encode_scalar(v: complex):
    return {"re": float(np.real(v)), "im": float(np.imag(v))}


def save_frequency_samples(left, right, path) -> None:
    def encode(samples):
        return [{"z": _encode_scalar(s.z),
                 "value": [[_encode_scalar(v) for v in row] for row in s.value]}
                for s in samples]

    Path(path).write_text(json.dumps({"left": encode(left), "right": encode(right)},
                                     indent=2) + "\n")


def load_frequency_samples(path) -> tuple[list[FreqSample], list[FreqSample]]:
    """Read left/right transfer samples from a JSON file.

    Schema: {"left": [{"z": {re, im}, "value": [[{re, im} | number, ...], ...]},
    ...], "right": [...]}.
    """
    p = Path(path)
    try:
        payload = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{p}: invalid JSON ({exc})") from exc

    def decode(side: str) -> list[FreqSample]:
        entries = payload.get(side)
        if not isinstance(entries, list) or not entries:
            raise FormatError(f"{p}: missing or empty '{side}' sample list")
        out = []
        for idx, entry in enumerate(entries):
            where = f"{p}:{side}[{idx}]"
            if not isinstance(entry, dict) or "z" not in entry or "value" not in entry:
                raise FormatError(f"{where}: expected an object with z and value")
            out.append(FreqSample(_parse_scalar(entry["z"], where),
                                  _parse_matrix(entry["value"], where), side))
        return out

    return decode("left"), decode("right")


def save_impulse_data(imp: ImpulseData, path) -> None:
    payload = {"markov": [[[float(v) for v in row] for row in mat]
                          for mat in imp.markov]}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_impulse_data(path) -> ImpulseData:
    """Read Markov parameters from JSON: {"markov": [[[number | {re, im}]]]}."""
    p = Path(path)
    try:
        payload = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{p}: invalid JSON ({exc})") from exc
    mats = payload.get("markov")
    if not isinstance(mats, list) or not mats:
        raise FormatError(f"{p}: missing or empty 'markov' list")
    parsed = [_parse_matrix(mat, f"{p}:markov[{i}]") for i, mat in enumerate(mats)]
    stacked = np.array(parsed)
    if np.abs(stacked.imag).max(initial=0.0) > 0.0:
        raise FormatError(f"{p}: Markov parameters must be real")
    return ImpulseData(stacked.real)
