"""Shared test utilities: independent oracles and random instance builders.

Everything here deliberately avoids the package's own solvers so that
agreement between the two routes is meaningful evidence.  Matrix equations
are solved by dense Kronecker vectorization, h2 norms by trapezoid
quadrature of the transfer function on the unit circle, and gradients by
central finite differences of a scalar objective.
"""

import numpy as np

from ddh2mor import GradientTriple, LtiSystem, Rom


def rel_max_err(a, b):
    """max |a - b| / max |b|, with b the reference."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = np.max(np.abs(b))
    if scale == 0.0:
        return np.max(np.abs(a))
    return np.max(np.abs(a - b)) / scale


def kron_solve_stein(A, W):
    """Solve A X A^T - X + W = 0 by vectorization: (I - A (x) A) vec X = vec W."""
    A = np.asarray(A, dtype=float)
    W = np.asarray(W, dtype=float)
    k = A.shape[0]
    lhs = np.eye(k * k) - np.kron(A, A)
    x = np.linalg.solve(lhs, W.flatten(order="F"))
    return x.reshape((k, k), order="F")


def kron_solve_sylvester(M, N, W):
    """Solve M X N - X + W = 0 by vectorization: (I - N^T (x) M) vec X = vec W."""
    M = np.asarray(M, dtype=float)
    N = np.asarray(N, dtype=float)
    W = np.asarray(W, dtype=float)
    k, r = W.shape
    lhs = np.eye(k * r) - np.kron(N.T, M)
    x = np.linalg.solve(lhs, W.flatten(order="F"))
    return x.reshape((k, r), order="F")


def quad_h2_norm(A, B, C, nodes=4096):
    """h2 norm via trapezoid quadrature of ||C (zI - A)^-1 B||_F^2 on |z| = 1.

    The resolvent is formed with a raw linear solve per node; nothing from
    the package is reused.  On a uniform periodic grid the trapezoid rule
    reduces to the mean of the node values.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    n = A.shape[0]
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    total = 0.0
    eye = np.eye(n)
    for t in theta:
        z = np.exp(1j * t)
        H = C @ np.linalg.solve(z * eye - A, B)
        total += np.sum(np.abs(H) ** 2)
    return float(np.sqrt(total / nodes))


def fd_gradients(phi, rom, step=1e-6):
    """Central finite differences of a scalar phi(Rom) in every coordinate."""

    def bump(M, i, j, h):
        out = np.array(M, dtype=float)
        out[i, j] += h
        return out

    gA = np.zeros_like(rom.Ahat)
    gB = np.zeros_like(rom.Bhat)
    gC = np.zeros_like(rom.Chat)
    for i in range(rom.r):
        for j in range(rom.r):
            hi = phi(Rom(bump(rom.Ahat, i, j, step), rom.Bhat, rom.Chat))
            lo = phi(Rom(bump(rom.Ahat, i, j, -step), rom.Bhat, rom.Chat))
            gA[i, j] = (hi - lo) / (2.0 * step)
    for i in range(rom.r):
        for j in range(rom.m):
            hi = phi(Rom(rom.Ahat, bump(rom.Bhat, i, j, step), rom.Chat))
            lo = phi(Rom(rom.Ahat, bump(rom.Bhat, i, j, -step), rom.Chat))
            gB[i, j] = (hi - lo) / (2.0 * step)
    for i in range(rom.p):
        for j in range(rom.r):
            hi = phi(Rom(rom.Ahat, rom.Bhat, bump(rom.Chat, i, j, step)))
            lo = phi(Rom(rom.Ahat, rom.Bhat, bump(rom.Chat, i, j, -step)))
            gC[i, j] = (hi - lo) / (2.0 * step)
    return GradientTriple(gA, gB, gC)


def random_stable(rng, k, radius=0.8):
    """Gaussian matrix rescaled to the requested spectral radius."""
    A = rng.standard_normal((k, k))
    rho = np.max(np.abs(np.linalg.eigvals(A)))
    if rho == 0.0:
        return A
    return A * (radius / rho)


def random_system(rng, n, m, radius=0.8):
    A = random_stable(rng, n, radius)
    B = rng.standard_normal((n, m))
    return LtiSystem.with_identity_output(A, B)


def random_rom(rng, r, m, p, radius=0.7, min_modulus=1e-3):
    """Random reduced model with eigenvalue moduli inside (min_modulus, radius]."""
    for _ in range(100):
        Ahat = random_stable(rng, r, radius)
        moduli = np.abs(np.linalg.eigvals(Ahat))
        if np.min(moduli) > min_modulus:
            return Rom(Ahat, rng.standard_normal((r, m)), rng.standard_normal((p, r)))
    raise RuntimeError("could not draw a reduced model inside the annulus")
