"""Matrix exponentials and the block-augmented integrals built on them.

``scipy.linalg.expm`` implements scaling-and-squaring with a degree-13 Padé
approximant, which is exactly the method we want; the block constructions
below reduce every integral of the form int_0^t e^{sA} ... ds to one call.
"""
import numpy as np
from scipy.integrate import quad_vec
from scipy.linalg import expm


def as_matrix(a, dim=None):
    m = np.atleast_2d(np.asarray(a, dtype=float))
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if dim is not None and m.shape[0] != dim:
        raise ValueError(f"expected a {dim}x{dim} matrix, got shape {m.shape}")
    return m


def exp_and_integral(A, t):
    """Return ``(e^{tA}, int_0^t e^{sA} ds)`` from the exponential of [[A, I], [0, 0]]."""
    A = as_matrix(A)
    d = A.shape[0]
    block = np.zeros((2 * d, 2 * d))
    block[:d, :d] = A
    block[:d, d:] = np.eye(d)
    E = expm(t * block)
    return E[:d, :d], E[:d, d:]


def gramian_van_loan(A, B, t):
    """Controllability Gramian ``int_0^t e^{sA} B B^T e^{sA^T} ds`` via Van Loan's block exponential.

    The block exponential is taken on a step t / 2^k with |t A| / 2^k <= 1/2 and
    then doubled with Q_{2s} = Q_s + e^{sA} Q_s e^{sA^T}; a single long step
    loses digits to cancellation between e^{-tA} and e^{tA}.
    """
    A = as_matrix(A)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    d = A.shape[0]
    norm = abs(t) * np.linalg.norm(A, 1)
    k = max(0, int(np.ceil(np.log2(norm / 0.5)))) if norm > 0.5 else 0
    s = t / 2 ** k
    block = np.zeros((2 * d, 2 * d))
    block[:d, :d] = -A
    block[:d, d:] = B @ B.T
    block[d:, d:] = A.T
    E = expm(s * block)
    Es = E[d:, d:].T
    Q = Es @ E[:d, d:]
    Q = 0.5 * (Q + Q.T)
    for _ in range(k):
        Q = Q + Es @ Q @ Es.T
        Q = 0.5 * (Q + Q.T)
        Es = Es @ Es
    return Q


def gramian_quadrature(A, B, t, epsabs=1e-13, epsrel=1e-12):
    """The same Gramian by adaptive quadrature; an independent cross-check."""
    A = as_matrix(A)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    BBt = B @ B.T
    if t == 0:
        return np.zeros_like(BBt)

    def integrand(s):
        E = expm(s * A)
        return E @ BBt @ E.T

    Q, _ = quad_vec(integrand, 0.0, t, epsabs=epsabs, epsrel=epsrel)
    return 0.5 * (Q + Q.T)


def psd_sqrt(S, clip=-1e-10):
    """Symmetric square root of a PSD matrix; eigenvalues below ``clip`` raise."""
    S = as_matrix(S)
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    if w.min(initial=0.0) < clip * max(1.0, abs(w).max(initial=0.0)):
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


def psd_project(S):
    """Clip negative eigenvalues to zero; returns the projection and the largest move."""
    S = as_matrix(S)
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    moved = float(max(0.0, -w.min(initial=0.0)))
    return (V * np.clip(w, 0.0, None)) @ V.T, moved
