"""Finitely supported probability measures as (points, weights) pairs.

Points are an (m, d) array, weights an (m,) array. Convolution merges atoms
whose positions agree after rounding, so lattice measures stay compact.
"""
import numpy as np

from .errors import UnsupportedModeError

MERGE_DECIMALS = 12
PRUNE_BELOW = 1e-30


def normalize_atoms(points, weights, dim=None):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None] if dim in (None, 1) else pts[None, :]
    w = np.asarray(weights, dtype=float).ravel()
    if pts.shape[0] != w.shape[0]:
        raise ValueError(f"{pts.shape[0]} points but {w.shape[0]} weights")
    return pts, w


def merge_atoms(points, weights, decimals=MERGE_DECIMALS, prune=PRUNE_BELOW):
    """Sum the weights of atoms at (numerically) identical positions.

    Rounding only decides which atoms merge; each merged atom keeps the first
    unrounded position so that irrational lattices are not shifted.
    """
    pts, w = normalize_atoms(points, weights)
    keys = np.round(pts, decimals) + 0.0  # +0.0 folds -0.0 into 0.0
    uniq, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    merged = np.bincount(inverse.ravel(), weights=w, minlength=uniq.shape[0])
    keep = np.abs(merged) >= prune
    return pts[first][keep], merged[keep]


def convolve_atoms(a, b):
    """Law of X + Y for independent atomic X ~ a, Y ~ b."""
    pa, wa = a
    pb, wb = b
    pts = (pa[:, None, :] + pb[None, :, :]).reshape(-1, pa.shape[1])
    w = (wa[:, None] * wb[None, :]).ravel()
    return merge_atoms(pts, w)


def convolution_power_atoms(atoms, k, pair_limit=None):
    """k-fold self-convolution by binary exponentiation.

    With ``pair_limit`` set, raises UnsupportedModeError before any single
    convolution would form more than that many atom pairs.
    """
    if k < 1:
        raise ValueError("k must be >= 1")

    def conv(a, b):
        if pair_limit is not None and a[1].size * b[1].size > pair_limit:
            raise UnsupportedModeError(f"convolution of {a[1].size} x {b[1].size} atoms exceeds {pair_limit} pairs")
        return convolve_atoms(a, b)

    base = merge_atoms(*atoms)
    result = None
    while k:
        if k & 1:
            result = base if result is None else conv(result, base)
        k >>= 1
        if k:
            base = conv(base, base)
    return result


def integrate_atoms(atoms, f):
    """Sum of w_i f(p_i); f takes an (m, d) array and returns (m,)."""
    pts, w = atoms
    return float(np.dot(w, np.asarray(f(pts), dtype=float)))


def tv_distance(a, b, decimals=MERGE_DECIMALS):
    """Total variation distance sup_A |a(A) - b(A)| = 0.5 * sum |a_i - b_i| on the merged support."""
    pa, wa = a
    pb, wb = b
    pts = np.vstack([pa, pb])
    w = np.concatenate([wa, -wb])
    keys = np.round(pts, decimals) + 0.0
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    diff = np.bincount(inverse.ravel(), weights=w)
    # mass missing from both supports (series truncation) counts as well
    defect = abs((1.0 - wa.sum()) - (1.0 - wb.sum()))
    return 0.5 * (np.abs(diff).sum() + defect)
