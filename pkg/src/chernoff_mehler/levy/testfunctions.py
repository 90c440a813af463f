"""Smooth test functions with analytic gradients and Hessians.

All evaluators are vectorized: ``value(X)`` takes an (n, d) array (or a single
d-vector) and returns (n,), ``grad`` returns (n, d), ``hess`` returns (n, d, d).
"""
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


def _as_points(X, dim):
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X[:, None] if dim == 1 and X.shape[0] != 1 else X[None, :]
    return X


@dataclass
class TestFunction:
    name: str
    dim: int
    _value: Callable
    _grad: Callable
    _hess: Callable
    support_center: np.ndarray | None = None
    support_radius: float = np.inf
    sup_norm: float = np.inf
    params: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def value(self, X):
        return self._value(_as_points(X, self.dim))

    def grad(self, X):
        return self._grad(_as_points(X, self.dim))

    def hess(self, X):
        return self._hess(_as_points(X, self.dim))

    def __call__(self, X):
        return self.value(X)

    @property
    def compactly_supported(self):
        return np.isfinite(self.support_radius)

    def __add__(self, other):
        return combine([(1.0, self), (1.0, other)])

    def __mul__(self, alpha):
        return combine([(float(alpha), self)])

    __rmul__ = __mul__


def bump(center=0.0, radius=1.0, dim=1):
    """exp(1 - 1/(1 - |x-c|^2/r^2)) inside the ball, 0 outside; equals 1 at the center."""
    c = np.broadcast_to(np.asarray(center, dtype=float), (dim,)).copy()
    r2 = float(radius) ** 2

    def parts(X):
        D = X - c
        q = np.einsum("ij,ij->i", D, D) / r2
        inside = q < 1
        g = np.zeros_like(q)
        one_m = np.where(inside, 1 - q, 1.0)
        g[inside] = np.exp(1 - 1 / one_m[inside])
        g1 = np.where(inside, -g / one_m ** 2, 0.0)
        g2 = np.where(inside, g * (2 * q - 1) / one_m ** 4, 0.0)
        return D, g, g1, g2

    def value(X):
        return parts(X)[1]

    def grad(X):
        D, _, g1, _ = parts(X)
        return g1[:, None] * 2 * D / r2

    def hess(X):
        D, _, g1, g2 = parts(X)
        dq = 2 * D / r2
        return g2[:, None, None] * dq[:, :, None] * dq[:, None, :] + (g1 * 2 / r2)[:, None, None] * np.eye(dim)

    return TestFunction("bump", dim, value, grad, hess, c, float(radius), 1.0,
                        {"center": c.tolist(), "radius": float(radius)})


def cosine(wave=None, phase=0.0, dim=1):
    """cos(<k, x> + phase); defaults to cos(x_1)."""
    k = np.zeros(dim)
    k[0] = 1.0
    if wave is not None:
        k = np.broadcast_to(np.asarray(wave, dtype=float), (dim,)).copy()

    def value(X):
        return np.cos(X @ k + phase)

    def grad(X):
        return -np.sin(X @ k + phase)[:, None] * k

    def hess(X):
        return -np.cos(X @ k + phase)[:, None, None] * np.outer(k, k)

    return TestFunction("cos", dim, value, grad, hess, sup_norm=1.0, params={"wave": k.tolist(), "phase": phase})


def gaussian_bell(center=0.0, scale=1.0, dim=1):
    c = np.broadcast_to(np.asarray(center, dtype=float), (dim,)).copy()
    s2 = float(scale) ** 2

    def value(X):
        D = X - c
        return np.exp(-0.5 * np.einsum("ij,ij->i", D, D) / s2)

    def grad(X):
        return -(X - c) / s2 * value(X)[:, None]

    def hess(X):
        D = (X - c) / s2
        v = value(X)
        return v[:, None, None] * (D[:, :, None] * D[:, None, :] - np.eye(dim) / s2)

    return TestFunction("gaussian", dim, value, grad, hess, sup_norm=1.0,
                        params={"center": c.tolist(), "scale": float(scale)})


def coordinate(i=0, dim=1):
    """x_i; unbounded, meant as a factor in products."""

    def value(X):
        return X[:, i].copy()

    def grad(X):
        G = np.zeros_like(X)
        G[:, i] = 1.0
        return G

    def hess(X):
        return np.zeros((X.shape[0], dim, dim))

    return TestFunction(f"x{i}", dim, value, grad, hess, params={"i": i})


def constant(c=1.0, dim=1):
    def value(X):
        return np.full(X.shape[0], float(c))

    def grad(X):
        return np.zeros_like(X)

    def hess(X):
        return np.zeros((X.shape[0], dim, dim))

    return TestFunction("constant", dim, value, grad, hess, sup_norm=abs(float(c)), params={"c": float(c)})


def product(f, g):
    """Pointwise product with the Leibniz rule for derivatives."""
    if f.dim != g.dim:
        raise ValueError("dimension mismatch")

    def value(X):
        return f.value(X) * g.value(X)

    def grad(X):
        return f.value(X)[:, None] * g.grad(X) + g.value(X)[:, None] * f.grad(X)

    def hess(X):
        fv, gv, fg, gg = f.value(X), g.value(X), f.grad(X), g.grad(X)
        cross = fg[:, :, None] * gg[:, None, :]
        return (fv[:, None, None] * g.hess(X) + gv[:, None, None] * f.hess(X)
                + cross + np.transpose(cross, (0, 2, 1)))

    center, radius = f.support_center, f.support_radius
    if g.support_radius < radius:
        center, radius = g.support_center, g.support_radius
    return TestFunction(f"({f.name}*{g.name})", f.dim, value, grad, hess, center, radius)


def combine(terms):
    """Linear combination sum alpha_i f_i."""
    dim = terms[0][1].dim

    def value(X):
        return sum(a * f.value(X) for a, f in terms)

    def grad(X):
        return sum(a * f.grad(X) for a, f in terms)

    def hess(X):
        return sum(a * f.hess(X) for a, f in terms)

    radius = max(f.support_radius for _, f in terms)
    sup = sum(abs(a) * f.sup_norm for a, f in terms)
    name = "+".join(f"{a:g}*{f.name}" for a, f in terms)
    return TestFunction(name, dim, value, grad, hess, None, radius, sup)


def coordinate_probe(i, j=None, window=None, dim=1):
    """Moment probe y_i * chi or y_i * y_j * chi for a window function chi."""
    window = bump(0.0, 2.0, dim) if window is None else window
    f = product(coordinate(i, dim), window)
    if j is not None:
        f = product(coordinate(j, dim), f)
    return f


def from_cutoff(cut, dim=1):
    """Radial cutoff chi(x) = chi0(|x|) as a TestFunction."""
    return TestFunction("cutoff", dim, lambda X: cut.value(X), lambda X: cut.grad(X), lambda X: cut.hess(X),
                        np.zeros(dim), cut.M, 1.0, {"R": cut.R, "M": cut.M})


REGISTRY = {
    "bump": bump,
    "cos": cosine,
    "gaussian": gaussian_bell,
    "constant": constant,
}


def from_config(cfg, dim=1):
    cfg = dict(cfg)
    name = cfg.pop("name")
    if name == "x_bump":
        return product(coordinate(cfg.get("i", 0), dim), bump(cfg.get("center", 0.0), cfg.get("radius", 1.0), dim))
    if name not in REGISTRY:
        raise ValueError(f"unknown test function {name!r}")
    return REGISTRY[name](dim=dim, **cfg)


def finite_difference_check(f, X, step=1e-5, rel_tol=1e-6):
    """Compare analytic derivatives with central differences.

    Returns the largest relative discrepancy for the gradient and the Hessian,
    each scaled by max(1, |analytic|) so zero entries are compared absolutely.
    """
    X = _as_points(X, f.dim)
    d = f.dim
    G = f.grad(X)
    H = f.hess(X)
    G_fd = np.zeros_like(G)
    H_fd = np.zeros_like(H)
    for j in range(d):
        e = np.zeros(d)
        e[j] = step
        G_fd[:, j] = (f.value(X + e) - f.value(X - e)) / (2 * step)
        H_fd[:, :, j] = (f.grad(X + e) - f.grad(X - e)) / (2 * step)
    g_err = np.max(np.abs(G - G_fd) / np.maximum(1.0, np.abs(G)))
    h_err = np.max(np.abs(H - H_fd) / np.maximum(1.0, np.abs(H)))
    return float(g_err), float(h_err)
