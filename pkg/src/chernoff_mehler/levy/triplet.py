"""Levy triplets and the generators they define.

The compensator is h(y) = y * 1{|y| <= 1} and sigma is the covariance of the
Gaussian part, so the generator reads

    L f(x) = <b, grad f(x)> + 1/2 tr(sigma hess f(x))
             + int f(x+y) - f(x) - <grad f(x), h(y)> nu(dy) - c f(x).
"""
import json
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, QuadratureError
from ..linalg import as_matrix


@dataclass
class LevyMeasureRepr:
    """Finite-activity atoms, or a 1-d density truncated to rho <= |y| <= R.

    For ``truncated_density`` the jumps below rho are not integrated; their
    second moment ``small_second`` is folded into the Gaussian part.
    """

    kind: str
    dim: int
    atoms: np.ndarray
    masses: np.ndarray
    density: object = None
    rho: float = 0.0
    R: float = 0.0
    small_second: np.ndarray | None = None
    n_nodes: int = 0

    @classmethod
    def none(cls, dim=1):
        return cls("finite_activity", dim, np.zeros((0, dim)), np.zeros(0))

    @classmethod
    def finite_activity(cls, atoms, masses):
        atoms = np.asarray(atoms, dtype=float)
        atoms = atoms[:, None] if atoms.ndim == 1 else atoms
        masses = np.asarray(masses, dtype=float).ravel()
        if atoms.shape[0] != masses.shape[0]:
            raise DomainError("atoms and masses differ in length")
        if np.any(masses < 0):
            raise DomainError("Levy measure masses must be nonnegative")
        keep = np.any(atoms != 0, axis=1)  # nu({0}) = 0 by construction
        return cls("finite_activity", atoms.shape[1], atoms[keep], masses[keep])

    @classmethod
    def truncated_density(cls, density, R, rho=1e-3, n_nodes=200, small_nodes=200):
        """1-d Levy density g on 0 < |y| <= R; jumps below rho are summarized by their second moment."""
        from scipy.integrate import quad

        if not 0 < rho < R:
            raise DomainError("need 0 < rho < R")
        atoms, masses = [], []
        z, w = np.polynomial.legendre.leggauss(n_nodes)
        # geometric split of [rho, R] keeps nodes dense near rho where densities blow up
        edges = np.geomspace(rho, R, 9)
        for lo, hi in zip(edges[:-1], edges[1:]):
            y = 0.5 * (hi - lo) * z + 0.5 * (hi + lo)
            ww = 0.5 * (hi - lo) * w
            for sgn in (1.0, -1.0):
                atoms.append(sgn * y)
                masses.append(ww * np.asarray(density(sgn * y), dtype=float))
        atoms = np.concatenate(atoms)[:, None]
        masses = np.concatenate(masses)
        if np.any(masses < 0):
            raise DomainError("density must be nonnegative")
        small = 0.0
        for sgn in (1.0, -1.0):
            val, err = quad(lambda y: y * y * density(sgn * y), 0.0, rho, limit=small_nodes)
            small += val
        second_band = float(np.sum(masses * atoms[:, 0] ** 2))
        check, _ = quad(lambda y: y * y * (density(y) + density(-y)), rho, R, limit=small_nodes)
        if not np.isfinite(second_band) or abs(second_band - check) > 1e-6 * max(1.0, abs(check)):
            raise QuadratureError("second moment of the jump band did not converge", abs(second_band - check))
        return cls("truncated_density", 1, atoms, masses, density, rho, R, np.array([[small]]), n_nodes)

    @property
    def intensity(self):
        return float(self.masses.sum())

    def integral_one_wedge_square(self):
        """int min(1, |y|^2) nu(dy), including the folded small-jump part."""
        r2 = np.einsum("ij,ij->i", self.atoms, self.atoms)
        out = float(np.dot(self.masses, np.minimum(1.0, r2)))
        if self.small_second is not None:
            out += float(np.trace(self.small_second))
        return out

    def to_dict(self):
        out = {"kind": self.kind, "atoms": self.atoms.tolist(), "masses": self.masses.tolist()}
        if self.kind == "truncated_density":
            out.update(rho=self.rho, R=self.R, small_second=self.small_second.tolist())
        return out

    @classmethod
    def from_dict(cls, d, dim):
        atoms = np.asarray(d.get("atoms", []), dtype=float).reshape(-1, dim)
        masses = np.asarray(d.get("masses", []), dtype=float)
        if d["kind"] == "finite_activity":
            return cls.finite_activity(atoms, masses)
        return cls("truncated_density", dim, atoms, masses, None, d["rho"], d["R"],
                   np.asarray(d["small_second"], dtype=float))


@dataclass
class LevyTriplet:
    b: np.ndarray
    sigma: np.ndarray
    nu: LevyMeasureRepr
    killing_c: float = 0.0

    def __post_init__(self):
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        d = self.b.shape[0]
        self.sigma = as_matrix(self.sigma, d)
        if not np.allclose(self.sigma, self.sigma.T, atol=1e-12):
            raise DomainError("sigma must be symmetric")
        if np.linalg.eigvalsh(self.sigma).min() < -1e-12:
            raise DomainError("sigma must be positive semidefinite")
        if self.nu.dim != d:
            raise DomainError("Levy measure dimension differs from the drift")
        if self.killing_c < 0:
            raise DomainError("killing rate must be nonnegative")

    @classmethod
    def zero(cls, dim=1):
        return cls(np.zeros(dim), np.zeros((dim, dim)), LevyMeasureRepr.none(dim))

    @property
    def dim(self):
        return self.b.shape[0]

    @property
    def effective_sigma(self):
        """sigma plus the second moment of jumps folded in below rho."""
        if self.nu.small_second is None:
            return self.sigma
        return self.sigma + self.nu.small_second

    def to_json(self):
        return json.dumps({"b": self.b.tolist(), "sigma": self.sigma.tolist(),
                           "nu": self.nu.to_dict(), "c": self.killing_c})

    @classmethod
    def from_json(cls, text):
        d = json.loads(text) if isinstance(text, str) else text
        b = np.asarray(d["b"], dtype=float)
        return cls(b, np.asarray(d["sigma"], dtype=float), LevyMeasureRepr.from_dict(d["nu"], b.shape[0]),
                   float(d.get("c", 0.0)))


_S_NODES, _S_WEIGHTS = np.polynomial.legendre.leggauss(16)
_S_NODES = 0.5 * (_S_NODES + 1)
_S_WEIGHTS = 0.5 * _S_WEIGHTS


def _jump_integral(nu, f, X):
    if nu.atoms.shape[0] == 0:
        return np.zeros(X.shape[0])
    Y = nu.atoms
    m = nu.masses
    small = np.linalg.norm(Y, axis=1) <= 1
    n, d = X.shape
    fx = f.value(X)
    gx = f.grad(X)
    if nu.kind == "finite_activity":
        shifted = f.value((X[:, None, :] + Y[None, :, :]).reshape(-1, d)).reshape(n, -1)
        comp = (gx @ Y.T) * small
        return (shifted - fx[:, None] - comp) @ m
    # truncated density: Taylor remainder int_0^1 (1-s) y^T hess f(x+sy) y ds for |y| <= 1
    out = np.zeros(n)
    Yb, mb = Y[~small], m[~small]
    if Yb.shape[0]:
        shifted = f.value((X[:, None, :] + Yb[None, :, :]).reshape(-1, d)).reshape(n, -1)
        out += (shifted - fx[:, None]) @ mb
    Ys, ms = Y[small], m[small]
    for s, ws in zip(_S_NODES, _S_WEIGHTS):
        H = f.hess((X[:, None, :] + s * Ys[None, :, :]).reshape(-1, d)).reshape(n, -1, d, d)
        quad = np.einsum("pj,npjk,pk->np", Ys, H, Ys)
        out += ws * (1 - s) * (quad @ ms)
    return out


def generator_apply(triplet, f, x):
    """L_{(b, sigma, nu)} f at the points x, minus c f when a killing rate is present."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    if triplet.dim == 1 and X.shape[0] == 1 and X.shape[1] != 1:
        X = X.T
    single = np.ndim(x) <= 1 and X.shape[0] == 1
    drift = f.grad(X) @ triplet.b
    diff = 0.5 * np.einsum("jk,njk->n", triplet.effective_sigma, f.hess(X))
    out = drift + diff + _jump_integral(triplet.nu, f, X)
    if triplet.killing_c > 0:
        out = out - triplet.killing_c * f.value(X)
    return float(out[0]) if single else out


def drifted_generator_apply(F, triplet, f, x):
    """<grad f(x), F(x)> + L f(x); F maps (n, d) arrays to (n, d) arrays."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    if triplet.dim == 1 and X.shape[0] == 1 and X.shape[1] != 1:
        X = X.T
    single = np.ndim(x) <= 1 and X.shape[0] == 1
    transport = np.einsum("nj,nj->n", f.grad(X), np.asarray(F(X), dtype=float).reshape(X.shape))
    out = transport + np.atleast_1d(generator_apply(triplet, f, X))
    return float(out[0]) if single else out
