"""Deterministic flow families h -> psi_h and their (D)-type diagnostics.

Kinds: ``identity``, ``exact_affine`` (flow of F(x) = Ax + b), ``ode_flow``
(adaptive high-accuracy solve of u' = F(u)), ``euler`` and ``runge_kutta``
(any Butcher tableau, implicit stages solved by Picard iteration).

Drift fields act on batches: F maps an (n, d) array to an (n, d) array.
"""
import json
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, SolverError
from .linalg import as_matrix, exp_and_integral
from .numerics import mann_kendall_z, richardson
from .reports import FAIL, INCONCLUSIVE, PASS, ConditionReport

KINDS = ("identity", "exact_affine", "ode_flow", "euler", "runge_kutta")
GUARD = 1 - 1e-6


@dataclass
class ButcherTableau:
    a: np.ndarray
    b: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
        self.b = np.asarray(self.b, dtype=float).ravel()
        s = self.b.shape[0]
        if self.a.shape != (s, s):
            if self.a.size == s * s:
                self.a = self.a.reshape(s, s)
            else:
                raise DomainError(f"tableau a has shape {self.a.shape}, expected ({s}, {s})")
        if abs(self.b.sum() - 1.0) > 1e-14:
            raise DomainError(f"weights sum to {self.b.sum()!r}, not 1")

    @property
    def stages(self):
        return self.b.shape[0]

    @property
    def one_norm(self):
        """max_j sum_i |a_ij| (largest column sum)."""
        return float(np.abs(self.a).sum(axis=0).max())

    @property
    def explicit(self):
        return not np.any(np.triu(self.a))

    @classmethod
    def from_json(cls, text):
        d = json.loads(text) if isinstance(text, str) else text
        return cls(np.asarray(d["a"], dtype=float), np.asarray(d["b"], dtype=float), d.get("name", ""))

    def to_json(self):
        return json.dumps({"name": self.name, "a": self.a.ravel().tolist(), "b": self.b.tolist()})


_R3 = np.sqrt(3.0)
TABLEAUX = {
    "explicit_euler": ButcherTableau([[0.0]], [1.0], "explicit_euler"),
    "heun": ButcherTableau([[0.0, 0.0], [1.0, 0.0]], [0.5, 0.5], "heun"),
    "rk4": ButcherTableau(
        [[0, 0, 0, 0], [0.5, 0, 0, 0], [0, 0.5, 0, 0], [0, 0, 1, 0]],
        [1 / 6, 1 / 3, 1 / 3, 1 / 6], "rk4"),
    "implicit_midpoint": ButcherTableau([[0.5]], [1.0], "implicit_midpoint"),
    "gauss_legendre_2": ButcherTableau(
        [[0.25, 0.25 - _R3 / 6], [0.25 + _R3 / 6, 0.25]], [0.5, 0.5], "gauss_legendre_2"),
}


def _stage_norm(K):
    """|k|_1 = sum_i |k^i| with Euclidean |.| per stage; K has shape (s, n, d)."""
    return np.linalg.norm(K, axis=2).sum(axis=0)


def rk_stage_solve(tableau, F, h, x, tol=1e-13, max_iter=200, q=None):
    """Picard iteration k <- F(x + h a k) started at k^0_i = F(x).

    Returns (stages, iterations, residual) with stages of shape (s, n, d) for
    a batch x of shape (n, d), or (s, d) for a single point. The residual is
    max over the batch of |k_prev - G(k_prev)|_1 at the last step, which bounds
    the residual of the returned stages. Convergence means residual <=
    tol * max(1, |k|_1). When the contraction factor q < 1 is known the
    iteration budget grows to the log(tol / r_1) / log(q) steps it needs.
    """
    X = np.atleast_2d(np.asarray(x, dtype=float))
    single = np.ndim(x) <= 1
    if np.ndim(x) == 0:
        X = X.reshape(1, 1)
    s = tableau.stages
    a = tableau.a
    n, d = X.shape
    F0 = np.asarray(F(X), dtype=float).reshape(n, d)
    K = np.broadcast_to(F0, (s, n, d)).copy()
    res = np.inf
    it = 0
    while it < max_iter:
        it += 1
        arg = X[None, :, :] + h * np.einsum("ij,jnd->ind", a, K)
        G = np.asarray(F(arg.reshape(s * n, d)), dtype=float).reshape(s, n, d)
        res = float(_stage_norm(G - K).max())
        K = G
        if res <= tol * max(1.0, float(_stage_norm(K).max())):
            return (K[:, 0, :] if single else K), it, res
        if it == 1 and q is not None and 0 < q < 1 and res > 0:
            max_iter = max(max_iter, int(np.ceil(np.log(tol / res) / np.log(q))) + 10)
    raise SolverError("Runge-Kutta stage iteration did not converge", res, max_iter)


def linear_field(A, b=None):
    """F(x) = A x + b as a batch field, with its Lipschitz constant |A|_2."""
    A = as_matrix(A)
    b = np.zeros(A.shape[0]) if b is None else np.broadcast_to(np.asarray(b, dtype=float), (A.shape[0],)).copy()

    def F(X):
        return X @ A.T + b

    return F, float(np.linalg.norm(A, 2))


def named_field(cfg):
    """Nonlinear Lipschitz fields by name; returns (F, L, dim).

    ``neg_sin``  F(x) = -a sin(x) coordinatewise, L = |a|
    ``tanh``     F(x) = -a tanh(x) coordinatewise, L = |a|
    """
    cfg = dict(cfg)
    name = cfg.get("name")
    a = float(cfg.get("scale", 1.0))
    dim = int(cfg.get("dim", 1))
    if name == "neg_sin":
        return (lambda X: -a * np.sin(np.asarray(X, dtype=float))), abs(a), dim
    if name == "tanh":
        return (lambda X: -a * np.tanh(np.asarray(X, dtype=float))), abs(a), dim
    raise DomainError(f"unknown field {name!r}")


@dataclass
class FlowFamily:
    dim: int
    kind: str
    F: Callable | None = None
    L: float = 0.0
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    tableau: ButcherTableau | None = None
    declared_omega: float = 0.0
    declared_h0: float = np.inf
    declared_delta: float = 1.0
    tol_ode: float = 1e-10
    name: str = ""
    stage_tol: float = 1e-13
    max_iter: int = 200

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown flow kind {self.kind!r}")
        if self.L < 0 or self.declared_omega < 0:
            raise DomainError("Lipschitz constant and omega must be nonnegative")

    # constructors

    @classmethod
    def identity(cls, dim=1):
        return cls(dim, "identity", name="identity")

    @classmethod
    def exact_affine(cls, A, b=None, h0=1.0):
        A = as_matrix(A)
        F, L = linear_field(A, b)
        bb = np.zeros(A.shape[0]) if b is None else np.broadcast_to(np.asarray(b, dtype=float), (A.shape[0],)).copy()
        return cls(A.shape[0], "exact_affine", F, L, A, bb, declared_omega=L * np.exp(L * h0), declared_h0=h0,
                   name="exact_affine")

    @classmethod
    def ode_flow(cls, F, L, dim=1, h0=1.0, tol=1e-10):
        return cls(dim, "ode_flow", F, float(L), declared_omega=L * np.exp(L * h0), declared_h0=h0, tol_ode=tol,
                   name="ode_flow")

    @classmethod
    def euler(cls, F, L, dim=1, h0=np.inf):
        return cls(dim, "euler", F, float(L), declared_omega=float(L), declared_h0=h0, name="euler")

    @classmethod
    def runge_kutta(cls, F, L, tableau="rk4", dim=1):
        """Runge-Kutta flow with omega = s L e max|b_i|.

        That constant needs (1 - h L |a|_1)^{-1} <= e, so the declared h0 is
        (1 - 1/e) / (L |a|_1). The map itself is defined up to the contraction
        guard h L |a|_1 <= 1 - 1e-6 and is the identity beyond it.
        """
        tab = TABLEAUX[tableau] if isinstance(tableau, str) else tableau
        La = L * tab.one_norm
        h0 = np.inf if La == 0 else (1 - np.exp(-1.0)) / La
        omega = tab.stages * L * np.e * np.abs(tab.b).max()
        return cls(dim, "runge_kutta", F, float(L), tableau=tab, declared_omega=omega, declared_h0=h0,
                   name=f"runge_kutta[{tab.name}]")

    @classmethod
    def from_config(cls, cfg, dim=1):
        """``{"kind": ..., "A": .., "b": .., "tableau": ..}`` for affine F(x) = A x + b,
        or ``{"kind": ..., "field": {"name": .., **params}}`` for a named nonlinear field."""
        cfg = dict(cfg)
        kind = cfg.get("kind", "identity")
        if kind == "identity":
            return cls.identity(cfg.get("dim", dim))
        if "field" in cfg:
            if kind == "exact_affine":
                raise DomainError("exact_affine needs an affine field")
            F, L, fdim = named_field(cfg["field"])
            A = np.zeros((fdim, fdim))
        else:
            A = as_matrix(cfg.get("A", [[0.0]]))
            F, L = linear_field(A, cfg.get("b"))
        if kind == "exact_affine":
            return cls.exact_affine(A, cfg.get("b"), cfg.get("h0", 1.0))
        if kind == "ode_flow":
            return cls.ode_flow(F, L, A.shape[0], cfg.get("h0", 1.0), cfg.get("tol", 1e-10))
        if kind == "euler":
            return cls.euler(F, L, A.shape[0])
        if kind in ("runge_kutta", "rk4"):
            tab = cfg.get("tableau", "rk4")
            if isinstance(tab, dict):
                tab = ButcherTableau.from_json(tab)
            return cls.runge_kutta(F, L, tab, A.shape[0])
        raise DomainError(f"unknown flow kind {kind!r}")

    # evaluation

    def drift(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "identity":
            return np.zeros_like(X)
        return np.asarray(self.F(X), dtype=float).reshape(X.shape)

    def contraction_factor(self, h):
        if self.kind != "runge_kutta":
            return 0.0
        return h * self.L * self.tableau.one_norm

    def apply(self, h, x):
        """psi_h(x) for a single point (d,) or a batch (n, d)."""
        if not np.isfinite(h) or h <= 0:
            raise DomainError(f"h must be positive, got {h}")
        x_arr = np.asarray(x, dtype=float)
        X = x_arr.reshape(-1, self.dim) if x_arr.ndim <= 1 else x_arr
        single = x_arr.ndim <= 1 and X.shape[0] == 1
        out = self._apply_batch(float(h), X)
        return out[0] if single else out

    def _apply_batch(self, h, X):
        k = self.kind
        if k == "identity":
            return X.copy()
        if k == "exact_affine":
            E, G = exp_and_integral(self.A, h)
            return X @ E.T + G @ self.b
        if k == "euler":
            return X + h * np.asarray(self.F(X), dtype=float).reshape(X.shape)
        if k == "ode_flow":
            n, d = X.shape

            def rhs(_, u):
                return np.asarray(self.F(u.reshape(n, d)), dtype=float).ravel()

            sol = solve_ivp(rhs, (0.0, h), X.ravel(), method="DOP853", rtol=self.tol_ode,
                            atol=self.tol_ode * 1e-2)
            if not sol.success:
                raise SolverError(f"ODE flow failed: {sol.message}")
            return sol.y[:, -1].reshape(n, d)
        # runge_kutta
        if self.contraction_factor(h) > GUARD:
            return X.copy()
        K, _, _ = rk_stage_solve(self.tableau, self.F, h, X, self.stage_tol, self.max_iter, self.contraction_factor(h))
        return X + h * np.einsum("i,ind->nd", self.tableau.b, K)

    def describe(self):
        return {"kind": self.kind, "dim": self.dim, "L": self.L, "omega": self.declared_omega,
                "h0": None if np.isinf(self.declared_h0) else self.declared_h0,
                "tableau": None if self.tableau is None else self.tableau.name}


# condition (D) diagnostics

def _box_samples(dim, box, n, rng):
    lo, hi = box
    corners = np.array(np.meshgrid(*[[lo, hi]] * dim, indexing="ij")).reshape(dim, -1).T
    return np.vstack([corners, np.zeros((1, dim)), rng.uniform(lo, hi, size=(n, dim))])


def default_samples(flow, n=64, box=(-5.0, 5.0), seed=0):
    """Deterministic corner set plus uniform points in the box, and displacements |u| <= delta."""
    from ._rng import derive_rng

    rng = derive_rng(seed, "flow-samples")
    X = _box_samples(flow.dim, box, n, rng)
    U = rng.standard_normal((n, flow.dim))
    U *= (flow.declared_delta * rng.uniform(0.01, 1.0, size=n) / np.linalg.norm(U, axis=1))[:, None]
    return X, U


def estimate_condition_D(flow, h_ladder, x_samples, u_samples, slack=1e-9):
    """omega_hat = max |psi_h(x+u) - psi_h(x) - u| / (h |u|) over the samples, plus max |psi_h(0)|/h."""
    X = np.atleast_2d(np.asarray(x_samples, dtype=float)).reshape(-1, flow.dim)
    U = np.atleast_2d(np.asarray(u_samples, dtype=float)).reshape(-1, flow.dim)
    U = U[np.linalg.norm(U, axis=1) > 0]
    hs = sorted((float(h) for h in h_ladder), reverse=True)
    rows = []
    omega_hat = 0.0
    origin = []
    for h in hs:
        moved = flow.apply(h, X) - X
        ratio_h = 0.0
        for u in U:
            disp = (flow.apply(h, X + u) - (X + u)) - moved
            ratio_h = max(ratio_h, float(np.linalg.norm(disp, axis=1).max() / (h * np.linalg.norm(u))))
        o = float(np.linalg.norm(flow.apply(h, np.zeros(flow.dim))) / h)
        origin.append(o)
        omega_hat = max(omega_hat, ratio_h)
        rows.append({"h": h, "omega_hat": ratio_h, "origin_ratio": o})
    z = mann_kendall_z(origin[len(origin) // 2:])
    bounded = z <= 1.645 or max(origin) == 0 or np.ptp(origin) <= 1e-9 * max(1.0, max(origin))
    within = omega_hat <= flow.declared_omega * (1 + slack) + slack
    verdict = PASS if (within and bounded) else FAIL
    notes = [f"searched {X.shape[0]} points x {U.shape[0]} displacements"]
    if not bounded:
        notes.append("origin ratio grows along the ladder")
    return ConditionReport("D", verdict,
                           {"omega_hat": omega_hat, "declared_omega": flow.declared_omega,
                            "origin_ratio_max": max(origin), "n_x": X.shape[0], "n_u": U.shape[0]},
                           hs, "sampled", rows, notes)


@dataclass
class DriftEstimate:
    value: np.ndarray
    error: float
    discrepancies: list = field(default_factory=list)
    quotients: list = field(default_factory=list)
    warning: bool = False


def drift_estimate(flow, x, h_ladder, order=1):
    """Richardson limit of (psi_h(x) - x)/h along a decreasing ladder."""
    hs = np.array(sorted((float(h) for h in h_ladder), reverse=True))
    if hs.size < 2:
        raise DomainError("drift estimate needs at least two ladder levels")
    x = np.asarray(x, dtype=float).reshape(flow.dim)
    q = np.array([(flow.apply(h, x) - x) / h for h in hs])
    est, corr = richardson(hs, q, order)
    disc = [float(np.linalg.norm(q[i + 1] - q[i])) for i in range(len(hs) - 1)]
    # rounding in (psi_h(x) - x)/h is of order eps |x| / h
    scale = 1e-13 * max(1.0, float(np.abs(q).max())) + 16 * np.finfo(float).eps * max(1.0, float(np.abs(x).max())) / hs[-1]
    warn = any(b > a + scale for a, b in zip(disc, disc[1:]))
    if warn:
        warnings.warn("ladder discrepancies are not monotone; (D*) may fail here", RuntimeWarning, stacklevel=2)
    err = max(disc[-2:]) if len(disc) >= 1 else float(np.linalg.norm(corr))
    return DriftEstimate(est, err, disc, q.tolist(), warn)


def check_condition_D_star(flow, X, h_ladder, tol=1e-3):
    """Drift limits at sample points; pass when every ladder converges without warning."""
    rows = []
    ok = True
    for x in np.atleast_2d(X):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            est = drift_estimate(flow, x, h_ladder)
        diff = float(np.linalg.norm(est.value - flow.drift(x)[0]))
        rows.append({"x": np.asarray(x).tolist(), "F_hat": np.asarray(est.value).tolist(), "error": est.error,
                     "vs_declared": diff})
        ok &= (not est.warning) and diff <= tol
    return ConditionReport("D_star", PASS if ok else INCONCLUSIVE,
                           {"max_vs_declared": max(r["vs_declared"] for r in rows)},
                           sorted(map(float, h_ladder), reverse=True), "sampled", rows)


# consequences of (D)

def lipschitz_propagation_excess(flow, hs, X1, X2, omega=None):
    """max over (h, x1, x2) of |psi_h(x1) - psi_h(x2)| - e^{omega h} |x1 - x2|."""
    omega = flow.declared_omega if omega is None else omega
    worst = -np.inf
    for h in hs:
        lhs = np.linalg.norm(flow.apply(h, X1) - flow.apply(h, X2), axis=1)
        rhs = np.exp(omega * h) * np.linalg.norm(X1 - X2, axis=1)
        worst = max(worst, float((lhs - rhs).max()))
    return worst


def linear_growth_constant(flow, hs, X):
    """(C, worst excess) for |psi_h(x) - x|/h <= C (1 + |x|) with C = max(omega_hat, rho).

    omega_hat is measured on the pairs (0, x) and rho = max_h |psi_h(0)|/h.
    """
    X = np.atleast_2d(X)
    zero = np.zeros(flow.dim)
    rho = max(float(np.linalg.norm(flow.apply(h, zero)) / h) for h in hs)
    omega_hat = 0.0
    nx = np.linalg.norm(X, axis=1)
    for h in hs:
        p0 = flow.apply(h, zero)
        disp = np.linalg.norm(flow.apply(h, X) - p0 - X, axis=1)
        keep = nx > 0
        if keep.any():
            omega_hat = max(omega_hat, float((disp[keep] / (h * nx[keep])).max()))
    C = max(omega_hat, rho)
    excess = -np.inf
    for h in hs:
        lhs = np.linalg.norm(flow.apply(h, X) - X, axis=1) / h
        excess = max(excess, float((lhs - C * (1 + nx)).max()))
    return C, excess


def escape_delta(flow, C, R, r):
    """delta with C delta <= (r - R)/(1 + r), capped at the declared h0."""
    if not r > R >= 0:
        raise DomainError("need r > R >= 0")
    d = (r - R) / ((1 + r) * C) if C > 0 else np.inf
    return min(d, flow.declared_h0)


def escape_violations(flow, hs, X, R, r):
    """Count points with |x| > r but |psi_h(x)| <= R."""
    X = np.atleast_2d(X)
    X = X[np.linalg.norm(X, axis=1) > r]
    bad = 0
    for h in hs:
        bad += int(np.sum(np.linalg.norm(flow.apply(h, X), axis=1) <= R))
    return bad
