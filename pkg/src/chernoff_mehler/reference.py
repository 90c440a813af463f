"""Reference semigroups: heat, Ornstein-Uhlenbeck (Mehler), compound Poisson, Levy SDE.

Gaussian expectations use tensor Gauss-Hermite rules whose node count doubles
until the estimate moves by less than the tolerance; the final difference is
reported as the error.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._rng import derive_rng
from .engine import Estimate, transition_apply, TransitionConfig
from .errors import DomainError, NumericalError
from .levy.triplet import drifted_generator_apply
from .linalg import as_matrix, exp_and_integral, gramian_quadrature, gramian_van_loan, psd_sqrt
from .measures import compound_poisson_atoms, gaussian_rule, MeasureFamily
from .numerics import mann_kendall_z
from .reports import FAIL, PASS, ConditionReport


def _fn(f):
    return f.value if hasattr(f, "value") else (lambda X: np.asarray(f(X), dtype=float).reshape(-1))


def _points(x, dim):
    X = np.asarray(x, dtype=float)
    single = X.ndim == 0 or (X.ndim == 1 and (dim > 1 or X.size == 1))
    return X.reshape(-1, dim), single


def gaussian_expectation(f, mean, cov, n_nodes=64, tol=1e-10, max_nodes=None):
    """E f(m + G), G ~ N(0, cov), for a batch of means (n, d); returns (values, error)."""
    fn = _fn(f)
    mean = np.atleast_2d(mean)
    n, d = mean.shape
    max_nodes = max_nodes or {1: 256, 2: 256, 3: 128}[d]

    def rule(m):
        Z, w = gaussian_rule(np.zeros(d), cov, m)
        V = fn((mean[:, None, :] + Z[None, :, :]).reshape(-1, d)).reshape(n, -1)
        v0 = V[:, :1]
        return v0[:, 0] + (V - v0) @ w

    m = n_nodes
    prev = rule(m)
    err = np.full(n, np.inf)
    while 2 * m <= max_nodes:
        cur = rule(2 * m)
        err = np.abs(cur - prev)
        prev, m = cur, 2 * m
        if err.max() < tol:
            break
    return prev, err


def heat_semigroup_apply(b, sigma, t, f, x, n_nodes=64, tol=1e-10):
    """E f(x + b t + sqrt(t) sigma Z) for symmetric PSD sigma; the covariance is t sigma sigma^T."""
    b = np.atleast_1d(np.asarray(b, dtype=float))
    d = b.shape[0]
    S = as_matrix(sigma, d)
    if not np.allclose(S, S.T, atol=1e-12) or np.linalg.eigvalsh(S).min() < -1e-12:
        raise DomainError("sigma must be symmetric positive semidefinite")
    if t < 0:
        raise DomainError("t must be nonnegative")
    X, single = _points(x, d)
    if t == 0:
        v = _fn(f)(X)
        return Estimate(float(v[0]), 0.0) if single else Estimate(v, np.zeros_like(v))
    vals, err = gaussian_expectation(f, X + b * t, t * S @ S.T, n_nodes, tol)
    return Estimate(float(vals[0]), float(err[0])) if single else Estimate(vals, err)


@dataclass
class OuSpec:
    A: np.ndarray
    b: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.A = as_matrix(self.A)
        d = self.A.shape[0]
        self.b = np.broadcast_to(np.asarray(self.b, dtype=float), (d,)).copy()
        self.sigma = as_matrix(self.sigma, d)

    @property
    def dim(self):
        return self.A.shape[0]

    def mean(self, t, X):
        E, G = exp_and_integral(self.A, t)
        return np.atleast_2d(X) @ E.T + G @ self.b

    def covariance(self, t, check=False, tol=1e-10):
        Q = gramian_van_loan(self.A, self.sigma, t)
        if check:
            Qq = gramian_quadrature(self.A, self.sigma, t)
            if np.abs(Q - Qq).max() > tol * max(1.0, np.abs(Q).max()):
                raise NumericalError(f"Van Loan and quadrature covariances differ by {np.abs(Q - Qq).max():.3e}")
        w = np.linalg.eigvalsh(Q)
        if w.min(initial=0.0) < -1e-10:
            raise NumericalError(f"covariance has eigenvalue {w.min():.3e}")
        return Q


def mehler_ou_apply(spec, t, f, x, n_nodes=64, tol=1e-10):
    """E f(m_t(x) + G) with G ~ N(0, Q_t)."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    X, single = _points(x, spec.dim)
    if t == 0:
        v = _fn(f)(X)
        return Estimate(float(v[0]), 0.0) if single else Estimate(v, np.zeros_like(v))
    vals, err = gaussian_expectation(f, spec.mean(t, X), spec.covariance(t), n_nodes, tol)
    return Estimate(float(vals[0]), float(err[0])) if single else Estimate(vals, err)


def compound_poisson_apply(rate, jumps, jump_weights, drift, t, f, x, N=100_000, seed=0, mode="series"):
    """E f(x + b0 t + sum_{i < N_t} J_i); ``series`` is exact up to the reported truncated Poisson mass."""
    if rate < 0:
        raise DomainError("rate must be nonnegative")
    jumps = np.asarray(jumps, dtype=float)
    d = 1 if jumps.ndim <= 1 else jumps.shape[1]
    jumps = jumps.reshape(-1, d)
    weights = np.full(jumps.shape[0], 1.0 / jumps.shape[0]) if jump_weights is None else np.asarray(jump_weights, float)
    drift = np.broadcast_to(np.asarray(0.0 if drift is None else drift, dtype=float), (d,))
    X, single = _points(x, d)
    fn = _fn(f)
    if rate == 0 or t == 0:
        v = fn(X + drift * t)
        return Estimate(float(v[0]), 0.0) if single else Estimate(v, np.zeros_like(v))
    if mode == "series":
        pts, w = compound_poisson_atoms(rate * t, jumps, weights, drift * t)
        V = fn((X[:, None, :] + pts[None, :, :]).reshape(-1, d)).reshape(X.shape[0], -1)
        v0 = V[:, :1]
        vals = v0[:, 0] + (V - v0) @ w
        sup = np.abs(V).max()
        err = np.full(X.shape[0], (1.0 - w.sum()) * sup)
    elif mode == "monte_carlo":
        fam = MeasureFamily.compound_poisson(rate, jumps, weights, drift)
        Y = fam.draw(derive_rng(seed, "cpoisson", float(t)), t, N)
        V = fn((X[:, None, :] + Y[None, :, :]).reshape(-1, d)).reshape(X.shape[0], -1)
        v0 = V[:, :1]
        vals = v0[:, 0] + np.mean(V - v0, axis=1)
        err = np.std(V, axis=1, ddof=1) / np.sqrt(N)
    else:
        raise DomainError(f"unknown mode {mode!r}")
    return Estimate(float(vals[0]), float(err[0])) if single else Estimate(vals, err)


@dataclass
class SdeSpec:
    """dX = F(X) dt + dY with Y the Levy process whose increments ``noise`` samples."""

    F: Callable
    omega: float
    noise: MeasureFamily
    T: float = 1.0
    m: int = 256
    N: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.omega < 0:
            raise DomainError("omega must be nonnegative")
        if self.m < 1 or self.N < 1:
            raise DomainError("need m >= 1 and N >= 1")
        if self.T <= 0:
            raise DomainError("T must be positive")

    @property
    def dim(self):
        return self.noise.dim

    def increments(self, rng, n):
        """Generator over the m noise increments of n paths."""
        h = self.T / self.m
        for _ in range(self.m):
            yield self.noise.draw(rng, h, n)


def _euler_paths(spec, x0, rng, store=False):
    h = spec.T / spec.m
    X = np.tile(np.asarray(x0, dtype=float).reshape(1, spec.dim), (spec.N, 1))
    path, noise = ([X.copy()], []) if store else (None, None)
    for dY in spec.increments(rng, spec.N):
        X = X + h * np.asarray(spec.F(X), dtype=float).reshape(X.shape) + dY
        if store:
            path.append(X.copy())
            noise.append(dY)
    return X, path, noise


def _picard_refine(spec, x0, noise, start, tol=1e-12, max_iter=100):
    """Solve X_j = x + h sum trapezoid(F(X)) + Y_j on the frozen noise by fixed-point iteration."""
    h = spec.T / spec.m
    Y = np.concatenate([np.zeros((1,) + noise[0].shape), np.cumsum(np.stack(noise), axis=0)])
    X = np.stack(start)
    x0 = np.asarray(x0, dtype=float).reshape(1, 1, spec.dim)
    m1, N, d = X.shape
    for _ in range(max_iter):
        FX = np.asarray(spec.F(X.reshape(-1, d)), dtype=float).reshape(X.shape)
        integral = np.concatenate([np.zeros((1, N, d)), np.cumsum(0.5 * h * (FX[1:] + FX[:-1]), axis=0)])
        new = x0 + integral + Y
        change = np.abs(new - X).max()
        X = new
        if change < tol:
            break
    return X[-1]


def sde_monte_carlo_apply(spec, f, x, refine=False):
    """Euler-Maruyama estimate of E f(X_T^x); with ``refine`` also a Picard re-solve on the same noise.

    Returns Estimate(value, stderr); with refine the error field adds the
    Euler/refined discrepancy as a discretization indicator.
    """
    rng = derive_rng(spec.seed, "sde", int(spec.m))
    fn = _fn(f)
    XT, path, noise = _euler_paths(spec, x, rng, store=refine)
    v = fn(XT)
    v0 = v[0]
    mean = v0 + np.mean(v - v0)
    se = float(np.std(v, ddof=1) / np.sqrt(v.size)) if v.size > 1 else np.inf
    if not refine:
        return Estimate(float(mean), se)
    XR = _picard_refine(spec, x, noise, path)
    vr = fn(XR)
    refined = vr[0] + np.mean(vr - vr[0])
    return Estimate(float(refined), se + float(abs(refined - mean)))


@dataclass
class PathwiseReport:
    paths: int
    steps: int
    contraction_violations: int
    contraction_worst: float
    continuity_violations: int
    continuity_worst: float
    continuity_sup_violations: int
    continuity_sup_worst: float

    @property
    def passed(self):
        return self.contraction_violations == 0 and self.continuity_violations == 0


def pathwise_contraction_check(spec, x, u, seeds=(0,), slack_const=1.0):
    """Check two pathwise bounds at every Euler step of coupled paths.

    Contraction: |X^{x+u}_t - X^x_t - u| + |u| <= e^{omega t} |u|.
    Continuity: |X^x_t - x| <= e^{omega t} |t F(x) + Y_t|, and the running-sup
    form with sup_{s <= t} |s F(x) + Y_s| on the right.
    Both are allowed the slack slack_const * (T/m) * e^{omega T} * scale, where
    scale is |u| for the first and 1 + omega (|x| + sup |Y|) for the second.
    """
    d = spec.dim
    x = np.asarray(x, dtype=float).reshape(1, d)
    u = np.asarray(u, dtype=float).reshape(1, d)
    nu = float(np.linalg.norm(u))
    h = spec.T / spec.m
    w = spec.omega
    Fx = np.asarray(spec.F(x), dtype=float).reshape(1, d)
    eps = slack_const * h * np.exp(w * spec.T)
    counts = dict(c=0, s=0, q=0)
    worst = dict(c=-np.inf, s=-np.inf, q=-np.inf)
    for seed in seeds:
        rng = derive_rng(seed, "pathwise", int(spec.m))
        X = np.tile(x, (spec.N, 1))
        Xu = np.tile(x + u, (spec.N, 1))
        Y = np.zeros((spec.N, d))
        run_sup = np.zeros(spec.N)
        ysup = np.zeros(spec.N)
        for j, dY in enumerate(spec.increments(rng, spec.N), start=1):
            t = j * h
            X = X + h * np.asarray(spec.F(X), dtype=float).reshape(X.shape) + dY
            Xu = Xu + h * np.asarray(spec.F(Xu), dtype=float).reshape(Xu.shape) + dY
            Y = Y + dY
            ysup = np.maximum(ysup, np.linalg.norm(Y, axis=1))
            growth = np.exp(w * t)
            lhs_c = np.linalg.norm(Xu - X - u, axis=1) + nu
            ex_c = lhs_c - growth * nu - eps * nu
            drive = np.linalg.norm(t * Fx + Y, axis=1)
            run_sup = np.maximum(run_sup, drive)
            lhs_s = np.linalg.norm(X - x, axis=1)
            scale = eps * (1 + w * (np.linalg.norm(x) + ysup))
            ex_s = lhs_s - growth * drive - scale
            ex_q = lhs_s - growth * run_sup - scale
            for key, ex in (("c", ex_c), ("s", ex_s), ("q", ex_q)):
                counts[key] += int(np.sum(ex > 0))
                worst[key] = max(worst[key], float(ex.max()))
    return PathwiseReport(spec.N * len(seeds), spec.m, counts["c"], worst["c"], counts["s"], worst["s"],
                          counts["q"], worst["q"])


def infinitesimal_consistency_check(mu, psi, S, f, h_ladder, X, F, triplet, cfg=None, tol=None):
    """Three-way comparison of (P_h f - f)/h, (S_h f - f)/h and A_{F,triplet} f on a point set.

    ``S(t, f, X)`` evaluates the reference semigroup at the points X.
    """
    cfg = TransitionConfig(mode="grid") if cfg is None else cfg
    X = np.atleast_2d(np.asarray(X, dtype=float)).reshape(-1, mu.dim)
    fn = _fn(f)
    fx = fn(X)
    gen = np.atleast_1d(drifted_generator_apply(F, triplet, f, X))
    rows = []
    for h in sorted(map(float, h_ladder), reverse=True):
        P = np.array([transition_apply(mu, psi, h, f, x, cfg).value for x in X])
        qP = (P - fx) / h
        qS = (np.asarray(S(h, f, X), dtype=float) - fx) / h
        disc = max(np.abs(qP - qS).max(), np.abs(qP - gen).max(), np.abs(qS - gen).max())
        rows.append({"h": h, "P_vs_S": float(np.abs(qP - qS).max()), "P_vs_A": float(np.abs(qP - gen).max()),
                     "S_vs_A": float(np.abs(qS - gen).max()), "discrepancy": float(disc)})
    discs = [r["discrepancy"] for r in rows]
    shrinking = mann_kendall_z(discs) <= 0 or discs[-1] <= 1e-12
    ok = shrinking and (tol is None or discs[-1] <= tol)
    return ConditionReport("infinitesimal", PASS if ok else FAIL,
                           {"final_discrepancy": discs[-1], "tolerance": tol},
                           [r["h"] for r in rows], "quadrature", rows)
