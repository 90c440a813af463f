"""Transition operators P_h f(x) = int f(psi_h(x) + y) mu_h(dy) and their iterates.

Path order. A particle path X_{j+1} = psi_h(X_j) + Y_j started at x has
E f(X_k) = P_h^k f(x): for k = 1 this is the definition, and conditioning on
X_1 gives E f(X_k) = E[(P_h^{k-1} f)(X_1)] = P_h (P_h^{k-1} f)(x).

Two evaluation modes:

``particle``  Monte Carlo over independent paths, one seeded stream per grid point.
``grid``      deterministic quadrature against mu_h (exact sums for atomic laws)
              alternating with interpolation on the grid, d = 1.
"""
import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline, RegularGridInterpolator

from . import atomic
from ._rng import derive_rng
from .errors import DomainError, UnsupportedModeError

INTERPOLATIONS = ("multilinear", "cubic")
EXACT_PAIR_LIMIT = 4_000_000
POLICIES = ("constant_nearest", "declared_analytic")


class Estimate(NamedTuple):
    value: float
    error: float


@dataclass
class GridSpec:
    box: np.ndarray
    resolution: tuple
    interpolation: str = "multilinear"

    def __post_init__(self):
        box = np.atleast_2d(np.asarray(self.box, dtype=float))
        if box.shape[1] != 2:
            raise DomainError("box must list [lo, hi] per axis")
        if np.any(box[:, 1] <= box[:, 0]):
            raise DomainError("box must be nondegenerate")
        res = tuple(int(r) for r in np.atleast_1d(self.resolution))
        if len(res) == 1 and box.shape[0] > 1:
            res = res * box.shape[0]
        if len(res) != box.shape[0] or min(res) < 2:
            raise DomainError("resolution needs one count >= 2 per axis")
        if self.interpolation not in INTERPOLATIONS:
            raise DomainError(f"interpolation must be one of {INTERPOLATIONS}")
        self.box = box
        self.resolution = res

    @property
    def dim(self):
        return self.box.shape[0]

    def axes(self):
        return [np.linspace(lo, hi, n) for (lo, hi), n in zip(self.box, self.resolution)]

    def points(self):
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def spacing(self):
        return (self.box[:, 1] - self.box[:, 0]) / (np.array(self.resolution) - 1)


@dataclass
class GridFunction:
    spec: GridSpec
    values: np.ndarray
    sup_bound: float
    analytic: Callable | None = None
    stderr: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.spec.resolution)
        if not np.isfinite(self.sup_bound):
            raise DomainError("sup bound must be finite")
        if np.abs(self.values).max() > self.sup_bound:
            raise DomainError(f"values exceed the declared sup bound {self.sup_bound}")

    @classmethod
    def from_function(cls, f, spec, sup_bound=None):
        """Tabulate f on the grid; f is a TestFunction or a batch callable."""
        fn = f.value if hasattr(f, "value") else f
        vals = np.asarray(fn(spec.points()), dtype=float)
        if sup_bound is None:
            declared = getattr(f, "sup_norm", np.inf)
            sup_bound = declared if np.isfinite(declared) else float(np.abs(vals).max())
        return cls(spec, vals, float(sup_bound), analytic=fn)

    @property
    def dim(self):
        return self.spec.dim

    @property
    def box(self):
        return self.spec.box

    def points(self):
        return self.spec.points()

    def _interp(self, X):
        axes = self.spec.axes()
        if self.dim == 1:
            if self.spec.interpolation == "multilinear":
                return np.interp(X[:, 0], axes[0], self.values)
            return CubicSpline(axes[0], self.values)(X[:, 0])
        method = "linear" if self.spec.interpolation == "multilinear" else "cubic"
        return RegularGridInterpolator(axes, self.values, method=method)(X)

    def evaluate(self, X, policy="constant_nearest"):
        """Values at arbitrary points; outside the box the extension policy applies."""
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        if policy not in POLICIES:
            raise DomainError(f"unknown extension policy {policy!r}")
        if policy == "declared_analytic" and self.analytic is not None:
            return np.asarray(self.analytic(X), dtype=float)
        Xc = np.clip(X, self.box[:, 0], self.box[:, 1])
        if self.analytic is not None:
            return np.asarray(self.analytic(Xc), dtype=float)
        out = self._interp(Xc)
        if self.spec.interpolation == "cubic":
            out = np.clip(out, -self.sup_bound, self.sup_bound)
        return out

    def __call__(self, X):
        return self.evaluate(X)

    # serialization: CSV of (x_1..x_d, value) plus a JSON sidecar

    def to_csv(self, path):
        path = str(path)
        pts = self.points()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x_{i + 1}" for i in range(self.dim)] + ["value"])
            for p, v in zip(pts, self.values.ravel()):
                w.writerow([repr(float(c)) for c in p] + [repr(float(v))])
        side = {"box": self.box.tolist(), "resolution": list(self.spec.resolution),
                "sup_bound": self.sup_bound, "interpolation": self.spec.interpolation}
        with open(_sidecar(path), "w") as fh:
            json.dump(side, fh, indent=2)

    @classmethod
    def from_csv(cls, path):
        path = str(path)
        with open(_sidecar(path)) as fh:
            side = json.load(fh)
        spec = GridSpec(side["box"], side["resolution"], side.get("interpolation", "multilinear"))
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        vals = np.array([float(r[-1]) for r in rows])
        return cls(spec, vals, float(side["sup_bound"]))


def _sidecar(path):
    return path[:-4] + ".json" if path.endswith(".csv") else path + ".json"


@dataclass
class TransitionConfig:
    mode: str = "particle"
    n_paths: int = 10_000
    seed: int = 0
    quad_nodes: int = 64
    extension_policy: str = "constant_nearest"
    shared_noise: bool = False
    safety_box: np.ndarray | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.mode not in ("particle", "grid"):
            raise DomainError(f"mode must be 'particle' or 'grid', got {self.mode!r}")
        if self.mode == "particle" and self.n_paths < 1:
            raise DomainError("particle mode needs n_paths >= 1")
        if self.extension_policy not in POLICIES:
            raise DomainError(f"unknown extension policy {self.extension_policy!r}")


def _evaluator(f, dim, policy):
    if isinstance(f, GridFunction):
        return (lambda X: f.evaluate(X, policy)), f.sup_bound
    if hasattr(f, "value"):
        return f.value, getattr(f, "sup_norm", np.inf)
    return (lambda X: np.asarray(f(X), dtype=float).reshape(-1)), np.inf


def _shifted_mean(v, w=None):
    """Mean written as v0 + mean(v - v0), so constants come out exactly."""
    v0 = v[0]
    if w is None:
        return v0 + np.mean(v - v0)
    return v0 + np.dot(w, v - v0)


def transition_apply(mu, psi, h, f, x, cfg=None):
    """(P_h f)(x) with an error estimate (standard error or quadrature-halving difference)."""
    cfg = TransitionConfig() if cfg is None else cfg
    if h <= 0:
        raise DomainError("h must be positive")
    x = np.asarray(x, dtype=float).reshape(mu.dim)
    fn, _ = _evaluator(f, mu.dim, cfg.extension_policy)
    px = psi.apply(h, x).reshape(mu.dim)
    if cfg.mode == "particle":
        rng = derive_rng(cfg.seed, "transition", float(h))
        Y = mu.draw(rng, h, cfg.n_paths)
        v = fn(px + Y)
        se = float(np.std(v, ddof=1) / np.sqrt(v.size)) if v.size > 1 else np.inf
        return Estimate(float(_shifted_mean(v)), se)
    if not mu.is_atomic() and mu.dim != 1:
        raise UnsupportedModeError("grid convolution needs an atomic law or d = 1")
    pts, w = mu.quadrature_rule(h, cfg.quad_nodes)
    val = float(_shifted_mean(fn(px + pts), w))
    if mu.is_atomic():
        return Estimate(val, 0.0)
    pts2, w2 = mu.quadrature_rule(h, max(2, cfg.quad_nodes // 2))
    return Estimate(val, abs(val - float(_shifted_mean(fn(px + pts2), w2))))


def _simulate_points(mu, psi, h, k, fn, starts, indices, cfg, safety):
    """Endpoint values f(X_k) for paths started at each point; returns (means, stderrs, excursions)."""
    P = starts.shape[0]
    N = cfg.n_paths
    d = mu.dim
    if cfg.shared_noise:
        rngs = [derive_rng(cfg.seed, "paths", float(h), int(k))]
    else:
        rngs = [derive_rng(cfg.seed, "paths", float(h), int(k), int(i)) for i in indices]
    X = np.repeat(starts[:, None, :], N, axis=1)
    excursions = 0
    for _ in range(k):
        X = psi.apply(h, X.reshape(-1, d)).reshape(P, N, d)
        if cfg.shared_noise:
            X += mu.draw(rngs[0], h, N)[None, :, :]
        else:
            X += np.stack([mu.draw(r, h, N) for r in rngs])
        if safety is not None:
            outside = np.any((X < safety[:, 0]) | (X > safety[:, 1]), axis=2)
            excursions += int(outside.sum())
    V = fn(X.reshape(-1, d)).reshape(P, N)
    v0 = V[:, :1]
    means = (v0 + np.mean(V - v0, axis=1, keepdims=True))[:, 0]
    se = np.std(V, axis=1, ddof=1) / np.sqrt(N) if N > 1 else np.full(P, np.inf)
    return means, se, excursions


def chernoff_iterate(mu, psi, h, k, f, grid, cfg=None):
    """P_h^k f on the grid points of ``grid``; returns a GridFunction with diagnostics in ``meta``."""
    cfg = TransitionConfig() if cfg is None else cfg
    if k < 1:
        raise DomainError("k must be >= 1")
    if h <= 0:
        raise DomainError("h must be positive")
    spec = grid.spec if isinstance(grid, GridFunction) else grid
    if spec.dim != mu.dim:
        raise DomainError("grid and measure dimensions differ")
    fn, sup = _evaluator(f, mu.dim, cfg.extension_policy)
    pts = spec.points()
    if not np.isfinite(sup):
        sup = float(np.abs(fn(pts)).max())
    safety = None if cfg.safety_box is None else np.atleast_2d(np.asarray(cfg.safety_box, dtype=float))
    meta = {"mode": cfg.mode, "h": float(h), "k": int(k), "excursions": 0}

    if cfg.mode == "particle":
        P = pts.shape[0]
        jobs = max(1, int(cfg.jobs))
        chunks = np.array_split(np.arange(P), min(jobs, P)) if not cfg.shared_noise else [np.arange(P)]

        def work(idx):
            return _simulate_points(mu, psi, h, k, fn, pts[idx], idx, cfg, safety)

        if len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as ex:
                parts = list(ex.map(work, chunks))
        else:
            parts = [work(chunks[0])]
        vals = np.concatenate([p[0] for p in parts])
        se = np.concatenate([p[1] for p in parts])
        meta["excursions"] = sum(p[2] for p in parts)
        vals = np.clip(vals, -sup, sup)
        return GridFunction(spec, vals, sup, stderr=se, meta=meta)

    # grid mode: exact convolution powers unless a single convolution gets too large (then iterate, d = 1)
    atoms = None
    if psi.kind == "identity" and mu.is_atomic():
        try:
            atoms = atomic.convolution_power_atoms(mu.atoms(h), int(k), None if mu.dim > 1 else EXACT_PAIR_LIMIT)
        except UnsupportedModeError:
            atoms = None
    if atoms is not None:
        Y, w = atoms
        V = fn((pts[:, None, :] + Y[None, :, :]).reshape(-1, mu.dim)).reshape(pts.shape[0], -1)
        v0 = V[:, :1]
        vals = (v0[:, 0] + (V - v0) @ w)
        meta["atoms"] = int(w.size)
        vals = np.clip(vals, -sup, sup)
        return GridFunction(spec, vals, sup, stderr=np.zeros(pts.shape[0]), meta=meta)
    if mu.dim != 1:
        raise UnsupportedModeError("grid convolution iterates are implemented for d = 1")
    Y, w = mu.quadrature_rule(h, cfg.quad_nodes)
    exact_rule = mu.is_atomic()
    current = fn
    quad_err = 0.0
    vals = None
    for j in range(int(k)):
        base = psi.apply(h, pts)
        arg = (base[:, None, :] + Y[None, :, :]).reshape(-1, 1)
        if safety is not None:
            meta["excursions"] += int(np.sum((arg < safety[:, 0]) | (arg > safety[:, 1])))
        V = current(arg).reshape(pts.shape[0], -1)
        v0 = V[:, :1]
        new = np.clip(v0[:, 0] + (V - v0) @ w, -sup, sup)
        if j == 0 and not exact_rule:
            Y2, w2 = mu.quadrature_rule(h, max(2, cfg.quad_nodes // 2))
            V2 = current((base[:, None, :] + Y2[None, :, :]).reshape(-1, 1)).reshape(pts.shape[0], -1)
            quad_err = float(np.abs(V2[:, 0] + (V2 - V2[:, :1]) @ w2 - new).max())
        vals = new
        g = GridFunction(spec, vals, sup)
        current = (lambda G: (lambda X: G.evaluate(X, "constant_nearest")))(g)
    meta["quadrature_error"] = quad_err * int(k)
    return GridFunction(spec, vals, sup, stderr=np.full(pts.shape[0], quad_err * int(k)), meta=meta)


@dataclass
class MixedError:
    radii: list
    errors: list
    sup_bound: float

    def to_dict(self):
        return {"radii": list(self.radii), "errors": list(self.errors), "sup_bound": self.sup_bound}


def _resample(g, spec):
    if isinstance(g, GridFunction) and g.spec.resolution == spec.resolution and np.array_equal(g.box, spec.box):
        return g.values.ravel()
    if isinstance(g, GridFunction):
        return g.evaluate(spec.points())
    fn = g.value if hasattr(g, "value") else g
    return np.asarray(fn(spec.points()), dtype=float)


def mixed_topology_error(f, g, radii):
    """Per-radius max |f - g| over grid points with |x| <= r, plus the joint sup bound."""
    spec = f.spec
    pts = spec.points()
    diff = np.abs(f.values.ravel() - _resample(g, spec))
    norms = np.linalg.norm(pts, axis=1)
    errs = []
    for r in radii:
        mask = norms <= r
        if not mask.any():
            raise DomainError(f"no grid point lies in the ball of radius {r}")
        errs.append(float(diff[mask].max()))
    gsup = g.sup_bound if isinstance(g, GridFunction) else getattr(g, "sup_norm", float(np.abs(_resample(g, spec)).max()))
    return MixedError(list(radii), errs, float(max(f.sup_bound, gsup)))


def lp_grid_error(f, g, p):
    """Trapezoid-rule L_p distance on a 1-d grid; p = inf gives the max."""
    if f.dim != 1:
        raise UnsupportedModeError("L_p grid errors are implemented for d = 1")
    e = np.abs(f.values.ravel() - _resample(g, f.spec))
    if p in (np.inf, "inf"):
        return float(e.max())
    x = f.spec.axes()[0]
    w = np.full(x.size, x[1] - x[0])
    w[0] = w[-1] = 0.5 * (x[1] - x[0])
    p = float(p)
    return float(np.dot(w, e ** p) ** (1 / p))
