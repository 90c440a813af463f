"""Families of probability measures h -> mu_h with sampling and truncated moments.

Each family is a ``MeasureFamily`` holding a kind tag and a parameter block.
Families are declared on (0, h_max]; for h > h_max the law mu_{h_max} is used.

Kinds and their parameter blocks:

``dirac_zero``
    all mass at the origin.
``levy_increment``
    law of Y_h for the Levy process Y_t = drift*t + N(0, t*cov) + compound
    Poisson(rate, jump law). ``drift`` is the raw drift of the process, not the
    compensated triplet drift; see ``limit_triplet``.
``scaled_iid``
    law of sqrt(h)*X with X having i.i.d. standardized coordinates
    (rademacher, uniform on [-sqrt 3, sqrt 3], two_point, gaussian).
``stochastic_convolution``
    N(int_0^h e^{sA} ds b, int_0^h e^{sA} sigma sigma^T e^{sA^T} ds), the noise
    part of a linear SDE step.
``three_atom_counterexample``
    ((1-h)/2)(delta_h + delta_{-h}) + h delta_{1/h} for h <= 1.
``custom_sampler``
    empirical laws of pre-drawn samples, one sample set per h level.
"""
import csv
import json
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np
from scipy import special, stats

from . import atomic
from ._rng import derive_rng
from .errors import DomainError, UnsupportedModeError
from .linalg import as_matrix, exp_and_integral, gramian_van_loan, psd_sqrt

KINDS = (
    "levy_increment",
    "scaled_iid",
    "stochastic_convolution",
    "three_atom_counterexample",
    "dirac_zero",
    "custom_sampler",
)

SQRT3 = np.sqrt(3.0)

# standardized base laws: (atoms, weights) or None for continuous laws
BASE_LAWS = {
    "rademacher": (np.array([1.0, -1.0]), np.array([0.5, 0.5])),
    "two_point": (np.array([2.0, -0.5]), np.array([0.2, 0.8])),
    "uniform": None,
    "gaussian": None,
}

POISSON_TAIL = 1e-18


@dataclass
class TruncatedMoments:
    h: float
    M: float
    tail: float
    mean_trunc: np.ndarray
    second_trunc: float
    second_matrix_trunc: np.ndarray
    mode: str = "analytic"
    n: int = 0
    seed: int | None = None
    tail_se: float = 0.0
    mean_se: np.ndarray | None = None
    second_se: float = 0.0

    def __post_init__(self):
        self.mean_trunc = np.atleast_1d(np.asarray(self.mean_trunc, dtype=float))
        self.second_matrix_trunc = np.atleast_2d(np.asarray(self.second_matrix_trunc, dtype=float))
        if self.mean_se is None:
            self.mean_se = np.zeros_like(self.mean_trunc)

    def tail_upper(self, z=3.0):
        return min(1.0, self.tail + z * self.tail_se)

    def second_upper(self, z=3.0):
        return self.second_trunc + z * self.second_se

    def mean_norm_upper(self, z=3.0):
        return float(np.linalg.norm(np.abs(self.mean_trunc) + z * self.mean_se))


def _poisson_cutoff(lam):
    """Smallest J with P(Poisson(lam) > J) < POISSON_TAIL."""
    if lam == 0:
        return 0
    J = int(lam + 10 * np.sqrt(lam) + 10)
    while stats.poisson.sf(J, lam) >= POISSON_TAIL:
        J *= 2
    lo, hi = 0, J
    while lo < hi:
        mid = (lo + hi) // 2
        if stats.poisson.sf(mid, lam) < POISSON_TAIL:
            hi = mid
        else:
            lo = mid + 1
    return lo


def compound_poisson_atoms(lam, jumps, jump_weights, shift):
    """Atoms of shift + sum_{i<N} J_i with N ~ Poisson(lam), J_i i.i.d. atomic.

    The series is cut where the Poisson tail drops below 1e-18, so the total
    mass falls short of 1 by at most that amount.
    """
    jumps = np.atleast_2d(np.asarray(jumps, dtype=float))
    d = jumps.shape[1]
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (d,))
    J = _poisson_cutoff(lam)
    pmf = stats.poisson.pmf(np.arange(J + 1), lam) if lam > 0 else np.array([1.0])
    pts = [np.zeros((1, d))]
    wts = [np.array([pmf[0]])]
    power = (np.zeros((1, d)), np.ones(1))
    base = atomic.merge_atoms(jumps, jump_weights)
    for j in range(1, J + 1):
        power = atomic.convolve_atoms(power, base)
        pts.append(power[0])
        wts.append(pmf[j] * power[1])
    out = atomic.merge_atoms(np.vstack(pts) + shift, np.concatenate(wts))
    return out


@lru_cache(maxsize=None)
def _standard_rule(n, d):
    z, w = np.polynomial.hermite_e.hermegauss(n)
    w = w / np.sqrt(2 * np.pi)
    grids = np.array(list(product(z, repeat=d)))
    weights = np.prod(np.array(list(product(w, repeat=d))), axis=1)
    grids.flags.writeable = False
    weights.flags.writeable = False
    return grids, weights


def gaussian_rule(mean, cov, n):
    """Tensor Gauss-Hermite rule for N(mean, cov) with n nodes per axis."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    d = mean.shape[0]
    L = psd_sqrt(as_matrix(cov, d))
    grids, weights = _standard_rule(int(n), d)
    return mean + grids @ L.T, weights.copy()


def _gaussian_interval_moments(m, s, M):
    """(tail, E[Y; |Y|<=M], E[Y^2; |Y|<=M]) for Y ~ N(m, s^2), s > 0."""
    a = (-M - m) / s
    b = (M - m) / s
    P = special.ndtr(b) - special.ndtr(a)
    tail = special.ndtr(a) + special.ndtr(-b)
    pa = np.exp(-0.5 * a * a) / np.sqrt(2 * np.pi)
    pb = np.exp(-0.5 * b * b) / np.sqrt(2 * np.pi)
    first = m * P + s * (pa - pb)
    second = m * m * P + 2 * m * s * (pa - pb) + s * s * (P + a * pa - b * pb)
    return tail, first, second


@dataclass
class MeasureFamily:
    dim: int
    kind: str
    params: dict = field(default_factory=dict)
    h_max: float = np.inf
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown measure kind {self.kind!r}")
        if not 1 <= int(self.dim) <= 3:
            raise DomainError(f"dimension must be 1, 2 or 3, got {self.dim}")
        self.dim = int(self.dim)

    # constructors

    @classmethod
    def dirac_zero(cls, dim=1):
        return cls(dim, "dirac_zero", {}, name="dirac_zero")

    @classmethod
    def levy_increment(cls, drift=None, cov=None, rate=0.0, jumps=None, jump_weights=None, dim=None):
        if dim is None:
            if drift is not None:
                dim = np.atleast_1d(np.asarray(drift, dtype=float)).size
            elif cov is not None:
                dim = as_matrix(cov).shape[0]
            elif jumps is not None:
                j = np.asarray(jumps, dtype=float)
                dim = j.shape[1] if j.ndim == 2 else 1
            else:
                dim = 1
        drift = np.zeros(dim) if drift is None else np.broadcast_to(np.asarray(drift, dtype=float), (dim,)).copy()
        cov = np.zeros((dim, dim)) if cov is None else as_matrix(cov, dim)
        if not np.allclose(cov, cov.T):
            raise DomainError("covariance must be symmetric")
        if np.linalg.eigvalsh(cov).min() < -1e-12:
            raise DomainError("covariance must be positive semidefinite")
        if rate < 0:
            raise DomainError("jump rate must be nonnegative")
        if jumps is None:
            jumps = np.zeros((0, dim))
            jump_weights = np.zeros(0)
        else:
            jumps = np.asarray(jumps, dtype=float).reshape(-1, dim)
            if jump_weights is None:
                jump_weights = np.full(jumps.shape[0], 1.0 / jumps.shape[0])
            jump_weights = np.asarray(jump_weights, dtype=float)
            if jump_weights.shape != (jumps.shape[0],) or np.any(jump_weights < 0):
                raise DomainError("jump weights must be a nonnegative vector matching the jumps")
            if not np.isclose(jump_weights.sum(), 1.0, atol=1e-12):
                raise DomainError("jump weights must sum to 1")
            if np.any(np.all(jumps == 0, axis=1)):
                raise DomainError("jump law must not charge the origin")
        if rate > 0 and jumps.shape[0] == 0:
            raise DomainError("positive jump rate needs a jump law")
        params = dict(drift=drift, cov=cov, rate=float(rate), jumps=jumps, jump_weights=jump_weights)
        return cls(dim, "levy_increment", params, name="levy_increment")

    @classmethod
    def brownian(cls, dim=1, cov=None, drift=None):
        cov = np.eye(dim) if cov is None else cov
        return cls.levy_increment(drift=drift, cov=cov, dim=dim)

    @classmethod
    def compound_poisson(cls, rate, jumps, jump_weights=None, drift=None, cov=None):
        jumps = np.asarray(jumps, dtype=float)
        dim = 1 if jumps.ndim <= 1 else jumps.shape[1]
        return cls.levy_increment(drift=drift, cov=cov, rate=rate, jumps=jumps.reshape(-1, dim), jump_weights=jump_weights, dim=dim)

    @classmethod
    def scaled_iid(cls, base="rademacher", dim=1):
        if base not in BASE_LAWS:
            raise DomainError(f"unknown base law {base!r}; choose from {sorted(BASE_LAWS)}")
        return cls(dim, "scaled_iid", {"base": base}, name=f"scaled_iid[{base}]")

    @classmethod
    def stochastic_convolution(cls, A, b=None, sigma=None):
        A = as_matrix(A)
        d = A.shape[0]
        b = np.zeros(d) if b is None else np.broadcast_to(np.asarray(b, dtype=float), (d,)).copy()
        sigma = np.eye(d) if sigma is None else np.atleast_2d(np.asarray(sigma, dtype=float))
        if sigma.shape[0] != d:
            raise DomainError("sigma must have as many rows as A")
        return cls(d, "stochastic_convolution", {"A": A, "b": b, "sigma": sigma}, name="stochastic_convolution")

    @classmethod
    def three_atom_counterexample(cls):
        return cls(1, "three_atom_counterexample", {}, h_max=1.0, name="three_atom_counterexample")

    @classmethod
    def custom_sampler(cls, samples):
        """``samples`` maps each h level to an (n, d) array of pre-drawn values."""
        if not samples:
            raise DomainError("custom sampler needs at least one h level")
        levels = {}
        dim = None
        for h, ys in samples.items():
            ys = np.asarray(ys, dtype=float)
            ys = ys[:, None] if ys.ndim == 1 else ys
            if dim is None:
                dim = ys.shape[1]
            elif ys.shape[1] != dim:
                raise DomainError("all sample sets must share one dimension")
            if ys.shape[0] == 0:
                raise DomainError(f"empty sample set at h={h}")
            levels[float(h)] = ys
        return cls(dim, "custom_sampler", {"samples": levels}, name="custom_sampler")

    @classmethod
    def from_csv(cls, path):
        """Read columns h, y_1..y_d into a custom_sampler family."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not header or header[0].strip() != "h" or len(header) < 2:
                raise DomainError(f"{path}: expected header 'h,y_1,...,y_d'")
            rows = np.array([[float(v) for v in r] for r in reader if r], dtype=float)
        samples = {}
        for h in np.unique(rows[:, 0]):
            samples[float(h)] = rows[rows[:, 0] == h, 1:]
        return cls.custom_sampler(samples)

    @classmethod
    def from_config(cls, cfg):
        """Build a family from a parsed JSON block ``{"kind": ..., **params}``."""
        if isinstance(cfg, str):
            cfg = json.loads(cfg)
        cfg = dict(cfg)
        kind = cfg.pop("kind", None)
        h_max = cfg.pop("h_max", None)
        if kind == "dirac_zero":
            fam = cls.dirac_zero(cfg.get("dim", 1))
        elif kind == "brownian":
            fam = cls.brownian(cfg.get("dim", 1), cfg.get("cov"), cfg.get("drift"))
        elif kind == "levy_increment":
            fam = cls.levy_increment(cfg.get("drift"), cfg.get("cov"), cfg.get("rate", 0.0),
                                     cfg.get("jumps"), cfg.get("jump_weights"), cfg.get("dim"))
        elif kind == "compound_poisson":
            fam = cls.compound_poisson(cfg["rate"], cfg["jumps"], cfg.get("jump_weights"),
                                       cfg.get("drift"), cfg.get("cov"))
        elif kind == "scaled_iid":
            fam = cls.scaled_iid(cfg.get("base", "rademacher"), cfg.get("dim", 1))
        elif kind == "stochastic_convolution":
            fam = cls.stochastic_convolution(cfg["A"], cfg.get("b"), cfg.get("sigma"))
        elif kind == "three_atom_counterexample":
            fam = cls.three_atom_counterexample()
        elif kind == "custom_sampler":
            fam = cls.from_csv(cfg["csv"])
        else:
            raise DomainError(f"unknown measure kind {kind!r}")
        if h_max is not None:
            fam.h_max = float(h_max)
        return fam

    # basic helpers

    def _check_h(self, h):
        if not np.isfinite(h) or h <= 0:
            raise DomainError(f"h must be positive, got {h}")
        return min(float(h), self.h_max)

    def _custom_level(self, h):
        levels = self.params["samples"]
        for key in levels:
            if np.isclose(key, h, rtol=1e-12, atol=0):
                return levels[key]
        raise DomainError(f"custom sampler has no samples at h={h}; levels {sorted(levels)}")

    @property
    def analytic_moments_available(self):
        k = self.kind
        if k in ("dirac_zero", "three_atom_counterexample", "custom_sampler"):
            return True
        if k == "scaled_iid":
            base = self.params["base"]
            return BASE_LAWS[base] is not None or self.dim == 1 or base == "gaussian"
        if k == "levy_increment":
            if not np.any(self.params["cov"]):
                return True
            if self.dim == 1:
                return True
            return self.params["rate"] == 0 and not np.any(self.params["drift"]) and self._isotropic(self.params["cov"])
        if k == "stochastic_convolution":
            return self.dim == 1
        return False

    @staticmethod
    def _isotropic(C):
        return np.allclose(C, C[0, 0] * np.eye(C.shape[0]), rtol=1e-14, atol=0)

    def is_atomic(self, h=None):
        k = self.kind
        if k in ("dirac_zero", "three_atom_counterexample", "custom_sampler"):
            return True
        if k == "scaled_iid":
            return BASE_LAWS[self.params["base"]] is not None
        if k == "levy_increment":
            return not np.any(self.params["cov"])
        return False

    # exact representations

    def atoms(self, h):
        """(points, weights) of mu_h for atomic families."""
        h = self._check_h(h)
        d = self.dim
        k = self.kind
        if k == "dirac_zero":
            return np.zeros((1, d)), np.ones(1)
        if k == "three_atom_counterexample":
            pts = np.array([[h], [-h], [1.0 / h]])
            w = np.array([(1 - h) / 2, (1 - h) / 2, h])
            return atomic.merge_atoms(pts, w)
        if k == "custom_sampler":
            ys = self._custom_level(h)
            return atomic.merge_atoms(ys, np.full(ys.shape[0], 1.0 / ys.shape[0]))
        if k == "scaled_iid":
            law = BASE_LAWS[self.params["base"]]
            if law is None:
                raise UnsupportedModeError(f"base law {self.params['base']} is not atomic")
            vals, probs = law
            pts = np.array(list(product(vals, repeat=d))) * np.sqrt(h)
            w = np.prod(np.array(list(product(probs, repeat=d))), axis=1)
            return atomic.merge_atoms(pts, w)
        if k == "levy_increment":
            p = self.params
            if np.any(p["cov"]):
                raise UnsupportedModeError("levy increment with a Gaussian part is not atomic")
            if p["rate"] == 0:
                return p["drift"][None, :] * h, np.ones(1)
            return compound_poisson_atoms(p["rate"] * h, p["jumps"], p["jump_weights"], p["drift"] * h)
        raise UnsupportedModeError(f"{k} has no atomic representation")

    def _gaussian_components(self, h):
        """List of (weight, mean, cov) whose mixture is mu_h (Gaussian-mixture kinds)."""
        k = self.kind
        d = self.dim
        if k == "levy_increment":
            p = self.params
            cov = p["cov"] * h
            if p["rate"] == 0:
                return [(1.0, p["drift"] * h, cov)]
            pts, w = compound_poisson_atoms(p["rate"] * h, p["jumps"], p["jump_weights"], p["drift"] * h)
            return [(wi, pi, cov) for pi, wi in zip(pts, w)]
        if k == "stochastic_convolution":
            p = self.params
            _, G = exp_and_integral(p["A"], h)
            return [(1.0, G @ p["b"], gramian_van_loan(p["A"], p["sigma"], h))]
        if k == "scaled_iid" and self.params["base"] == "gaussian":
            return [(1.0, np.zeros(d), h * np.eye(d))]
        raise UnsupportedModeError(f"{k} is not a Gaussian mixture")

    def quadrature_rule(self, h, n=64):
        """Nodes and weights integrating smooth functions against mu_h.

        Atomic families return their atoms (exact). Gaussian mixtures use a
        tensor Gauss-Hermite rule per component, uniform laws Gauss-Legendre.
        """
        h = self._check_h(h)
        if self.is_atomic():
            return self.atoms(h)
        if self.kind == "scaled_iid" and self.params["base"] == "uniform":
            z, w = np.polynomial.legendre.leggauss(n)
            z = z * SQRT3 * np.sqrt(h)
            w = w / 2
            pts = np.array(list(product(z, repeat=self.dim)))
            wt = np.prod(np.array(list(product(w, repeat=self.dim))), axis=1)
            return pts, wt
        comps = self._gaussian_components(h)
        pts, wts = [], []
        for wc, m, C in comps:
            p, w = gaussian_rule(m, C, n)
            pts.append(p)
            wts.append(wc * w)
        return np.vstack(pts), np.concatenate(wts)

    # sampling

    def draw(self, rng, h, n):
        """n i.i.d. draws from mu_h using the given generator; returns (n, d)."""
        h = self._check_h(h)
        n = int(n)
        d = self.dim
        k = self.kind
        if k == "dirac_zero":
            return np.zeros((n, d))
        if k == "scaled_iid":
            base = self.params["base"]
            if base == "rademacher":
                x = rng.integers(0, 2, size=(n, d)) * 2.0 - 1.0
            elif base == "two_point":
                x = np.where(rng.random((n, d)) < 0.2, 2.0, -0.5)
            elif base == "uniform":
                x = rng.uniform(-SQRT3, SQRT3, size=(n, d))
            else:
                x = rng.standard_normal((n, d))
            return np.sqrt(h) * x
        if k == "three_atom_counterexample":
            u = rng.random(n)
            y = np.where(u < h, 1.0 / h, np.where(u < h + (1 - h) / 2, h, -h))
            return y[:, None]
        if k == "custom_sampler":
            ys = self._custom_level(h)
            return ys[rng.integers(0, ys.shape[0], size=n)]
        if k == "stochastic_convolution":
            (_, m, C), = self._gaussian_components(h)
            return m + rng.standard_normal((n, d)) @ psd_sqrt(C).T
        if k == "levy_increment":
            p = self.params
            out = np.tile(p["drift"] * h, (n, 1))
            if np.any(p["cov"]):
                out += rng.standard_normal((n, d)) @ psd_sqrt(p["cov"] * h).T
            if p["rate"] > 0:
                counts = rng.poisson(p["rate"] * h, size=n)
                total = int(counts.sum())
                if total:
                    idx = rng.choice(p["jumps"].shape[0], size=total, p=p["jump_weights"])
                    owner = np.repeat(np.arange(n), counts)
                    for j in range(d):
                        out[:, j] += np.bincount(owner, weights=p["jumps"][idx, j], minlength=n)
            return out
        raise UnsupportedModeError(k)

    def sample(self, h, n, seed=0):
        """n i.i.d. draws from mu_h; a deterministic function of (h, n, seed)."""
        if n < 1:
            raise DomainError("n must be >= 1")
        self._check_h(h)
        return self.draw(derive_rng(seed, "sample", float(h), 0), h, n)

    def convolution_power(self, h, k, n, seed=0):
        """n draws from mu_h^{*k}; stream i of the sum is the stream ``sample`` uses for i = 0."""
        if k < 1:
            raise DomainError("k must be >= 1")
        if n < 1:
            raise DomainError("n must be >= 1")
        self._check_h(h)
        out = np.zeros((int(n), self.dim))
        for i in range(int(k)):
            out += self.draw(derive_rng(seed, "sample", float(h), i), h, n)
        return out

    # truncated moments

    def truncated_moments(self, h, M, mode="analytic", n=0, seed=0):
        """Tail mass and truncated first/second moments of mu_h on the ball |y| <= M."""
        h = self._check_h(h)
        if not M > 0:
            raise DomainError(f"M must be positive, got {M}")
        if mode == "monte_carlo":
            return self._moments_mc(h, M, n, seed)
        if mode != "analytic":
            raise DomainError(f"unknown moment mode {mode!r}")
        d = self.dim
        if self.is_atomic():
            pts, w = self.atoms(h)
            r = np.linalg.norm(pts, axis=1)
            inside = r <= M
            pin, win = pts[inside], w[inside]
            S = (pin * win[:, None]).T @ pin
            # defect of the truncated Poisson series is counted as tail mass
            tail = max(0.0, 1.0 - float(win.sum()))
            return TruncatedMoments(h, M, tail, win @ pin if pin.size else np.zeros(d),
                                    float(np.trace(S)), S)
        if self.kind == "scaled_iid" and self.params["base"] == "uniform":
            if d != 1:
                raise UnsupportedModeError("analytic moments of the uniform base need d = 1")
            c = SQRT3 * np.sqrt(h)
            if M >= c:
                tail, second = 0.0, c * c / 3
            else:
                tail, second = 1.0 - M / c, M ** 3 / (3 * c)
            return TruncatedMoments(h, M, tail, np.zeros(1), second, np.array([[second]]))
        comps = self._gaussian_components(h)
        if d == 1:
            tail = first = second = 0.0
            for wc, m, C in comps:
                s = float(np.sqrt(C[0, 0]))
                m = float(m[0])
                if s == 0:
                    t_, f_, s_ = (0.0, m, m * m) if abs(m) <= M else (1.0, 0.0, 0.0)
                else:
                    t_, f_, s_ = _gaussian_interval_moments(m, s, M)
                tail += wc * t_
                first += wc * f_
                second += wc * s_
            tail += max(0.0, 1.0 - sum(c[0] for c in comps))
            return TruncatedMoments(h, M, float(tail), np.array([first]), float(second), np.array([[second]]))
        if len(comps) != 1:
            raise UnsupportedModeError("analytic moments in d > 1 need a centered isotropic Gaussian")
        _, m, C = comps[0]
        if np.any(m) or not self._isotropic(C):
            raise UnsupportedModeError("analytic moments in d > 1 need a centered isotropic Gaussian")
        s2 = C[0, 0]
        x = M * M / s2
        tail = float(stats.chi2.sf(x, d))
        second = float(s2 * d * stats.chi2.cdf(x, d + 2))
        return TruncatedMoments(h, M, tail, np.zeros(d), second, np.eye(d) * second / d)

    def _moments_mc(self, h, M, n, seed):
        if n is None or n < 1:
            raise DomainError("monte_carlo moments need n >= 1")
        d = self.dim
        y = self.draw(derive_rng(seed, "moments", float(h)), h, n)
        r2 = np.einsum("ij,ij->i", y, y)
        inside = r2 <= M * M
        yin = y * inside[:, None]
        sq = r2 * inside
        out = np.atleast_1d(inside.astype(float))
        root_n = np.sqrt(n)
        se = (lambda v: float(np.std(v, ddof=1) / root_n)) if n > 1 else (lambda v: float("inf"))
        mean_se = np.array([se(yin[:, j]) for j in range(d)]) if n > 1 else np.full(d, np.inf)
        return TruncatedMoments(
            h, M, float(1.0 - out.mean()), yin.mean(axis=0), float(sq.mean()), yin.T @ y / n,
            mode="monte_carlo", n=int(n), seed=seed, tail_se=se(out), mean_se=mean_se, second_se=se(sq),
        )

    def tail(self, h, M):
        return self.truncated_moments(h, M).tail

    def integrate(self, h, g, n=64):
        """Integral of g(y) against mu_h by the quadrature rule (exact on atoms)."""
        pts, w = self.quadrature_rule(h, n)
        return float(np.dot(w, g(pts)))

    # limit objects

    def limit_triplet(self):
        """Known Levy triplet (b, sigma, nu, c) of the limit of mu_h^{*(t/h)}."""
        from .levy.triplet import LevyMeasureRepr, LevyTriplet

        d = self.dim
        k = self.kind
        if k == "dirac_zero":
            return LevyTriplet.zero(d)
        if k == "three_atom_counterexample":
            return LevyTriplet(np.zeros(1), np.zeros((1, 1)), LevyMeasureRepr.none(1), killing_c=1.0)
        if k == "scaled_iid":
            return LevyTriplet(np.zeros(d), np.eye(d), LevyMeasureRepr.none(d))
        if k == "stochastic_convolution":
            p = self.params
            return LevyTriplet(p["b"].copy(), p["sigma"] @ p["sigma"].T, LevyMeasureRepr.none(d))
        if k == "levy_increment":
            p = self.params
            if p["rate"] == 0:
                return LevyTriplet(p["drift"].copy(), p["cov"].copy(), LevyMeasureRepr.none(d))
            nu = LevyMeasureRepr.finite_activity(p["jumps"], p["rate"] * p["jump_weights"])
            small = np.linalg.norm(p["jumps"], axis=1) <= 1
            b = p["drift"] + (p["rate"] * p["jump_weights"][small]) @ p["jumps"][small]
            return LevyTriplet(b, p["cov"].copy(), nu)
        raise UnsupportedModeError(f"{k} has no declared limit triplet")

    def describe(self):
        def enc(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, dict):
                return {str(a): enc(b) for a, b in v.items()}
            return v

        return {"kind": self.kind, "dim": self.dim, "h_max": None if np.isinf(self.h_max) else self.h_max,
                "params": enc(self.params)}
