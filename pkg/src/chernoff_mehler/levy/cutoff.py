"""Smooth radial cutoffs chi with kappa(|x|)|grad chi| + |hess chi| <= eps.

Construction: a ramp gamma that is 1 up to a = R + W, decreases with slope
-eps'/kappa until it reaches 0 at M, and is then mollified by a bump theta on
[0, W] with int |theta'| <= 1:

    chi0(s)   = int gamma(s + t) theta(t) dt
    chi0'(s)  = int gamma'(s + t) theta(t) dt
    chi0''(s) = -int gamma'(s + t) theta'(t) dt

For kappa >= 1 this gives kappa |chi0'| <= eps' and |chi0''| <= eps'. The
radial Hessian has eigenvalues chi0'' and chi0'/r, and r > R on the support of
chi0', so the sum of both terms stays below eps' (1 + max(1, 1/R)). Hence
eps' = eps / (1 + max(1, 1/R)).

Profiles: ``constant`` (kappa = 1), ``linear`` (kappa = 1 + s) and ``power``
(kappa = (1 + s)^p). For p > 1 the integral of 1/kappa is finite and the
construction only works when that tail mass is at least 1/eps'.
"""
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from ..errors import DomainError

_BUMP_MASS = quad(lambda u: np.exp(-1.0 / (1.0 - u * u)), -1.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=200)[0]
# int |theta'| = 2 max theta = 2 e^{-1} / (_BUMP_MASS W / 2) <= 1 needs W >= this value
MIN_WIDTH = 4 * np.exp(-1.0) / _BUMP_MASS

_GL_Z, _GL_W = np.polynomial.legendre.leggauss(64)


def mollifier(t, W):
    """Bump density on [0, W] and its derivative."""
    t = np.asarray(t, dtype=float)
    u = 2 * t / W - 1
    inside = np.abs(u) < 1
    one_m = np.where(inside, 1 - u * u, 1.0)
    th = np.where(inside, np.exp(-1.0 / one_m), 0.0) / (_BUMP_MASS * W / 2)
    dth = np.where(inside, th * (-2 * u / one_m ** 2) * (2 / W), 0.0)
    return th, dth


@dataclass
class CutoffFunction:
    R: float
    eps: float
    profile: str = "linear"
    p: float = 1.0
    dim: int = 1
    width: float = 0.0
    eps_internal: float = 0.0
    M: float = 0.0

    # kappa and the ramp

    def kappa(self, s):
        s = np.asarray(s, dtype=float)
        if self.profile == "constant":
            return np.ones_like(s)
        if self.profile == "linear":
            return 1 + s
        return (1 + s) ** self.p

    def _mass(self, lo, hi):
        """int_lo^hi 1/kappa."""
        if self.profile == "constant":
            return hi - lo
        if self.profile == "linear":
            return np.log1p(hi) - np.log1p(lo)
        q = 1 - self.p
        if q == 0:
            return np.log1p(hi) - np.log1p(lo)
        return ((1 + hi) ** q - (1 + lo) ** q) / q

    @property
    def a(self):
        return self.R + self.width

    def gamma(self, u):
        u = np.asarray(u, dtype=float)
        mid = 1 - self.eps_internal * self._mass(self.a, np.clip(u, self.a, self.M))
        return np.where(u <= self.a, 1.0, np.where(u >= self.M, 0.0, np.clip(mid, 0.0, 1.0)))

    def dgamma(self, u):
        u = np.asarray(u, dtype=float)
        inside = (u > self.a) & (u < self.M)
        return np.where(inside, -self.eps_internal / self.kappa(np.where(inside, u, 0.0)), 0.0)

    # profile and derivatives by piecewise Gauss-Legendre in t, split at the kinks of gamma

    def _integrate(self, s, integrand):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        W = self.width
        cuts = np.stack([np.zeros_like(s), self.a - s, self.M - s, np.full_like(s, W)], axis=1)
        cuts = np.sort(np.clip(cuts, 0.0, W), axis=1)
        total = np.zeros_like(s)
        for j in range(3):
            lo, hi = cuts[:, j:j + 1], cuts[:, j + 1:j + 2]
            t = lo + (hi - lo) * (_GL_Z[None, :] + 1) / 2
            total += ((hi - lo)[:, 0] / 2) * (integrand(s[:, None], t) @ _GL_W)
        return total

    def chi0(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        val = self._integrate(s, lambda S, t: self.gamma(S + t) * mollifier(t, self.width)[0])
        val = np.where(s <= self.R, 1.0, np.where(s >= self.M, 0.0, val))
        return np.clip(val, 0.0, 1.0)

    def d1(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        val = self._integrate(s, lambda S, t: self.dgamma(S + t) * mollifier(t, self.width)[0])
        return np.where((s <= self.R) | (s >= self.M), 0.0, val)

    def d2(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        val = -self._integrate(s, lambda S, t: self.dgamma(S + t) * mollifier(t, self.width)[1])
        return np.where((s <= self.R) | (s >= self.M), 0.0, val)

    # radial function on R^d

    def _radial(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        return X, np.linalg.norm(X, axis=1)

    def value(self, X):
        _, r = self._radial(X)
        return self.chi0(r)

    def grad(self, X):
        X, r = self._radial(X)
        safe = np.where(r > 0, r, 1.0)
        return (self.d1(r) / safe)[:, None] * X

    def hess(self, X):
        X, r = self._radial(X)
        safe = np.where(r > 0, r, 1.0)
        xh = X / safe[:, None]
        P = xh[:, :, None] * xh[:, None, :]
        d1, d2 = self.d1(r), self.d2(r)
        eye = np.eye(self.dim)[None]
        return d2[:, None, None] * P + (d1 / safe)[:, None, None] * (eye - P)

    def weighted_bound(self, r):
        """kappa(r)|grad chi| + |hess chi| (spectral norm) as a function of the radius."""
        r = np.asarray(r, dtype=float)
        d1, d2 = self.d1(r), self.d2(r)
        hess = np.abs(d2)
        if self.dim > 1:
            hess = np.maximum(hess, np.abs(d1) / np.where(r > 0, r, 1.0))
        return self.kappa(r) * np.abs(d1) + hess

    def check_grid(self, n=10_000):
        """Composite radial grid: dense on both mollifier zones, geometric across the ramp."""
        W = self.width
        lo_zone = np.linspace(0.0, self.a + W, n * 2 // 5)
        # near a huge M the float spacing exceeds W / n, so duplicates are dropped and refilled below
        hi_zone = np.linspace(max(self.a + W, self.M - 2 * W), self.M + W, n * 2 // 5)
        grid = np.unique(np.concatenate([lo_zone, hi_zone]))
        top = max(self.a + W * 1.001, self.M - 2 * W)
        extra = n - grid.size
        while extra > 0:
            mid = np.geomspace(self.a + W, top, extra + 2)[1:-1]
            grid = np.unique(np.concatenate([grid, mid]))
            extra = n - grid.size
        return grid

    def verify(self, n=10_000, rel_slack=1e-3):
        """Check all invariants on the check grid; returns a dict of maxima and violation counts."""
        r = self.check_grid(n)
        chi = self.chi0(r)
        bound = self.weighted_bound(r)
        limit = self.eps * (1 + rel_slack)
        return {
            "points": int(r.size),
            "range_violations": int(np.sum((chi < 0) | (chi > 1))),
            "plateau_violations": int(np.sum(chi[r <= self.R] != 1.0)),
            "support_violations": int(np.sum(chi[r >= self.M] != 0.0)),
            "bound_violations": int(np.sum(bound > limit)),
            "max_bound": float(bound.max()),
            "eps": self.eps,
            "M": self.M,
        }


def build_cutoff(R, eps, profile="linear", p=1.0, dim=1, width=None):
    """Cutoff with plateau radius R > 0 and derivative budget eps for the given kappa profile."""
    if not R > 0:
        raise DomainError("plateau radius must be positive")
    if not eps > 0:
        raise DomainError("eps must be positive")
    if profile not in ("constant", "linear", "power"):
        raise DomainError(f"unknown kappa profile {profile!r}")
    if profile == "power" and p < 0:
        raise DomainError("power profile needs p >= 0 so that kappa >= 1")
    W = MIN_WIDTH * 1.001 if width is None else float(width)
    if W < MIN_WIDTH:
        raise DomainError(f"mollifier width must be at least {MIN_WIDTH:.6f}")
    eps_i = eps / (1 + max(1.0, 1.0 / R))
    cut = CutoffFunction(float(R), float(eps), profile, float(p), int(dim), W, eps_i)
    a = cut.a
    need = 1.0 / eps_i
    if profile == "constant":
        M = a + need
    elif profile == "linear" or p == 1:
        M = (1 + a) * np.exp(need) - 1
    elif p < 1:
        q = 1 - p
        M = ((1 + a) ** q + q * need) ** (1 / q) - 1
    else:
        q = p - 1
        total = (1 + a) ** (-q) / q
        if total <= need:
            raise DomainError(f"int 1/kappa beyond {a:.3g} is {total:.3g} < 1/eps' = {need:.3g}; "
                              "the tail of 1/kappa is too light for this (R, eps)")
        M = ((1 + a) ** (-q) - q * need) ** (-1 / q) - 1
    if not np.isfinite(M):
        raise DomainError("outer radius overflows; eps is too small for this profile")
    cut.M = float(M)
    return cut
