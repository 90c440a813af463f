"""Numerical checkers for the moment, tightness and limit conditions on (mu_h).

Every checker works on a finite decreasing h-ladder and returns a
three-valued ConditionReport; sup over all h cannot be decided from samples,
so reports carry the ladder table they were computed from. Monte Carlo
inputs enter through their upper confidence bounds (mean + 3 standard errors).
"""
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from ..linalg import psd_project
from ..numerics import loglog_slope, mann_kendall_z, richardson
from ..reports import FAIL, INCONCLUSIVE, PASS, ConditionReport
from .testfunctions import bump
from .triplet import LevyMeasureRepr, LevyTriplet, generator_apply

Z_UPPER = 3.0


def _ladder(h_ladder):
    hs = sorted((float(h) for h in h_ladder), reverse=True)
    if not hs or hs[-1] <= 0:
        raise DomainError("ladder must contain positive step sizes")
    return hs


def _fvalue(f):
    return f.value if hasattr(f, "value") else (lambda X: np.asarray(f(X), dtype=float).reshape(-1))


CHUNK_ELEMENTS = 2_000_000


def _shift_average(fn, X, fx, Y, w):
    """sum_j w_j (f(x + y_j) - f(x)) per row of X, in row blocks of bounded size."""
    out = np.empty(X.shape[0])
    step = max(1, CHUNK_ELEMENTS // max(1, Y.shape[0]))
    d = X.shape[1]
    for i in range(0, X.shape[0], step):
        B = X[i:i + step]
        D = fn((B[:, None, :] + Y[None, :, :]).reshape(-1, d)).reshape(B.shape[0], -1) - fx[i:i + step, None]
        out[i:i + step] = D @ w
    return out


def difference_quotient(mu, h, f, x, mode="analytic", n=100_000, seed=0, quad_nodes=64):
    """(1/h) int f(x + y) - f(x) mu_h(dy) at one point or a batch; returns (value, error).

    ``analytic`` sums atoms exactly, or uses the Gauss-Hermite rule for
    Gaussian mixtures with the node-halving difference as error.
    """
    from .._rng import derive_rng

    fn = _fvalue(f)
    X = np.asarray(x, dtype=float)
    single = X.ndim == 0 or (X.ndim == 1 and (mu.dim > 1 or X.size == 1))
    X = X.reshape(-1, mu.dim)
    fx = fn(X)
    if mode == "monte_carlo":
        Y = mu.draw(derive_rng(seed, "dq", float(h)), h, n)
        D = fn((X[:, None, :] + Y[None, :, :]).reshape(-1, mu.dim)).reshape(X.shape[0], -1) - fx[:, None]
        val = D.mean(axis=1) / h
        err = D.std(axis=1, ddof=1) / np.sqrt(n) / h
    elif mode == "analytic":
        def rule(m):
            Y, w = mu.quadrature_rule(h, m)
            # the truncated Poisson series misses mass 1 - sum(w); its f(x + y) - f(x) is left out
            return _shift_average(fn, X, fx, Y, w) / h

        val = rule(quad_nodes)
        err = np.zeros_like(val) if mu.is_atomic() else np.abs(val - rule(max(2, quad_nodes // 2)))
    else:
        raise DomainError(f"unknown mode {mode!r}")
    if single:
        return float(val[0]), float(err[0])
    return val, err


def _moments(mu, h, M, mode, n, seed):
    tm = mu.truncated_moments(h, M, mode=mode, n=n, seed=seed)
    z = Z_UPPER if mode == "monte_carlo" else 0.0
    return tm, tm.tail_upper(z), tm.second_upper(z), tm.mean_norm_upper(z)


def lemma_constants(mu, h_ladder, M, mode="analytic", n=100_000, seed=0):
    """Ladder sups c_M = sup tail/h and C_M = sup (|mean_trunc| + second_trunc)/h."""
    cM = CM = 0.0
    for h in _ladder(h_ladder):
        _, tail, second, mean = _moments(mu, h, M, mode, n, seed)
        cM = max(cM, tail / h)
        CM = max(CM, (mean + second) / h)
    return cM, CM


def _growth_verdict(values, hs):
    """fail when the functional grows as h decreases: Mann-Kendall z > 1.645 and slope > 0.05."""
    half = len(values) // 2
    tail_vals = np.asarray(values[half:])
    tail_h = np.asarray(hs[half:])
    z = mann_kendall_z(tail_vals)
    fit = loglog_slope(1.0 / tail_h, tail_vals)
    growing = z > 1.645 and np.isfinite(fit.slope) and fit.slope > 0.05
    return growing, z, fit.slope


def check_condition_M(mu, h_ladder, M_list=(0.5, 1.0, 2.0), mode="analytic", n=100_000, seed=0):
    """(1/h)(int 1 ^ |y|^2 dmu_h + |int_{|y| <= 1} y dmu_h|) along the ladder, with c_M and C_M per M."""
    hs = _ladder(h_ladder)
    rows = []
    values = []
    rel_noise = 0.0
    for h in hs:
        tm, tail, second, mean = _moments(mu, h, 1.0, mode, n, seed)
        phi = (second + tail + mean) / h
        point = (tm.second_trunc + tm.tail + float(np.linalg.norm(tm.mean_trunc))) / h
        values.append(phi)
        if phi > 0:
            rel_noise = max(rel_noise, (phi - point) / phi)
        rows.append({"h": h, "functional": phi, "point_estimate": point})
    constants = {}
    for M in M_list:
        cM, CM = lemma_constants(mu, hs, M, mode, n, seed)
        constants[f"c_M[{M:g}]"] = cM
        constants[f"C_M[{M:g}]"] = CM
    growing, z, slope = _growth_verdict(values, hs)
    constants.update(sup_functional=max(values), trend_z=z, trend_slope=slope)
    if not np.all(np.isfinite(values)):
        verdict = FAIL
    elif growing:
        verdict = FAIL
    elif mode == "monte_carlo" and rel_noise > 0.1:
        verdict = INCONCLUSIVE
    else:
        verdict = PASS
    return ConditionReport("M", verdict, constants, hs, mode, rows)


def check_condition_M_prime(mu, h_ladder, probes):
    """sup_h |int (phi(y) - phi(0))/h dmu_h| for each probe phi (the test-function form of (M))."""
    hs = _ladder(h_ladder)
    rows, sups = [], []
    verdict = PASS
    for i, phi in enumerate(probes):
        vals = [abs(difference_quotient(mu, h, phi, np.zeros(mu.dim))[0]) for h in hs]
        growing, z, slope = _growth_verdict(vals, hs)
        if growing:
            verdict = FAIL
        sups.append(max(vals))
        rows.append({"probe": i, "values": vals, "trend_z": z})
    return ConditionReport("M_prime", verdict, {"sup": sups}, hs, "analytic", rows)


def default_M_grid(h_ladder):
    """M = 2^-2 .. 2^6, kept below 1/h_min so finite ladders can still see escaping mass."""
    h_min = min(h_ladder)
    grid = 2.0 ** np.arange(-2, 7)
    return [float(M) for M in grid if M < 1.0 / h_min] or [float(grid[0])]


def markov_tail_bound(mu, M):
    """E|X|^2 / M^2 for scaled_iid families (tail(h, M)/h never exceeds it)."""
    if mu.kind != "scaled_iid":
        return None
    return mu.dim / M ** 2  # standardized base laws have E|X_1|^2 = 1 per coordinate


def check_condition_T(mu, h_ladder, eps_list=(0.5, 0.1, 0.01), M_grid=None, mode="analytic", n=100_000, seed=0):
    """For each eps, the smallest M on the grid with tail(h, M)/h < eps over the ladder tail."""
    hs = _ladder(h_ladder)
    M_grid = default_M_grid(hs) if M_grid is None else sorted(M_grid)
    tail_hs = hs[len(hs) // 2:]
    ratios = {}
    rows = []
    for M in M_grid:
        r = []
        for h in tail_hs:
            _, tail, _, _ = _moments(mu, h, M, mode, n, seed)
            r.append(tail / h)
        ratios[M] = r
        rows.append({"M": M, "tail_ratios": r, "max_ratio": max(r)})
    constants = {}
    verdict = PASS
    for eps in eps_list:
        hit = next((M for M in M_grid if max(ratios[M]) < eps), None)
        constants[f"M_eps[{eps:g}]"] = hit
        if hit is None:
            verdict = FAIL
        if mu.kind == "scaled_iid":
            constants[f"M_markov[{eps:g}]"] = float(np.sqrt(mu.dim / eps))
    constants["min_tail_ratio"] = min(min(v) for v in ratios.values())
    return ConditionReport("T", verdict, constants, tail_hs, mode, rows)


def check_condition_M_star(mu, h_ladder, probes, tol=1e-6):
    """Cauchy test of int (phi(y) - phi(0))/h dmu_h along the ladder, per probe."""
    hs = _ladder(h_ladder)
    rows = []
    limits = []
    verdict = PASS
    for i, phi in enumerate(probes):
        q = np.array([difference_quotient(mu, h, phi, np.zeros(mu.dim))[0] for h in hs])
        disc = np.abs(np.diff(q))
        lim, corr = richardson(hs, q)
        shrinking = disc[-1] <= tol or (mann_kendall_z(disc) < 0 and disc[-1] < disc[0])
        if not shrinking:
            verdict = INCONCLUSIVE
        limits.append(float(lim))
        rows.append({"probe": i, "quotients": q.tolist(), "discrepancies": disc.tolist(), "limit": float(lim),
                     "ladder_error": float(max(disc[-1], corr))})
    return ConditionReport("M_star", verdict, {"limits": limits}, hs, "analytic", rows)


@dataclass
class TripletEstimate:
    triplet: LevyTriplet
    errors: dict
    verdict: str
    table: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)


def _extrapolate(hs, values):
    values = np.asarray(values, dtype=float)
    est, corr = richardson(hs, values)
    err = np.maximum(np.abs(np.asarray(corr)), np.abs(values[-1] - values[-2]))
    return est, err


def estimate_triplet(mu, h_ladder, cutoff=None, k_list=None, rho=0.25, quad_nodes=64, psd_slack=1e-6, probes=None):
    """Extract (b, sigma, nu, c) from mu_h along the ladder.

    b0 and sigma0 are the chi-weighted first and second moments over h, nu is
    mu_h / h on rho <= |y| <= k_max (the |y|^2-weighted measure reweighted by
    1/|y|^2), and c = min over k of the limit of tail(h, k)/h. Every ladder
    quantity is extrapolated from the last two levels.
    """
    hs = _ladder(h_ladder)
    if len(hs) < 2:
        raise DomainError("triplet estimation needs at least two ladder levels")
    d = mu.dim
    if cutoff is None:
        from .cutoff import build_cutoff

        cutoff = build_cutoff(1.0, 1.0, "constant", dim=d)
    if cutoff.R < 1:
        raise DomainError("cutoff plateau radius must be at least 1")
    if k_list is None:
        k_max = max(2.0, hs[-1] ** -0.5)
        k_list = [float(k) for k in 2.0 ** np.arange(0, np.floor(np.log2(k_max)) + 1)]
    k_max = max(k_list)

    def chi(Y):
        return cutoff.value(Y)

    b0s, s0s, tails, nus = [], [], [], []
    for h in hs:
        Y, w = mu.quadrature_rule(h, quad_nodes)
        c = chi(Y)
        b0s.append((w * c) @ Y / h)
        s0s.append((Y * (w * c)[:, None]).T @ Y / h)
        r = np.linalg.norm(Y, axis=1)
        tails.append([(w[r > k].sum() + max(0.0, 1.0 - w.sum())) / h for k in k_list])
        sel = (r >= rho) & (r <= k_max)
        nus.append((Y[sel], w[sel] / h))
    b0, b0_err = _extrapolate(hs, b0s)
    s0, s0_err = _extrapolate(hs, s0s)
    tails = np.array(tails)
    tail_lim, tail_err = _extrapolate(hs, tails)
    tail_lim = np.clip(tail_lim, 0.0, None)
    ci = int(np.argmin(tail_lim))
    c_hat = float(tail_lim[ci])

    # nu: Richardson per atom when the last two levels share a support, else the last level
    (Y1, m1), (Y2, m2) = nus[-2], nus[-1]
    from ..atomic import merge_atoms

    if Y1.shape == Y2.shape and np.allclose(Y1, Y2, atol=1e-9):
        r_ = hs[-2] / hs[-1]
        masses = np.clip((r_ * m2 - m1) / (r_ - 1), 0.0, None)
        atoms = Y2
    else:
        atoms, masses = Y2, m2
    if atoms.shape[0]:
        atoms, masses = merge_atoms(atoms, masses)
        keep = masses > 1e-14 * max(1.0, masses.sum())
        atoms, masses = atoms[keep], masses[keep]
    nu = LevyMeasureRepr.finite_activity(atoms, masses)
    nu_mass_err = abs(m2.sum() - m1.sum())

    small = np.linalg.norm(nu.atoms, axis=1) <= 1
    cnu = chi(nu.atoms) if nu.atoms.shape[0] else np.zeros(0)
    b1 = (nu.masses * (cnu - small)) @ nu.atoms if nu.atoms.shape[0] else np.zeros(d)
    s1 = (nu.atoms * (nu.masses * cnu)[:, None]).T @ nu.atoms if nu.atoms.shape[0] else np.zeros((d, d))
    b = b0 - b1
    sigma_raw = s0 - s1
    sigma, moved = psd_project(sigma_raw)
    diagnostics = {"psd_moved": moved, "k_list": list(k_list), "c_at_k": float(k_list[ci]), "rho": rho}
    if moved > psd_slack:
        diagnostics["warning"] = f"PSD projection moved sigma by {moved:.3e}"
    triplet = LevyTriplet(b, sigma, nu, killing_c=c_hat)

    # generator vs difference quotient at the smallest h on a probe set
    if probes is None:
        probes = [bump(np.full(d, x0), 1.5, d) for x0 in (-0.5, 0.0, 0.7)]
    gen_gap = 0.0
    for phi in probes:
        pts = np.linspace(-1.0, 1.0, 5)[:, None] * np.ones((1, d))
        dq, _ = difference_quotient(mu, hs[-1], phi, pts, quad_nodes=quad_nodes)
        gen_gap = max(gen_gap, float(np.abs(np.atleast_1d(generator_apply(triplet, phi, pts)) - dq).max()))
    diagnostics["generator_gap"] = gen_gap

    errors = {"b": float(np.linalg.norm(b0_err)), "sigma": float(np.linalg.norm(s0_err)),
              "nu_mass": float(nu_mass_err), "c": float(tail_err[ci])}
    stable = all(np.isfinite(v) for v in errors.values())
    table = [{"h": h, "b0": np.asarray(b).tolist(), "sigma0": np.asarray(s).tolist(), "tails": list(t)}
             for h, b, s, t in zip(hs, b0s, s0s, tails.tolist())]
    return TripletEstimate(triplet, errors, PASS if stable else INCONCLUSIVE, table, diagnostics)


def _hess_norm(H):
    return np.linalg.norm(H, ord=2, axis=(1, 2))


def apriori_bound_check(mu, h_ladder, M, f, x_samples, cM=None, CM=None, n_sup=2001):
    """Check |dq(h, x)| <= c_M sup_{|y|>M} |f(x+y) - f(x)| + C_M max(|grad f(x)|, sup_{|y|<=M} |hess f(x+y)|).

    The sups on the right are taken over sampled points (a lower bound), so
    the check is at least as strict as the inequality itself.
    """
    hs = _ladder(h_ladder)
    if cM is None or CM is None:
        cM, CM = lemma_constants(mu, hs, M)
    X = np.asarray(x_samples, dtype=float).reshape(-1, mu.dim)
    d = mu.dim
    rng = np.random.default_rng(0)
    ball = rng.uniform(-1, 1, size=(n_sup, d))
    ball /= np.maximum(1.0, np.linalg.norm(ball, axis=1))[:, None]
    if d == 1:
        ball = np.linspace(-1, 1, n_sup)[:, None]
    center = f.support_center if getattr(f, "support_center", None) is not None else np.zeros(d)
    radius = f.support_radius if np.isfinite(getattr(f, "support_radius", np.inf)) else 10.0
    support_pts = center + radius * ball
    rows = []
    violations = 0
    worst = -np.inf
    for x in X:
        fx = f.value(x[None])[0]
        far = support_pts[np.linalg.norm(support_pts - x, axis=1) > M]
        jump_sup = max(abs(fx), float(np.abs(f.value(far) - fx).max()) if far.size else 0.0)
        near = x + M * ball
        curv = max(float(np.linalg.norm(f.grad(x[None])[0])), float(_hess_norm(f.hess(near)).max()))
        rhs = cM * jump_sup + CM * curv
        for h in hs:
            val, err = difference_quotient(mu, h, f, x)
            excess = abs(val) - err - rhs
            worst = max(worst, excess)
            if excess > 1e-12 * max(1.0, rhs):
                violations += 1
            rows.append({"h": h, "x": x.tolist(), "lhs": abs(val), "rhs": rhs})
    return ConditionReport("apriori", PASS if violations == 0 else FAIL,
                           {"c_M": cM, "C_M": CM, "violations": violations, "worst_excess": worst},
                           hs, "analytic", rows)


def lp_apriori_check(mu, h_ladder, M, f, p=2, cM=None, CM=None, dx=1e-3):
    """L_p form in d = 1: |dq(h, .)|_p <= 2 c_M |f|_p + C_M max(|f'|_p, |f''|_p).

    The difference quotient is tabulated on the union of the shifted supports
    supp f - y over the atoms (or quadrature nodes) of mu_h, so far jumps
    are integrated exactly rather than cut off by a finite box.
    """
    if mu.dim != 1:
        raise DomainError("the L_p check is implemented for d = 1")
    hs = _ladder(h_ladder)
    if cM is None or CM is None:
        cM, CM = lemma_constants(mu, hs, M)
    r = float(f.support_radius)
    if not np.isfinite(r) or f.support_center is None:
        raise DomainError("the L_p check needs a compactly supported f")
    c = float(np.atleast_1d(f.support_center)[0])
    xs = np.arange(c - r, c + r + dx / 2, dx)

    def norm(v, grid):
        w = np.full(grid.size, dx)
        w[0] = w[-1] = dx / 2
        return float(np.dot(w, np.abs(v) ** p) ** (1 / p))

    fn = norm(f.value(xs[:, None]), xs)
    f1 = norm(f.grad(xs[:, None])[:, 0], xs)
    f2 = norm(f.hess(xs[:, None])[:, 0, 0], xs)
    rhs = 2 * cM * fn + CM * max(f1, f2)
    rows = []
    violations = 0
    for h in hs:
        Y, w = mu.quadrature_rule(h)
        shifts = np.concatenate([[0.0], Y[:, 0]])
        lo = np.sort(c - r - shifts)
        hi = lo + 2 * r
        # merge overlapping intervals [lo_i, hi_i]
        pieces = []
        a, b = lo[0], hi[0]
        for l_, h_ in zip(lo[1:], hi[1:]):
            if l_ <= b:
                b = max(b, h_)
            else:
                pieces.append((a, b))
                a, b = l_, h_
        pieces.append((a, b))
        total = 0.0
        for a, b in pieces:
            grid = np.linspace(a, b, max(3, int(np.ceil((b - a) / dx)) + 1))
            dq, _ = difference_quotient(mu, h, f, grid)
            g = np.diff(grid)
            wts = np.concatenate([[g[0] / 2], (g[:-1] + g[1:]) / 2, [g[-1] / 2]])
            total += float(np.dot(wts, np.abs(dq) ** p))
        lhs = total ** (1 / p)
        if lhs > rhs * (1 + 1e-9):
            violations += 1
        rows.append({"h": h, "lhs": lhs, "rhs": rhs})
    return ConditionReport("apriori_Lp", PASS if violations == 0 else FAIL,
                           {"c_M": cM, "C_M": CM, "p": p, "violations": violations}, hs, "grid", rows)


def check_condition_T_prime(mu, h_ladder, eps_list=(0.5, 0.1, 0.01), M_grid=None):
    """Cutoff form of (T): limsup_h int (1 - chi_M(y))/h dmu_h < eps for a smooth chi_M = 1 on |y| <= M."""
    from .cutoff import build_cutoff

    hs = _ladder(h_ladder)
    M_grid = default_M_grid(hs) if M_grid is None else sorted(M_grid)
    tail_hs = hs[len(hs) // 2:]
    rows, worst = [], {}
    for M in M_grid:
        chi = build_cutoff(M, 1.0, "constant", dim=mu.dim)
        vals = []
        for h in tail_hs:
            Y, w = mu.quadrature_rule(h)
            vals.append(float(w @ (1.0 - chi.value(Y)) + max(0.0, 1.0 - w.sum())) / h)
        worst[M] = max(vals)
        rows.append({"M": M, "values": vals})
    constants = {}
    verdict = PASS
    for eps in eps_list:
        hit = next((M for M in M_grid if worst[M] < eps), None)
        constants[f"M_eps[{eps:g}]"] = hit
        if hit is None:
            verdict = FAIL
    return ConditionReport("T_prime", verdict, constants, tail_hs, "analytic", rows)
