"""Small statistical helpers: trend tests, extrapolation and rate fits."""
from dataclasses import dataclass

import numpy as np
from scipy import stats


def mann_kendall_z(values):
    """Mann-Kendall trend statistic (normal approximation, tie-corrected).

    Positive z means an increasing trend along the sequence.
    """
    v = np.asarray(values, dtype=float)
    n = v.size
    if n < 3:
        return 0.0
    diff = np.sign(v[None, :] - v[:, None])
    S = np.triu(diff, 1).sum()
    _, counts = np.unique(v, return_counts=True)
    var = (n * (n - 1) * (2 * n + 5) - np.sum(counts * (counts - 1) * (2 * counts + 5))) / 18.0
    if var <= 0:
        return 0.0
    if S > 0:
        return float((S - 1) / np.sqrt(var))
    if S < 0:
        return float((S + 1) / np.sqrt(var))
    return 0.0


def richardson(h, q, order=1):
    """Extrapolate q(h) -> q(0) from the last two ladder levels assuming error ~ h^order.

    Returns (estimate, error indicator) with the indicator the size of the
    extrapolation correction.
    """
    h = np.asarray(h, dtype=float)
    q = np.asarray(q, dtype=float)
    if h.shape[0] < 2:
        raise ValueError("Richardson extrapolation needs two levels")
    r = (h[-2] / h[-1]) ** order
    est = (r * q[-1] - q[-2]) / (r - 1)
    return est, np.abs(est - q[-1])


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    lo: float
    hi: float
    n: int

    def to_dict(self):
        return dict(slope=self.slope, intercept=self.intercept, stderr=self.stderr, lo=self.lo, hi=self.hi, n=self.n)


def loglog_slope(x, y, level=0.95):
    """Least-squares slope of log y against log x with a t-based confidence band."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    x, y = x[keep], y[keep]
    n = x.size
    if n < 2:
        return SlopeFit(np.nan, np.nan, np.nan, np.nan, np.nan, n)
    res = stats.linregress(np.log(x), np.log(y))
    if n > 2:
        t = stats.t.ppf(0.5 + level / 2, n - 2)
        se = res.stderr
    else:
        t, se = 0.0, 0.0
    return SlopeFit(float(res.slope), float(res.intercept), float(se), float(res.slope - t * se),
                    float(res.slope + t * se), n)
