"""Deviation and moment inequalities for ``||X||_{B_p(mu)}``, checked by Monte Carlo."""
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from scipy.special import gammaln

from . import rng
from .errors import DomainError, UnsupportedRegimeError
from .gaussian import BoundCheck, moment_from_values, norm_samples, sigma_p
from .lewis import SubspaceSpec, lewis_position
from .measures import NormBody, norm_p_gradient, power_norm

CENSOR_COUNT = 10
CENTERS = ("p-mean", "median", "mean")


# -- rate functions ---------------------------------------------------------

@dataclass(frozen=True)
class PsiValue:
    value: float
    branch: int  # 1: t^2 n/(p 4^p), 2: (t n)^{2/p}
    crossover: float

    def __float__(self):
        return self.value


def psi_crossover(n, p):
    """``t*`` where ``t^2 n/(p 4^p) = (t n)^{2/p}``."""
    if not p > 2:
        raise DomainError("psi needs p > 2")
    return (p * 4.0**p * n ** ((2.0 - p) / p)) ** (p / (2.0 * p - 2.0))


def psi(n, p, t):
    """``min{t^2 n/(p 4^p), (t n)^{2/p}}`` with the active branch and crossover."""
    if not t > 0:
        raise DomainError("psi needs t > 0")
    if n < 1:
        raise DomainError("psi needs n >= 1")
    if not p > 2:
        raise DomainError("psi needs p > 2")
    b1 = t * t * n / (p * 4.0**p)
    b2 = (t * n) ** (2.0 / p)
    return PsiValue(min(b1, b2), 1 if b1 <= b2 else 2, psi_crossover(n, p))


def _alpha_const(n, p):
    # (p-1)^{(p-1)/2} / (sigma_{2p-2}^{p-1} n^{1/2})
    return (p - 1.0) ** ((p - 1.0) / 2.0) / (sigma_p(2.0 * p - 2.0) ** (p - 1.0) * math.sqrt(n))


def alpha(n, p, r):
    """``max{r^{1/2}, r^{p/2} (p-1)^{(p-1)/2} / (sigma_{2p-2}^{p-1} n^{1/2})}``."""
    if r <= 0 or p < 2:
        raise DomainError("alpha needs r > 0 and p >= 2")
    return max(math.sqrt(r), r ** (p / 2.0) * _alpha_const(n, p))


def alpha_inverse(n, p, s):
    """Inverse of ``r -> alpha(n, p, r)``."""
    if s <= 0 or p < 2:
        raise DomainError("alpha_inverse needs s > 0 and p >= 2")
    sig = sigma_p(2.0 * p - 2.0)
    b2 = s ** (2.0 / p) * n ** (1.0 / p) * sig ** ((2.0 * p - 2.0) / p) / (p - 1.0) ** ((p - 1.0) / p)
    return min(s * s, b2)


# -- tail profiles ----------------------------------------------------------

@dataclass(frozen=True)
class TailProfile:
    """Empirical ``P(| ||X|| - c | >= eps c)`` on a grid of ``eps``.

    ``tail_prob`` is raw (not monotonized); ``censored`` cells have fewer
    than ``CENSOR_COUNT`` exceedances and only ``upper_ci`` is meaningful.
    """

    eps_grid: np.ndarray
    tail_prob: np.ndarray
    std_err: np.ndarray
    counts: np.ndarray
    upper_ci: np.ndarray
    censored: np.ndarray
    center: str
    center_value: float
    samples: int
    seed: int
    n: int
    p: float

    def monotone(self):
        """Running minimum of ``tail_prob``, for display only."""
        return np.minimum.accumulate(self.tail_prob)

    def rows(self):
        for i, e in enumerate(self.eps_grid):
            yield {
                "eps": float(e),
                "tail": float(self.tail_prob[i]),
                "stderr": float(self.std_err[i]),
                "count": int(self.counts[i]),
                "upper_ci": float(self.upper_ci[i]),
                "censored": bool(self.censored[i]),
                "center": self.center,
                "center_value": self.center_value,
                "n": self.n,
                "p": self.p,
                "seed": self.seed,
            }


def _center(values, p, how):
    if how == "p-mean":
        return moment_from_values(values, p).value
    if how == "median":
        return float(np.median(values))
    if how == "mean":
        return math.fsum(values) / values.shape[0]
    raise DomainError(f"unknown center {how!r}; choose from {CENTERS}")


def _binomial_cells(counts, N, conf=0.95):
    prob = counts / N
    se = np.sqrt(prob * (1.0 - prob) / N)
    upper = stats.beta.ppf(conf, counts + 1, N - counts)
    return prob, se, np.where(counts >= N, 1.0, upper)


def auto_eps_grid(rel_dev, points=24, min_count=20):
    """Linear grid up to the relative deviation still exceeded ``min_count`` times."""
    s = np.sort(rel_dev)
    top = float(s[max(0, s.shape[0] - min_count)])
    return np.linspace(top / points, top, points)


def tail_profile(body, eps_grid, samples=200_000, seed=0, center="p-mean", workers=None,
                 values=None):
    """Two-sided relative deviation tails of ``||X||_{B_p}`` around ``center``.

    ``eps_grid`` may be a sequence or ``"auto"``. Precomputed ``values``
    (norm samples) may be passed to share draws between profiles.
    """
    p, n = body.q, body.dim
    if not p > 2:
        raise UnsupportedRegimeError("tail profiles need p > 2")
    if n <= math.exp(p):
        warnings.warn(f"n = {n} <= e^p = {math.exp(p):.1f}; outside the large-n regime",
                      RuntimeWarning, stacklevel=2)
    if values is None:
        values = norm_samples(body, samples, seed, stream="tail", workers=workers)
    N = values.shape[0]
    c = _center(values, p, center)
    rel = np.abs(values - c) / c
    if isinstance(eps_grid, str):
        if eps_grid != "auto":
            raise DomainError("eps_grid must be a sequence or 'auto'")
        eps = auto_eps_grid(rel)
    else:
        eps = np.asarray(eps_grid, dtype=np.float64)
    if np.any(eps < 0):
        raise DomainError("eps values must be >= 0")
    s = np.sort(rel)
    counts = N - np.searchsorted(s, eps, side="left")
    prob, se, upper = _binomial_cells(counts.astype(np.float64), N)
    return TailProfile(eps_grid=eps, tail_prob=prob, std_err=se, counts=counts, upper_ci=upper,
                       censored=counts < CENSOR_COUNT, center=center, center_value=c,
                       samples=int(N), seed=int(seed), n=int(n), p=float(p))


@dataclass(frozen=True)
class WindowFit:
    eps: tuple
    exponent: float
    slope: float
    intercept: float
    r2: float


@dataclass(frozen=True)
class TwoLevelFit:
    small: WindowFit
    large: WindowFit
    split: float
    split_source: str  # "psi-crossover" or "empirical"
    crossover: float

    def to_dict(self):
        return asdict(self)


def _linfit(x, y, exponent, eps):
    slope, intercept, rv, _, _ = stats.linregress(x, y)
    return WindowFit(tuple(float(e) for e in eps), exponent, float(slope), float(intercept),
                     float(rv * rv))


def _sse(x, y):
    A = np.column_stack([x, np.ones_like(x)])
    res = y - A @ np.linalg.lstsq(A, y, rcond=None)[0]
    return float(res @ res)


def fit_two_level(profile, min_points=3):
    """Regress ``-log tail`` on ``eps^2`` (small eps) and on ``eps^{2/p}`` (large eps).

    Windows split at the psi crossover when it falls inside the observed,
    uncensored eps range; otherwise at the split minimizing the total
    squared error of the two fits.
    """
    p = profile.p
    keep = (~profile.censored) & (profile.eps_grid > 0) & (profile.tail_prob < 1.0)
    eps = profile.eps_grid[keep]
    y = -np.log(profile.tail_prob[keep])
    order = np.argsort(eps)
    eps, y = eps[order], y[order]
    if eps.shape[0] < 2 * min_points:
        raise DomainError(f"need at least {2 * min_points} uncensored eps cells, have {eps.shape[0]}")
    tstar = psi_crossover(profile.n, p)
    cut = int(np.searchsorted(eps, tstar, side="right"))
    if min_points <= cut <= eps.shape[0] - min_points:
        source = "psi-crossover"
    else:
        source = "empirical"
        best = None
        for k in range(min_points, eps.shape[0] - min_points + 1):
            sse = _sse(eps[:k] ** 2, y[:k]) + _sse(eps[k:] ** (2.0 / p), y[k:])
            if best is None or sse < best[0]:
                best = (sse, k)
        cut = best[1]
    small = _linfit(eps[:cut] ** 2, y[:cut], 2.0, eps[:cut])
    large = _linfit(eps[cut:] ** (2.0 / p), y[cut:], 2.0 / p, eps[cut:])
    split = float(0.5 * (eps[cut - 1] + eps[cut]))
    return TwoLevelFit(small, large, split, source, tstar)


def median_symmetrization_check(body, t_grid, samples=200_000, seed=0, workers=None, values=None):
    """``P(|xi - med| >= t) <= 4 min_c P(|xi - c| >= t/2)`` over ``c`` in {median, p-mean}."""
    if values is None:
        values = norm_samples(body, samples, seed, stream="tail", workers=workers)
    N = values.shape[0]
    med = _center(values, body.q, "median")
    pm = _center(values, body.q, "p-mean")
    d_med = np.sort(np.abs(values - med))
    d_pm = np.sort(np.abs(values - pm))

    def tail(s, t):
        k = N - np.searchsorted(s, t, side="left")
        pr = k / N
        return pr, math.sqrt(pr * (1.0 - pr) / N)

    rows = []
    for t in np.asarray(t_grid, dtype=np.float64):
        lhs, se_l = tail(d_med, t)
        a, se_a = tail(d_med, t / 2.0)
        b, se_b = tail(d_pm, t / 2.0)
        rhs, se_r = (4.0 * a, 4.0 * se_a) if a <= b else (4.0 * b, 4.0 * se_b)
        se = math.hypot(se_l, se_r)
        rows.append({"t": float(t), "lhs": lhs, "rhs": rhs, "std_err": se,
                     "passed": lhs <= rhs + 3.0 * se})
    return {"median": med, "p_mean": pm, "rows": rows}


def gaussian_baseline_check(body, t_grid, samples=200_000, seed=0, workers=None, min_count=20):
    """``-log P(| ||X|| - ||Y|| | > t) >= t^2/4 - log 4`` for independent ``X, Y``, ``t >= 1``.

    Cells with fewer than ``min_count`` exceedances are reported but not judged.
    """
    if body.q < 2:
        raise UnsupportedRegimeError("the B_q norm is 1-Lipschitz only for q >= 2")
    x = norm_samples(body, samples, seed, stream="baseline-x", workers=workers)
    y = norm_samples(body, samples, seed, stream="baseline-y", workers=workers)
    d = np.sort(np.abs(x - y))
    N = d.shape[0]
    rows = []
    for t in np.asarray(t_grid, dtype=np.float64):
        if t < 1.0:
            raise DomainError("baseline check is stated for t >= 1")
        k = int(N - np.searchsorted(d, t, side="right"))
        bound = t * t / 4.0 - math.log(4.0)
        judged = k >= min_count
        lhs = -math.log(k / N) if k else math.inf
        rows.append({"t": float(t), "count": k, "neg_log_tail": lhs, "bound": bound,
                     "judged": judged, "passed": (lhs >= bound) if judged else True})
    return rows


# -- moment inequalities ----------------------------------------------------

def _pair_cos(a, b, check_unit=False):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DomainError("a and b must have the same length")
    if check_unit and (abs(np.linalg.norm(a) - 1.0) > 1e-12 or abs(np.linalg.norm(b) - 1.0) > 1e-12):
        raise DomainError("a and b must be unit vectors")
    c = float(np.clip(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)), -1.0, 1.0))
    return c, float(np.linalg.norm(a - b))


def _pair_samples(body, c, samples, seed, stream, workers):
    """``f(Ga), f(Gb)`` for ``f = ||.||^p``, with ``Gb = c X + sqrt(1-c^2) Y`` and ``Ga = X``."""
    n = body.dim
    s = math.sqrt(max(0.0, 1.0 - c * c))

    def shard(g, rows):
        X = g.standard_normal((rows, n))
        if s == 0.0:
            Xb = X if c > 0 else -X
        else:
            Xb = c * X + s * g.standard_normal((rows, n))
        return np.stack([power_norm(body, X), power_norm(body, Xb)], axis=1)

    out = np.concatenate(rng.map_shards(shard, seed, stream, samples, 2 * n, workers))
    return out[:, 0], out[:, 1]


def moment_normalizer(n, p, r, dist):
    """``|a-b| sigma_{2p-2}^{p-1} n^{1/2} 2^{(p-1)/2} alpha(n,p,r)``."""
    return dist * sigma_p(2.0 * p - 2.0) ** (p - 1.0) * math.sqrt(n) * 2.0 ** ((p - 1.0) / 2.0) * alpha(n, p, r)


def moment_inequality_check(body, r_grid, samples=100_000, seed=0, a=(1.0, 0.0), b=(0.0, 1.0),
                            workers=None):
    """``(E| ||Ga||^p - ||Gb||^p |^r)^{1/r}`` divided by its predicted scale, per ``r``.

    Returns rows with ``lhs``, its standard error, the normalizer and the
    ratio; the ratio should stay bounded by one constant across ``r`` and ``n``.
    """
    p, n = body.q, body.dim
    if p < 2:
        raise UnsupportedRegimeError("moment inequality needs p >= 2")
    c, dist = _pair_cos(a, b)
    fa, fb = _pair_samples(body, c, samples, seed, "moment-ineq", workers)
    D = np.abs(fa - fb)
    rows = []
    for r in r_grid:
        if r < 2:
            raise DomainError("r grid values must be >= 2")
        if not np.any(D > 0):
            lhs, se = 0.0, 0.0
        else:
            est = moment_from_values(D, r, seed)
            lhs, se = est.value, est.std_err
        norm_ = moment_normalizer(n, p, r, dist) if dist > 0 else math.nan
        ratio = lhs / norm_ if dist > 0 else 0.0
        rows.append({"n": n, "p": p, "r": float(r), "lhs": lhs, "std_err": se,
                     "normalizer": norm_, "ratio": ratio,
                     "ratio_err": se / norm_ if dist > 0 else 0.0})
    return rows


def moment_inequality_grid(bodies, r_grid, samples=100_000, seed=0, workers=None):
    """Run ``moment_inequality_check`` over several bodies (an ``n`` grid).

    ``C_hat`` is the largest ratio seen. ``bounded`` holds when, for every
    ``r``, each ratio is at most twice the ratio at the smallest ``n`` plus
    three standard errors.
    """
    rows = []
    for body in sorted(bodies, key=lambda b: b.dim):
        rows.extend(moment_inequality_check(body, r_grid, samples, seed, workers=workers))
    base = {}
    for row in rows:
        base.setdefault(row["r"], row)
    bounded = all(
        row["ratio"] <= 2.0 * base[row["r"]]["ratio"] + 3.0 * math.hypot(row["ratio_err"], 2.0 * base[row["r"]]["ratio_err"])
        for row in rows
    )
    return {"rows": rows, "C_hat": max(r["ratio"] for r in rows), "bounded": bounded}


def pisier_r2_check(body, a, b, samples=100_000, seed=0, workers=None):
    """``E(f(Ga) - f(Gb))^2 <= (pi^2/4) |a-b|^2 E|grad f(X)|^2`` for ``f = ||.||_{B_p}^p``.

    The two sides use independent streams.
    """
    p, n = body.q, body.dim
    if p <= 1:
        raise DomainError("f = ||.||^p needs p > 1 to be differentiable")
    c, dist = _pair_cos(a, b, check_unit=True)
    fa, fb = _pair_samples(body, c, samples, seed, "pisier-lhs", workers)
    D2 = (fa - fb) ** 2
    N = D2.shape[0]
    lhs = math.fsum(D2) / N
    se_l = math.sqrt(math.fsum((D2 - lhs) ** 2) / (N - 1) / N)

    def shard(g, rows):
        G = norm_p_gradient(body, g.standard_normal((rows, n)))
        return np.einsum("ij,ij->i", G, G)

    g2 = np.concatenate(rng.map_shards(shard, seed, "pisier-rhs", samples, n, workers))
    k = (math.pi**2 / 4.0) * dist * dist
    m = math.fsum(g2) / N
    rhs = k * m
    se_r = k * math.sqrt(math.fsum((g2 - m) ** 2) / (N - 1) / N)
    se = math.hypot(se_l, se_r)
    return BoundCheck(lhs=lhs, rhs=rhs, std_err=se, passed=lhs <= rhs + 3.0 * se)


# -- variance scaling -------------------------------------------------------

def chi_variance(n):
    """``Var |g|_2`` for ``g`` standard Gaussian in ``R^n``."""
    return n - 2.0 * math.exp(2.0 * (gammaln((n + 1) / 2.0) - gammaln(n / 2.0)))


@dataclass(frozen=True)
class VarianceRow:
    n: int
    var_hat: float
    std_err: float
    scaled: float


@dataclass(frozen=True)
class VarianceReport:
    p: float
    rows: list = field(default_factory=list)

    @property
    def spread(self):
        s = [r.scaled for r in self.rows]
        return max(s) / min(s)

    @property
    def bounded(self):
        """Every ``var_hat n^{1-2/p}`` is at most twice its value at the smallest ``n``."""
        base = min(self.rows, key=lambda r: r.n).scaled
        return all(r.scaled <= 2.0 * base for r in self.rows)


def _sample_variance(v):
    N = v.shape[0]
    m = math.fsum(v) / N
    d2 = (v - m) ** 2
    var = math.fsum(d2) / (N - 1)
    m4 = math.fsum(d2 * d2) / N
    return var, math.sqrt(max(m4 - var * var, 0.0) / N)


def variance_bound_check(specs, samples=100_000, seed=0, workers=None):
    """``Var ||g||_{B_p(mu)}`` in Lewis position, scaled by ``n^{1-2/p}``, over an ``n`` grid."""
    if isinstance(specs, SubspaceSpec):
        specs = [specs]
    specs = sorted(specs, key=lambda s: s.n)
    ps = {s.p for s in specs}
    if len(ps) != 1:
        raise DomainError("all specs in a variance grid must share p")
    p = ps.pop()
    if p < 2:
        raise UnsupportedRegimeError("variance bound needs p >= 2")
    rows = []
    for spec in specs:
        body = NormBody(lewis_position(spec).measure, p)
        v = norm_samples(body, samples, seed, stream="variance", workers=workers)
        var, se = _sample_variance(v)
        rows.append(VarianceRow(n=spec.n, var_hat=var, std_err=se, scaled=var * spec.n ** (1.0 - 2.0 / p)))
    return VarianceReport(p=p, rows=rows)
