"""Gaussian constants and Monte Carlo moments of B_q(mu) norms."""
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import digamma, gammaln

from . import rng
from .errors import DomainError, UnsupportedRegimeError
from .measures import norm, norm_p_gradient

_LOG_2 = math.log(2.0)
_LOG_PI = math.log(math.pi)


def sigma_p(p):
    """``(E|g|^p)^{1/p}`` for a standard Gaussian ``g``.

    Integer ``p`` uses exact integer moments (``(p-1)!!`` for even ``p``,
    ``2^j j! sqrt(2/pi)`` for ``p = 2j+1``); other ``p`` use log-Gamma.
    ``p = 0`` returns the limit ``exp(E log|g|)``.
    """
    p = float(p)
    if not p >= 0.0 or not math.isfinite(p):
        raise DomainError(f"sigma_p needs p >= 0, got {p!r}")
    if p == 0.0:
        return math.exp(0.5 * (digamma(0.5) + _LOG_2))
    if p.is_integer() and p <= 400:
        k = int(p)
        if k % 2 == 0:
            log_m = math.log(math.prod(range(1, k, 2)))
        else:
            j = (k - 1) // 2
            log_m = math.log(2**j * math.factorial(j)) + 0.5 * (_LOG_2 - _LOG_PI)
    else:
        log_m = 0.5 * p * _LOG_2 + gammaln(0.5 * (p + 1.0)) - 0.5 * _LOG_PI
    return math.exp(log_m / p)


@dataclass(frozen=True)
class MomentEstimate:
    """Estimate of ``I_r = (E||X||^r)^{1/r}`` with a delta-method standard error."""

    value: float
    std_err: float
    samples: int
    r: float
    seed: int

    def raw(self):
        """``(E||X||^r, std_err)`` on the un-rooted scale."""
        m = self.value**self.r
        return m, self.r * m / self.value * self.std_err if self.value > 0 else 0.0

    def to_dict(self):
        return asdict(self)


def _scaled_powers(values, r):
    """``values**r / exp(shift)`` and ``shift``; avoids overflow for large ``r``."""
    with np.errstate(divide="ignore"):
        L = r * np.log(values)
    shift = float(np.max(L))
    return np.exp(L - shift), shift


def _mean_var(y):
    n = y.shape[0]
    mean = math.fsum(y) / n
    var = math.fsum((y - mean) ** 2) / (n - 1)
    return mean, var


def moment_from_values(values, r, seed=0):
    """``I_r`` estimate from sampled norm values."""
    values = np.asarray(values, dtype=np.float64)
    N = values.shape[0]
    if N < 2:
        raise DomainError("need at least two samples")
    y, shift = _scaled_powers(values, r)
    mean, var = _mean_var(y)
    value = math.exp((math.log(mean) + shift) / r)
    se = value / (r * mean) * math.sqrt(var / N)
    return MomentEstimate(value=value, std_err=se, samples=int(N), r=float(r), seed=int(seed))


def ratio_from_values(values, r_num, r_den):
    """``I_{r_num} / I_{r_den}`` on shared samples with a delta-method standard error."""
    values = np.asarray(values, dtype=np.float64)
    N = values.shape[0]
    y1, s1 = _scaled_powers(values, r_num)
    y2, s2 = _scaled_powers(values, r_den)
    a, va = _mean_var(y1)
    b, vb = _mean_var(y2)
    cov = math.fsum((y1 - a) * (y2 - b)) / (N - 1)
    log_ratio = (math.log(a) + s1) / r_num - (math.log(b) + s2) / r_den
    ratio = math.exp(log_ratio)
    var_log = (va / (r_num * a) ** 2 + vb / (r_den * b) ** 2 - 2.0 * cov / (r_num * r_den * a * b)) / N
    return ratio, ratio * math.sqrt(max(var_log, 0.0))


def norm_samples(body, samples, seed, stream="moments", workers=None):
    """``||X||_{B_q}`` for ``samples`` standard Gaussian vectors, in shard order."""
    n = body.dim

    def shard(g, rows):
        return norm(body, g.standard_normal((rows, n)))

    parts = rng.map_shards(shard, seed, stream, int(samples), n, workers)
    return np.concatenate(parts) if parts else np.empty(0)


def gaussian_moment(body, r, samples=100_000, seed=0, workers=None):
    """Monte Carlo ``I_r(gamma_n, B_q(mu))``."""
    if r < 1:
        raise DomainError("moment order r must be >= 1")
    if samples < 2:
        raise DomainError("need at least two samples")
    return moment_from_values(norm_samples(body, samples, seed, workers=workers), r, seed)


def closed_form_moment(body):
    """Exact ``I_q(gamma_n, B_q(mu)) = (sigma_q^q mu(S^{n-1}))^{1/q}``."""
    q = body.q
    return sigma_p(q) * body.measure.total_mass ** (1.0 / q)


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    std_err: float
    passed: bool

    def to_dict(self):
        return asdict(self)


def moment_ratio_bound(q, r, n):
    """``sqrt(1 + q (r - 1) / (sigma_q^2 n^{2/q}))``."""
    return math.sqrt(1.0 + q * (r - 1.0) / (sigma_p(q) ** 2 * n ** (2.0 / q)))


def moment_ratio_check(body, r, samples=100_000, seed=0, workers=None):
    """MC ``I_{rq}/I_q`` against its log-Sobolev upper bound."""
    q, n = body.q, body.dim
    if q < 2 or r < 1:
        raise DomainError("moment ratio bound needs q >= 2 and r >= 1")
    values = norm_samples(body, samples, seed, workers=workers)
    lhs, se = ratio_from_values(values, r * q, q)
    rhs = moment_ratio_bound(q, r, n)
    return BoundCheck(lhs=lhs, rhs=rhs, std_err=se, passed=lhs <= rhs + 3.0 * se)


@dataclass(frozen=True)
class CriticalDimensionReport:
    k_hat: float
    k_hat_lower_b: float
    mean_sq: MomentEstimate
    b_upper: float
    b_lower: float
    regime: str

    def to_dict(self):
        d = asdict(self)
        d["mean_sq"] = self.mean_sq.to_dict()
        return d


def b_lower_estimate(body, restarts=32, steps=200, seed=0):
    """Heuristic lower bound for ``max_{|theta|_2 = 1} ||theta||_{B_q}``.

    Projected gradient ascent from ``restarts`` random sphere points with
    step ``0.1/sqrt(n)``; the compact atoms themselves are also evaluated as
    candidates.
    """
    n, q = body.dim, body.q
    if body.measure.is_coordinate:
        best = 1.0  # every e_i has norm exactly 1
    else:
        best = float(np.max(norm(body, body.measure.compact_atoms()[0])))
    T = rng.generator(seed, "b-lower").standard_normal((restarts, n))
    T /= np.linalg.norm(T, axis=1)[:, None]
    step = 0.1 / math.sqrt(n)
    for _ in range(steps):
        vals = norm(body, T)
        grad = norm_p_gradient(body, T) / (q * vals ** (q - 1.0))[:, None]
        T = T + step * grad
        T /= np.linalg.norm(T, axis=1)[:, None]
    return max(best, float(np.max(norm(body, T))))


def critical_dimension(body, samples=100_000, seed=0, workers=None):
    """``k(X) = E||g||^2 / b(X)^2`` with ``b <= 1`` from ``q >= 2``."""
    if body.q < 2:
        raise UnsupportedRegimeError("critical dimension needs q >= 2 (b_upper = 1)")
    mean_sq = gaussian_moment(body, 2.0, samples, seed, workers)
    b_upper = 1.0
    b_lower = min(b_lower_estimate(body, seed=seed), b_upper)
    e2 = mean_sq.value**2
    return CriticalDimensionReport(
        k_hat=e2 / b_upper**2,
        k_hat_lower_b=e2 / b_lower**2,
        mean_sq=mean_sq,
        b_upper=b_upper,
        b_lower=b_lower,
        regime="exact-b" if b_lower >= b_upper * (1.0 - 1e-12) else "bounded-b",
    )


def logsob_moment_growth_check(body, q_grid, samples=100_000, seed=0, workers=None):
    """``I_q/I_2 <= sqrt(1 + (q-2)/k(f))`` for ``f = ||.||_{B_p}``, ``k(f) = I_2^2``.

    Returns one row per grid value with the MC left side, the right side
    (itself estimated from the same samples) and a combined standard error.
    """
    if body.q < 2:
        raise UnsupportedRegimeError("||.||_{B_p} is 1-Lipschitz only for p >= 2")
    values = norm_samples(body, samples, seed, workers=workers)
    i2 = moment_from_values(values, 2.0, seed)
    k_f = i2.value**2
    se_k = 2.0 * i2.value * i2.std_err
    rows = []
    for q in q_grid:
        if q < 2:
            raise DomainError("q grid values must be >= 2")
        lhs, se_l = ratio_from_values(values, q, 2.0)
        rhs = math.sqrt(1.0 + (q - 2.0) / k_f)
        se_r = (q - 2.0) / (2.0 * k_f**2 * rhs) * se_k
        se = math.hypot(se_l, se_r)
        rows.append({"q": float(q), "lhs": lhs, "rhs": rhs, "std_err": se,
                     "k_f": k_f, "passed": lhs <= rhs + 3.0 * se})
    return rows
