"""Random Gaussian embeddings of l_2^k into X_p(mu) and a posteriori distortion bounds.

A drawn ``G`` (``n x k``) is certified over a net ``N`` of ``S^{k-1}`` with
covering radius ``rho``. Writing ``f(x) = ||Gx||_{B_p(mu)}`` (convex, even,
1-homogeneous) and ``c = 1 - rho^2/2``:

* ``max_S f <= max_N f / c`` (the maximizing dual direction is within
  ``rho`` of a net point);
* for ``|x - u| <= rho`` the subgradient inequality gives
  ``f(x) >= c f(u) - sqrt(1 - c^2) |P_u^perp grad f(u)|`` and, by the
  triangle inequality, ``f(x) >= f(u) - rho max_S f``.

Both bounds hold for every sphere point, so ``T = G / lower`` satisfies
``|x| <= |Tx| <= (upper/lower) |x|``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, rng
from .concentration import psi
from .errors import DomainError, PrecisionError, ScaleError, UnsupportedRegimeError
from .gaussian import closed_form_moment, gaussian_moment
from .measures import norm, norm_p_gradient

CARDINALITY_GUARD = 10**7
CANDIDATES_PER_DIM = 100_000
MAX_NET_POINTS = 20_000
COVER_TEST_POINTS = 100_000
_CHUNK = 4096


# -- nets -------------------------------------------------------------------

def sphere_points(g, m, k):
    X = g.standard_normal((m, k))
    X /= np.linalg.norm(X, axis=1)[:, None]
    return X


def covering_radius(points, test):
    """Largest distance from a test point to its nearest net point."""
    worst = 0.0
    for s in range(0, test.shape[0], _CHUNK):
        best = np.max(test[s:s + _CHUNK] @ points.T, axis=1)
        worst = max(worst, float(np.max(2.0 - 2.0 * np.minimum(best, 1.0))))
    return math.sqrt(max(worst, 0.0))


def min_pairwise_distance(points):
    if points.shape[0] < 2:
        return math.inf
    best = -1.0
    for s in range(0, points.shape[0], _CHUNK):
        G = points[s:s + _CHUNK] @ points.T
        idx = np.arange(s, min(s + _CHUNK, points.shape[0]))
        G[idx - s, idx] = -np.inf
        best = max(best, float(np.max(G)))
    return math.sqrt(max(2.0 - 2.0 * best, 0.0))


@dataclass(frozen=True, eq=False)
class NetOnSphere:
    """Finite subset of ``S^{k-1}``.

    ``covering_radius`` is ``0`` for exact nets and otherwise the larger of
    ``delta`` and the radius measured on ``COVER_TEST_POINTS`` fresh points.
    """

    k: int
    delta: float
    points: np.ndarray
    method: str
    covering_radius: float
    seed: int

    @property
    def size(self):
        return self.points.shape[0]

    def metadata(self):
        return {"k": self.k, "delta": self.delta, "method": self.method, "size": self.size,
                "covering_radius": self.covering_radius, "seed": self.seed}


def net_cardinality_bound(k, delta):
    return (3.0 / delta) ** k


def _check_net_args(k, delta, method):
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise DomainError("k must be a positive integer")
    if not 0.0 < delta <= 2.0:
        raise DomainError("delta must lie in (0, 2]")
    if method not in ("greedy-farthest-point", "random-certified"):
        raise DomainError(f"unknown net method {method!r}")
    bound = net_cardinality_bound(k, delta)
    if bound > CARDINALITY_GUARD:
        raise ScaleError(f"(3/delta)^k = {bound:.3g} exceeds {CARDINALITY_GUARD:.0e}; use a larger delta")
    if method == "greedy-farthest-point" and not (k <= 8 or delta >= 0.2):
        raise ScaleError("greedy nets need k <= 8 or delta >= 0.2")


def _greedy(k, delta, g, candidates, max_points):
    C = sphere_points(g, candidates, k)
    mind2 = np.full(C.shape[0], np.inf)
    chosen = [0]
    d2 = delta * delta
    idx = kernels.farthest_update(C, C[0], mind2)
    while mind2[idx] >= d2:
        if len(chosen) >= max_points:
            raise ScaleError(f"greedy net exceeded {max_points} points; use a larger delta")
        chosen.append(idx)
        idx = kernels.farthest_update(C, C[idx], mind2)
    return C[chosen]


def _random_certified(k, delta, g, candidates, max_points):
    # random sequential packing: take candidates in draw order, keeping each
    # one that is still delta-far from everything kept
    C = sphere_points(g, candidates, k)
    mind2 = np.full(C.shape[0], np.inf)
    chosen = []
    d2 = delta * delta
    i = 0
    while True:
        rest = np.flatnonzero(mind2[i:] >= d2)
        if rest.size == 0:
            return C[chosen]
        if len(chosen) >= max_points:
            raise ScaleError(f"random net exceeded {max_points} points; use a larger delta")
        i += int(rest[0])
        chosen.append(i)
        kernels.farthest_update(C, C[i], mind2)


def build_net(k, delta, method="greedy-farthest-point", seed=0, *,
              candidates_per_dim=CANDIDATES_PER_DIM, max_points=MAX_NET_POINTS,
              test_points=COVER_TEST_POINTS):
    """Net of ``S^{k-1}`` with mesh ``delta``.

    Greedy: farthest-point selection from ``candidates_per_dim * k`` uniform
    candidates until every candidate is within ``delta``; the result is a
    ``delta``-packing. Random-certified: the same candidates taken in draw
    order, each kept when still ``delta``-far from those kept (also a packing).
    Both record the covering radius measured on ``test_points`` fresh points.
    ``k = 1`` returns ``{+1, -1}`` exactly.

    Raises
    ------
    ScaleError
        ``(3/delta)^k`` exceeds the cardinality guard, or the net outgrows
        its point budget.
    """
    _check_net_args(k, delta, method)
    if k == 1:
        pts = np.array([[1.0], [-1.0]])
        pts.setflags(write=False)
        return NetOnSphere(1, float(delta), pts, method, 0.0, int(seed))
    g = rng.generator(seed, "net")
    test = sphere_points(rng.generator(seed, "net-test"), int(test_points), k)
    cap = min(int(max_points), int(math.floor(net_cardinality_bound(k, delta))))
    if method == "greedy-farthest-point":
        pts = _greedy(k, float(delta), g, int(candidates_per_dim) * k, cap)
    else:
        pts = _random_certified(k, float(delta), g, int(candidates_per_dim) * k, cap)
    rho = max(float(delta), covering_radius(pts, test))
    pts = np.ascontiguousarray(pts)
    pts.setflags(write=False)
    return NetOnSphere(int(k), float(delta), pts, method, rho, int(seed))


# -- chaining schedule ------------------------------------------------------

@dataclass(frozen=True)
class ChainingSchedule:
    p: float
    levels: tuple  # (j, delta_j, t_j)
    S_p: float

    @property
    def total(self):
        return math.fsum(t for _, _, t in self.levels)


def chaining_normalizer(p):
    """``S_p = sum_{j >= 1} j^{p/2} e^{-j}``, summed until terms are negligible."""
    terms = []
    j = 1
    peak = 0.0
    while True:
        t = math.exp(0.5 * p * math.log(j) - j)
        terms.append(t)
        peak = max(peak, t)
        if j > p and t < 1e-18 * peak:
            break
        j += 1
    return math.fsum(terms)


def chaining_schedule(p, tail_tol=1e-15):
    """Levels ``delta_j = e^{-j}``, ``t_j = j^{p/2} e^{-j} / S_p`` with ``t_j >= tail_tol``."""
    if not p >= 2:
        raise DomainError("chaining schedule needs p >= 2")
    if not 0 < tail_tol < 1:
        raise DomainError("tail_tol must lie in (0, 1)")
    S = chaining_normalizer(p)
    levels = []
    j = 1
    peak_j = max(1, int(math.ceil(p / 2.0)))
    while True:
        t = math.exp(0.5 * p * math.log(j) - j) / S
        if t < tail_tol and j >= peak_j:
            break
        levels.append([j, math.exp(-j), t])
        j += 1
    while math.fsum(l[2] for l in levels) > 1.0:
        for l in levels:
            l[2] *= 1.0 - 2.0**-52
    return ChainingSchedule(float(p), tuple(tuple(l) for l in levels), S)


# -- certificates -----------------------------------------------------------

def _net_bounds(body, G, net):
    """Net extremes of ``f(u) = ||Gu||`` and certified sphere bounds."""
    U = net.points
    fvals = np.empty(U.shape[0])
    tang = np.empty(U.shape[0])
    for s in range(0, U.shape[0], _CHUNK):
        Y = U[s:s + _CHUNK] @ G.T
        f = norm(body, Y)
        fvals[s:s + _CHUNK] = f
        if net.covering_radius > 0:
            gy = norm_p_gradient(body, Y) / (body.q * f ** (body.q - 1.0))[:, None]
            gu = gy @ G
            radial = np.einsum("ij,ij->i", gu, U[s:s + _CHUNK])
            tang[s:s + _CHUNK] = np.linalg.norm(gu - radial[:, None] * U[s:s + _CHUNK], axis=1)
    rho = net.covering_radius
    c = 1.0 - 0.5 * rho * rho
    fmin, fmax = float(fvals.min()), float(fvals.max())
    if rho == 0.0:
        return fmin, fmax, fmax, fmin
    upper = fmax / c
    sub = c * fvals - math.sqrt(max(0.0, 1.0 - c * c)) * tang
    tri = fvals - rho * upper
    lower = float(np.min(np.maximum(sub, tri)))
    return fmin, fmax, upper, lower


def operator_norm_bound(n, k):
    """High-probability upper estimate ``1.1 (sqrt(n) + sqrt(k) + 3)`` of ``|G|_op``."""
    return 1.1 * (math.sqrt(n) + math.sqrt(k) + 3.0)


def power_iteration_norm(G, iters=100, seed=0):
    v = rng.generator(seed, "power-iter").standard_normal(G.shape[1])
    for _ in range(iters):
        v = G.T @ (G @ v)
        v /= np.linalg.norm(v)
    return float(np.linalg.norm(G @ v))


@dataclass(frozen=True, eq=False)
class DistortionCertificate:
    n: int
    k: int
    p: float
    eps_target: float
    net: dict
    ratio_min: float
    ratio_max: float
    lipschitz_slack: float
    slack_upper: float
    slack_lower: float
    lower: float
    upper: float
    I_p_hat: float
    I_p_std_err: float
    I_p_exact: float
    opnorm: float
    verdict: bool
    seed: int
    G: np.ndarray = field(repr=False)
    body: object = field(repr=False)

    @property
    def distortion_bound(self):
        return self.upper / self.lower if self.lower > 0 else math.inf

    def normalized_ratios(self, X):
        """``|Tx| / |x|_2`` with ``T = G / lower``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return norm(self.body, X @ self.G.T) / (np.linalg.norm(X, axis=1) * self.lower)

    def fresh_violations(self, points=10_000, seed=0):
        """Count of random directions with ``|Tx|`` outside ``[1/(1+eps), 1+eps]``."""
        X = sphere_points(rng.generator(seed, "fresh-directions"), int(points), self.k)
        r = self.normalized_ratios(X)
        e = self.eps_target
        return int(np.count_nonzero((r < 1.0 / (1.0 + e)) | (r > 1.0 + e)))

    def to_dict(self):
        out = {k: getattr(self, k) for k in (
            "n", "k", "p", "eps_target", "net", "ratio_min", "ratio_max", "lipschitz_slack",
            "slack_upper", "slack_lower", "lower", "upper", "I_p_hat", "I_p_std_err",
            "I_p_exact", "opnorm", "verdict", "seed")}
        out["distortion_bound"] = self.distortion_bound
        return out


def draw_embedding(n, k, seed):
    return rng.generator(seed, "embedding").standard_normal((n, k))


def _verdict(rmin, rmax, slack, eps):
    den = rmin - slack
    return bool(den > 0 and (rmax + slack) / den <= 1.0 + eps)


def distortion_certificate(body, k, eps_target, net_delta, samples_for_Ip=20_000, seed=0, *,
                           net=None, I_p=None, workers=None):
    """Draw ``G`` and bound ``max/min |Gx|`` over ``S^{k-1}`` from a net.

    ``ratio_min``/``ratio_max`` are net extremes divided by the MC estimate
    ``I_p_hat``; ``lipschitz_slack`` is the larger of the two convexity
    corrections on the same scale. ``verdict`` is
    ``(ratio_max + slack)/(ratio_min - slack) <= 1 + eps_target``.

    Raises
    ------
    PrecisionError
        Relative standard error of ``I_p_hat`` above ``eps_target/10``.
    """
    n, p = body.dim, body.q
    if not 1 <= k <= n:
        raise DomainError("need 1 <= k <= n")
    if not eps_target > 0:
        raise DomainError("eps_target must be positive")
    if p < 2:
        raise UnsupportedRegimeError("certificates are built for p >= 2")
    if net is None:
        net = build_net(k, net_delta, seed=seed)
    elif net.k != k:
        raise DomainError("net dimension does not match k")
    if I_p is None:
        I_p = gaussian_moment(body, p, samples_for_Ip, seed, workers)
    if I_p.std_err / I_p.value > eps_target / 10.0:
        raise PrecisionError(
            f"I_p relative std err {I_p.std_err / I_p.value:.2e} > eps/10; raise samples_for_Ip")
    G = draw_embedding(n, k, seed)
    G.setflags(write=False)
    fmin, fmax, upper, lower = _net_bounds(body, G, net)
    I = I_p.value
    s_up = (upper - fmax) / I
    s_lo = (fmin - lower) / I
    slack = max(s_up, s_lo)
    return DistortionCertificate(
        n=n, k=int(k), p=float(p), eps_target=float(eps_target), net=net.metadata(),
        ratio_min=fmin / I, ratio_max=fmax / I, lipschitz_slack=slack,
        slack_upper=s_up, slack_lower=s_lo, lower=lower, upper=upper,
        I_p_hat=I, I_p_std_err=I_p.std_err, I_p_exact=closed_form_moment(body),
        opnorm=max(operator_norm_bound(n, k), power_iteration_norm(G, seed=seed)),
        verdict=_verdict(fmin / I, fmax / I, slack, eps_target),
        seed=int(seed), G=G, body=body,
    )


# -- frontier ---------------------------------------------------------------

@dataclass
class FrontierRow:
    eps: float
    k_max: int
    psi: float
    pass_rate: float
    trials: int
    seed_base: int
    probes: dict


class _CertCache:
    """Certified ratio extremes per ``(k, trial)``; nets cached per ``k``."""

    def __init__(self, body, delta, trials, seed, I_p, workers):
        self.body, self.delta, self.trials, self.seed = body, delta, trials, seed
        self.I_p, self.workers = I_p, workers
        self._nets = {}
        self._bounds = {}

    def net(self, k):
        if k not in self._nets:
            try:
                self._nets[k] = build_net(k, self.delta, seed=self.seed)
            except ScaleError:
                self._nets[k] = None
        return self._nets[k]

    def ratios(self, k):
        if k not in self._bounds:
            net = self.net(k)
            if net is None:
                self._bounds[k] = None
            else:
                rows = []
                for t in range(self.trials):
                    G = draw_embedding(self.body.dim, k, self.seed + t)
                    fmin, fmax, upper, lower = _net_bounds(self.body, G, net)
                    I = self.I_p.value
                    rows.append((fmin / I, fmax / I, max(upper - fmax, fmin - lower) / I))
                self._bounds[k] = rows
        return self._bounds[k]

    def pass_rate(self, k, eps):
        rows = self.ratios(k)
        if rows is None:
            return 0.0
        return sum(_verdict(a, b, s, eps) for a, b, s in rows) / len(rows)


def frontier_sweep(body, eps_grid, trials=20, seed=0, net_delta=0.25, threshold=0.9,
                   k_limit=None, samples_for_Ip=20_000, workers=None):
    """Largest ``k`` with certified pass rate ``>= threshold`` for each ``eps``.

    Doubling over powers of two, then bisection. One net mesh is shared by
    all ``eps`` and each ``(k, trial)`` certificate is computed once, so the
    pass indicator is pointwise nondecreasing in ``eps`` and so is ``k_max``.
    A net refused by the size guard counts as a failure.
    """
    p, n = body.q, body.dim
    if not p > 2:
        raise UnsupportedRegimeError("frontier sweeps need p > 2")
    k_limit = n if k_limit is None else min(int(k_limit), n)
    I_p = gaussian_moment(body, p, samples_for_Ip, seed, workers)
    cache = _CertCache(body, float(net_delta), int(trials), int(seed), I_p, workers)
    out = []
    for eps in eps_grid:
        probes = {}

        def ok(k):
            probes[k] = cache.pass_rate(k, eps)
            return probes[k] >= threshold

        lo, hi = 0, None
        k = 1
        while k <= k_limit:
            if not ok(k):
                hi = k
                break
            lo = k
            k *= 2
        if hi is None:
            hi = k_limit + 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ok(mid):
                lo = mid
            else:
                hi = mid
        out.append(FrontierRow(eps=float(eps), k_max=lo, psi=psi(n, p, eps).value,
                               pass_rate=probes.get(lo, math.nan) if lo else 0.0,
                               trials=int(trials), seed_base=int(seed), probes=probes))
    return out
