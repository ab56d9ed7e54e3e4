"""Lewis position of a subspace ``{Ax}`` of ``l_p^m``.

The Lewis weights solve ``w_i = (a_i^T M(w)^{-1} a_i)^{p/2}`` with
``M(w) = A^T W^{1-2/p} A``. With ``R = M^{-1/2}`` the atoms
``theta_i = R a_i / |R a_i|`` and masses ``w_i`` form an isotropic measure
and ``x -> A R x`` is an isometry from ``X_p(mu)`` onto the subspace.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import kernels, rng
from .errors import ConvergenceError, DomainError, RankError, ShapeError
from .measures import DiscreteIsotropicMeasure, NormBody, isotropy_residual, norm

WEIGHT_FLOOR = 1e-300
REDUNDANT_FACTOR = 1e-14
EIG_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class SubspaceSpec:
    """Full-column-rank ``m x n`` matrix and exponent ``p``; norm ``x -> |Ax|_p``.

    Zero rows contribute nothing to the norm and are dropped on construction;
    their original indices are kept in ``pruned_rows``.
    """

    matrix: np.ndarray
    p: float
    rank_tol: float = 1e-10
    pruned_rows: tuple = field(default=())

    def __post_init__(self):
        A = np.array(self.matrix, dtype=np.float64, ndmin=2)
        if A.ndim != 2:
            raise ShapeError("matrix must be two-dimensional")
        if not (1.0 <= self.p < math.inf):
            raise DomainError(f"p must satisfy 1 <= p < inf, got {self.p!r}")
        if not np.all(np.isfinite(A)):
            raise ShapeError("matrix has non-finite entries")
        zero = ~np.any(A != 0.0, axis=1)
        if np.any(zero):
            kept = np.flatnonzero(~zero)
            A = A[kept]
            object.__setattr__(self, "pruned_rows", tuple(int(i) for i in np.flatnonzero(zero)))
        m, n = A.shape
        if n < 1 or m < n:
            raise RankError(f"need m >= n >= 1 after pruning zero rows, got {m} x {n}")
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] <= self.rank_tol * sv[0]:
            raise RankError(f"matrix is rank deficient: sigma_min/sigma_max = {sv[-1] / sv[0]:.3e}")
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "p", float(self.p))

    @property
    def m(self):
        return self.matrix.shape[0]

    @property
    def n(self):
        return self.matrix.shape[1]

    def norm(self, x):
        """``|A x|_p`` for a vector or a batch of row vectors."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n:
            raise ShapeError(f"expected vectors of length {self.n}")
        Y = np.atleast_2d(x) @ self.matrix.T
        s = kernels.power_sums(Y, np.ones(self.m), self.p) ** (1.0 / self.p)
        return float(s[0]) if x.ndim == 1 else s


@dataclass(frozen=True, eq=False)
class LewisPosition:
    weights: np.ndarray
    transform: np.ndarray
    measure: DiscreteIsotropicMeasure
    residual: float
    iterations: int
    p: float
    redundant: np.ndarray
    trace: tuple = ()

    @property
    def body(self):
        return NormBody(self.measure, self.p)

    def fixed_point_residual(self, spec):
        """``max_i |a_i^T M^{-1} a_i / w_i^{2/p} - 1|`` recomputed from scratch."""
        lev = _leverage(spec.matrix, self.weights, self.p, spec.rank_tol)
        return float(np.max(np.abs(lev / self.weights ** (2.0 / self.p) - 1.0)))

    def to_dict(self):
        return {
            "weights": self.weights.tolist(),
            "transform": self.transform.tolist(),
            "atoms": self.measure.atoms.tolist(),
            "masses": self.measure.masses.tolist(),
            "residual": self.residual,
            "iterations": self.iterations,
            "p": self.p,
        }

    @classmethod
    def from_dict(cls, d):
        weights = np.asarray(d["weights"], dtype=np.float64)
        measure = DiscreteIsotropicMeasure(d["atoms"], d["masses"], check_isotropy=False)
        n = measure.dim
        return cls(
            weights=weights,
            transform=np.asarray(d["transform"], dtype=np.float64).reshape(n, n),
            measure=measure,
            residual=float(d["residual"]),
            iterations=int(d["iterations"]),
            p=float(d["p"]),
            redundant=weights < REDUNDANT_FACTOR * n / weights.size,
        )


def _scaled_qr(A, w, p, rank_tol):
    """Leverage ``a_i^T M(w)^{-1} a_i`` and the R factor of ``W^{(1-2/p)/2} A``.

    The quadratic forms come from a triangular solve against the unscaled
    rows, which keeps full relative accuracy for rows with tiny weight.
    """
    log_s = 0.5 * (1.0 - 2.0 / p) * np.log(w)
    B = A * np.exp(log_s)[:, None]
    Rq = np.linalg.qr(B, mode="r")
    d = np.abs(np.diag(Rq))
    if d.min() <= rank_tol * d.max():
        raise RankError("scaled matrix lost rank during the Lewis iteration")
    Z = solve_triangular(Rq, A.T, trans="T", check_finite=False)
    return np.einsum("ij,ij->j", Z, Z), Rq


def _leverage(A, w, p, rank_tol=1e-10):
    """``a_i^T (A^T W^{1-2/p} A)^{-1} a_i``."""
    return _scaled_qr(A, w, p, rank_tol)[0]


def leverage_scores(A):
    """Statistical leverage ``a_i^T (A^T A)^{-1} a_i`` via a thin QR."""
    Q, _ = np.linalg.qr(np.asarray(A, dtype=np.float64))
    return np.einsum("ij,ij->i", Q, Q)


def inverse_sqrt_spd(M, floor=EIG_FLOOR):
    """``M^{-1/2}`` for symmetric positive definite ``M``, eigenvalues floored at ``floor * lam_max``."""
    M = 0.5 * (M + M.T)
    lam, V = np.linalg.eigh(M)
    lam = np.maximum(lam, floor * lam[-1])
    return (V / np.sqrt(lam)) @ V.T


def lewis_position(spec, fp_tol=1e-12, max_iter=20_000):
    """Solve for the Lewis weights of ``spec`` and build its isotropic measure.

    Damped multiplicative iteration in log space,
    ``log w <- (1 - eta) log w + eta log tau(w)``, started from ``w = n/m``.
    ``eta = 1`` for ``p < 4`` and ``eta = 2/p`` for ``p >= 4``; for
    ``p >= 4`` eta is halved (down to 1/64 of its start) whenever the
    residual grows. The residual is the larger of ``max |log tau - log w|``
    and the relative fixed-point defect.

    Raises
    ------
    ConvergenceError
        No convergence within ``max_iter``; the exception carries the trace.
    RankError
        The weighted matrix becomes numerically rank deficient.
    """
    if not fp_tol >= 1e-14:
        raise DomainError("fp_tol must be >= 1e-14")
    A, p = spec.matrix, spec.p
    m, n = A.shape
    w = np.full(m, n / m)
    eta = 1.0 if p < 4 else 2.0 / p
    eta_min = eta / 64.0
    trace = []
    prev = math.inf
    converged = False
    for it in range(1, max_iter + 1):
        lev, _ = _scaled_qr(A, w, p, spec.rank_tol)
        log_lev = np.log(lev)
        log_tau = 0.5 * p * log_lev
        log_w = np.log(w)
        step = log_tau - log_w
        fp_defect = np.expm1(log_lev - (2.0 / p) * log_w)
        res = float(max(np.max(np.abs(step)), np.max(np.abs(fp_defect))))
        trace.append(res)
        if res <= fp_tol:
            converged = True
            break
        if p >= 4 and res > prev:
            eta = max(0.5 * eta, eta_min)
        prev = res
        w = np.maximum(np.exp(log_w + eta * step), WEIGHT_FLOOR)
    if not converged:
        raise ConvergenceError(
            f"Lewis iteration did not reach {fp_tol:.1e} in {max_iter} steps (last {trace[-1]:.3e})",
            trace,
        )

    _, Rq = _scaled_qr(A, w, p, spec.rank_tol)
    R = inverse_sqrt_spd(Rq.T @ Rq)
    V = A @ R
    atoms = V / np.linalg.norm(V, axis=1)[:, None]
    atoms /= np.linalg.norm(atoms, axis=1)[:, None]
    measure = DiscreteIsotropicMeasure(atoms, w, check_isotropy=False)
    w.setflags(write=False)
    return LewisPosition(
        weights=w,
        transform=R,
        measure=measure,
        residual=res,
        iterations=it,
        p=p,
        redundant=w < REDUNDANT_FACTOR * n / m,
        trace=tuple(trace),
    )


def verify_isometry(pos, spec, trials=1000, seed=0):
    """Max relative gap between ``|A R x|_p`` and ``||x||_{B_p(mu)}`` over Gaussian ``x``."""
    if pos.transform.shape != (spec.n, spec.n) or pos.weights.shape[0] != spec.m:
        raise ShapeError("Lewis position does not match the subspace")
    X = rng.generator(seed, "isometry").standard_normal((int(trials), spec.n))
    lhs = spec.norm(X @ pos.transform.T)
    rhs = norm(NormBody(pos.measure, spec.p), X)
    return float(np.max(np.abs(lhs - rhs) / rhs))


def check_position(pos, spec):
    """Diagnostics dictionary for the type invariants."""
    return {
        "fixed_point_residual": pos.fixed_point_residual(spec),
        "weight_sum_error": abs(math.fsum(pos.weights) - spec.n),
        "isotropy_residual": isotropy_residual(pos.measure),
    }
