"""Discrete even isotropic measures on the sphere and their B_q norms.

A measure is a finite list of unit atoms ``theta_i`` with positive masses
``c_i``. Evenness is either explicit (``symmetrized=True``: atoms come in
``+/-`` pairs of equal mass) or implicit (``symmetrized=False``: each atom
stands for the pair ``+/-theta_i``, each carrying ``c_i / 2``). Norms,
gradients and the isotropy matrix only see ``|<x, theta>|`` and
``theta theta^T``, so both storage forms evaluate identically.
"""
import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from . import kernels, rng
from .errors import (
    DomainError,
    InvalidDimensionError,
    MeasureValidationError,
    ScaleError,
    ShapeError,
    UnsupportedExponentError,
)

UNIT_TOL = 1e-12
ISOTROPY_TOL = 1e-8
MASS_TOL = 1e-8
_GROUP_DECIMALS = 9


def _canonical_signs(atoms):
    """+1/-1 per row so that the first non-negligible coordinate is positive."""
    nz = np.abs(atoms) > UNIT_TOL
    first = np.argmax(nz, axis=1)
    lead = atoms[np.arange(atoms.shape[0]), first]
    return np.where(lead < 0, -1.0, 1.0)


def _group_pairs(atoms):
    """Group rows equal up to sign. Returns (signs, group labels, n_groups)."""
    signs = _canonical_signs(atoms)
    canon = atoms * signs[:, None]
    keys = np.ascontiguousarray(np.round(canon, _GROUP_DECIMALS) + 0.0)
    seen = {}
    labels = np.fromiter((seen.setdefault(row.tobytes(), len(seen)) for row in keys),
                         dtype=np.intp, count=keys.shape[0])
    return signs, labels, len(seen)


class DiscreteIsotropicMeasure:
    """Even weighted atom set on S^{n-1}.

    Parameters
    ----------
    atoms : array_like, shape (m, n)
        Unit vectors.
    masses : array_like, shape (m,)
        Strictly positive weights.
    symmetrized : bool
        Atoms are listed in explicit ``+/-`` pairs with equal mass.
    check_isotropy : bool
        Reject measures whose isotropy residual exceeds ``isotropy_tol`` or
        whose total mass differs from ``n`` by more than ``1e-8``. Disable
        only for diagnostics.
    """

    def __init__(self, atoms, masses, symmetrized=False, *, check_isotropy=True,
                 isotropy_tol=ISOTROPY_TOL):
        atoms = np.array(atoms, dtype=np.float64, ndmin=2)
        masses = np.array(masses, dtype=np.float64).reshape(-1)
        if atoms.ndim != 2 or atoms.shape[1] < 1:
            raise InvalidDimensionError("atoms must be a non-empty (m, n) array")
        if atoms.shape[0] != masses.shape[0]:
            raise ShapeError(f"{atoms.shape[0]} atoms but {masses.shape[0]} masses")
        if atoms.shape[0] == 0:
            raise MeasureValidationError("measure has no atoms")
        if not np.all(np.isfinite(atoms)) or not np.all(np.isfinite(masses)):
            raise MeasureValidationError("non-finite atom or mass")
        norms = np.linalg.norm(atoms, axis=1)
        bad = np.abs(norms - 1.0) > UNIT_TOL
        if np.any(bad):
            i = int(np.argmax(bad))
            raise MeasureValidationError(f"atom {i} has norm {norms[i]!r}, expected 1")
        if np.any(masses <= 0):
            raise MeasureValidationError("all masses must be strictly positive")
        atoms.setflags(write=False)
        masses.setflags(write=False)
        self.atoms = atoms
        self.masses = masses
        self.symmetrized = bool(symmetrized)
        self.isotropy_tol = float(isotropy_tol)
        if self.symmetrized:
            self._check_even()
        if check_isotropy:
            res = isotropy_residual(self)
            if res > isotropy_tol:
                raise MeasureValidationError(f"isotropy residual {res:.3e} exceeds {isotropy_tol:.1e}")
            if abs(self.total_mass - self.dim) > MASS_TOL * max(1.0, self.dim):
                raise MeasureValidationError(f"total mass {self.total_mass!r} differs from n={self.dim}")

    @property
    def dim(self):
        return self.atoms.shape[1]

    @property
    def n_atoms(self):
        return self.atoms.shape[0]

    @property
    def total_mass(self):
        return math.fsum(self.masses)

    def _check_even(self):
        signs, labels, groups = _group_pairs(self.atoms)
        plus = np.bincount(labels, weights=self.masses * (signs > 0), minlength=groups)
        minus = np.bincount(labels, weights=self.masses * (signs < 0), minlength=groups)
        scale = np.maximum(plus, minus)
        if np.any(np.abs(plus - minus) > 1e-12 * scale):
            raise MeasureValidationError("symmetrized measure is not even: unmatched +/- masses")

    @cached_property
    def _compact(self):
        if not self.symmetrized:
            atoms, masses = self.atoms, self.masses
        else:
            signs, labels, groups = _group_pairs(self.atoms)
            first = np.full(groups, -1)
            for i, g in enumerate(labels):
                if first[g] < 0:
                    first[g] = i
            atoms = self.atoms[first] * signs[first][:, None]
            masses = np.bincount(labels, weights=self.masses, minlength=groups)
        n = self.dim
        identity = atoms.shape == (n, n) and np.array_equal(atoms, np.eye(n))
        return np.ascontiguousarray(atoms), np.ascontiguousarray(masses), identity

    @property
    def is_coordinate(self):
        """Compact atoms are exactly the standard basis."""
        return self._compact[2]

    def compact_atoms(self):
        """One atom per ``+/-`` pair and its total pair mass."""
        atoms, masses, _ = self._compact
        return atoms, masses

    @property
    def compact_masses(self):
        return self._compact[1]

    def project(self, X):
        """Inner products ``<X_j, theta_i>`` against the compact atoms."""
        atoms, _, identity = self._compact
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.dim:
            raise ShapeError(f"vector length {X.shape[-1]} does not match dimension {self.dim}")
        if identity:
            return X
        return X @ atoms.T

    def symmetrize(self):
        """Explicit ``+/-`` form with each pair's mass split evenly."""
        if self.symmetrized:
            return self
        atoms = np.concatenate([self.atoms, -self.atoms])
        masses = np.concatenate([self.masses, self.masses]) / 2.0
        return DiscreteIsotropicMeasure(atoms, masses, symmetrized=True, check_isotropy=False)

    def __repr__(self):
        return (f"DiscreteIsotropicMeasure(dim={self.dim}, n_atoms={self.n_atoms}, "
                f"symmetrized={self.symmetrized})")


@dataclass(frozen=True)
class NormBody:
    """The body B_q(mu), unit ball of ``x -> (sum c_i |<x, theta_i>|^q)^(1/q)``."""

    measure: DiscreteIsotropicMeasure
    q: float

    def __post_init__(self):
        if not (self.q >= 1.0 and math.isfinite(self.q)):
            raise UnsupportedExponentError(f"q must be a finite real >= 1, got {self.q!r}")

    @property
    def dim(self):
        return self.measure.dim

    def with_q(self, q):
        return NormBody(self.measure, q)

    def norm(self, x):
        return norm(self, x)


class CoordinateMeasure(DiscreteIsotropicMeasure):
    """``+/-e_i`` with mass 1/2 each. Atoms are built only on request, so
    norms in large ``n`` never touch an ``n x n`` array."""

    def __init__(self, n):
        self._n = int(n)
        masses = np.full(2 * self._n, 0.5)
        masses.setflags(write=False)
        self.masses = masses
        self.symmetrized = True
        self.isotropy_tol = ISOTROPY_TOL

    @cached_property
    def atoms(self):
        eye = np.eye(self._n)
        a = np.concatenate([eye, -eye])
        a.setflags(write=False)
        return a

    @property
    def dim(self):
        return self._n

    @property
    def n_atoms(self):
        return 2 * self._n

    @cached_property
    def _compact(self):
        ones = np.ones(self._n)
        ones.setflags(write=False)
        return None, ones, True

    def compact_atoms(self):
        eye = np.eye(self._n)
        eye.setflags(write=False)
        return eye, self.compact_masses


def coordinate_measure(n):
    """Atoms ``+/-e_i`` with mass 1/2 each; X_p of it is ``l_p^n``."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidDimensionError(f"dimension must be a positive integer, got {n!r}")
    return CoordinateMeasure(n)


def random_isotropic_measure(n, m, seed):
    """Isotropic measure from the row directions of a Gaussian ``m x n`` matrix.

    Uses ``R = (A^T A)^{-1/2}``: atoms ``R a_i / |R a_i|`` with masses
    ``|R a_i|^2`` (the leverage scores), stored in implicit-even form.
    """
    if m < n:
        raise InvalidDimensionError("need m >= n atoms for an isotropic measure")
    A = rng.generator(seed, "random-measure").standard_normal((m, n))
    evals, evecs = np.linalg.eigh(A.T @ A)
    R = (evecs / np.sqrt(evals)) @ evecs.T
    V = A @ R
    lev = np.einsum("ij,ij->i", V, V)
    atoms = V / np.sqrt(lev)[:, None]
    atoms /= np.linalg.norm(atoms, axis=1)[:, None]
    return DiscreteIsotropicMeasure(atoms, lev)


def _as_batch(body, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != body.dim or x.ndim not in (1, 2):
        raise ShapeError(f"expected vectors of length {body.dim}, got shape {x.shape}")
    return np.atleast_2d(x), x.ndim == 1


def power_norm(body, x):
    """``||x||_{B_q}^q`` for a vector or a batch of row vectors."""
    X, single = _as_batch(body, x)
    s = kernels.power_sums(body.measure.project(X), body.measure.compact_masses, body.q)
    return float(s[0]) if single else s


def norm(body, x):
    """``||x||_{B_q(mu)}`` for a vector or a batch of row vectors."""
    s = power_norm(body, x)
    return s ** (1.0 / body.q)


def norm_p_gradient(body, x):
    """Gradient of ``x -> ||x||_{B_q}^q``.

    ``q * sum_i c_i |<x,theta_i>|^{q-1} sgn(<x,theta_i>) theta_i`` with
    ``sgn(0) = 0``, which also picks the zero subgradient for atoms
    orthogonal to ``x`` when ``q < 2``.
    """
    q = body.q
    if q <= 1.0:
        raise UnsupportedExponentError("gradient of ||x||^q needs q > 1")
    X, single = _as_batch(body, x)
    mu = body.measure
    S = kernels.signed_powers(mu.project(X), mu.compact_masses, q)
    G = q * (S if mu.is_coordinate else S @ mu.compact_atoms()[0])
    return G[0] if single else G


def isotropy_residual(measure):
    """Frobenius distance ``||sum c_i theta_i theta_i^T - I||_F``."""
    A = measure.atoms
    M = (A * measure.masses[:, None]).T @ A
    M[np.diag_indices_from(M)] -= 1.0
    return float(np.linalg.norm(M))


def lp_ball_volume(n, p):
    """``|B_p^n| = 2^n Gamma(1 + 1/p)^n / Gamma(1 + n/p)``."""
    return math.exp(n * math.log(2.0) + n * gammaln(1.0 + 1.0 / p) - gammaln(1.0 + n / p))


@dataclass(frozen=True)
class VolumeCheck:
    estimate: float
    std_err: float
    reference: float
    box_radius: float
    samples: int
    seed: int

    @property
    def passed(self):
        return self.estimate <= self.reference + 3.0 * self.std_err


def mc_volume_check(body, samples=200_000, seed=0, workers=None):
    """Monte Carlo volume of B_p(mu) against the l_p^n ball volume.

    Sampling box ``[-r, r]^n``: for ``p >= 2`` Hoelder with total mass ``n``
    gives ``|x|_2 <= n^{1/2 - 1/p} ||x||_{B_p}``; for ``p <= 2`` isotropy
    gives ``|x|_2 <= ||x||_{B_p}``.
    """
    n, p = body.dim, body.q
    if n > 4:
        raise ScaleError(f"volume Monte Carlo is limited to n <= 4 (got n={n})")
    if samples < 2:
        raise DomainError("need at least two samples")
    r = n ** (0.5 - 1.0 / p) if p >= 2 else 1.0

    def shard(g, rows):
        X = g.uniform(-r, r, size=(rows, n))
        return int(np.count_nonzero(norm(body, X) <= 1.0))

    hits = sum(rng.map_shards(shard, seed, "volume", samples, n, workers))
    box = (2.0 * r) ** n
    frac = hits / samples
    return VolumeCheck(
        estimate=box * frac,
        std_err=box * math.sqrt(frac * (1.0 - frac) / samples),
        reference=lp_ball_volume(n, p),
        box_radius=r,
        samples=int(samples),
        seed=int(seed),
    )


def load_measure_csv(path, *, check_isotropy=True, isotropy_tol=ISOTROPY_TOL):
    """Read ``theta_1,...,theta_n,mass`` rows; ``+/-`` pairing is detected."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise MeasureValidationError(f"{path}: empty file")
        n = len(header) - 1
        expected = [f"theta_{i}" for i in range(1, n + 1)] + ["mass"]
        if [h.strip() for h in header] != expected:
            raise MeasureValidationError(f"{path}: header must be {','.join(expected)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n + 1:
                raise MeasureValidationError(f"{path}:{lineno}: expected {n + 1} fields")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise MeasureValidationError(f"{path}:{lineno}: {exc}") from None
    data = np.array(rows, dtype=np.float64).reshape(-1, n + 1)
    atoms, masses = data[:, :n], data[:, n]
    try:
        return DiscreteIsotropicMeasure(atoms, masses, symmetrized=True,
                                        check_isotropy=check_isotropy, isotropy_tol=isotropy_tol)
    except MeasureValidationError as exc:
        if "not even" not in str(exc):
            raise
    return DiscreteIsotropicMeasure(atoms, masses, symmetrized=False,
                                    check_isotropy=check_isotropy, isotropy_tol=isotropy_tol)


def save_measure_csv(measure, path):
    n = measure.dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"theta_{i}" for i in range(1, n + 1)] + ["mass"])
        for atom, mass in zip(measure.atoms, measure.masses):
            w.writerow([repr(float(v)) for v in atom] + [repr(float(mass))])
