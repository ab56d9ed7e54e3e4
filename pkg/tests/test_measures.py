import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lpdvoretzky.errors import (
    InvalidDimensionError,
    MeasureValidationError,
    ScaleError,
    ShapeError,
    UnsupportedExponentError,
)
from lpdvoretzky.measures import (
    DiscreteIsotropicMeasure,
    NormBody,
    coordinate_measure,
    isotropy_residual,
    load_measure_csv,
    lp_ball_volume,
    mc_volume_check,
    norm,
    norm_p_gradient,
    power_norm,
    random_isotropic_measure,
    save_measure_csv,
)

# |B_3^3| and |B_2.5^4| from mpmath (40 digits), rounded
VOL_3_3 = 5.6965835415098351678
VOL_4_25 = 6.9359997400600568507


def test_coordinate_measure_n2():
    mu = coordinate_measure(2)
    assert mu.n_atoms == 4
    np.testing.assert_array_equal(mu.masses, 0.5)
    assert mu.total_mass == 2.0
    assert mu.is_coordinate


def test_coordinate_all_ones():
    for p in (1.0, 2.5, 3.0, 7.0):
        assert norm(NormBody(coordinate_measure(3), p), np.ones(3)) == pytest.approx(3 ** (1 / p), rel=1e-15)


def test_coordinate_isotropy_exact():
    assert isotropy_residual(coordinate_measure(5)) == 0.0
    assert isotropy_residual(coordinate_measure(3)) == 0.0


def test_zero_dimension():
    with pytest.raises(InvalidDimensionError):
        coordinate_measure(0)


def test_norm_examples():
    assert norm(NormBody(coordinate_measure(4), 3), np.eye(4)[0]) == 1.0
    assert norm(NormBody(coordinate_measure(2), 4), [1.0, 1.0]) == pytest.approx(2 ** 0.25, rel=1e-15)
    assert norm(NormBody(random_isotropic_measure(4, 9, 0), 3), np.zeros(4)) == 0.0


def test_norm_shape_error():
    with pytest.raises(ShapeError):
        norm(NormBody(coordinate_measure(3), 2), np.ones(4))


def test_perturbed_mass_residual():
    # raising both partners of +/-e_1 to 0.6 puts 1.2 on one diagonal entry
    mu = coordinate_measure(3)
    m = mu.masses.copy()
    m[0] = m[3] = 0.6
    bad = DiscreteIsotropicMeasure(mu.atoms, m, symmetrized=True, check_isotropy=False)
    assert isotropy_residual(bad) == pytest.approx(0.2, abs=1e-15)
    with pytest.raises(MeasureValidationError):
        DiscreteIsotropicMeasure(mu.atoms, m, symmetrized=True)


def test_validation():
    with pytest.raises(MeasureValidationError):
        DiscreteIsotropicMeasure([[1.0, 0.1]], [1.0], check_isotropy=False)
    with pytest.raises(MeasureValidationError):
        DiscreteIsotropicMeasure([[1.0, 0.0], [0.0, 1.0]], [1.0, 0.0])
    with pytest.raises(ShapeError):
        DiscreteIsotropicMeasure([[1.0, 0.0]], [1.0, 1.0])
    with pytest.raises(MeasureValidationError):
        # unmatched +/- masses
        DiscreteIsotropicMeasure([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
                                 [0.4, 0.6, 0.5, 0.5], symmetrized=True, check_isotropy=False)
    with pytest.raises(UnsupportedExponentError):
        NormBody(coordinate_measure(2), 0.5)


def test_immutable():
    mu = coordinate_measure(3)
    with pytest.raises(ValueError):
        mu.masses[0] = 2.0


def test_implicit_and_symmetrized_agree(rs):
    mu = random_isotropic_measure(5, 12, 3)
    sym = mu.symmetrize()
    assert isotropy_residual(sym) < 1e-12
    X = rs.standard_normal((50, 5))
    for q in (1.0, 2.5, 4.0):
        np.testing.assert_allclose(norm(NormBody(sym, q), X), norm(NormBody(mu, q), X), rtol=1e-13)


@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 1.5, 2.0, 3.0, 4.5]))
def test_norm_axioms(seed, q):
    g = np.random.default_rng(seed)
    body = NormBody(random_isotropic_measure(4, 10, seed % 7), q)
    x, y = g.standard_normal((2, 4))
    lam = g.standard_normal()
    nx, ny = norm(body, x), norm(body, y)
    assert norm(body, x + y) <= (nx + ny) * (1 + 1e-12)
    assert norm(body, lam * x) == pytest.approx(abs(lam) * nx, rel=1e-12)
    assert norm(body, -x) == nx


def test_norm_axioms_batch(rs):
    body = NormBody(random_isotropic_measure(6, 20, 1), 3.0)
    X, Y = rs.standard_normal((2, 1000, 6))
    assert np.all(norm(body, X + Y) <= (norm(body, X) + norm(body, Y)) * (1 + 1e-12))


@pytest.mark.parametrize("p", [2.0, 3.0, 6.0])
def test_bp_below_euclidean(p, rs):
    body = NormBody(random_isotropic_measure(5, 15, 2), p)
    X = rs.standard_normal((1000, 5))
    assert np.all(norm(body, X) <= np.linalg.norm(X, axis=1) * (1 + 1e-12))


@pytest.mark.parametrize("p,q", [(1.0, 2.0), (1.5, 3.0), (2.0, 5.0)])
def test_holder_direction(p, q, rs):
    mu = random_isotropic_measure(5, 15, 4)
    X = rs.standard_normal((1000, 5))
    lhs = norm(NormBody(mu, p), X)
    rhs = 5 ** (1 / p - 1 / q) * norm(NormBody(mu, q), X)
    assert np.all(lhs <= rhs * (1 + 1e-12))


def _fd_grad(body, x, h=1e-5):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (power_norm(body, x + e) - power_norm(body, x - e)) / (2 * h)
    return g


def test_gradient_finite_differences():
    g = np.random.default_rng(7)
    body = NormBody(random_isotropic_measure(6, 18, 5), 3.0)
    worst = 0.0
    for _ in range(100):
        x = g.standard_normal(6)
        an = norm_p_gradient(body, x)
        fd = _fd_grad(body, x)
        worst = max(worst, np.linalg.norm(an - fd) / np.linalg.norm(an))
    assert worst <= 1e-6


def test_gradient_coordinate_components(rs):
    p = 3.5
    body = NormBody(coordinate_measure(7), p)
    x = rs.standard_normal(7)
    np.testing.assert_allclose(norm_p_gradient(body, x), p * np.abs(x) ** (p - 1) * np.sign(x), rtol=1e-14)


def test_gradient_at_zero_and_domain():
    body = NormBody(random_isotropic_measure(3, 6, 0), 4.0)
    np.testing.assert_array_equal(norm_p_gradient(body, np.zeros(3)), 0.0)
    with pytest.raises(UnsupportedExponentError):
        norm_p_gradient(NormBody(coordinate_measure(3), 1.0), np.ones(3))


@pytest.mark.parametrize("q", [2.0, 3.0, 4.0])
def test_gradient_claim(q, rs):
    X = rs.standard_normal((200, 6))
    mu = random_isotropic_measure(6, 14, 9)
    lhs = np.linalg.norm(norm_p_gradient(NormBody(mu, q), X), axis=1)
    rhs = q * norm(NormBody(mu, 2 * q - 2), X) ** (q - 1)
    assert np.all(lhs <= rhs * (1 + 1e-12))
    cm = coordinate_measure(6)
    lhs = np.linalg.norm(norm_p_gradient(NormBody(cm, q), X), axis=1)
    rhs = q * norm(NormBody(cm, 2 * q - 2), X) ** (q - 1)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10)


def test_ball_volume_oracles():
    assert lp_ball_volume(2, 2) == pytest.approx(math.pi, rel=1e-14)
    assert lp_ball_volume(3, 3) == pytest.approx(VOL_3_3, rel=1e-13)
    assert lp_ball_volume(4, 2.5) == pytest.approx(VOL_4_25, rel=1e-13)
    assert lp_ball_volume(2, 4) == pytest.approx(4 * math.gamma(1.25) ** 2 / math.gamma(1.5), rel=1e-14)
    assert lp_ball_volume(2, 4) == pytest.approx(3.7081, abs=1e-4)


def test_volume_equality_cases():
    for p in (4.0, 2.0):
        chk = mc_volume_check(NormBody(coordinate_measure(2), p), 200_000, 1)
        assert abs(chk.estimate - chk.reference) <= 3 * chk.std_err
        assert chk.passed


def test_volume_random_measure():
    ang = np.array([0.1, 1.2, 2.2])
    A = np.column_stack([np.cos(ang), np.sin(ang)])
    evals, evecs = np.linalg.eigh(A.T @ A)
    V = A @ (evecs / np.sqrt(evals)) @ evecs.T
    lev = np.sum(V * V, axis=1)
    atoms = V / np.sqrt(lev)[:, None]
    mu = DiscreteIsotropicMeasure(np.vstack([atoms, -atoms]), np.concatenate([lev, lev]) / 2,
                                  symmetrized=True)
    assert mu.n_atoms == 6
    chk = mc_volume_check(NormBody(mu, 3.0), 200_000, 2)
    assert chk.passed


def test_volume_scale_guard():
    with pytest.raises(ScaleError):
        mc_volume_check(NormBody(coordinate_measure(5), 3.0), 1000, 0)


def test_measure_csv_roundtrip(tmp_path):
    for mu in (coordinate_measure(3), random_isotropic_measure(4, 9, 2)):
        path = tmp_path / "mu.csv"
        save_measure_csv(mu, path)
        back = load_measure_csv(path)
        np.testing.assert_array_equal(back.atoms, mu.atoms)
        np.testing.assert_array_equal(back.masses, mu.masses)
        assert back.symmetrized == mu.symmetrized


def test_measure_csv_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("theta_1,theta_2,weight\n1,0,1\n")
    with pytest.raises(MeasureValidationError):
        load_measure_csv(p)
    p.write_text("theta_1,theta_2,mass\n1,0,1\n0,1,0.5\n")
    with pytest.raises(MeasureValidationError):
        load_measure_csv(p)
    assert load_measure_csv(p, check_isotropy=False).n_atoms == 2


def test_trace_identity(rs):
    mu = random_isotropic_measure(5, 11, 8)
    T = rs.standard_normal((5, 5))
    lhs = np.trace(T)
    rhs = math.fsum(c * a @ T @ a for a, c in zip(mu.atoms, mu.masses))
    assert abs(lhs - rhs) <= 5 * max(isotropy_residual(mu), 1e-12) * np.linalg.norm(T)
