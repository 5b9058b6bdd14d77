import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import factorial

from sideband_cat import fock
from sideband_cat.errors import CutoffMismatch, TruncationError


def random_dm(rng, dim, rank=3):
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def test_vacuum_wigner_origin():
    rho = fock.ket_to_dm(fock.vacuum(5))
    assert fock.wigner_at(rho, 0, 0) == pytest.approx(1 / np.pi, abs=1e-14)


@pytest.mark.parametrize("eta", [0.0, 0.3, 0.68, 1.0])
def test_lossy_photon_parity(eta):
    rho = fock.apply_loss(fock.ket_to_dm(fock.fock_state(1, 4)), eta)
    assert fock.wigner_at(rho, 0, 0) == pytest.approx((1 - 2 * eta) / np.pi, abs=1e-12)
    grid = fock.wigner_grid(rho, [0.0], [0.0])[0, 0]
    assert grid == pytest.approx((1 - 2 * eta) / np.pi, abs=1e-12)


def test_wigner_routes_agree(rng):
    rho = random_dm(rng, 9)
    for x, p in [(0.3, -0.7), (1.2, 0.4), (-2.0, 1.5)]:
        assert fock.wigner_at(rho, x, p) == pytest.approx(fock.wigner_grid(rho, [x], [p])[0, 0], abs=1e-9)


def test_coherent_wigner_is_gaussian():
    alpha = 0.8 - 0.5j
    rho = fock.ket_to_dm(fock.coherent(alpha, 30))
    x0, p0 = np.sqrt(2) * alpha.real, np.sqrt(2) * alpha.imag
    for x, p in [(x0, p0), (0.0, 0.0), (1.0, -1.0)]:
        expected = np.exp(-(x - x0) ** 2 - (p - p0) ** 2) / np.pi
        assert fock.wigner_at(rho, x, p) == pytest.approx(expected, abs=1e-8)


def test_wigner_grid_normalized(rng):
    rho = random_dm(rng, 6)
    xs = np.linspace(-7, 7, 281)
    w = fock.wigner_grid(rho, xs, xs)
    assert np.sum(w) * (xs[1] - xs[0]) ** 2 == pytest.approx(1.0, abs=1e-6)


def test_squeeze_variances():
    r = 0.43
    rho = fock.ket_to_dm(fock.squeezed_vacuum(r, 30))
    for phi, var in [(0.0, np.exp(2 * r) / 2), (np.pi / 2, np.exp(-2 * r) / 2)]:
        xq = fock.quadrature_operator(phi, 30)
        assert fock.expect(rho, xq @ xq).real == pytest.approx(var, rel=1e-6)


def test_squeezed_vacuum_amplitudes():
    # closed form with tanh r; positive r anti-squeezes x(0), so all even amplitudes are positive
    r = 0.3
    ket = fock.squeezed_vacuum(r, 20)
    n = np.arange(11)
    expected = (np.tanh(r) ** n * np.sqrt(factorial(2 * n)) / (2 ** n * factorial(n))
                / np.sqrt(np.cosh(r)))
    assert np.allclose(ket[0::2], expected, atol=1e-9)
    assert np.allclose(ket[1::2], 0)


def test_squeeze_truncation_error():
    with pytest.raises(TruncationError):
        fock.squeeze(1.5, fock.vacuum(5))


def test_annihilate_single_photon():
    assert np.allclose(fock.annihilate(fock.fock_state(1, 3)), fock.vacuum(3))


def test_loss_composition_law(rng):
    rho = random_dm(rng, 10)
    a = fock.apply_loss(fock.apply_loss(rho, 0.8), 0.6)
    b = fock.apply_loss(rho, 0.48)
    assert np.max(np.abs(a - b)) < 1e-9


@settings(max_examples=30, deadline=None)
@given(eta=st.floats(0, 1), seed=st.integers(0, 2 ** 32 - 1), dim=st.integers(2, 12))
def test_loss_keeps_density_matrix(eta, seed, dim):
    rho = random_dm(np.random.default_rng(seed), dim)
    fock.check_density_matrix(fock.apply_loss(rho, eta))


def test_loss_mean_photon_number(rng):
    rho = random_dm(rng, 8)
    assert fock.photon_number_mean(fock.apply_loss(rho, 0.37)) == pytest.approx(
        0.37 * fock.photon_number_mean(rho), rel=1e-12)


def test_odd_cat_pure_wigner_origin():
    rho = fock.ket_to_dm(fock.odd_cat(1.1 + 0.3j, 25))
    assert fock.wigner_at(rho, 0, 0) == pytest.approx(-1 / np.pi, abs=1e-12)


def test_odd_cat_matches_coherent_difference():
    alpha = 0.9 - 0.2j
    cat = fock.coherent(alpha, 30) - fock.coherent(-alpha, 30)
    assert abs(np.vdot(fock.odd_cat(alpha, 30), cat / np.linalg.norm(cat))) == pytest.approx(1, abs=1e-12)


def test_odd_cat_small_alpha_limit():
    assert np.allclose(fock.odd_cat(0, 5), fock.fock_state(1, 5))
    assert abs(fock.odd_cat(1e-6, 5)[1]) == pytest.approx(1, abs=1e-10)


def test_odd_cat_truncation():
    with pytest.raises(TruncationError):
        fock.odd_cat(3.0, 5)


def test_fidelity_and_mismatch():
    cat = fock.odd_cat(0.7, 13)
    assert fock.fidelity(fock.ket_to_dm(cat), cat) == pytest.approx(1.0)
    with pytest.raises(CutoffMismatch):
        fock.fidelity(fock.ket_to_dm(cat), fock.vacuum(5))


def test_best_fit_recovers_pure_cat():
    alpha = 0.85 + 0.25j
    alpha_fit, f = fock.best_fit_odd_cat(fock.ket_to_dm(fock.odd_cat(alpha, 13)))
    assert f == pytest.approx(1, abs=1e-8)
    assert alpha_fit == pytest.approx(alpha, abs=1e-3)


def test_best_fit_single_photon_is_small_cat():
    alpha, f = fock.best_fit_odd_cat(fock.ket_to_dm(fock.fock_state(1, 13)))
    assert abs(alpha) < 0.05 and f == pytest.approx(1, abs=1e-6)


def test_state_fidelity_pure_limit(rng):
    rho = random_dm(rng, 6)
    psi = fock.normalize(rng.normal(size=6) + 1j * rng.normal(size=6))
    assert fock.state_fidelity(rho, fock.ket_to_dm(psi)) == pytest.approx(fock.fidelity(rho, psi), abs=1e-7)


def test_hermite_orthonormal():
    x = np.linspace(-12, 12, 4801)
    h = fock.hermite_functions(13, x)
    gram = h @ h.T * (x[1] - x[0])
    assert np.allclose(gram, np.eye(14), atol=1e-10)


def test_hermite_large_x_finite():
    h = fock.hermite_functions(40, np.array([-40.0, 0.0, 40.0]))
    assert np.all(np.isfinite(h))
    assert np.all(np.abs(h[:, [0, 2]]) < 1e-100)


@pytest.mark.parametrize("phi", [0.0, 0.7, np.pi])
def test_projector_completeness(phi):
    x = np.linspace(-8, 8, 3201)
    v = fock.quadrature_kets(13, x, phi)
    ident = (v * (x[1] - x[0])) @ v.conj().T
    assert np.max(np.abs(ident - np.eye(14))) < 1e-6


def test_marginal_moments(rng):
    rho = random_dm(rng, 8)
    x = np.linspace(-10, 10, 4001)
    # x^2 needs one level above the state's support to be exact
    big = np.zeros((9, 9), dtype=complex)
    big[:8, :8] = rho
    for phi in (0.0, 1.1):
        pdf = fock.quadrature_marginal(rho, phi, x)
        xq = fock.quadrature_operator(phi, 8)
        dx = x[1] - x[0]
        assert np.sum(pdf) * dx == pytest.approx(1, abs=1e-8)
        assert np.sum(x * pdf) * dx == pytest.approx(fock.expect(big, xq).real, abs=1e-8)
        assert np.sum(x ** 2 * pdf) * dx == pytest.approx(fock.expect(big, xq @ xq).real, abs=1e-8)


def test_dm_json_roundtrip(rng):
    rho = random_dm(rng, 5)
    assert np.array_equal(fock.dm_from_json(fock.dm_to_json(rho)), rho)


def test_wigner_csv_roundtrip(tmp_path, rng):
    rho = random_dm(rng, 4)
    xs, ps = np.linspace(-1, 1, 5), np.linspace(-2, 2, 3)
    w = fock.wigner_grid(rho, xs, ps)
    fock.write_wigner_csv(tmp_path / "w.csv", xs, ps, w)
    x, p, wv = fock.read_wigner_csv(tmp_path / "w.csv")
    X, P = np.meshgrid(xs, ps)
    assert np.array_equal(x, X.ravel()) and np.array_equal(p, P.ravel())
    assert np.array_equal(wv, w.ravel())


def test_check_density_matrix_rejects():
    with pytest.raises(ValueError):
        fock.check_density_matrix(np.diag([1.2, -0.2]))
