import numpy as np
import pytest
from scipy.integrate import quad

from spacsfit import fock


def lossy_spacs(abs_alpha, phi, eta):
    return fock.apply_loss(fock.spacs_state(abs_alpha * np.exp(1j * phi)), eta)


class TestSpacsState:
    def test_alpha_zero_is_single_photon(self):
        rho = fock.spacs_state(0.0, n_max=5)
        expected = np.zeros((6, 6), dtype=complex)
        expected[1, 1] = 1.0
        assert np.allclose(rho.entries, expected, atol=1e-14)

    def test_alpha_one_fock1_amplitude(self):
        # |<1|psi>| = e^{-1/2}/sqrt(2), from the series and the 1/sqrt(1+|a|^2) norm
        rho = fock.spacs_state(1.0, n_max=30)
        amp = np.sqrt(rho.entries[1, 1].real)
        assert amp == pytest.approx(np.exp(-0.5) / np.sqrt(2.0), abs=1e-8)
        assert np.trace(rho.entries).real == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("alpha", [0.0, 0.3, 1.0 + 0.5j, 2.0 * np.exp(1j * 2.2)])
    def test_vacuum_component_empty(self, alpha):
        rho = fock.spacs_state(alpha)
        assert abs(rho.entries[0, 0]) < 1e-15
        assert abs(rho.entries[0, 5]) < 1e-15

    def test_truncation_rejected(self):
        with pytest.raises(ValueError, match="tail mass"):
            fock.spacs_state(2.0, n_max=6)

    def test_auto_truncation_grows(self):
        rho = fock.spacs_state(3.5)
        assert rho.dim > 31
        assert np.trace(rho.entries).real == pytest.approx(1.0, abs=1e-10)


class TestDensityMatrix:
    def test_rejects_non_hermitian(self):
        bad = np.eye(3, dtype=complex)
        bad[0, 1] = 0.1
        with pytest.raises(ValueError, match="Hermitian"):
            fock.DensityMatrix(bad)

    def test_rejects_wrong_trace(self):
        with pytest.raises(ValueError, match="trace"):
            fock.DensityMatrix(0.5 * np.eye(3, dtype=complex))

    def test_rejects_negative_eigenvalue(self):
        m = np.diag([1.2, -0.2, 0.0]).astype(complex)
        with pytest.raises(ValueError, match="eigenvalue"):
            fock.DensityMatrix(m)

    def test_json_round_trip(self):
        rho = lossy_spacs(0.7, 1.2, 0.6)
        again = fock.DensityMatrix.from_json(rho.to_json())
        assert np.allclose(again.entries, rho.entries, atol=0)


class TestApplyLoss:
    def test_eta_one_identity(self):
        rho = fock.spacs_state(0.9 + 0.2j)
        out = fock.apply_loss(rho, 1.0)
        assert np.allclose(out.entries, rho.entries, atol=1e-12)

    def test_single_photon_at_0p58(self):
        rho = fock.spacs_state(0.0, n_max=8)
        out = fock.apply_loss(rho, 0.58)
        diag = np.diag(out.entries).real
        assert diag[0] == pytest.approx(0.42, abs=1e-12)
        assert diag[1] == pytest.approx(0.58, abs=1e-12)
        assert np.all(np.abs(diag[2:]) < 1e-14)

    def test_eta_zero_full_loss(self):
        rho = fock.spacs_state(1.3 * np.exp(0.4j))
        out = fock.apply_loss(rho, 0.0)
        expected = np.zeros_like(out.entries)
        expected[0, 0] = 1.0
        assert np.allclose(out.entries, expected, atol=1e-12)

    @pytest.mark.parametrize("eta", [-0.1, 1.1])
    def test_eta_out_of_range(self, eta):
        with pytest.raises(ValueError, match="eta"):
            fock.apply_loss(fock.spacs_state(0.5), eta)

    def test_trace_preserved_and_purity_decreases(self):
        rho = fock.spacs_state(1.1 * np.exp(1j * 0.9))
        out = fock.apply_loss(rho, 0.73)
        assert np.trace(out.entries).real == pytest.approx(1.0, abs=1e-10)
        assert out.purity() <= rho.purity() + 1e-12

    def test_beamsplitter_cascade(self):
        rho = fock.spacs_state(0.8 * np.exp(1j * 2.0))
        cascade = fock.apply_loss(fock.apply_loss(rho, 0.8), 0.6)
        direct = fock.apply_loss(rho, 0.48)
        assert np.max(np.abs(cascade.entries - direct.entries)) < 1e-9


class TestTomogram:
    def test_vacuum_gaussian(self):
        vac = fock.DensityMatrix(np.diag([1.0] + [0.0] * 10).astype(complex))
        x = np.linspace(-5, 5, 101)
        for theta in (0.0, 1.1, 4.0):
            assert np.max(np.abs(fock.tomogram_of(vac, x, theta)
                                 - np.exp(-x**2) / np.sqrt(np.pi))) < 1e-12

    def test_fock_one(self):
        rho = fock.spacs_state(0.0, n_max=10)
        x = np.linspace(-5, 5, 101)
        expected = 2 * x**2 * np.exp(-x**2) / np.sqrt(np.pi)
        assert np.max(np.abs(fock.tomogram_of(rho, x, 0.3) - expected)) < 1e-12

    def test_normalization(self):
        rho = lossy_spacs(0.81, np.pi, 0.58)
        total, _ = quad(lambda x: fock.tomogram_of(rho, x, 1.0), -10, 10, limit=200)
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_nonnegative(self):
        rho = lossy_spacs(1.4, 0.3, 0.4)
        x = np.linspace(-8, 8, 401)
        assert np.min(fock.tomogram_of(rho, x, 2.0)) > -1e-12

    def test_reflection_symmetry(self):
        rho = lossy_spacs(0.9, 1.7, 0.65)
        x = np.linspace(-4, 4, 81)
        for theta in (0.0, 0.7, 2.9):
            w1 = fock.tomogram_of(rho, x, theta + np.pi)
            w2 = fock.tomogram_of(rho, -x, theta)
            assert np.max(np.abs(w1 - w2)) < 1e-12

    def test_scalar_input(self):
        rho = fock.spacs_state(0.0, n_max=5)
        assert isinstance(fock.tomogram_of(rho, 0.5, 0.0), float)


class TestHermiteFunctions:
    def test_vacuum_squared_is_gaussian(self):
        x = np.linspace(-6, 6, 241)
        psi = fock.hermite_functions(x, 0)
        assert np.max(np.abs(psi[:, 0] ** 2 - np.exp(-x**2) / np.sqrt(np.pi))) < 1e-12

    def test_orthonormal_up_to_30(self):
        # recurrence must stay stable at the default truncation
        x = np.arange(-12.0, 12.0, 0.01)
        psi = fock.hermite_functions(x, 30)
        gram = psi.T @ psi * 0.01
        assert np.max(np.abs(gram - np.eye(31))) < 1e-7


class TestTraceFunctionals:
    def test_pure_state_with_itself(self):
        rho = fock.spacs_state(0.6 * np.exp(1j * 1.0))
        tf = fock.trace_functionals(rho, rho)
        for v in (tf.overlap, tf.purity1, tf.purity2, tf.four_product):
            assert v == pytest.approx(1.0, abs=1e-10)

    def test_lossy_spacs_reference_values(self):
        # closed forms: Tr rho^2 = 0.8224, Tr rho^4 = 0.6605 at (0.81, 0.58)
        rho = lossy_spacs(0.81, 3.14, 0.58)
        tf = fock.trace_functionals(rho, rho)
        assert tf.purity1 == pytest.approx(0.8223626992645601, abs=1e-8)
        assert tf.four_product == pytest.approx(0.6605029038354067, abs=1e-8)

    def test_radicand_two_sig_figs(self):
        rho = lossy_spacs(0.81, 3.14, 0.58)
        tf = fock.trace_functionals(rho, rho)
        radicand = 2.0 * (tf.purity1**2 - tf.four_product)
        assert f"{radicand:.2g}" == "0.032"

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            fock.trace_functionals(fock.spacs_state(0.0, n_max=5), fock.spacs_state(0.0, n_max=6))

    @pytest.mark.parametrize("alpha,eta", [(0.3, 0.2), (0.81, 0.58), (1.7, 0.9)])
    def test_power_sum_inequality(self, alpha, eta):
        rho = lossy_spacs(alpha, 0.0, eta)
        tf = fock.trace_functionals(rho, rho)
        assert tf.four_product <= tf.purity1**2 + 1e-12


class TestSubFidelityExact:
    def test_identical_pure_states(self):
        rho = fock.spacs_state(0.5)
        assert fock.sub_fidelity_exact(rho, rho) == pytest.approx(1.0, abs=1e-10)

    def test_orthogonal_pure_states(self):
        dim = 6
        vac = np.zeros((dim, dim), dtype=complex)
        vac[0, 0] = 1.0
        one = np.zeros((dim, dim), dtype=complex)
        one[1, 1] = 1.0
        e = fock.sub_fidelity_exact(fock.DensityMatrix(vac), fock.DensityMatrix(one))
        assert e == pytest.approx(0.0, abs=1e-12)

    def test_lossy_spacs_with_itself(self):
        # E = 0.8224 + sqrt(0.0316) = 1.000 to three significant figures
        rho = lossy_spacs(0.81, 3.14, 0.58)
        e = fock.sub_fidelity_exact(rho, rho)
        assert e == pytest.approx(1.000, abs=5e-4)
        assert e <= 1.0 + 1e-9
