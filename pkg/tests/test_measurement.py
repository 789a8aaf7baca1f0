import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import sqrtm
from scipy.optimize import minimize_scalar

from conftest import PROPERTY_EXAMPLES, angle, ginibre_states, unit
from seqdiqkd.errors import DomainError
from seqdiqkd.measurement import (
    SIGMA_X,
    SIGMA_Z,
    Observable,
    UnsharpEffectPair,
    biased_chsh_value,
    chsh_value,
    correlator,
    eve_measurements,
    horodecki_chsh,
    joint_distribution,
    luders_update,
    rotated_settings,
    standard_settings,
)
from seqdiqkd.attacks import SequentialAttackParams, alice_eve_chsh, sequential_state
from seqdiqkd.quantum import I2, PHI_PLUS, DensityMatrix, is_positive_semidefinite

TSIRELSON = 2 * np.sqrt(2)
PHI = DensityMatrix.from_ket(PHI_PLUS, (2, 2))


class TestObservable:
    def test_rejects_non_unit(self):
        with pytest.raises(DomainError):
            Observable((1.0, 1.0, 0.0))

    def test_projectors(self):
        a = Observable.from_angle(0.3)
        p, m = a.effects()
        np.testing.assert_allclose(p + m, I2, atol=1e-15)
        np.testing.assert_allclose(p @ p, p, atol=1e-12)
        np.testing.assert_allclose(p - m, a.matrix, atol=1e-15)

    def test_bad_outcome(self):
        with pytest.raises(DomainError):
            SIGMA_Z.projector(0)

    def test_angle_convention(self):
        np.testing.assert_allclose(Observable.from_angle(np.pi / 2).matrix, SIGMA_X.matrix, atol=1e-15)


class TestUnsharp:
    def test_gamma_domain(self):
        with pytest.raises(DomainError):
            UnsharpEffectPair(SIGMA_Z, 1.2)

    def test_limits(self):
        sharp = UnsharpEffectPair(SIGMA_Z, 1.0)
        np.testing.assert_allclose(sharp.effects()[0], SIGMA_Z.projector(1), atol=1e-15)
        blind = UnsharpEffectPair(SIGMA_Z, 0.0)
        np.testing.assert_allclose(blind.effects()[0], I2 / 2, atol=1e-15)
        assert luders_update(PHI, blind.kraus()).matrix == pytest.approx(PHI.matrix)

    @settings(max_examples=PROPERTY_EXAMPLES)
    @given(unit, angle)
    def test_kraus_squares_to_effect(self, gamma, phi):
        m = UnsharpEffectPair(Observable.from_angle(phi), gamma)
        for k, e in zip(m.kraus().operators, m.effects()):
            np.testing.assert_allclose(k.conj().T @ k, e, atol=1e-12)
            np.testing.assert_allclose(k, k.conj().T, atol=1e-15)
        np.testing.assert_allclose(sum(k.conj().T @ k for k in m.kraus().operators), I2, atol=1e-12)

    @settings(max_examples=300)
    @given(st.floats(0.0, 0.999), angle)
    def test_kraus_is_principal_root(self, gamma, phi):
        # generic matrix square root as an independent route
        m = UnsharpEffectPair(Observable.from_angle(phi), gamma)
        for k, e in zip(m.kraus().operators, m.effects()):
            np.testing.assert_allclose(k, sqrtm(e), atol=1e-7)


class TestLuders:
    @settings(max_examples=PROPERTY_EXAMPLES)
    @given(ginibre_states(), unit, angle)
    def test_trace_preserved_and_valid(self, m, gamma, phi):
        rho = DensityMatrix(m, (2, 2))
        out = luders_update(rho, UnsharpEffectPair(Observable.from_angle(phi), gamma).kraus(), site=1)
        assert abs(np.trace(out.matrix).real - 1) < 1e-10
        assert is_positive_semidefinite(out.matrix, 1e-10)

    @settings(max_examples=300)
    @given(ginibre_states(), unit)
    def test_closed_form_channel(self, m, gamma):
        # dephasing form: (1+c)/2 rho + (1-c)/2 Z rho Z with c = sqrt(1-gamma^2)
        rho = DensityMatrix(m, (2, 2))
        out = luders_update(rho, UnsharpEffectPair(SIGMA_Z, gamma).kraus(), site=0)
        c = np.sqrt(1 - gamma**2)
        zz = np.kron(SIGMA_Z.matrix, I2)
        expected = (1 + c) / 2 * rho.matrix + (1 - c) / 2 * zz @ rho.matrix @ zz
        np.testing.assert_allclose(out.matrix, expected, atol=1e-12)

    def test_sharp_measurement_kills_coherence(self):
        out = luders_update(PHI, UnsharpEffectPair(SIGMA_Z, 1.0).kraus())
        np.testing.assert_allclose(out.matrix, np.diag([0.5, 0, 0, 0.5]), atol=1e-12)


class TestCorrelators:
    def test_joint_distribution_normalised(self):
        p = joint_distribution(PHI, SIGMA_Z, Observable.from_angle(0.4))
        assert p.sum() == pytest.approx(1.0, abs=1e-12)
        assert p[0, 0] == pytest.approx(np.cos(0.2) ** 2 / 2, abs=1e-12)

    def test_phi_plus_xz_correlator(self):
        for t in np.linspace(-np.pi, np.pi, 9):
            assert correlator(PHI, Observable.from_angle(t), SIGMA_Z) == pytest.approx(np.cos(t), abs=1e-12)

    def test_standard_settings_reach_tsirelson(self):
        (_, a1, a2), (b1, b2) = standard_settings()
        assert chsh_value(PHI, a1, a2, b1, b2) == pytest.approx(TSIRELSON, abs=1e-12)
        assert horodecki_chsh(PHI) == pytest.approx(TSIRELSON, abs=1e-12)

    def test_unsharp_correlator_scales(self):
        e = UnsharpEffectPair(SIGMA_Z, 0.4)
        assert correlator(PHI, SIGMA_Z, e) == pytest.approx(0.4, abs=1e-12)

    @settings(max_examples=PROPERTY_EXAMPLES)
    @given(ginibre_states(), angle, angle, angle, angle)
    def test_tsirelson_bound(self, m, t1, t2, t3, t4):
        rho = DensityMatrix(m, (2, 2))
        obs = [Observable.from_angle(t) for t in (t1, t2, t3, t4)]
        s = chsh_value(rho, *obs)
        assert abs(s) <= TSIRELSON + 1e-10
        assert abs(s) <= horodecki_chsh(rho) + 1e-9


class TestBiasedBell:
    @pytest.mark.parametrize("q", [0.5, 0.6, 0.75, 1.0])
    def test_local_bound_is_q(self, q):
        best = max(
            q / 2 * (a0 * b0 - a0 * b1 + a1 * b0 + a1 * b1) + 0.5 * (a0 * b1 + a1 * b1) - a1 * b1
            for a0, a1, b0, b1 in itertools.product((1, -1), repeat=4)
        )
        assert best == pytest.approx(q)

    def test_bias_domain(self):
        s = dict(zip(("A0", "A1", "B0", "B1"), (SIGMA_Z,) * 4))
        with pytest.raises(DomainError):
            biased_chsh_value(PHI, s, 0.4)

    @settings(max_examples=300)
    @given(st.floats(0.5, 0.99), unit, unit, st.floats(0.0, np.pi / 2))
    def test_alice_eve_mapping(self, q, g1, g2, theta):
        (_, a1, a2), _ = rotated_settings(theta)
        e1, e2 = eve_measurements(g1, g2)
        # Alice-Eve correlations live on the pre-attack state
        value = biased_chsh_value(PHI, {"A0": a1, "A1": a2, "B0": e1, "B1": e2}, q)
        assert value == pytest.approx(alice_eve_chsh(q, g1, g2, theta), abs=1e-12)


def _brute_force_chsh(rho, grid=64):
    """Planar-angle grid search followed by coordinate descent."""
    t = np.linspace(-np.pi, np.pi, grid, endpoint=False)
    obs = [Observable.from_angle(x) for x in t]
    E = np.array([[correlator(rho, a, b) for b in obs] for a in obs])
    # S = E[a1,b1] + E[a2,b1] + E[a1,b2] - E[a2,b2]; separable in b1 and b2 for fixed (a1, a2)
    plus = (E[:, None, :] + E[None, :, :]).max(axis=2)
    minus = (E[:, None, :] - E[None, :, :]).max(axis=2)
    i, j = np.unravel_index(np.argmax(plus + minus), plus.shape)
    b1 = np.argmax(E[i] + E[j])
    b2 = np.argmax(E[i] - E[j])
    x = np.array([t[i], t[j], t[b1], t[b2]])

    def s_of(v):
        a1, a2, c1, c2 = (Observable.from_angle(u) for u in v)
        return chsh_value(rho, a1, a2, c1, c2)

    for _ in range(12):
        for k in range(4):
            def f(u, k=k):
                v = x.copy()
                v[k] = u
                return -s_of(v)

            x[k] = minimize_scalar(f, bracket=(x[k] - 0.1, x[k] + 0.1), tol=1e-12).x
    return s_of(x)


class TestHorodeckiOracle:
    @pytest.mark.parametrize("q,gamma", [(0.6, 0.3), (0.5, 0.0), (0.55, 0.45), (0.68, 0.1)])
    def test_brute_force_matches_singular_values(self, q, gamma):
        rho = sequential_state(SequentialAttackParams(q, 1.0, gamma))
        assert _brute_force_chsh(rho) == pytest.approx(horodecki_chsh(rho), abs=1e-6)
