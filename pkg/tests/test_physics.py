import numpy as np
import pytest
from hypothesis import given, strategies as st

from sbpdg.physics import (AdmissibilityError, AdvectionLaw, EulerLaw, VortexParams,
                           vortex_initial_condition)

GAMMA = 1.4
rng = np.random.default_rng(7)


def random_states(n, rng):
    rho = rng.uniform(0.2, 3.0, n)
    v = rng.uniform(-2.0, 2.0, (2, n))
    p = rng.uniform(0.2, 3.0, n)
    e = p / (GAMMA - 1) + 0.5 * rho * (v ** 2).sum(0)
    return np.stack([rho, rho * v[0], rho * v[1], e])


def random_normals(n, rng):
    ang = rng.uniform(0, 2 * np.pi, n)
    return np.stack([np.cos(ang), np.sin(ang)])


def test_euler_flux_consistency_and_conservation():
    law = EulerLaw(GAMMA)
    um, up, n = random_states(1000, rng), random_states(1000, rng), random_normals(1000, rng)
    scale = 1 + np.abs(law.normal_flux(um, n))
    assert np.abs(law.roe_flux(um, um, n) - law.normal_flux(um, n)).max() / scale.max() < 1e-13
    assert np.abs(law.roe_flux(um, up, n) + law.roe_flux(up, um, -n)).max() < 1e-13


def test_advection_flux_consistency_and_conservation():
    n = random_normals(1000, rng)
    for lam in (0.0, 0.5, 1.0):
        law = AdvectionLaw((1.0, 1.0))
        um, up = rng.normal(size=(2, 1000))
        assert np.abs(law.numerical_flux(um, um, n, lam) - law.normal_speed(n) * um).max() < 1e-13
        diff = law.numerical_flux(um, up, n, lam) + law.numerical_flux(up, um, -n, lam)
        assert np.abs(diff).max() < 1e-13


def test_upwinding():
    law = AdvectionLaw((1.0, 0.0))
    n = np.array([1.0, 0.0])
    assert law.numerical_flux(2.0, 5.0, n, 1.0) == 2.0
    assert law.numerical_flux(2.0, 5.0, -n, 1.0) == -5.0
    assert law.numerical_flux(2.0, 5.0, n, 0.0) == 3.5


def _normal_flux_complex(u, n, g):
    rho, m1, m2, e = u
    p = (g - 1) * (e - 0.5 * (m1 * m1 + m2 * m2) / rho)
    qn = (m1 * n[0] + m2 * n[1]) / rho
    return np.array([rho * qn, m1 * qn + p * n[0], m2 * qn + p * n[1], (e + p) * qn])


def _roe_oracle(ul, ur, n, g):
    """Central flux minus |A(roe state)| jump, with A from complex-step
    differentiation and |A| from its eigendecomposition."""
    def prim(u):
        rho, m1, m2, e = u
        p = (g - 1) * (e - 0.5 * (m1 * m1 + m2 * m2) / rho)
        return rho, m1 / rho, m2 / rho, (e + p) / rho
    rl, al, bl, hl = prim(ul)
    rr, ar, br, hr = prim(ur)
    wl = np.sqrt(rl) / (np.sqrt(rl) + np.sqrt(rr))
    wr = 1 - wl
    rho = np.sqrt(rl * rr)
    a, b, H = wl * al + wr * ar, wl * bl + wr * br, wl * hl + wr * hr
    q2 = a * a + b * b
    e = (rho * H + 0.5 * (g - 1) * rho * q2) / g
    u_hat = np.array([rho, rho * a, rho * b, e])
    A = np.empty((4, 4))
    h = 1e-30
    for j in range(4):
        du = u_hat.astype(complex)
        du[j] += 1j * h
        A[:, j] = _normal_flux_complex(du, n, g).imag / h
    lam, R = np.linalg.eig(A)
    absA = (R * np.abs(lam)) @ np.linalg.inv(R)
    central = 0.5 * (_normal_flux_complex(ul, n, g) + _normal_flux_complex(ur, n, g))
    return central - 0.5 * (absA.real @ (ur - ul))


def test_roe_matches_eigendecomposition_oracle():
    law = EulerLaw(GAMMA)
    um, up, n = random_states(50, rng), random_states(50, rng), random_normals(50, rng)
    ours = law.roe_flux(um, up, n)
    for i in range(50):
        ref = _roe_oracle(um[:, i], up[:, i], n[:, i], GAMMA)
        assert np.abs(ours[:, i] - ref).max() < 1e-11 * (1 + np.abs(ref).max())


@given(st.floats(0.1, 5), st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 5))
def test_contravariant_flux_matches_metric_contraction(rho, v1, v2, p):
    law = EulerLaw(GAMMA)
    u = np.array([rho, rho * v1, rho * v2, p / (GAMMA - 1) + 0.5 * rho * (v1 ** 2 + v2 ** 2)])
    G = np.array([[1.3, -0.2], [0.4, 0.9]])
    ref = np.einsum("mn,ne->me", G, law.flux(u))
    got = law.contravariant_flux(u[:, None], G[..., None])[..., 0]
    assert np.allclose(got, ref, rtol=1e-14, atol=1e-14)
    adv = AdvectionLaw((0.3, -1.1))
    ref = np.einsum("mn,n->m", G, adv.flux(2.0))
    got = adv.contravariant_flux(np.array([[2.0]]), G[..., None])[:, 0, 0]
    assert np.allclose(got, ref, rtol=1e-14)


def test_pressure_and_admissibility():
    law = EulerLaw(GAMMA)
    u = random_states(10, rng)
    law.check_admissible(u)
    u[0, 3] = -1.0
    with pytest.raises(AdmissibilityError, match=r"index \(3,\)"):
        law.check_admissible(u)


def test_vortex_state():
    params = VortexParams()
    assert params.period == pytest.approx(np.sqrt(2) * 10 / 0.4)
    far = vortex_initial_condition(np.array([[0.0, 0.0]]), params)[:, 0]
    rho, m1, m2, e = far
    # essentially the free stream away from the centre
    assert rho == pytest.approx(1.0, abs=1e-6)
    assert m1 / rho == pytest.approx(0.4 / np.sqrt(2), abs=1e-6)
    centre = vortex_initial_condition(np.array([[5.0, 5.0]]), params)[:, 0]
    assert centre[0] < 1.0
    # isentropic: p = rho^gamma everywhere
    x = np.random.default_rng(1).uniform(0, 10, (200, 2))
    u = vortex_initial_condition(x, params)
    assert np.allclose(EulerLaw().pressure(u), u[0] ** GAMMA, rtol=1e-13)


def test_vortex_rejects_bad_parameters():
    with pytest.raises(ValueError):
        vortex_initial_condition(np.zeros((1, 2)), VortexParams(strength=-1.0))
    with pytest.raises(ValueError, match="temperature"):
        vortex_initial_condition(np.array([[5.0, 5.0]]), VortexParams(mach=3.0))
