import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import cached_ops
from sbpdg.operators import (C_PLUS, VARIANTS, build_operators, check_divergence_theorem,
                             check_sbp, check_spd, dump_operators, filter_modal_leak,
                             k_annihilation, resolve_c)
from sbpdg.refelem import ConstructionError, triangle_volume_rule

PS = (2, 3, 4)


@pytest.mark.parametrize("p", PS)
@pytest.mark.parametrize("variant", ["QuadratureI", "Collocation"])
def test_sbp_holds(variant, p):
    assert check_sbp(cached_ops(variant, p)) <= 1e-12


@pytest.mark.parametrize("p", PS)
def test_sbp_fails_with_lobatto_facets(p):
    assert check_sbp(cached_ops("QuadratureII", p)) > 1e-3


@pytest.mark.parametrize("p", PS)
@pytest.mark.parametrize("variant", VARIANTS)
def test_divergence_theorem(variant, p):
    assert check_divergence_theorem(cached_ops(variant, p)) <= 1e-12


@pytest.mark.parametrize("p", PS)
@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("c", ["c_DG", "c_plus"])
def test_k_and_filter(variant, p, c):
    ops = cached_ops(variant, p, resolve_c(c, p))
    assert k_annihilation(ops) <= 1e-12
    check_spd(ops.M, "M")
    check_spd(ops.M + ops.K, "M + K")
    assert filter_modal_leak(ops) <= 1e-12
    if c == "c_DG":
        assert np.abs(ops.K).max() == 0
        assert np.abs(ops.F - np.eye(ops.n_modes)).max() < 1e-13


@pytest.mark.parametrize("p", PS)
def test_projection_is_left_inverse(p):
    for variant in VARIANTS:
        ops = cached_ops(variant, p)
        assert np.abs(ops.P @ ops.V - np.eye(ops.n_modes)).max() < 1e-12


@given(st.integers(1, 4), st.integers(0, 4), st.integers(0, 4))
def test_derivative_exact_on_monomials(p, i, j):
    if i + j > p:
        return
    ops = cached_ops("QuadratureI", p)
    x = ops.ip.nodes
    coef = ops.P @ (x[:, 0] ** i * x[:, 1] ** j)
    d1 = i * x[:, 0] ** max(i - 1, 0) * x[:, 1] ** j
    d2 = j * x[:, 0] ** i * x[:, 1] ** max(j - 1, 0)
    assert np.abs(ops.V @ ops.D[0] @ coef - d1).max() < 1e-11
    assert np.abs(ops.V @ ops.D[1] @ coef - d2).max() < 1e-11


def test_lifting_satisfies_penalized_identity():
    ops = cached_ops("QuadratureI", 3, C_PLUS[3])
    for f in range(3):
        assert np.allclose((ops.M + ops.K) @ ops.L[f], ops.Vf[f].T @ ops.Wf[f], atol=1e-12)


def test_resolve_c():
    assert resolve_c("c_DG", 3) == 0.0
    assert resolve_c("c_plus", 4) == 5.6e-6
    assert resolve_c(0.25, 2) == 0.25
    for bad in ("c_minus", -1.0):
        with pytest.raises(ValueError):
            resolve_c(bad, 2)
    with pytest.raises(ValueError, match="p=5"):
        resolve_c("c_plus", 5)


def test_deficient_volume_rule_rejected():
    # a degree-1 rule cannot make the p=3 mass matrix definite
    with pytest.raises(ConstructionError):
        build_operators("QuadratureI", 3, volume_rule=triangle_volume_rule(1))


def test_unknown_variant():
    with pytest.raises(ValueError):
        build_operators("QuadratureIII", 2)


def test_check_spd_reports_eigenvalues():
    with pytest.raises(ConstructionError, match="eigenvalues"):
        check_spd(np.diag([1.0, -1.0]), "A")
    with pytest.raises(ConstructionError, match="symmetric"):
        check_spd(np.array([[1.0, 1.0], [0.0, 1.0]]), "A")


def test_dump_operators(tmp_path):
    ops = cached_ops("Collocation", 2)
    dump_operators(ops, tmp_path)
    M = np.loadtxt(tmp_path / "Collocation_p2_c0_M.csv", delimiter=",")
    assert np.array_equal(M, ops.M)
    assert len(list(tmp_path.iterdir())) == len(ops.as_dict())
