import numpy as np
import pytest

from tamelab.calculus import NearIdentityMap
from tamelab.darboux import (
    DarbouxInstance,
    darboux_solve,
    divergence,
    moser_path_solve,
    pullback_2form,
    radial_primitive,
)
from tamelab.errors import NeighborhoodError
from tamelab.grid import GridSection, NestedDomain, ck_norm
from tamelab.nashmoser import RunConfig, homotopy_contract_check, quadratic_check

ND = NestedDomain(2)


def form(amp=0.05, n=65):
    return GridSection.from_function(ND.box(1.0), (n, n), lambda x, y: amp * np.sin(x) * np.sin(y))


def test_radial_primitive_inverts_d():
    w = form(0.05, 129)
    alpha = radial_primitive(w)
    # d alpha = (d_x a2 - d_y a1) dx^dy must reproduce w in the interior
    from tamelab.calculus import derivative_section

    da = derivative_section(alpha, 0).values[..., 1] - derivative_section(alpha, 1).values[..., 0]
    inner = slice(5, -5)
    assert np.abs(da[inner, inner] - w.values[inner, inner, 0]).max() < 2e-5


def test_radial_primitive_constant_form():
    w = GridSection.from_function(ND.box(1.0), (65, 65), lambda x, y: np.ones_like(x))
    alpha = radial_primitive(w)
    mesh = w.node_mesh()
    # primitive of dx^dy is (x dy - y dx)/2
    assert np.abs(alpha.values[..., 0] + mesh[..., 1] / 2).max() < 1e-12
    assert np.abs(alpha.values[..., 1] - mesh[..., 0] / 2).max() < 1e-12


def test_divergence_of_h1_reproduces_form():
    inst = DarbouxInstance(grid_n=129)
    w = form(0.04, 129)
    v = inst.h1(w, 1.0, 0.7)
    dv = divergence(v)
    target = ND.box(0.6)
    resid = GridSection(dv.box, dv.values - inst.restrict(w, 0.7).values)
    assert ck_norm(resid, 0, target=target).value < 1e-3


def test_pullback_identity_map():
    u = form(0.05, 65)
    ident = NearIdentityMap.identity(ND.box(1.0), (65, 65))
    back = pullback_2form(u, ident, ND.box(0.5), (65, 65))
    want = GridSection.from_function(ND.box(0.5), (65, 65), lambda x, y: 0.05 * np.sin(x) * np.sin(y))
    assert np.abs(back.values - want.values).max() < 1e-5  # resampling error


def test_quadratic_check_trivial_for_darboux():
    inst = DarbouxInstance(grid_n=65)
    e = inst.section_from_form(lambda x, y: 0.05 * np.sin(x) * np.sin(y))
    assert quadratic_check(inst, e, 0, 0.5) == 0.0  # Q is linear (identically zero in 2d)


def test_homotopy_contract_residual():
    inst = DarbouxInstance(grid_n=129)
    e = inst.section_from_form(lambda x, y: 0.04 * np.sin(x + 0.3) * np.cos(y))
    resid, ratio = homotopy_contract_check(inst, e, 1.0, 0.7)
    assert resid < 1e-3
    assert ratio < 10.0


def test_degenerate_form_rejected():
    bad = GridSection.from_function(ND.box(1.0), (33, 33), lambda x, y: 0 * x - 1.5)
    with pytest.raises(NeighborhoodError):
        darboux_solve(bad)


def test_darboux_zero_amplitude_trivial():
    res = darboux_solve(form(0.0, 65))
    assert res.residual < 1e-12
    assert res.run_result.state.nu == 0
    assert np.abs(res.map.disp.values).max() < 1e-12


def test_darboux_constant_form_prenormalized():
    u = GridSection.from_function(ND.box(1.0), (65, 65), lambda x, y: 0 * x + 0.04)
    res = darboux_solve(u, RunConfig(t_0=2.7, tol=1e-6, nu_max=4))
    assert res.prenormalization is not None
    assert res.residual < 1e-6


def test_darboux_small_grid_end_to_end():
    res = darboux_solve(form(0.05, 65), RunConfig(t_0=2.7, tol=5e-5, nu_max=5))
    assert res.residual < 2e-4
    rows = res.run_result.state.ledger
    # superlinear decrease of the C^0 residual across steps
    resid = [r.residual for r in rows]
    assert resid[1] < 0.2 * resid[0]
    assert all(r.q_residual == 0.0 for r in rows)  # solutions stay solutions


def test_moser_oracle_normalizes():
    u = form(0.05, 129)
    phi = moser_path_solve(u, target_box=ND.box(0.5))
    resid = pullback_2form(u, phi, ND.box(0.5), (129, 129))
    assert ck_norm(resid, 0, target=ND.box(0.5)).value < 1e-4


def test_darboux_admissibility_rejection():
    from tamelab.errors import DivergenceError, NeighborhoodError

    huge = GridSection.from_function(ND.box(1.0), (65, 65), lambda x, y: 0.6 * np.sin(x) * np.sin(y))
    with pytest.raises((NeighborhoodError, DivergenceError)):
        darboux_solve(huge, RunConfig(t_0=2.7, tol=1e-5, nu_max=3))


def test_darboux_admissibility_margins_logged():
    res = darboux_solve(form(0.05, 65), RunConfig(t_0=2.7, tol=5e-5, nu_max=5))
    low_margin, high_margin = res.run_result.admissibility.margins
    assert low_margin > 0 and high_margin > 0
