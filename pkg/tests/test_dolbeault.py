import numpy as np
import pytest

from tamelab.dolbeault import (
    ComplexGridFunction,
    Form01,
    bump_split,
    cauchy_riemann,
    cauchy_transform_axis,
    dbar,
    dbar_axis,
    h1,
    h2,
    kernel_offset_table,
    sup_norm,
    _cell_moment,
    _slice_axis,
)
from tamelab.errors import DomainError


def sample1(fn, n=129, radius=1.0):
    return ComplexGridFunction.sample(fn, [radius], [n])


# ------------------------------------------------------------------ dbar
def test_dbar_holomorphic_vanishes():
    f = sample1(lambda z: z**3)
    assert sup_norm(dbar(f).comps[0], 0.9) < 1e-10


def test_dbar_zbar_is_one():
    f = sample1(np.conj)
    d = dbar(f).comps[0]
    assert sup_norm(d.copy_with(d.values - 1.0), 0.9) < 1e-10


def test_dbar_squares_to_zero():
    rng = np.random.default_rng(0)
    coeffs = {(a, b, c, d): complex(*rng.normal(size=2)) for a in range(2) for b in range(2) for c in range(2) for d in range(2)}
    f = ComplexGridFunction.sample_monomials(coeffs, [1.0, 1.0], [25])
    g = dbar(dbar(f))
    assert sup_norm(list(g.comps.values())[0], 0.8) < 1e-8


# ------------------------------------------------------ kernel quadrature
def test_cell_moment_singular_and_far():
    assert abs(_cell_moment(np.array([0.0 + 0j]), 0.1, 0.1)[0]) < 1e-15
    w = np.array([2.0 + 1.5j])
    got = _cell_moment(w, 0.1, 0.1)[0]
    assert got == pytest.approx(0.01 / w[0], rel=2e-4)


def test_cell_moment_matches_fine_quadrature_near():
    h = 0.1
    w0 = 0.15 + 0.05j
    xs = np.linspace(w0.real - h / 2, w0.real + h / 2, 801)[1::2]
    ys = np.linspace(w0.imag - h / 2, w0.imag + h / 2, 801)[1::2]
    Z = xs[:, None] + 1j * ys[None, :]
    assert _cell_moment(np.array([w0]), h, h)[0] == pytest.approx((1 / Z).mean() * h * h, rel=1e-6)


# -------------------------------------------------------- Cauchy transform
def test_transform_of_one_is_zbar_and_inverts_dbar():
    f = sample1(lambda z: np.ones_like(z), n=129)
    Tf = cauchy_riemann(f, 1.0, 0.5)
    d = dbar(Tf).comps[0]
    assert sup_norm(d.copy_with(d.values - 1.0), 0.5) < 1e-3
    z = Tf.plane_z(0)
    # jagged-disk boundary sliver keeps this a loose comparison
    assert sup_norm(Tf.copy_with(Tf.values - np.conj(z)), 0.5) < 5e-3


def test_transform_zero_and_zbar():
    z0 = sample1(lambda z: 0 * z)
    assert sup_norm(cauchy_riemann(z0, 1.0, 0.5), 0.5) == 0.0
    f = sample1(np.conj, n=129)
    Tf = cauchy_riemann(f, 1.0, 0.5)
    d = dbar(Tf).comps[0]
    zz = Tf.plane_z(0)
    assert sup_norm(d.copy_with(d.values - np.conj(zz)), 0.5) < 1e-3


def test_transform_domain_error():
    f = sample1(lambda z: np.ones_like(z))
    with pytest.raises(DomainError):
        cauchy_riemann(f, 0.4, 0.5)


def test_commutation_relations_n2():
    rng = np.random.default_rng(1)
    coeffs = {(a, b, c, d): complex(*rng.normal(size=2)) for a in range(2) for b in range(2) for c in range(2) for d in range(2)}
    f = ComplexGridFunction.sample_monomials(coeffs, [1.0, 1.0], [25])
    scale = sup_norm(f, 1.0)
    a = cauchy_transform_axis(cauchy_transform_axis(f, 0, 0.6), 1, 0.6)
    b = cauchy_transform_axis(cauchy_transform_axis(f, 1, 0.6), 0, 0.6)
    assert sup_norm(a.copy_with(a.values - b.values), 0.55) / scale < 1e-5
    c = dbar_axis(cauchy_transform_axis(f, 1, 0.6), 0)
    d = cauchy_transform_axis(dbar_axis(f, 0), 1, 0.6)
    assert sup_norm(c.copy_with(c.values - d.values), 0.55) / scale < 1e-4


# ------------------------------------------------------------- bump split
def test_bump_split_partition_and_supports():
    f = sample1(lambda z: np.cos(z.real) + 1j * z.imag, n=101)
    f1, f2 = bump_split(f, 0.5, 0.25)
    assert np.abs(f1.values + f2.values - f.values).max() < 1e-15
    z = f.plane_z(0)
    inner = np.abs(z) <= 0.5 + 0.25 * 0.5 - 1e-9
    assert np.abs(f2.values[inner]).max() == 0.0
    outer = np.abs(z) >= 1.0 - 1e-9
    assert np.abs(f1.values[outer]).max() == 0.0


def test_bump_split_zero_and_eps_validation():
    f = sample1(lambda z: 0 * z, n=33)
    f1, f2 = bump_split(f, 0.5)
    assert np.abs(f1.values).max() == 0.0 and np.abs(f2.values).max() == 0.0
    with pytest.raises(ValueError):
        bump_split(f, 0.5, eps=0.7)


# ------------------------------------------------------- homotopy operators
def test_h1_n1_reduces_to_transform():
    f = sample1(lambda z: np.conj(z) ** 2, n=65)
    beta = Form01([f])
    H = h1(beta, 1.0, 0.5)
    T = cauchy_transform_axis(f, 0, H.axes[0].radius + 1e-12)
    assert np.abs(H.values - T.values).max() < 1e-12


def test_h1_zero():
    f = sample1(lambda z: 0 * z, n=33)
    assert np.abs(h1(Form01([f]), 1.0, 0.5).values).max() == 0.0


def test_homotopy_identity_n1_polynomials():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(3):
        coeffs = {(a, b): complex(*rng.normal(size=2)) for a in range(3) for b in range(3)}
        f = ComplexGridFunction.sample_monomials(coeffs, [1.0], [129])
        beta = Form01([f])
        H = h1(beta, 1.0, 0.5)
        d = dbar(H).comps[0]
        win = f.restrict(H.axes[0].radius + 1e-9)
        worst = max(worst, sup_norm(d.copy_with(d.values - win.values), 0.5) / sup_norm(f, 1.0))
    assert worst < 1e-3


def test_homotopy_identity_n2():
    rng = np.random.default_rng(3)
    comps = []
    for _ in range(2):
        coeffs = {
            (a, b, c, d): complex(*rng.normal(size=2))
            for a in range(2) for b in range(2) for c in range(2) for d in range(2)
        }
        comps.append(ComplexGridFunction.sample_monomials(coeffs, [1.0, 1.0], [33], dtype=np.complex64))
    beta = Form01(comps)
    H = h1(beta, 1.0, 0.5)
    dH = dbar(H)
    H2 = h2(dbar(beta), 1.0, 0.5)
    for k in range(2):
        bw = beta.comps[k]
        for j in range(2):
            bw = _slice_axis(bw, j, H.axes[j].radius + 1e-9)
        diff = dH.comps[k].copy_with(dH.comps[k].values + H2.comps[k].values - bw.values)
        assert sup_norm(diff, 0.5) / sup_norm(beta.comps[k], 1.0) < 1e-2


def test_tame_slope_of_transform():
    """log ||Tf||_{k,r} vs log(s-r) must not decay worse than -(k+2)-0.5."""
    from tamelab.dolbeault import as_grid_section
    from tamelab.grid import Box, ck_norm

    f = sample1(lambda z: np.exp(z.real) * np.cos(2 * z.imag) + 1j * np.conj(z) ** 2, n=129)
    gaps = [0.1, 0.2, 0.3, 0.4, 0.5]
    for k in (0, 1, 2):
        norms = []
        for gap in gaps:
            r = 1.0 - gap
            Tf = cauchy_riemann(f, 1.0, r)
            sec = as_grid_section(Tf)
            norms.append(ck_norm(sec, k, target=Box(((-r, r), (-r, r)))).value)
        slope = np.polyfit(np.log(gaps), np.log(norms), 1)[0]
        assert slope >= -(k + 2) - 0.5


def test_table_cache_and_backends_agree():
    from tamelab._kernels import _cauchy, fallback

    n, h = 21, 0.1
    table = kernel_offset_table(n, h)
    assert kernel_offset_table(n, h) is table
    rng = np.random.default_rng(5)
    f = np.ascontiguousarray(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    a = _cauchy.table_apply(f, table, 3, 4, 7, 6)
    b = fallback.table_apply(f, table, 3, 4, 7, 6)
    assert np.abs(a - b).max() < 1e-12


def test_form_serialization_labeled_components():
    import json as _json

    f = sample1(lambda z: z + 2j * np.conj(z), n=17)
    beta = Form01([f])
    payload = _json.loads(beta.to_json())
    assert list(payload) == ["dzbar_1"]
    back = Form01.from_json(beta.to_json())
    assert np.abs(back.comps[0].values - f.values).max() < 1e-15
