import math

import numpy as np
import pytest

from tamelab.calculus import (
    NearIdentityMap,
    SectionOverBase,
    TimeDepVectorField,
    act,
    compose,
    compose_maps,
    flow,
    flow_action_residual,
    infinite_compose,
    infinitesimal_action,
    invert,
    iterated_flow_convergence,
)
from tamelab.errors import DomainError, IncompatibleError, ThresholdError
from tamelab.grid import Box, GridSection

C1 = Box(((-2.0, 2.0),))
B1 = Box(((-1.0, 1.0),))
TOT = Box(((-2.0, 2.0), (-2.0, 2.0)))


# ------------------------------------------------------------------ compose
def test_compose_identity_displacement():
    g = GridSection.from_function(C1, (201,), lambda x: np.sin(x))
    f0 = GridSection.from_function(B1, (101,), lambda x: 0 * x)
    out = compose(g, f0)
    assert np.abs(out.values[:, 0] - np.sin(np.linspace(-1, 1, 101))).max() < 1e-12


def test_compose_linear_kills_quadratic_remainder():
    g = GridSection.from_function(TOT, (101, 101), lambda x, y: 3 * x - 2 * y)
    f = GridSection.from_function(
        B1, (101,), lambda x: np.stack([0.03 * np.sin(x), 0.02 * np.cos(x)], axis=-1)
    )
    comp = compose(g, f)
    xs = np.linspace(-1, 1, 101)
    expect = 3 * xs + 3 * 0.03 * np.sin(xs) - 2 * 0.02 * np.cos(xs)
    assert np.abs(comp.values[:, 0] - expect).max() < 1e-9


def test_compose_quadratic_remainder_scales():
    g = GridSection.from_function(TOT, (201, 201), lambda x, y: y**2)
    rems = []
    for eps in (1e-2, 1e-3):
        f = GridSection.from_function(B1, (101,), lambda x: np.stack([0 * x, eps * np.sin(x)], axis=-1))
        rems.append(np.abs(compose(g, f).values).max() / eps**2)
    assert rems[0] == pytest.approx(rems[1], rel=1e-6)


def test_compose_threshold_and_domain_errors():
    g = GridSection.from_function(C1, (51,), np.sin)
    big = GridSection.from_function(B1, (51,), lambda x: 0 * x + 0.2)
    with pytest.raises(ThresholdError):
        compose(g, big)
    runaway = GridSection.from_function(B1, (51,), lambda x: 0 * x + 1.5)
    with pytest.raises((ThresholdError, DomainError)):
        compose(g, runaway, theta=2.0)


def test_compose_associativity():
    h = GridSection.from_function(Box(((-2.5, 2.5),)), (501,), lambda x: np.cos(2 * x))
    gmap = NearIdentityMap.from_function(C1, (401,), lambda x: 0.02 * np.sin(x))
    fmap = NearIdentityMap.from_function(Box(((-1.5, 1.5),)), (301,), lambda x: 0.02 * np.cos(x))
    left = compose(compose(h, gmap.disp, theta=0.1), fmap.disp, theta=0.1)
    gf = compose_maps(gmap, fmap, box=B1, counts=(201,))
    right = compose(h, gf.disp, theta=0.1)
    pts = np.linspace(-0.9, 0.9, 50)[:, None]
    assert np.abs(left.eval(pts) - right.eval(pts)).max() < 1e-8


# ------------------------------------------------------------------ invert
def test_invert_zero_and_translation():
    z = NearIdentityMap.from_function(C1, (101,), lambda x: 0 * x)
    assert np.abs(invert(z, B1).disp.values).max() == 0.0
    tr = NearIdentityMap.from_function(C1, (101,), lambda x: 0 * x + 0.04)
    assert np.abs(invert(tr, B1).disp.values + 0.04).max() < 1e-12


def test_invert_two_sided_residuals():
    phi = NearIdentityMap.from_function(C1, (401,), lambda x: 0.045 * np.sin(x))
    inv = invert(phi, B1)
    pts = np.linspace(-1, 1, 201)[:, None]
    assert np.abs(phi(inv(pts)) - pts).max() < 1e-10
    inner = np.linspace(-0.9, 0.9, 101)[:, None]
    assert np.abs(inv(phi(inner)) - inner).max() < 1e-8
    # fitted |f|_k <= C_k |g|_k stays modest
    assert inv.norm(2) <= 3 * phi.norm(2)


def test_invert_threshold():
    phi = NearIdentityMap.from_function(C1, (101,), lambda x: 0.3 * np.sin(x))
    with pytest.raises(ThresholdError):
        invert(phi, B1)


# ------------------------------------------------------------------ flow
def test_flow_constant_translation():
    v = TimeDepVectorField.from_function(C1, (201,), lambda t, x: 0 * x + 0.03)
    ph = flow(v, 1.0, B1)
    assert np.abs(ph.disp.values - 0.03).max() < 1e-12


def test_flow_linear_matches_exp():
    A = 0.02
    v = TimeDepVectorField.from_function(C1, (401,), lambda t, x: A * x)
    ph = flow(v, 1.0, B1, tol=1e-12)
    xs = np.linspace(-1, 1, 21)[:, None]
    assert np.abs(ph(xs) - math.exp(A) * xs).max() < 1e-8


def test_flow_norm_linear_in_time():
    v = TimeDepVectorField.from_function(C1, (401,), lambda t, x: 0.03 * np.sin(x))
    ratios = [flow(v, t, B1, tol=1e-11).norm(1) / t for t in (0.25, 0.5, 1.0)]
    assert max(ratios) / min(ratios) < 1.10


def test_flow_group_law():
    v = TimeDepVectorField.from_function(C1, (401,), lambda t, x: 0.03 * np.sin(x))
    p1 = flow(v, 0.3, Box(((-1.5, 1.5),)), counts=(301,), tol=1e-12)
    p2 = flow(v, 0.45, B1, counts=(201,), tol=1e-12)
    p3 = flow(v, 0.75, B1, counts=(201,), tol=1e-12)
    assert np.abs(compose_maps(p1, p2, theta=1.0).disp.values - p3.disp.values).max() < 1e-10


def test_flow_escape_error():
    from tamelab.errors import EscapeError

    v = TimeDepVectorField.from_function(Box(((-1.02, 1.02),)), (201,), lambda t, x: 0 * x + 0.04)
    with pytest.raises(EscapeError):
        flow(v, 1.0, B1)


# ------------------------------------------------------------------ act
def test_act_identity_returns_section():
    e = SectionOverBase(GridSection.from_function(Box(((-1.2, 1.2),)), (201,), lambda x: 0.03 * np.sin(2 * x)), TOT)
    ident = NearIdentityMap.identity(TOT, (61, 61))
    W = Box(((-0.8, 0.8),))
    res, cert = act(e, ident, W, theta=0.5)
    pts = np.linspace(-0.8, 0.8, 41)[:, None]
    assert np.abs(res.section.eval(pts) - e.section.eval(pts)).max() < 1e-12
    assert cert.roundtrip_residual < 1e-12


def test_act_rotation_oracle():
    th = 0.1
    rot = NearIdentityMap.from_function(
        TOT,
        (201, 201),
        lambda x, y: np.stack(
            [(np.cos(th) - 1) * x - np.sin(th) * y, np.sin(th) * x + (np.cos(th) - 1) * y], axis=-1
        ),
    )
    e0 = SectionOverBase(GridSection.from_function(Box(((-1.0, 1.0),)), (201,), lambda x: 0 * x), TOT)
    W = Box(((-0.8, 0.8),))
    res, cert = act(e0, rot, W, theta=0.5)
    xs = np.linspace(-0.8, 0.8, 17)[:, None]
    assert np.abs(res.section.eval(xs)[:, 0] + np.tan(th) * xs[:, 0]).max() < 1e-8
    assert cert.roundtrip_residual < 1e-9


def test_act_fiber_preserving_is_pullback():
    # phi(x, y) = (x + a(x), y + c(x) y): base map id+a, fiber map per x
    a, c = 0.03, 0.04
    phi = NearIdentityMap.from_function(
        TOT, (201, 201), lambda x, y: np.stack([a * np.sin(x), c * np.cos(x) * y], axis=-1)
    )
    e = SectionOverBase(GridSection.from_function(Box(((-1.2, 1.2),)), (241,), lambda x: 0.03 * np.cos(x)), TOT)
    W = Box(((-0.8, 0.8),))
    res, cert = act(e, phi, W, theta=0.5)
    # nodewise oracle: solve phi_0(z) = ..., i.e. y(x): y + c cos(x) y = e(x + a sin(x))
    xs = np.linspace(-0.8, 0.8, 33)
    want = 0.03 * np.cos(xs + a * np.sin(xs)) / (1 + c * np.cos(xs))
    got = res.section.eval(xs[:, None])[:, 0]
    assert np.abs(got - want).max() < 1e-9


def test_act_transversality_failure():
    # almost-vertical shear of the graph: fiber direction collapses
    e = SectionOverBase(GridSection.from_function(Box(((-1.2, 1.2),)), (101,), lambda x: 0 * x), TOT)
    phi = NearIdentityMap.from_function(
        TOT, (101, 101), lambda x, y: np.stack([0 * x, -0.999 * y], axis=-1)
    )
    with pytest.raises((IncompatibleError, ThresholdError)):
        act(e, phi, Box(((-0.5, 0.5),)), theta=2.0)


# ------------------------------------------------ infinitesimal action
def test_infinitesimal_action_formula_cases():
    b = SectionOverBase(GridSection.from_function(Box(((-1.0, 1.0),)), (401,), lambda x: 0.05 * x**2), TOT)
    horiz = GridSection.from_function(TOT, (101, 101), lambda x, y: np.stack([np.ones_like(x), 0 * y], axis=-1))
    d = infinitesimal_action(horiz, b)
    xs = np.linspace(-0.9, 0.9, 21)[:, None]
    assert np.abs(d.eval(xs)[:, 0] - 0.1 * xs[:, 0]).max() < 1e-10
    vert = GridSection.from_function(TOT, (201, 201), lambda x, y: np.stack([0 * x, np.sin(x)], axis=-1))
    dv = infinitesimal_action(vert, b)
    assert np.abs(dv.eval(xs)[:, 0] + np.sin(xs[:, 0])).max() < 1e-8
    flat = SectionOverBase(GridSection.from_function(Box(((-1.0, 1.0),)), (101,), lambda x: 0 * x), TOT)
    lift = GridSection.from_function(TOT, (101, 101), lambda x, y: np.stack([np.cos(x), 0 * y], axis=-1))
    assert np.abs(infinitesimal_action(lift, flat).values).max() < 1e-12


def test_infinitesimal_action_matches_flow_quotient():
    b = SectionOverBase(GridSection.from_function(Box(((-1.2, 1.2),)), (301,), lambda x: 0.04 * x**2), TOT)
    v = GridSection.from_function(TOT, (201, 201), lambda x, y: np.stack([np.ones_like(x), 0 * y], axis=-1))
    delta = infinitesimal_action(v, b)
    t = 1e-3
    field = TimeDepVectorField(TOT, (t * v.values)[None], np.array([0.0]))
    phi = flow(field, 1.0, Box(((-1.8, 1.8), (-1.8, 1.8))), counts=(201, 201), theta=0.5, tol=1e-12)
    W = Box(((-0.7, 0.7),))
    res, _ = act(b, phi, W, theta=0.5)
    pts = np.linspace(-0.7, 0.7, 31)[:, None]
    quotient = (res.section.eval(pts) - b.section.eval(pts)) / t
    assert np.abs(quotient - delta.eval(pts)).max() < 5e-3


# ----------------------------------------------------- flow action residual
def test_flow_action_residual_zero_field():
    e = SectionOverBase(GridSection.from_function(Box(((-1.2, 1.2),)), (201,), lambda x: 0.03 * np.sin(x)), TOT)
    v0 = GridSection.from_function(TOT, (101, 101), lambda x, y: np.stack([0 * x, 0 * y], axis=-1))
    res = flow_action_residual(e, v0, Box(((-0.7, 0.7),)), ks=(0,), theta=0.4)
    assert res[0] < 1e-10


def test_flow_action_residual_quadratic_scaling():
    W = Box(((-0.7, 0.7),))

    def resid(eps):
        e = SectionOverBase(
            GridSection.from_function(Box(((-1.2, 1.2),)), (301,), lambda x: eps * np.sin(2 * x)), TOT
        )
        v = GridSection.from_function(
            TOT, (201, 201), lambda x, y: np.stack([eps * np.sin(x + 0.3), eps * np.sin(0.4 + x + 2 * y)], axis=-1)
        )
        return flow_action_residual(e, v, W, ks=(0,), theta=0.5)[0]

    expo = math.log(resid(1e-1) / resid(1e-2)) / math.log(10)
    assert expo == pytest.approx(2.0, abs=0.2)


# ------------------------------------------------------ infinite compose
def test_infinite_compose_translations():
    c = 0.04
    boxes = [Box(((-1.0 - 0.5 * 2.0**-k, 1.0 + 0.5 * 2.0**-k),)) for k in range(1, 9)]
    phis = [
        NearIdentityMap.from_function(boxes[i], (201,), lambda x, i=i: 0 * x + c * 2.0 ** -(i + 1))
        for i in range(8)
    ]
    psi, tails = infinite_compose(phis, boxes, Box(((-1.0, 1.0),)), counts=(201,))
    assert np.abs(psi.disp.values - c * (1 - 2.0**-8)).max() < 1e-14
    slopes = [math.log(tails[i + 1] / tails[i]) for i in range(len(tails) - 1)]
    assert all(abs(s + math.log(2)) < 0.07 for s in slopes)


def test_infinite_compose_identities():
    boxes = [B1] * 4
    phis = [NearIdentityMap.identity(B1, (51,)) for _ in range(4)]
    psi, tails = infinite_compose(phis, boxes, Box(((-0.9, 0.9),)), counts=(51,))
    assert np.abs(psi.disp.values).max() == 0.0
    assert max(tails) == 0.0


def test_infinite_compose_domain_chain_violation():
    grow = [Box(((-1.0, 1.0),)), Box(((-1.5, 1.5),))]
    phis = [NearIdentityMap.identity(b, (31,)) for b in grow]
    with pytest.raises(DomainError):
        infinite_compose(phis, grow, Box(((-0.5, 0.5),)), counts=(31,))


# ------------------------------------------------------ iterated flows
def test_iterated_flow_slope_minus_one():
    v = TimeDepVectorField.from_function(C1, (401,), lambda t, x: 0.02 * (1 + t) * np.sin(x), n_times=9)
    errs = iterated_flow_convergence(v, 0.5, B1, ns=(2, 4, 8, 16), counts=(201,))
    ns = np.array(sorted(errs))
    slope = np.polyfit(np.log(ns), np.log([errs[n] for n in ns]), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.2)


def test_iterated_flow_time_independent_is_exact():
    v = TimeDepVectorField.from_function(C1, (401,), lambda t, x: 0.02 * np.sin(x), n_times=1)
    errs = iterated_flow_convergence(v, 0.5, B1, ns=(2, 4), counts=(201,))
    assert max(errs.values()) < 1e-8


def test_invert_spec_amplitude_with_configured_theta():
    # 0.05 sin x needs theta above its C^1 norm (0.0707); residual <= 1e-10
    phi = NearIdentityMap.from_function(C1, (401,), lambda x: 0.05 * np.sin(x))
    inv = invert(phi, B1, theta=0.08)
    pts = np.linspace(-1, 1, 201)[:, None]
    assert np.abs(phi(inv(pts)) - pts).max() <= 1e-10


def _composition_corpus(n_pairs=8, seed=17):
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n_pairs):
        a1, a2, w = rng.uniform(0.4, 1.0), rng.uniform(0.2, 0.8), rng.uniform(0.5, 1.5)
        g = GridSection.from_function(TOT, (201, 201), lambda x, y, a1=a1, w=w: a1 * np.sin(w * x + 0.3 * y))
        amp = rng.uniform(0.005, 0.03)
        f = GridSection.from_function(
            B1, (201,), lambda x, amp=amp, a2=a2: np.stack([amp * np.sin(a2 * x), amp * np.cos(x)], axis=-1)
        )
        pairs.append((g, f))
    return pairs


def test_compose_estimates_fitted_constants():
    """Fitted-constant stability for the four composition estimates."""
    from tamelab.grid import ck_norm

    ratios = {key: [] for key in "abde"}
    for g, f in _composition_corpus():
        comp = compose(g, f, theta=0.1)
        gi = compose(g, GridSection(B1, np.zeros((201, 2))), theta=0.1)
        diff = GridSection(B1, comp.values - gi.values)
        for k in (0, 1, 2):
            gk = ck_norm(g, k, target=TOT).value
            gk1 = ck_norm(g, k + 1, target=TOT).value
            g0, g1 = ck_norm(g, 0, target=TOT).value, ck_norm(g, 1, target=TOT).value
            fk = ck_norm(f, k, target=B1).value
            f0 = ck_norm(f, 0, target=B1).value
            fk1 = ck_norm(f, k + 1, target=B1).value
            ck = ck_norm(comp, k, target=B1).value
            dk = ck_norm(diff, k, target=B1).value
            ratios["a"].append(ck / (gk * (1 + fk)))
            ratios["b"].append(dk / (gk1 * fk))
            ratios["d"].append(ck / (gk + g1 * fk))
            ratios["e"].append(dk / (gk1 * f0 + g0 * fk1))
    for key, samples in ratios.items():
        half = len(samples) // 2
        fitted = max(samples[:half])
        assert all(s <= 2 * fitted for s in samples[half:]), key


def test_act_estimate_fitted_constant():
    from tamelab.grid import ck_norm

    rng = np.random.default_rng(23)
    W = Box(((-0.7, 0.7),))
    samples = []
    for _ in range(6):
        amp_e, amp_g = rng.uniform(0.005, 0.03, 2)
        e = SectionOverBase(
            GridSection.from_function(Box(((-1.2, 1.2),)), (201,), lambda x: amp_e * np.sin(2 * x)), TOT
        )
        phi = NearIdentityMap.from_function(
            TOT, (201, 201),
            lambda x, y: np.stack([amp_g * np.sin(x + 0.2), amp_g * np.cos(y - 0.1)], axis=-1),
        )
        res, _ = act(e, phi, W, theta=0.2)
        for k in (0, 1, 2):
            denom = ck_norm(e.section, k, target=e.base_box).value + phi.norm(k)
            samples.append(ck_norm(res.section, k, target=W).value / denom)
    half = len(samples) // 2
    fitted = max(samples[:half])
    assert all(s <= 2 * fitted for s in samples[half:])
