import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hardycert import functionals
from hardycert.functionals import (
    B1_SUBCELLS,
    A_NAMES,
    Fields,
    a_functional,
    alpha,
    b1_forms,
    b_functional,
    beta,
    bold_beta,
    bv_functional,
    c_alpha,
    c_lower,
    constants,
    evaluate,
    multidim_functional,
    subdivide_bilinear,
    zone_chain,
)
from hardycert.grid import GridN
from hardycert.weights import (
    Exponents,
    Factor1D,
    FactorizedWeight,
    PowerWeight,
    TableWeight,
    ZoneError,
    constant_weight,
    power_weight,
)

ONE = constant_weight(2)
ZERO = PowerWeight(0.0, (0.0, 0.0))


def unit_fields(p, q, nodes=65, x_max=1.0):
    return Fields.from_weights(ONE, ONE, GridN.linear(0.0, x_max, nodes), Exponents(p, q))


# ------------------------------------------------------------ constants


def test_alpha_example():
    assert alpha(2, 3) == 8.0


def test_beta_example():
    assert beta(4, 2) == pytest.approx(8 / (math.sqrt(2) - 1), rel=1e-14)
    assert beta(4, 2) == pytest.approx(19.3137, abs=1e-4)


def test_beta_branch_r_over_p_below_one():
    # p = 6, q = 2: r = 3 < p, so the extra factor is 1
    assert beta(6, 2) == pytest.approx(2**3 / (2 ** (2 / 3) - 1), rel=1e-14)


def test_c_lower_example():
    e = Exponents(4, 2)
    expected = 2 ** (-3 / 4) * (2 / 4) ** 0.5 * ((4 / 3) / 4) ** 0.75
    assert c_lower(e) == pytest.approx(expected, rel=1e-14)
    assert c_lower(e) == pytest.approx(0.1845, abs=1e-4)
    assert c_lower(Exponents(2, 3)) == 1.0


def test_bold_beta_arithmetic():
    r = 6.0
    expected = 2 ** 1.5 / ((2 ** (4 / 3) - 1) ** (1 / r) * (2 ** (1 / 3) - 1) ** (1 / 3))
    assert bold_beta(3, 2) == pytest.approx(expected, rel=1e-14)


def test_c_alpha_arithmetic():
    p, q = 2.0, 3.0
    a, ad = 8.0, alpha(1.5, 2.0)
    first = (2 / 3) ** 3 * max(a, 6 * 1.5 ** 1.5) * (2 / 1) ** 1.5
    second = 3**0.5 * ad**0.5 * (9 / 8) ** (2 / 3)
    assert c_alpha(p, q, a, ad) == pytest.approx(27**3 * (first + second), rel=1e-14)
    assert constants(Exponents(2, 3)).C_upper == pytest.approx(c_alpha(p, q, a, ad))


def test_constants_zone_errors():
    with pytest.raises(ZoneError):
        alpha(3, 2)
    with pytest.raises(ZoneError):
        beta(2, 3)
    cs = constants(Exponents(2, 3))
    with pytest.raises(ZoneError):
        cs.require("beta")
    assert constants(Exponents(3, 2)).require("beta_dual") == pytest.approx(beta(2, 1.5))


@given(st.floats(1.1, 6), st.floats(1.1, 6))
def test_constants_finite_positive(p, q):
    e = Exponents(p, q)
    cs = constants(e)
    for k, v in cs.to_dict().items():
        if isinstance(v, float) and v is not None and k not in ("p", "q"):
            assert math.isfinite(v) and v > 0, k


# -------------------------------------------------------------- A family


def test_A1_unit_square():
    assert a_functional("A1", unit_fields(2, 2)).value == pytest.approx(0.25, rel=1e-14)
    fv = a_functional("A1", unit_fields(2, 2))
    assert fv.witness_point == pytest.approx((0.5, 0.5))


def test_A1_hardy_weight_widening():
    e = Exponents(2, 2)
    w = power_weight(-2.0, -2.0)
    vals = []
    for k in (1, 2, 3, 4):
        g = GridN.log(10.0**-k, 10.0**k, 8 * k + 1)
        vals.append(a_functional("A1", Fields.from_weights(ONE, w, g, e)).value)
    # each axis contributes (1 - sqrt(a/b))^2 up to midpoint error
    assert all(v <= 1.0 + 1e-12 for v in vals)
    assert vals == sorted(vals)
    assert vals[-1] > 0.99


def test_zero_w_gives_zero():
    g = GridN.log(0.1, 10, 9)
    for e in (Exponents(2, 2), Exponents(3, 2), Exponents(2, 3)):
        f = Fields.from_weights(ONE, ZERO, g, e)
        for name, fv in evaluate(f).items():
            assert fv.value == 0.0, name


def test_zero_sigma_gives_zero_bv():
    g = GridN.log(0.1, 10, 9)
    f = Fields.from_weights(ONE, ONE, g, Exponents(3, 2))
    zero_sigma = Fields(f.sigma.scaled(0.0), f.w, f.exps)
    assert bv_functional("Bv", zero_sigma).value == 0.0
    assert bv_functional("Bw", zero_sigma).value == 0.0


def _brute_tables(sig, w, vol):
    m, n = sig.shape
    S = np.zeros((m + 1, n + 1))
    W = np.zeros((m + 1, n + 1))
    for i in range(m + 1):
        for j in range(n + 1):
            for a in range(m):
                for b in range(n):
                    if a < i and b < j:
                        S[i, j] += sig[a, b] * vol[a, b]
                    if a >= i and b >= j:
                        W[i, j] += w[a, b] * vol[a, b]
    return S, W


def _brute_config(seed=0):
    rng = np.random.default_rng(seed)
    g = GridN((np.cumsum(rng.uniform(0.2, 1.0, 9)), np.cumsum(rng.uniform(0.2, 1.0, 9))))
    sig = rng.uniform(0.1, 2.0, g.shape)
    w = rng.uniform(0.1, 2.0, g.shape)
    v = TableWeight(sig ** (-1.0 / (3.0 / 2.0 - 1.0)), g)  # sigma = v^(1-p') with p = 3
    return g, sig, w, v


def test_A_family_brute_force():
    g, sig, w, v = _brute_config(1)
    e = Exponents(3.0, 2.0)
    f = Fields.from_weights(v, TableWeight(w, g), g, e)
    np.testing.assert_allclose(f.sigma.values, sig, rtol=1e-12)
    S, W = _brute_tables(f.sigma.values, w, g.volumes)
    a1 = max(W[i, j] ** (1 / e.q) * S[i, j] ** (1 / e.pp) for i in range(9) for j in range(9))
    assert a_functional("A1", f).value == pytest.approx(a1, rel=1e-12)
    best = 0.0
    for i in range(1, 9):
        for j in range(1, 9):
            inner = sum(S[a + 1, b + 1] ** e.q * w[a, b] * g.volumes[a, b] for a in range(i) for b in range(j))
            best = max(best, inner ** (1 / e.q) * S[i, j] ** (-1 / e.p))
    assert a_functional("A2", f).value == pytest.approx(best, rel=1e-12)


def _brute_b1(S, W, a, b, k):
    # split each cell k x k, interpolate the corner values bilinearly, and
    # sum phi at the mean of the sub-cell's diagonal corners against d2 psi
    m, n = S.shape[0] - 1, S.shape[1] - 1

    def at(T, i, j, s, t):
        return (
            T[i, j] * (1 - s) * (1 - t)
            + T[i + 1, j] * s * (1 - t)
            + T[i, j + 1] * (1 - s) * t
            + T[i + 1, j + 1] * s * t
        )

    total = 0.0
    for i in range(m):
        for j in range(n):
            for u in range(k):
                for v in range(k):
                    s0, s1, t0, t1 = u / k, (u + 1) / k, v / k, (v + 1) / k
                    psi = lambda s, t: at(W, i, j, s, t) ** b
                    d2 = psi(s1, t1) - psi(s0, t1) - psi(s1, t0) + psi(s0, t0)
                    mean = 0.5 * (at(S, i, j, s0, t0) + at(S, i, j, s1, t1))
                    total += mean**a * d2
    return total


def test_B1_brute_force_unit_square():
    e = Exponents(3, 2)
    r = e.r
    g = GridN.linear(0.0, 1.0, 9)
    f = Fields.from_weights(ONE, ONE, g, e)
    S, W = _brute_tables(np.ones(g.shape), np.ones(g.shape), g.volumes)
    total = _brute_b1(S, W, r / e.pp, r / e.q, B1_SUBCELLS)
    assert b_functional("B1", f).value == pytest.approx(total ** (1 / r), rel=1e-12)


def test_B1_brute_force_random():
    g, sig, w, v = _brute_config(2)
    e = Exponents(3.0, 2.0)
    r = e.r
    f = Fields.from_weights(v, TableWeight(w, g), g, e)
    S, W = _brute_tables(f.sigma.values, w, g.volumes)
    total = _brute_b1(S, W, r / e.pp, r / e.q, B1_SUBCELLS)
    assert b_functional("B1", f).value == pytest.approx(total ** (1 / r), rel=1e-11)


def test_subdivision_is_exact_for_cellwise_constant_weights(monkeypatch):
    # unit weights on a split grid give the same cumulations as the split tables
    e = Exponents(3, 2)
    coarse = unit_fields(3, 2, nodes=9)
    fine = unit_fields(3, 2, nodes=33)
    np.testing.assert_allclose(subdivide_bilinear(coarse.S, 4), fine.S, rtol=1e-13, atol=1e-16)
    np.testing.assert_allclose(subdivide_bilinear(coarse.W, 4), fine.W, rtol=1e-13, atol=1e-16)
    with_split = b_functional("B1", coarse).value
    monkeypatch.setattr(functionals, "B1_SUBCELLS", 1)
    assert b_functional("B1", fine).value == pytest.approx(with_split, rel=1e-12)


def test_subdivide_bilinear_shape_and_nodes():
    rng = np.random.default_rng(0)
    T = rng.random((4, 6))
    out = subdivide_bilinear(T, 3)
    assert out.shape == (10, 16)
    np.testing.assert_array_equal(out[::3, ::3], T)
    assert subdivide_bilinear(T, 1) is T


def test_B1_converges_to_closed_form():
    # v = w = 1 on (0,1)^2, p = 3, q = 2, r = 6:
    # B1^6 = 12 * Beta(5,3) * Beta(4,4) = 20736 / 25401600
    exact = 20736 / 25401600
    errs = []
    for nodes in (65, 129, 257):
        val = b_functional("B1", unit_fields(3, 2, nodes)).value ** 6
        errs.append(abs(val / exact - 1))
    assert errs[-1] < 2e-5
    assert errs[0] / errs[-1] > 10  # second order


def test_B1_three_forms_unit():
    f = unit_fields(3, 2)
    a, b, c = b1_forms(f)
    assert a == pytest.approx(b, rel=1e-12)
    assert b == pytest.approx(c, rel=1e-12)
    # the nodal forms and the subdivided value agree to quadrature order
    scale = f.S.max() ** (f.exps.r / f.exps.pp) * f.W.max() ** (f.exps.r / f.exps.q)
    assert (a * scale) ** (1 / f.exps.r) == pytest.approx(b_functional("B1", f).value, rel=2e-3)


def test_Bv_brute_force():
    e = Exponents(3, 2)
    r = e.r
    g = GridN.linear(0.0, 1.0, 9)
    f = Fields.from_weights(ONE, ONE, g, e)
    S, _ = _brute_tables(np.ones(g.shape), np.ones(g.shape), g.volumes)
    vol = g.volumes
    total = 0.0
    for i in range(8):
        for j in range(8):
            K = sum(S[a + 1, b + 1] ** (e.q - 1) * vol[a, b] for a in range(i, 8) for b in range(j, 8))
            total += vol[i, j] * K ** (r / e.q)
    assert bv_functional("Bv", f).value == pytest.approx(total ** (1 / r), rel=1e-6)


def test_Bw_brute_force():
    g, sig, w, v = _brute_config(3)
    e = Exponents(2.5, 1.5)
    r = e.r
    f = Fields.from_weights(v, TableWeight(w, g), g, e)
    sg = f.sigma.values
    _, W = _brute_tables(sg, w, g.volumes)
    vol = g.volumes
    total = 0.0
    for i in range(8):
        for j in range(8):
            L = sum(W[a, b] ** (e.pp - 1) * sg[a, b] * vol[a, b] for a in range(i + 1) for b in range(j + 1))
            total += w[i, j] * vol[i, j] * L ** (r / e.pp)
    assert bv_functional("Bw", f).value == pytest.approx(total ** (1 / r), rel=1e-10)


def test_B_family_zone_error():
    with pytest.raises(ZoneError):
        b_functional("B1", unit_fields(2, 3))
    with pytest.raises(ZoneError):
        bv_functional("Bv", unit_fields(2, 2))


def test_signed_mass_is_reported():
    fv = b_functional("B2", unit_fields(3, 2))
    assert 0.0 <= fv.info["negative_mass_fraction"] <= 1.0


# --------------------------------------------------------------- scaling

pw = st.tuples(st.floats(-0.9, 1.5), st.floats(-0.9, 1.5))


@given(pw, pw, st.floats(1.3, 4), st.floats(1.3, 4), st.floats(0.01, 100), st.floats(0.01, 100))
def test_scaling_covariance(av, aw, p, q, lam, mu):
    if abs(p - q) < 1e-3:
        return
    e = Exponents(p, q)
    g = GridN.log(0.1, 10, 17)
    v, w = power_weight(*av), power_weight(*aw)
    base = evaluate(Fields.from_weights(v, w, g, e))
    scaled = evaluate(Fields.from_weights(v.scaled(lam), w.scaled(mu), g, e))
    factor = lam ** (-1 / p) * mu ** (1 / q)
    for name, fv in base.items():
        assert scaled[name].value == pytest.approx(factor * fv.value, rel=1e-10), name
        assert scaled[name].witness == fv.witness


def test_scaling_covariance_table_path():
    g = GridN.log(0.1, 10, 17)
    e = Exponents(3, 2)
    v = TableWeight(power_weight(0.4, -0.3).sample(g).values, g)
    w = TableWeight(power_weight(-0.2, 0.8).sample(g).values, g)
    base = evaluate(Fields.from_weights(v, w, g, e))
    scaled = evaluate(Fields.from_weights(v.scaled(2.5), w.scaled(0.3), g, e))
    factor = 2.5 ** (-1 / 3) * 0.3 ** (1 / 2)
    for name, fv in base.items():
        assert scaled[name].value == pytest.approx(factor * fv.value, rel=1e-10), name


@pytest.mark.parametrize("spacing", ["linear", "log"])
def test_A1_refinement_monotone_exact_cumulations(spacing):
    # constant weights: cumulations are exact at every node, so nested
    # grids can only add candidate nodes to the supremum
    g = GridN.linear(0.0, 1.0, 5) if spacing == "linear" else GridN.log(0.01, 1.0, 5)
    e = Exponents(2.5, 3.5)
    prev = 0.0
    for _ in range(4):
        val = a_functional("A1", Fields.from_weights(ONE, ONE, g, e)).value
        assert val >= prev * (1 - 1e-14)
        prev = val
        g = g.refine()


def test_A2_A3_upper_sums_decrease_under_refinement():
    # the inner integrals are upper Riemann sums, so refinement moves them down
    g = GridN.linear(0.0, 1.0, 9)
    e = Exponents(2, 3)
    prev = {n: math.inf for n in ("A2", "A3")}
    for _ in range(3):
        f = Fields.from_weights(ONE, ONE, g, e)
        for n in prev:
            val = a_functional(n, f).value
            assert val <= prev[n] * (1 + 1e-14)
            prev[n] = val
        g = g.refine()


# ---------------------------------------------------------------- chains


def test_chain_q_lt_p_unit():
    f = unit_fields(3, 2)
    vals = {n: fv.value for n, fv in evaluate(f).items()}
    chains = zone_chain(vals, f.exps)
    assert len(chains) == 2 and all(c.holds for c in chains)


def test_chain_p_lt_q_unit():
    f = unit_fields(2, 3)
    vals = {n: fv.value for n, fv in evaluate(f).items()}
    chains = zone_chain(vals, f.exps)
    assert chains[0].rhs == pytest.approx(2 * vals["A1"])
    assert all(c.holds for c in chains)


def test_chain_zero_weights():
    g = GridN.log(0.1, 10, 9)
    for e in (Exponents(3, 2), Exponents(2, 3)):
        vals = {n: fv.value for n, fv in evaluate(Fields.from_weights(ONE, ZERO, g, e)).items()}
        for c in zone_chain(vals, e):
            assert c.lhs == 0.0 and c.rhs == 0.0 and c.holds


@given(pw, pw, st.floats(1.3, 5), st.floats(1.3, 5))
def test_chains_hold_random(av, aw, p, q):
    if abs(p - q) < 0.05:
        return
    e = Exponents(p, q)
    g = GridN.log(0.05, 20, 129)
    vals = {n: fv.value for n, fv in evaluate(Fields.from_weights(power_weight(*av), power_weight(*aw), g, e)).items()}
    for c in zone_chain(vals, e):
        assert c.holds, (c, e)


# ---------------------------------------------------------- multidimensional


def test_AM2_equals_A1_when_v_factorizes():
    g = GridN.log(0.1, 10, 17)
    e = Exponents(2.5, 3.0)
    v, w = power_weight(0.3, -0.4), power_weight(-0.5, 0.7)
    f = Fields.from_weights(v, w, g, e)
    assert multidim_functional("AMn", v, w, g, e).value == pytest.approx(a_functional("A1", f).value, rel=1e-12)
    assert multidim_functional("ATn", v, w, g, e).value == pytest.approx(a_functional("A2", f).value, rel=1e-12)
    assert multidim_functional("AMn*", v, w, g, e).value == pytest.approx(a_functional("A1", f).value, rel=1e-12)
    assert multidim_functional("ATn*", v, w, g, e).value == pytest.approx(a_functional("A3", f).value, rel=1e-12)


def test_starred_zero_for_zero_w():
    g = GridN.log(0.1, 10, 9, dim=3)
    v = constant_weight(3)
    w = FactorizedWeight((Factor1D((0.0,), (0.0,)),) * 3)
    for name, e in (("AMn*", Exponents(2, 2)), ("ATn*", Exponents(2, 2)), ("BMRn*", Exponents(3, 2)), ("BPSn*", Exponents(3, 2))):
        assert multidim_functional(name, v, w, g, e).value == 0.0


def test_AM3_AT3_ratio_scale_invariant():
    g = GridN.log(0.1, 10, 17, dim=3)
    e = Exponents(2, 2)
    w = power_weight(-4.0, -4.0, -4.0)
    ratios = []
    for lam in (0.5, 1.0, 2.0):
        v = power_weight(2.0, 2.0, 2.0, c=lam)
        am = multidim_functional("AMn", v, w, g, e).value
        at = multidim_functional("ATn", v, w, g, e).value
        assert math.isfinite(am) and math.isfinite(at) and am > 0
        ratios.append(am / at)
    assert max(ratios) == pytest.approx(min(ratios), rel=1e-10)


def test_BMR_BPS_scaling_and_divergence_flags():
    g = GridN.log(0.1, 10, 17)
    e = Exponents(3, 2)
    w = power_weight(0.2, -0.5)
    v_div = power_weight(0.5, 0.5)  # sigma_i = x^(-1/4): I_1 sigma_i(inf) = inf
    v_conv = power_weight(4.0, 4.0)  # sigma_i = x^(-2): integrable at infinity
    for name in ("BMRn", "BPSn"):
        fv = multidim_functional(name, v_div, w, g, e)
        assert fv.info["divergence_hypothesis"] == "asymptotically checked"
        assert multidim_functional(name, v_conv, w, g, e).info["divergence_hypothesis"] == "fails under widening"
        scaled = multidim_functional(name, v_div.scaled(3.0), w.scaled(0.5), g, e)
        assert scaled.value == pytest.approx(fv.value * 3.0 ** (-1 / 3) * 0.5**0.5, rel=1e-10)
    for name in ("BMRn*", "BPSn*"):
        fv = multidim_functional(name, v_div, power_weight(-1.5, -1.5), g, e)
        assert fv.info["divergence_hypothesis"] == "asymptotically checked"
        assert math.isfinite(fv.value) and fv.value > 0


def test_BMR2_matches_direct_loops():
    g = GridN.log(0.5, 4.0, 7)
    e = Exponents(3, 2)
    r = e.r
    v, w = power_weight(0.5, -0.3), power_weight(0.4, 0.1)
    sig_f = [Factor1D.power(a * (1 - e.pp)) for a in (0.5, -0.3)]
    m = g.shape[0]
    mids = [g.midpoints(d) for d in range(2)]
    wid = [g.widths(d) for d in range(2)]
    wc = w.sample(g).values
    total = 0.0
    for i in range(m):
        for j in range(m):
            W = sum(wc[a, b] * wid[0][a] * wid[1][b] for a in range(i, m) for b in range(j, m))
            P = [sum(sig_f[d](mids[d][k]) * wid[d][k] for k in range(idx + 1)) for d, idx in enumerate((i, j))]
            total += W ** (r / e.q) * (P[0] * P[1]) ** (r / e.qp) * sig_f[0](mids[0][i]) * sig_f[1](mids[1][j]) * wid[0][i] * wid[1][j]
    assert multidim_functional("BMRn", v, w, g, e).value == pytest.approx(total ** (1 / r), rel=1e-10)


def test_AW():
    g = GridN.log(0.1, 10, 17)
    e = Exponents(2, 3)
    v, w = power_weight(0.3, 0.2), power_weight(-0.5, 0.1)
    fv = multidim_functional("AW", v, w, g, e, s=(1.5, 1.2))
    assert fv.value > 0 and fv.witness is not None
    scaled = multidim_functional("AW", v.scaled(4.0), w, g, e, s=(1.5, 1.2))
    assert scaled.value == pytest.approx(fv.value * 4.0**-0.5, rel=1e-10)
    with pytest.raises(ValueError):
        multidim_functional("AW", v, w, g, e, s=(1.5, 2.5))
    with pytest.raises(ZoneError):
        multidim_functional("AW", v, w, g, Exponents(3, 2), s=(1.5, 1.2))


def test_multidim_needs_factorized_weight():
    g = GridN.log(0.1, 10, 9)
    table = TableWeight(np.ones(g.shape), g)
    with pytest.raises(ValueError):
        multidim_functional("AMn", table, ONE, g, Exponents(2, 2))
    with pytest.raises(ValueError):
        multidim_functional("AMn*", ONE, table, g, Exponents(2, 2))
    with pytest.raises(ValueError):
        multidim_functional("XYZ", ONE, ONE, g, Exponents(2, 2))
