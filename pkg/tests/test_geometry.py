import itertools

import numpy as np
import pytest

from cpecheck import geometry as geo


def fd_metric(chart, x, k, h=1e-5, order=0):
    """Central difference along coordinate k of the analytic jet one order down."""
    xp, xm = x.copy(), x.copy()
    xp[:, k] += h
    xm[:, k] -= h
    jp = chart.metric_jet(xp, order=order)
    jm = chart.metric_jet(xm, order=order)
    take = lambda j: j.g if order == 0 else (j.d1 if order == 1 else j.d2)  # noqa: E731
    return (take(jp) - take(jm)) / (2.0 * h)


CASES = [
    geo.sphere(2, 1.0),
    geo.sphere(3, 1.0),
    geo.sphere(3, 2.0),
    geo.sphere(4, 1.0),
    geo.product(geo.sphere(2, 1.0), geo.sphere(2, 1.0 / np.sqrt(2.0))),
    geo.conformal_sphere(3, 1.0, 0.1),
]


@pytest.mark.parametrize("m", CASES, ids=lambda m: m.name)
def test_metric_derivatives_match_finite_differences(m):
    x = geo.sample_points(m, 40, seed=1)
    chart = m.charts[0]
    jet = chart.metric_jet(x, order=3)
    scale = np.max(np.abs(jet.g)) + 1.0
    for k in range(m.dim):
        assert np.max(np.abs(fd_metric(chart, x, k, order=0) - jet.d1[:, k])) <= 1e-7 * scale
        assert np.max(np.abs(fd_metric(chart, x, k, order=1) - jet.d2[:, k])) <= 1e-6 * scale
        assert np.max(np.abs(fd_metric(chart, x, k, order=2) - jet.d3[:, k])) <= 1e-5 * scale


@pytest.mark.parametrize("m", CASES, ids=lambda m: m.name)
def test_metric_derivative_symmetries_exact(m):
    x = geo.sample_points(m, 60, seed=2)
    jet = m.metric_jet(x, order=3)
    assert np.array_equal(jet.d1, np.swapaxes(jet.d1, 2, 3))
    assert np.array_equal(jet.d2, np.swapaxes(jet.d2, 1, 2))
    assert np.array_equal(jet.d3, np.swapaxes(jet.d3, 1, 2))
    assert np.array_equal(jet.d3, np.swapaxes(jet.d3, 2, 3))


@pytest.mark.parametrize("m", CASES, ids=lambda m: m.name)
def test_metric_positive_definite_on_rule_nodes(m):
    rule = geo.build_rule(m, 8)
    for pts, _ in rule.iter_chunks():
        g = m.metric_jet(pts, order=0).g
        assert np.linalg.eigvalsh(g).min() > 1e-8


def test_sphere_volumes_at_order_32():
    for n, r, expect, tol in [
        (2, 1.0, 4.0 * np.pi, 1e-8),
        (3, 1.0, 2.0 * np.pi**2, 1e-6),
        (3, 2.0, 16.0 * np.pi**2, 1e-6),
        (4, 1.0, (8.0 / 3.0) * np.pi**2, 1e-6),
    ]:
        m = geo.sphere(n, r)
        v = geo.volume(m, geo.build_rule(m, 32))
        assert abs(v - expect) <= tol * expect
        assert m.analytic_volume == pytest.approx(expect, rel=1e-12)


def test_product_volume():
    m = geo.product(geo.sphere(2, 1.0), geo.sphere(2, 1.0 / np.sqrt(2.0)))
    v = geo.volume(m, geo.build_rule(m, 16))
    assert v == pytest.approx(8.0 * np.pi**2, rel=1e-6)


def test_volume_error_decreases_with_order():
    m = geo.sphere(3, 1.0)
    errs = []
    for order in (4, 8, 16, 32):
        v = geo.volume(m, geo.build_rule(m, order))
        errs.append(abs(v - 2.0 * np.pi**2))
    for a, b in zip(errs, errs[1:]):
        assert b <= 0.5 * a or b <= 1e-12 * 2.0 * np.pi**2


def test_order4_integrates_constants_coarsely():
    m = geo.sphere(2, 1.0)
    v = geo.volume(m, geo.build_rule(m, 4))
    assert abs(v - 4.0 * np.pi) <= 1e-3 * 4.0 * np.pi


def test_quadrature_polynomial_exactness():
    # degree <= 2*order - 1 in each axis integrates exactly against flat measure
    box = geo.flat_box(2)
    order = 6
    rule = geo.build_rule(box, order)
    rng = np.random.default_rng(0)
    exps = [(2 * order - 1, 0), (0, 2 * order - 1), (order, order - 1), (3, 2)]
    coefs = rng.standard_normal(len(exps))
    field = geo.PolynomialField(2, list(zip(coefs, exps)))
    got = geo.integrate(box, lambda ci, x: field.jet(x, order=0).f, rule)
    expect = sum(c / ((e[0] + 1) * (e[1] + 1)) for c, e in zip(coefs, exps))
    assert got == pytest.approx(expect, rel=1e-13, abs=1e-13)


def test_integrate_rejects_nonfinite():
    m = geo.sphere(2, 1.0)
    rule = geo.build_rule(m, 4)

    def bad(ci, x):
        out = np.ones(x.shape[0])
        out[0] = np.inf
        return out

    with pytest.raises(geo.EvaluationError):
        geo.integrate(m, bad, rule)


def test_height_function_jets_match_finite_differences():
    m = geo.sphere(3, 1.0)
    for axis in (1, 2, 4):
        f = geo.height_function(m, axis=axis, amplitude=1.3)
        x = geo.sample_points(m, 30, seed=3)
        jet = f.jet(x, order=4)
        h = 1e-5
        for k in range(3):
            xp, xm = x.copy(), x.copy()
            xp[:, k] += h
            xm[:, k] -= h
            jp, jm = f.jet(xp, order=3), f.jet(xm, order=3)
            assert np.max(np.abs((jp.f - jm.f) / (2 * h) - jet.d1[:, k])) <= 1e-7
            assert np.max(np.abs((jp.d1 - jm.d1) / (2 * h) - jet.d2[:, k])) <= 1e-7
            assert np.max(np.abs((jp.d2 - jm.d2) / (2 * h) - jet.d3[:, k])) <= 1e-6
            assert np.max(np.abs((jp.d3 - jm.d3) / (2 * h) - jet.d4[:, k])) <= 1e-5


def test_height_matches_ambient_coordinate():
    m = geo.sphere(3, 2.0)
    x = geo.sample_points(m, 50, seed=4)
    amb = geo.sphere_ambient(x, 3, 2.0)
    for axis in range(1, 5):
        f = geo.height_function(m, axis=axis, amplitude=1.0)
        vals = f.jet(x, order=3).f
        assert np.max(np.abs(vals - amb[:, axis - 1] / 2.0)) <= 1e-13
    assert np.max(np.abs(np.sum(amb**2, axis=1) - 4.0)) <= 1e-12


def test_height_zero_amplitude():
    m = geo.sphere(3, 1.0)
    f = geo.height_function(m, axis=1, amplitude=0.0)
    x = geo.sample_points(m, 10, seed=0)
    jet = f.jet(x, order=3)
    assert np.all(jet.f == 0.0) and np.all(jet.d3 == 0.0)


def test_height_rejects_bad_axis():
    m = geo.sphere(3, 1.0)
    with pytest.raises(ValueError):
        geo.height_function(m, axis=5, amplitude=1.0)


def test_ambient_jacobian_matches_fd():
    m = geo.sphere(3, 1.5)
    x = geo.sample_points(m, 20, seed=5)
    jac = geo.sphere_ambient_jacobian(x, 3, 1.5)
    h = 1e-6
    for k in range(3):
        xp, xm = x.copy(), x.copy()
        xp[:, k] += h
        xm[:, k] -= h
        fd = (geo.sphere_ambient(xp, 3, 1.5) - geo.sphere_ambient(xm, 3, 1.5)) / (2 * h)
        assert np.max(np.abs(fd - jac[:, :, k])) <= 1e-8


def test_height_odd_integral_vanishes():
    m = geo.sphere(3, 1.0)
    f = geo.height_function(m, axis=4, amplitude=1.0)
    rule = geo.build_rule(m, 32)
    val = geo.integrate(m, lambda ci, x: f.jet(x, order=0).f, rule)
    assert abs(val) <= 1e-8


def test_height_squared_integral():
    m = geo.sphere(3, 1.0)
    f = geo.height_function(m, axis=4, amplitude=1.0)
    rule = geo.build_rule(m, 32)
    val = geo.integrate(m, lambda ci, x: f.jet(x, order=0).f ** 2, rule)
    assert val == pytest.approx(np.pi**2 / 2.0, rel=1e-6)


def test_squared_field_jets():
    m = geo.sphere(3, 1.0)
    base = geo.height_function(m, axis=2, amplitude=1.0)
    sq = geo.SquaredField(base)
    x = geo.sample_points(m, 20, seed=6)
    jet = sq.jet(x, order=4)
    bjet = base.jet(x, order=3)
    assert np.max(np.abs(jet.f - bjet.f**2)) <= 1e-14
    h = 1e-5
    for k in range(3):
        xp, xm = x.copy(), x.copy()
        xp[:, k] += h
        xm[:, k] -= h
        jp, jm = sq.jet(xp, order=3), sq.jet(xm, order=3)
        assert np.max(np.abs((jp.d2 - jm.d2) / (2 * h) - jet.d3[:, k])) <= 1e-6
        assert np.max(np.abs((jp.d3 - jm.d3) / (2 * h) - jet.d4[:, k])) <= 1e-5


def test_sphere_spectrum_values():
    m = geo.sphere(3, 1.0)
    lams = [lam for lam, _ in m.analytic_spectrum[:4]]
    assert lams == pytest.approx([0.0, 3.0, 8.0, 15.0])
    mults = [mu for _, mu in m.analytic_spectrum[:3]]
    assert mults == [1, 4, 9]
    m2 = geo.sphere(3, 2.0)
    assert m2.analytic_spectrum[1][0] == pytest.approx(0.75)


def test_product_spectrum_minkowski_sum():
    m = geo.product(geo.sphere(2, 1.0), geo.sphere(2, 1.0 / np.sqrt(2.0)))
    positive = [lam for lam, _ in m.analytic_spectrum if lam > 1e-12]
    assert positive[:3] == pytest.approx([2.0, 4.0, 6.0])


def test_sample_points_interior_and_deterministic():
    for m in CASES:
        x1 = geo.sample_points(m, 200, seed=7)
        x2 = geo.sample_points(m, 200, seed=7)
        assert np.array_equal(x1, x2)
        lo, hi = m.chart_box()
        assert np.all(x1 > lo + 1e-3) and np.all(x1 < hi - 1e-3)
        assert not np.array_equal(x1, geo.sample_points(m, 200, seed=8))


def test_build_rule_order_bounds():
    m = geo.sphere(2, 1.0)
    with pytest.raises(ValueError):
        geo.build_rule(m, 3)
    with pytest.raises(ValueError):
        geo.build_rule(m, 129)


def test_rule_chunks_cover_all_nodes():
    m = geo.product(geo.sphere(2, 1.0), geo.sphere(2, 1.0))
    rule = geo.build_rule(m, 6)
    seen = 0
    wsum = 0.0
    for pts, w in rule.iter_chunks(chunk=100):
        seen += pts.shape[0]
        wsum += w.sum()
        assert np.all(w > 0)
    assert seen == rule.n_nodes() == 6**4
    box = np.prod(m.charts[0].hi - m.charts[0].lo)
    assert wsum == pytest.approx(box)


def test_chart_weights_are_partition():
    for m in CASES:
        x = geo.sample_points(m, 10, seed=0)
        total = sum(c.weight(x) for c in m.charts)
        assert np.allclose(total, 1.0)
