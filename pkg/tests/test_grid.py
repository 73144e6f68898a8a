from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nonlocal_logistic.grid import (
    Domain,
    Field,
    GridMismatchError,
    build_grid,
    c1_distance,
    c1_norm,
    field_to_csv,
    gradient,
    integrate,
    read_field_csv,
    sup_distance,
    sup_norm,
    write_field_csv,
)


def test_interval_spacing_and_nodes():
    g = build_grid(Domain.interval(0.0, 2.0), 7)
    assert g.h == pytest.approx(0.25)
    assert g.shape == (9,)
    assert g.nodes[0, 0] == 0.0 and g.nodes[-1, 0] == 2.0
    assert g.interior_mask.sum() == 7
    assert not g.interior_mask[0] and not g.interior_mask[-1]


def test_rectangle_ordering_is_x_slowest():
    g = build_grid(Domain.rectangle(0, 1, 0, 2), 3)
    assert g.shape == (5, 5)
    # second node moves in y only
    assert g.nodes[1, 0] == 0.0 and g.nodes[1, 1] == pytest.approx(0.5)
    assert g.boundary_mask.sum() == 25 - 9


@pytest.mark.parametrize("n", [3, 10, 63])
def test_integrate_constant_is_measure(n):
    for dom in (Domain.interval(-1.0, 2.0), Domain.rectangle(0, 2, 0, 3)):
        g = build_grid(dom, n)
        assert integrate(g.field(np.ones(g.size))) == pytest.approx(dom.measure, rel=1e-14)


def test_trapezoid_second_order():
    errs = []
    for n in (31, 63, 127):
        g = build_grid(Domain.interval(), n)
        errs.append(abs(integrate(g.evaluate(lambda x: np.sin(np.pi * x))) - 2 / np.pi))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.9)


def test_gradient_exact_for_quadratics():
    g = build_grid(Domain.rectangle(), 9)
    f = g.evaluate(lambda x, y: x**2 - 3 * x * y + 2 * y**2)
    gx, gy = gradient(f)
    x, y = g.nodes[:, 0], g.nodes[:, 1]
    assert np.allclose(gx.values, 2 * x - 3 * y, atol=1e-12)
    assert np.allclose(gy.values, -3 * x + 4 * y, atol=1e-12)


def test_c1_norm_of_sine():
    g = build_grid(Domain.interval(), 255)
    f = g.evaluate(lambda x: np.sin(np.pi * x))
    assert c1_norm(f) == pytest.approx(1 + np.pi, rel=1e-4)
    assert c1_distance(f, f) == 0.0


def test_fields_are_read_only_and_grid_checked():
    g = build_grid(Domain.interval(), 5)
    f = g.field(np.arange(7.0))
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    other = build_grid(Domain.interval(), 6).zeros()
    with pytest.raises(GridMismatchError):
        sup_distance(f, other)


def test_csv_round_trip(tmp_path):
    g = build_grid(Domain.rectangle(0, 1, 0, 0.5), 4)
    rng = np.random.default_rng(3)
    f = g.field(rng.normal(size=g.size))
    path = write_field_csv(f, tmp_path / "f.csv")
    raw = path.read_bytes()
    assert raw.startswith(b"x,y,value\n") and b"\r" not in raw
    back = read_field_csv(path, g)
    assert np.array_equal(back.values, f.values)
    with pytest.raises(GridMismatchError):
        read_field_csv(path, build_grid(Domain.rectangle(0, 1, 0, 0.5), 5))


def test_csv_text_is_deterministic():
    g = build_grid(Domain.interval(), 5)
    f = g.evaluate(lambda x: x * (1 - x))
    assert field_to_csv(f) == field_to_csv(g.evaluate(lambda x: x * (1 - x)))


@given(
    st.lists(st.floats(-1e3, 1e3), min_size=9, max_size=9),
    st.lists(st.floats(-1e3, 1e3), min_size=9, max_size=9),
)
def test_sup_distance_is_a_metric(a, b):
    g = build_grid(Domain.interval(), 7)
    f, h = g.field(a), g.field(b)
    assert sup_distance(f, h) == sup_distance(h, f)
    assert sup_distance(f, h) <= sup_norm(f) + sup_norm(h) + 1e-9
    assert c1_distance(f, h) >= sup_distance(f, h)


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_integral_is_linear(a, b):
    g = build_grid(Domain.interval(), 15)
    u = g.evaluate(np.sin)
    v = g.evaluate(np.exp)
    lhs = integrate(u * a + v * b)
    assert lhs == pytest.approx(a * integrate(u) + b * integrate(v), abs=1e-10)


def test_domain_validation():
    with pytest.raises(ValueError):
        Domain.interval(1.0, 0.0)
    with pytest.raises(ValueError):
        build_grid(Domain.interval(), 2)
    with pytest.raises(ValueError):
        Field(build_grid(Domain.interval(), 3), np.zeros(4))
