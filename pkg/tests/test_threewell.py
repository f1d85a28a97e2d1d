import sys
import textwrap

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decisionfp.errors import ValidationError
from decisionfp.fp1d import partition_wells, performance, reaction_time
from decisionfp.threewell import (SUBCRITICAL_SEQUENCE, ThreeWellParams, load_callable, three_well_drift,
                                  three_well_manifold)


def potential(params, y):
    """Closed-form antiderivative of minus the unbiased drift."""
    a, b, c = params.coefficients
    return a * y ** 2 / 2 - b * y ** 4 / 4 + c * y ** 6 / 6


@pytest.mark.parametrize("w_plus", SUBCRITICAL_SEQUENCE)
def test_outer_wells_are_pinned(w_plus):
    p = ThreeWellParams(w_plus=w_plus)
    g = three_well_drift(p)
    np.testing.assert_allclose(g(np.array([-1.0, 0.0, 1.0])), 0.0, atol=1e-12)
    assert potential(p, 1.0) == pytest.approx(p.well_depth, abs=1e-12)
    # a minimum: the drift points back towards y = 1 from both sides
    assert g(0.99) > 0 > g(1.01)


def test_middle_well_flattens_across_the_sequence():
    lo, mid, hi = (ThreeWellParams(w_plus=w) for w in SUBCRITICAL_SEQUENCE)
    assert lo.coefficients[0] > 0  # origin is a minimum
    assert mid.coefficients[0] == 0.0  # flat
    assert hi.coefficients[0] < 0  # origin is a maximum
    counts = [len(partition_wells(three_well_manifold(p)).wells) for p in (lo, mid, hi)]
    assert counts == [3, 2, 2]


def test_reference_coefficients():
    # a = 400 * 0.001 = 0.4;  c = (3a + 2.4) = 3.6;  b = a + c = 4.0
    np.testing.assert_allclose(ThreeWellParams(w_plus=2.5685).coefficients, (0.4, 4.0, 3.6), rtol=1e-9)


@settings(max_examples=30)
@given(st.floats(2.55, 2.59), st.floats(0.0, 0.1), st.floats(-1.5, 1.5))
def test_bias_keeps_the_origin_an_extremum(w_plus, delta_lambda, y):
    g = three_well_drift(ThreeWellParams(w_plus=w_plus), delta_lambda)
    g0 = three_well_drift(ThreeWellParams(w_plus=w_plus), 0.0)
    assert g(0.0) == 0.0
    # the bias adds gamma * delta_lambda * y^2, pushing towards y > 0
    assert g(y) - g0(y) == pytest.approx(2.0 * delta_lambda * y * y, abs=1e-12)


def test_unbiased_family_is_symmetric():
    m = three_well_manifold(ThreeWellParams(w_plus=2.5685))
    np.testing.assert_allclose(m.g_red, -m.g_red[::-1], atol=1e-12)
    # the middle well holds the rest of the mass
    assert performance(m, 0.3) == pytest.approx(performance(m, 0.3, correct_well="decision-2"), abs=1e-9)
    assert performance(m, 0.3) < 0.5


def test_observables_respond_to_bias():
    p = ThreeWellParams(w_plus=2.5685)
    rt0, proto = reaction_time(three_well_manifold(p, 0.0), p.beta)
    rt1, _ = reaction_time(three_well_manifold(p, 0.02), p.beta)
    assert proto.kind == "three-well"
    assert rt1 < rt0


@pytest.mark.parametrize("kwargs, field", [
    ({"w_plus": -1.0}, "w_plus"),
    ({"family": "quartic"}, "family"),
    ({"family": "custom"}, "drift"),
    ({"well_position": 2.0}, "well_position"),
    ({"well_depth": 0.1}, "well_depth"),
    ({"beta": 0.0}, "beta"),
    ({"n": 5}, "n"),
])
def test_validation(kwargs, field):
    with pytest.raises(ValidationError) as info:
        ThreeWellParams(**kwargs)
    assert info.value.field == field


def test_replace():
    p = ThreeWellParams().replace(w_plus=2.5705, kappa=100.0)
    assert (p.w_plus, p.kappa) == (2.5705, 100.0)
    with pytest.raises(ValidationError):
        ThreeWellParams().replace(n=3)


@pytest.fixture
def custom_module(tmp_path, monkeypatch):
    (tmp_path / "my_family.py").write_text(textwrap.dedent("""
        def drift(y, w_plus, delta_lambda):
            return -(y - delta_lambda) * (y * y - w_plus)
    """))
    monkeypatch.syspath_prepend(str(tmp_path))
    yield "my_family:drift"
    sys.modules.pop("my_family", None)


def test_custom_family(custom_module):
    p = ThreeWellParams(family="custom", drift=custom_module, w_plus=1.0, y_max=1.6)
    g = three_well_drift(p, 0.1)
    assert g(0.1) == pytest.approx(0.0)
    m = three_well_manifold(p, 0.1)
    np.testing.assert_allclose(partition_wells(m).wells, [-1.0, 1.0], atol=2e-3)


@pytest.mark.parametrize("target", ["nocolon", "no_such_module_xyz:f", "math:no_such_function", "math:pi"])
def test_load_callable_errors(target):
    with pytest.raises(ValidationError):
        load_callable(target)


def test_load_callable():
    import math

    assert load_callable("math:sqrt") is math.sqrt
