import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfatopo import DomainError, KnotVector, OrderError, basis_values
from oracles import naive_basis, naive_basis_derivative


def test_clamped_uniform_construction():
    kv = KnotVector.clamped_uniform(4, 9)
    assert kv.n_ctrl == 9
    assert kv.n_spans == 5
    assert kv.knots.size == 9 + 4 + 1
    assert np.all(kv.knots[:5] == 0.0)
    assert np.all(kv.knots[-5:] == 1.0)


def test_knot_validation_rejects_bad_vectors():
    with pytest.raises(ValueError):
        KnotVector(4, np.linspace(0, 1, 14))  # not clamped
    good = KnotVector.clamped_uniform(3, 7).knots.copy()
    bad = good.copy()
    bad[4], bad[5] = bad[5], bad[4]
    with pytest.raises(ValueError):
        KnotVector(3, bad)
    nonuniform = good.copy()
    nonuniform[5] *= 1.5
    with pytest.raises(ValueError):
        KnotVector(3, nonuniform)


def test_matches_recursive_evaluation_oracle():
    kv = KnotVector.clamped_uniform(4, 10)
    for u in [0.5, 0.0, 1.0, 0.123, 0.999, 1.0 / 6.0]:
        active = dict(basis_values(kv, u, order=0))
        for j in range(kv.n_ctrl):
            expected = naive_basis(kv.knots, 4, j, u)
            got = active[j][0] if j in active else 0.0
            assert got == pytest.approx(expected, abs=1e-13)


def test_derivatives_match_recursive_oracle():
    kv = KnotVector.clamped_uniform(4, 9)
    for u in [0.37, 0.61, 0.05]:
        active = dict(basis_values(kv, u, order=3))
        for j, ders in active.items():
            for order in range(1, 4):
                expected = naive_basis_derivative(kv.knots, 4, j, u, order)
                assert ders[order] == pytest.approx(expected, rel=1e-10,
                                                    abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(u=st.floats(min_value=0.0, max_value=1.0),
       p=st.integers(min_value=1, max_value=5),
       extra=st.integers(min_value=1, max_value=12))
def test_partition_of_unity(u, p, extra):
    kv = KnotVector.clamped_uniform(p, p + extra)
    values = [ders[0] for _, ders in basis_values(kv, u, order=0)]
    assert abs(sum(values) - 1.0) < 1e-12


@settings(max_examples=100, deadline=None)
@given(u=st.floats(min_value=0.0, max_value=1.0),
       p=st.integers(min_value=2, max_value=5))
def test_first_derivatives_sum_to_zero(u, p):
    kv = KnotVector.clamped_uniform(p, p + 7)
    total = sum(ders[1] for _, ders in basis_values(kv, u, order=1))
    # derivative magnitudes scale with the span count
    assert abs(total) < 1e-10 * max(1.0, kv.n_spans * p)


def test_exactly_p_plus_one_entries():
    kv = KnotVector.clamped_uniform(4, 12)
    assert len(basis_values(kv, 0.42, order=2)) == 5


def test_parameter_outside_unit_interval_raises():
    kv = KnotVector.clamped_uniform(3, 8)
    with pytest.raises(DomainError):
        basis_values(kv, 1.0001)
    with pytest.raises(DomainError):
        basis_values(kv, -0.2)


def test_order_above_degree_raises():
    kv = KnotVector.clamped_uniform(2, 6)
    with pytest.raises(OrderError):
        basis_values(kv, 0.5, order=3)


def test_span_index_tie_breaks():
    kv = KnotVector.clamped_uniform(3, 8)  # 5 spans
    assert kv.span_index(0.0) == 0
    assert kv.span_index(1.0) == 4
    assert kv.span_index(0.4) == 1  # exact interior knot -> lower span
    assert kv.span_index(0.4 + 1e-12) == 2
