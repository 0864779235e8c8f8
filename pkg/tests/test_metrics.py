import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from attribench.attribution import AttributionVector
from attribench.metrics import (MetricRecord, accuracy, basic_metrics, consistency,
                                convergence_auc, fprec, mae, uscore)

from oracles import trapezoid

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_uscore_examples():
    assert uscore([1.0], [1.0]) == 1.0
    assert abs(uscore([1.0], [-1.0])) < 1e-8
    assert uscore([3.0], [1.0]) == pytest.approx(1 - 2 / (4 + 1e-8), abs=1e-15)
    assert uscore([3.0], [1.0]) == pytest.approx(0.5)


def test_uscore_zero_pair_guarded():
    assert uscore([0.0], [0.0]) == 1.0


def test_uscore_errors():
    with pytest.raises(ValueError):
        uscore([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        uscore([1.0], [1.0], eps=0)
    with pytest.raises(ValueError):
        uscore([], [])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=20))
def test_uscore_range_and_symmetry(pairs):
    p, t = np.array(pairs).T
    s = uscore(p, t)
    assert 0.0 <= s <= 1.0
    assert s == uscore(t, p)
    assert uscore(t, t) == 1.0


def test_fprec_examples():
    assert fprec({0, 1, 2}, {0, 1, 2}) == 1.0
    assert fprec({3, 4}, {0, 1}) == 0.0
    assert fprec({0, 5}, {0, 1}) == 0.5


def test_fprec_size_mismatch():
    with pytest.raises(ValueError):
        fprec({0}, {0, 1})
    with pytest.raises(ValueError):
        fprec(set(), set())


@settings(max_examples=200, deadline=None)
@given(st.sets(st.integers(0, 30), min_size=1, max_size=8), st.data())
def test_fprec_lattice_and_monotone(annotated, data):
    k = len(annotated)
    top = data.draw(st.sets(st.integers(0, 30), min_size=k, max_size=k))
    v = fprec(top, annotated)
    assert v * k == pytest.approx(round(v * k))
    assert fprec(annotated, annotated) == 1.0
    outsiders = sorted(top - annotated)
    missing = sorted(annotated - top)
    if outsiders:
        swapped = (top - {outsiders[0]}) | {missing[0]}
        assert fprec(swapped, annotated) >= v


def test_consistency_examples():
    shared = [np.array([0.3, -2.0, 1.0])] * 5
    assert consistency(shared, 1) == 1.0
    # mean |a| = [0.5, 0.5]; the tie goes to index 0, so only the first sample agrees
    assert consistency([np.array([1.0, 0.0]), np.array([0.0, 1.0])], 1) == 0.5
    rows = np.random.default_rng(0).normal(size=(7, 4))
    assert consistency(list(rows), 4) == 1.0


def test_consistency_accepts_attribution_vectors():
    vs = [AttributionVector(np.array([2.0, 1.0]), "sa"), AttributionVector(np.array([1.0, 3.0]), "sa")]
    assert consistency(vs, 1) == 0.5


def test_consistency_empty():
    with pytest.raises(ValueError):
        consistency([], 1)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_consistency_range(n, m, seed):
    rows = np.random.default_rng(seed).normal(size=(m, n))
    k = 1 + seed % n
    assert 0.0 <= consistency(list(rows), k) <= 1.0


def test_convergence_auc_examples():
    assert convergence_auc(np.ones(7)) == 1.0
    assert convergence_auc(np.zeros(7)) == 0.0
    assert convergence_auc([0.0, 1.0]) == 0.5
    assert convergence_auc(np.arange(5) / 4) == 0.5
    assert convergence_auc(np.linspace(0, 1, 11)) == pytest.approx(0.5, abs=1e-15)


def test_convergence_auc_short_curve():
    with pytest.raises(ValueError):
        convergence_auc([1.0])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=30))
def test_convergence_auc_bounds_and_oracle(curve):
    v = convergence_auc(curve)
    assert min(curve) - 1e-12 <= v <= max(curve) + 1e-12
    assert v == pytest.approx(trapezoid(curve) / (len(curve) - 1), abs=1e-12)


def test_basic_metrics_examples():
    assert basic_metrics([0.2, 0.7], [0.2, 0.7])[0].value == 0.0
    assert basic_metrics([1.0, 0.0], [1.0, 0.0], "classification")[0].value == 1.0
    assert basic_metrics([0.9], [0.0], "classification")[0].value == 0.0
    rec = basic_metrics([1.0, 3.0], [2.0, 2.0], seed=4)[0]
    assert rec.name == "mae" and rec.value == 1.0 and rec.context == {"seed": 4}


def test_basic_metrics_errors():
    with pytest.raises(ValueError):
        basic_metrics([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        basic_metrics([1.0], [1.0], "ranking")


def test_mae_and_accuracy():
    assert mae([0.0, 2.0], [1.0, 1.0]) == 1.0
    assert accuracy([0.5, 0.49], [1, 0]) == 1.0


def test_metric_record_finite():
    with pytest.raises(ValueError):
        MetricRecord("mae", float("nan"))
