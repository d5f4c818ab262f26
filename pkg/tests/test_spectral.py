import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import dominance
from overtaking.casebook import build_example1, build_example2
from overtaking.mdp import Mdp, sample_generic
from overtaking.spectral import (
    MixingError,
    Ordering,
    PerronError,
    ReducedMatrix,
    best_pure_stationary,
    eigenvalues,
    genericity_check,
    lambda2,
    mix_one_row_scan,
    perron_pair,
    perron_root,
    reduced_matrix,
    report_from_csv,
    scan_shape,
    spectral_compare,
)
from overtaking.strategy import StationaryStrategy, induced_matrix, random_stationary

A_TWO_ROW = np.array([[98, 98, 1], [98, 1, 1], [1, 1, 1]]) / 300
B_TWO_ROW = np.array([[1, 1, 1], [1, 1, 98], [1, 98, 98]]) / 300


def test_reduced_matrix_example1(ex1, ex1_a):
    red = reduced_matrix(induced_matrix(ex1, ex1_a))
    assert red.states == ("x", "y", "z")
    np.testing.assert_allclose(red.matrix, [[0, 0.89, 0], [0, 0.89, 0], [0, 0, 0.9]])
    sub = red.reachable_from("x")
    assert sub.states == ("x", "y")
    np.testing.assert_allclose(sub.matrix, [[0, 0.89], [0, 0.89]])


def test_reduced_matrix_two_states():
    m = Mdp.build(("x", "t"), "t", {"x": {"a": {"x": 0.7, "t": 0.3}}})
    red = reduced_matrix(induced_matrix(m, StationaryStrategy.pure({"x": "a"})))
    np.testing.assert_allclose(red.matrix, [[0.7]])


def test_eigenvalue_examples():
    np.testing.assert_allclose(eigenvalues(np.full((2, 2), 0.5)), [1, 0], atol=1e-14)
    assert abs(eigenvalues(A_TWO_ROW)[0] - 0.529522) <= 1e-5
    rot = eigenvalues(np.array([[0.0, -1.0], [1.0, 0.0]]))
    assert rot[0] == pytest.approx(1j) and rot[1] == pytest.approx(-1j)


def test_eigenvalues_reject_nonfinite():
    with pytest.raises(ValueError):
        eigenvalues(np.array([[np.nan]]))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000), n=st.integers(1, 7))
def test_eigenvalue_residual_and_order(seed, n):
    m = np.random.default_rng(seed).normal(size=(n, n))
    vals = eigenvalues(m)
    assert len(vals) == n
    mods = np.abs(vals)
    assert np.all(np.diff(mods) <= 1e-9)
    np.testing.assert_allclose(sorted(np.poly(m).real), sorted(np.poly(vals).real), atol=1e-8 * max(1, np.abs(np.poly(m)).max()))


def test_perron_examples(ex1, ex1_b):
    assert perron_root(np.array([[0.9]])) == 0.9
    assert abs(perron_root(0.5 * A_TWO_ROW + 0.5 * B_TWO_ROW) - 1 / 3) <= 1e-9
    red = reduced_matrix(induced_matrix(ex1, ex1_b))
    assert perron_root(red) == pytest.approx(0.9, abs=1e-12)


def test_perron_reducible_and_zero():
    assert perron_root(np.zeros((3, 3))) == 0.0
    nil = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert perron_root(nil) == 0.0
    cyc = np.array([[0, 0.5, 0], [0, 0, 0.5], [0.5, 0, 0]])
    assert perron_root(cyc) == pytest.approx(0.5, abs=1e-12)


def test_perron_rejects_negative():
    with pytest.raises(ValueError):
        perron_root(np.array([[-0.1]]))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000), n=st.integers(1, 6))
def test_perron_positive_substochastic(seed, n):
    rng = np.random.default_rng(seed)
    m = rng.uniform(0.01, 1.0, size=(n, n))
    m = m / m.sum(axis=1, keepdims=True) * rng.uniform(0.2, 0.99, size=(n, 1))
    root, vec = perron_pair(m)
    assert 0 < root < 1
    assert np.all(vec > 0)
    np.testing.assert_allclose(m @ vec, root * vec, atol=1e-12)
    others = sorted(np.abs(np.linalg.eigvals(m)))[:-1]
    assert not others or root - max(others) > 0


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000), n=st.integers(2, 6), density=st.floats(0.2, 0.8))
def test_perron_sparse_agrees_with_spectrum(seed, n, density):
    rng = np.random.default_rng(seed)
    m = rng.uniform(0, 1, size=(n, n)) * (rng.uniform(size=(n, n)) < density)
    assert abs(perron_root(m) - np.abs(np.linalg.eigvals(m)).max()) <= 1e-8


def test_lambda2_example1(ex1, ex1_a, ex1_b):
    assert lambda2(ex1, ex1_a) == pytest.approx(0.89, abs=1e-12)
    assert lambda2(ex1, ex1_b) == pytest.approx(0.90, abs=1e-12)


def test_lambda2_matches_full_spectrum(rng):
    m = sample_generic(5, 2, seed=11)
    for _ in range(5):
        sigma = random_stationary(m, rng)
        second = abs(eigenvalues(induced_matrix(m, sigma).matrix)[1])
        assert abs(lambda2(m, sigma) - second) <= 1e-8


def test_spectral_compare(ex1, ex1_a, ex1_b):
    assert spectral_compare(ex1, ex1_a, ex1_b) is Ordering.FIRST
    assert spectral_compare(ex1, ex1_a, ex1_a) is Ordering.TIE
    assert spectral_compare(ex1.with_objective("safety"), ex1_a, ex1_b) is Ordering.SECOND


def test_best_example1(ex1):
    best, report = best_pure_stationary(ex1)
    assert best.action("x") == "a"
    assert report.generic
    assert report.min_gap == pytest.approx(0.01, abs=1e-12)
    assert report.selected == 0


def test_best_single_action():
    m = Mdp.build(("x", "t"), "t", {"x": {"a": {"x": 0.3, "t": 0.7}}})
    best, report = best_pure_stationary(m)
    assert best.action("x") == "a"
    assert report.generic and report.min_gap == float("inf")


def test_best_dominates_random_stationary():
    m = sample_generic(4, 2, seed=1)
    best, _ = best_pure_stationary(m)
    rng = np.random.default_rng(0)
    others = [random_stationary(m, rng) for _ in range(50)]
    result = dominance(m, best, others)
    assert result["T_emp"] is not None
    assert result["dominates"]


def test_best_safety_selects_argmax():
    m = sample_generic(4, 2, seed=1).with_objective("safety")
    best, report = best_pure_stationary(m)
    assert report.entries[report.selected].lambda2 == pytest.approx(report.lambdas.max())


def test_genericity_example2_reports():
    report = genericity_check(build_example2())
    assert len(report.entries) == 2
    assert report.entries[0].lambda2 == pytest.approx(0.5)


def test_genericity_frequency():
    generic = 0
    for seed in range(100):
        generic += genericity_check(sample_generic(4, 2, seed)).generic
    assert generic >= 99


def test_genericity_duplicate_actions():
    m = Mdp.build(
        ("x", "y", "t"), "t",
        {
            "x": {"a": {"x": 0.2, "y": 0.3, "t": 0.5}, "a2": {"x": 0.2, "y": 0.3, "t": 0.5}},
            "y": {"b": {"x": 0.4, "y": 0.4, "t": 0.2}},
        },
    )
    report = genericity_check(m)
    assert not report.generic
    assert report.min_gap == 0.0
    assert report.selected == 0


def test_ties_select_lowest_index():
    m = build_example1().with_objective("reach")
    report = genericity_check(m, gap_tol=0.5)
    assert not report.generic
    assert report.selected == 0


def test_report_csv_round_trip():
    report = genericity_check(sample_generic(4, 2, seed=3))
    parsed = report_from_csv(report.to_csv())
    assert parsed["selected"] == report.selected
    assert [r["lambda2"] for r in parsed["rows"]] == [e.lambda2 for e in report.entries]
    assert parsed["min_gap"] == report.min_gap


def test_equal_root_pair_values():
    assert abs(perron_root(A_TWO_ROW) - 0.529522) <= 1e-5
    assert abs(perron_root(B_TWO_ROW) - 0.529522) <= 1e-5
    mid = perron_root(0.5 * A_TWO_ROW + 0.5 * B_TWO_ROW)
    assert abs(mid - 1 / 3) <= 1e-9
    assert mid < min(perron_root(A_TWO_ROW), perron_root(B_TWO_ROW))


def test_mix_scan_rejects_two_row_pair():
    with pytest.raises(MixingError, match="one-row mixing"):
        mix_one_row_scan(A_TWO_ROW, B_TWO_ROW)


def test_mix_scan_constant_when_equal():
    values = [v for _, v in mix_one_row_scan(A_TWO_ROW, A_TWO_ROW)]
    assert scan_shape(values, 1e-12) == "constant"


def test_mix_scan_validation():
    with pytest.raises(ValueError):
        mix_one_row_scan(A_TWO_ROW, A_TWO_ROW, grid=2)
    with pytest.raises(ValueError):
        mix_one_row_scan(np.zeros((2, 2)), np.zeros((2, 2)))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 100_000), n=st.integers(2, 5))
def test_mix_scan_monotone(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.01, 1, size=(n, n))
    b = a.copy()
    r = int(rng.integers(n))
    b[r] = rng.uniform(0.01, 1, size=n)
    scan = mix_one_row_scan(a, b)
    values = [v for _, v in scan]
    assert [al for al, _ in scan] == pytest.approx(np.linspace(0, 1, 11))
    assert scan_shape(values) != "none"
    assert min(values) >= min(values[0], values[-1]) - 1e-10
    if abs(values[0] - values[-1]) > 1e-6:
        assert scan_shape(values) in ("increasing", "decreasing")


def test_perron_error_on_disagreement(monkeypatch):
    import overtaking.spectral as sp

    monkeypatch.setattr(sp, "_power_root", lambda b, max_iter=0: (0.0, np.ones(len(b)) / len(b)))
    with pytest.raises(PerronError):
        perron_root(np.array([[0.5, 0.5], [0.5, 0.5]]))


def test_reduced_matrix_value_type():
    red = ReducedMatrix(A_TWO_ROW, ("1", "2", "3"))
    assert perron_root(red) == pytest.approx(perron_root(A_TWO_ROW))
