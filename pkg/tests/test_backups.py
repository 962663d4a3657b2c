import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose

from fairl.backups import (
    GSoft,
    LogSumExp,
    Max,
    PNorm,
    apply_backup,
    backup_from_config,
    backup_gradient,
    backup_to_config,
)

from .oracles import central_difference, relative_error

OPERATORS = [Max(), LogSumExp(), GSoft(k=2.0), GSoft(k=100.0), PNorm(p=3.0), PNorm(p=10.0)]
q_vectors = arrays(np.float64, st.integers(1, 8), elements=st.floats(-20, 20))


def distinct_q(rng, n):
    # spacing keeps every finite-difference step on one side of any kink
    return rng.permutation(np.arange(n)) * 0.37 + rng.uniform(-0.1, 0.1, n)


class TestValues:
    def test_max(self):
        assert apply_backup(Max(), [1, 2, 3]) == 3

    def test_logsumexp_single_entry(self):
        assert apply_backup(LogSumExp(), [4.2]) == pytest.approx(4.2)

    def test_logsumexp_by_hand(self):
        assert apply_backup(LogSumExp(), [0.0, 0.0]) == pytest.approx(math.log(2))

    def test_gsoft_k100(self):
        assert abs(apply_backup(GSoft(k=100.0), [0.0, 1.0]) - 1.0) <= 1e-4

    def test_pnorm_is_near_max_for_large_p(self):
        assert apply_backup(PNorm(p=100.0), [0.0, 1.0, 2.0]) == pytest.approx(2.0, abs=0.05 * 2)

    def test_batched_rows(self):
        q = np.array([[1.0, 5.0], [7.0, 2.0]])
        assert_allclose(apply_backup(Max(), q), [5.0, 7.0])

    @pytest.mark.parametrize("op", OPERATORS)
    def test_empty_input_is_rejected(self, op):
        with pytest.raises(ValueError):
            apply_backup(op, [])
        with pytest.raises(ValueError):
            backup_gradient(op, [])

    def test_overflow_safe(self):
        assert np.isfinite(apply_backup(LogSumExp(), [1e4, 1e4 - 1]))
        assert np.isfinite(apply_backup(GSoft(k=1e3), [50.0, 49.0]))

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            GSoft(k=0.0)
        with pytest.raises(ValueError):
            PNorm(p=1.0)


class TestGradients:
    def test_max_one_hot(self):
        assert_allclose(backup_gradient(Max(), [1, 3, 2]), [0, 1, 0])

    def test_max_tie_goes_to_lowest_index(self):
        assert_allclose(backup_gradient(Max(), [3, 1, 3]), [1, 0, 0])

    def test_logsumexp_symmetric(self):
        assert_allclose(backup_gradient(LogSumExp(), [0, 0]), [0.5, 0.5])

    def test_gsoft_matches_finite_differences(self):
        q = np.array([0.0, 1.0])
        fd = central_difference(lambda x: apply_backup(GSoft(k=2.0), x), q, h=1e-6)
        assert relative_error(backup_gradient(GSoft(k=2.0), q), fd) <= 1e-6

    @pytest.mark.parametrize("op", OPERATORS, ids=repr)
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_finite_differences(self, op, seed):
        rng = np.random.default_rng(seed)
        q = distinct_q(rng, int(rng.integers(2, 7)))
        fd = central_difference(lambda x: apply_backup(op, x), q, h=1e-6)
        assert relative_error(backup_gradient(op, q), fd) <= 1e-6

    @pytest.mark.parametrize("op", OPERATORS, ids=repr)
    def test_rows_sum_to_one(self, op):
        q = np.random.default_rng(0).normal(size=(10, 5))
        assert_allclose(backup_gradient(op, q).sum(axis=-1), 1.0, atol=1e-12)

    def test_batched_gradient_matches_rows(self):
        q = np.random.default_rng(1).normal(size=(4, 3))
        op = PNorm(p=4.0)
        assert_allclose(backup_gradient(op, q), np.stack([backup_gradient(op, r) for r in q]))


class TestProperties:
    @given(q_vectors)
    def test_logsumexp_dominates_max(self, q):
        assert apply_backup(LogSumExp(), q) >= q.max() - 1e-12

    @given(q_vectors, st.floats(0.5, 1e3))
    def test_gsoft_bounds(self, q, k):
        v = apply_backup(GSoft(k=k), q)
        assert q.max() - 1e-12 <= v <= q.max() + math.log(len(q)) / k + 1e-12

    @settings(max_examples=50)
    @given(q_vectors, st.floats(-100, 100))
    def test_shift_equivariance(self, q, c):
        for op in (Max(), LogSumExp(), GSoft(k=5.0)):
            assert apply_backup(op, q + c) == pytest.approx(apply_backup(op, q) + c, abs=1e-10)

    @given(q_vectors)
    def test_pnorm_is_at_least_max(self, q):
        assert apply_backup(PNorm(p=10.0), q) >= q.max() - 1e-9


@pytest.mark.parametrize("op", OPERATORS, ids=repr)
def test_config_round_trip(op):
    assert backup_from_config(backup_to_config(op)) == op


def test_config_accepts_bare_name():
    assert backup_from_config("max") == Max()
    assert backup_from_config({"kind": "GSoft", "k": 3.0}) == GSoft(k=3.0)


def test_config_rejects_unknown_kind():
    with pytest.raises(ValueError):
        backup_from_config("median")
