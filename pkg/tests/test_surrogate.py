import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ampc.basis import AffineMap, BasisFamily, total_degree_index_set
from ampc.bayes import PriorSpec
from ampc.errors import DegenerateDesignError, InputError
from ampc.models import FunctionModel, LedgeredModel
from ampc.models.toys import ExpSumModel
from ampc.regression import fit_prior_surrogate
from ampc.surrogate import (
    MultiFidelitySurrogate,
    PcSurrogate,
    build_multifidelity,
    correction_design_size,
    merge,
)

UNIT_MAP = AffineMap.identity(2)


def constant(c, n_z=2, order=0, n_d=1, mp=None):
    s = total_degree_index_set(n_z, order)
    coef = np.zeros((len(s), n_d))
    coef[0] = c
    return PcSurrogate(BasisFamily.LEGENDRE, s, coef, mp or AffineMap.identity(n_z))


@pytest.fixture(scope="module")
def low():
    return fit_prior_surrogate(ExpSumModel(2), PriorSpec.uniform(2), 3, seed=0)


class TestPcSurrogate:
    def test_constant_everywhere(self):
        sur = constant(2.5, order=3)
        z = np.random.default_rng(0).uniform(-1, 1, (20, 2))
        np.testing.assert_array_equal(sur.evaluate_batch(z), 2.5)
        assert sur.evaluate(z[0])[0] == 2.5

    def test_single_and_batch_agree(self, low):
        z = np.random.default_rng(1).uniform(0, 1, (30, 2))
        batch = low.evaluate_batch(z)
        for i in range(30):
            np.testing.assert_allclose(low.evaluate(z[i]), batch[i], rtol=1e-14)

    def test_dimension_mismatch(self, low):
        with pytest.raises(InputError):
            low.evaluate([0.1, 0.2, 0.3])

    def test_coefficient_rows_checked(self):
        with pytest.raises(InputError):
            PcSurrogate(BasisFamily.LEGENDRE, total_degree_index_set(2, 2), np.zeros(5), UNIT_MAP)

    def test_json_round_trip(self, low, tmp_path):
        p = tmp_path / "s.json"
        low.save(p)
        back = PcSurrogate.load(p)
        assert back.coefficients.tobytes() == low.coefficients.tobytes()
        assert back.prior_map == low.prior_map
        assert json.loads(p.read_text())["ordering"] == low.to_dict()["ordering"]

    def test_rejects_foreign_file(self):
        with pytest.raises(InputError):
            PcSurrogate.from_dict({"format": "other"})

    def test_rejects_incomplete_terms(self, low):
        d = low.to_dict()
        d["terms"] = d["terms"][:-1]
        with pytest.raises(InputError):
            PcSurrogate.from_dict(d)


class TestMerge:
    def test_spot_values(self):
        s = total_degree_index_set(1, 1)
        lo = PcSurrogate(BasisFamily.LEGENDRE, s, [1.0, 2.0], AffineMap.identity(1))
        corr = PcSurrogate(BasisFamily.LEGENDRE, total_degree_index_set(1, 0), [3.0], AffineMap.identity(1))
        np.testing.assert_array_equal(merge(lo, corr).coefficients[:, 0], [4.0, 2.0])

    def test_zero_correction(self, low):
        corr = constant(0.0, order=2, mp=low.prior_map)
        np.testing.assert_array_equal(merge(low, corr).coefficients, low.coefficients)

    def test_full_order_corrects_everything(self, low):
        s = low.index_set
        corr = PcSurrogate(low.family, s, np.ones((len(s), 1)), low.prior_map)
        np.testing.assert_allclose(merge(low, corr).coefficients, low.coefficients + 1)

    def test_generation_increments(self, low):
        m1 = merge(low, constant(0.1, order=1, mp=low.prior_map))
        m2 = merge(m1, constant(0.1, order=1, mp=low.prior_map))
        assert (low.generation, m1.generation, m2.generation) == (0, 1, 2)

    def test_rejects_larger_correction(self):
        with pytest.raises(InputError):
            merge(constant(1.0, order=1), constant(1.0, order=2))

    def test_rejects_different_map(self, low):
        with pytest.raises(InputError):
            merge(low, constant(1.0, order=1))

    @given(st.integers(0, 3), st.integers(0, 2**20))
    @settings(max_examples=25, deadline=None)
    def test_linearity(self, N_C, seed):
        rng = np.random.default_rng(seed)
        s = total_degree_index_set(2, 3)
        lo = PcSurrogate(BasisFamily.HERMITE, s, rng.standard_normal((len(s), 2)), UNIT_MAP)
        cs = total_degree_index_set(2, N_C)
        corr = PcSurrogate(BasisFamily.HERMITE, cs, rng.standard_normal((len(cs), 2)), UNIT_MAP)
        z = rng.standard_normal((1000, 2))
        merged = merge(lo, corr)
        np.testing.assert_allclose(
            merged.evaluate_batch(z), lo.evaluate_batch(z) + corr.evaluate_batch(z), rtol=1e-12, atol=1e-12
        )


class TestBuildMultifidelity:
    def test_design_size(self):
        assert correction_design_size(2, 2) == 12
        assert correction_design_size(9, 2) == 110

    def test_identical_models_give_zero_correction(self, low):
        mf = build_multifidelity(low, low, 2, [0.4, 0.6], 0.1, seed=0)
        assert np.max(np.abs(mf.correction.coefficients)) < 1e-10
        z = np.random.default_rng(0).uniform(0, 1, (100, 2))
        np.testing.assert_allclose(mf.merged.evaluate_batch(z), low.evaluate_batch(z), atol=1e-10)

    def test_constant_offset(self, low):
        high = FunctionModel(lambda z: low.evaluate(z) + 5.0, 2, 1)
        mf = build_multifidelity(low, high, 2, [0.3, 0.3], 0.2, seed=1)
        assert mf.correction.coefficients[0, 0] == pytest.approx(5.0, abs=1e-10)
        assert np.max(np.abs(mf.correction.coefficients[1:])) < 1e-10

    def test_merged_equals_sum(self, low):
        mf = build_multifidelity(low, ExpSumModel(2), 2, [0.5, 0.5], 0.1, seed=2)
        z = np.random.default_rng(5).uniform(0, 1, (1000, 2))
        np.testing.assert_allclose(
            mf.merged.evaluate_batch(z),
            low.evaluate_batch(z) + mf.correction.evaluate_batch(z),
            rtol=1e-12,
            atol=1e-12,
        )

    def test_improves_locally(self, low):
        high = ExpSumModel(2)
        c = np.array([0.7, 0.2])
        mf = build_multifidelity(low, high, 2, c, 0.1, seed=3)
        near = c + np.random.default_rng(6).uniform(-0.1, 0.1, (200, 2))
        before = np.abs(low.evaluate_batch(near) - high.evaluate_batch(near)).max()
        after = np.abs(mf.merged.evaluate_batch(near) - high.evaluate_batch(near)).max()
        assert after < before / 10

    def test_points_in_ball_and_counted(self, low):
        high = LedgeredModel(ExpSumModel(2))
        mf = build_multifidelity(low, high, 2, [0.5, 0.5], 0.1, seed=4)
        assert mf.n_hf_evaluations == 12
        assert high.ledger.count("refinement") == 12
        assert np.all(np.abs(mf.points - 0.5) <= 0.1)

    def test_clamping(self, low):
        mf = build_multifidelity(low, ExpSumModel(2), 1, [0.0, 1.0], 0.1, seed=5, lower=[0, 0], upper=[1, 1])
        assert np.all((mf.points >= 0) & (mf.points <= 1))

    def test_collapsed_design(self, low):
        with pytest.raises(DegenerateDesignError):
            build_multifidelity(low, ExpSumModel(2), 2, [5.0, 5.0], 0.1, seed=0, lower=[0, 0], upper=[1, 1])

    def test_order_checks(self, low):
        with pytest.raises(InputError):
            build_multifidelity(low, ExpSumModel(2), 4, [0.5, 0.5], 0.1, seed=0)
        with pytest.raises(InputError):
            build_multifidelity(low, ExpSumModel(2), 2, [0.5, 0.5], 0.0, seed=0)

    def test_subset_rule_is_structural(self, low):
        big = PcSurrogate(low.family, total_degree_index_set(2, 4), np.zeros((15, 1)), low.prior_map)
        with pytest.raises(InputError):
            MultiFidelitySurrogate(low, big, low, np.zeros((1, 2)), 1)

    def test_seeded(self, low):
        a = build_multifidelity(low, ExpSumModel(2), 2, [0.5, 0.5], 0.1, seed=7)
        b = build_multifidelity(low, ExpSumModel(2), 2, [0.5, 0.5], 0.1, seed=7)
        assert a.merged.coefficients.tobytes() == b.merged.coefficients.tobytes()
