import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ampc.basis import BasisFamily, total_degree_index_set, vandermonde
from ampc.bayes import PriorSpec
from ampc.design import DesignSet, make_design
from ampc.errors import DegenerateDesignError, ForwardModelError, InputError
from ampc.models import FunctionModel, LedgeredModel
from ampc.models.toys import PolynomialModel
from ampc.regression import fit_prior_surrogate, fit_weighted_lsq


class TestWeightedLsq:
    def test_unit_vector_recovery(self):
        s = total_degree_index_set(2, 3)
        d = make_design(BasisFamily.LEGENDRE, s, 0)
        k = 4
        b = vandermonde(BasisFamily.LEGENDRE, s, d.points)[:, k]
        rep = fit_weighted_lsq(BasisFamily.LEGENDRE, s, d, b)
        np.testing.assert_allclose(rep.coefficients, np.eye(len(s))[k], atol=1e-10)
        assert rep.residual_norm[0] < 1e-10
        assert rep.rank == len(s)

    def test_zero_values(self):
        s = total_degree_index_set(3, 2)
        d = make_design(BasisFamily.HERMITE, s, 1)
        rep = fit_weighted_lsq(BasisFamily.HERMITE, s, d, np.zeros(len(d)))
        assert np.all(rep.coefficients == 0)
        assert rep.residual_norm[0] == 0

    def test_polynomial_in_span(self):
        # 3 + 2 z1 - z1 z2 written directly, no basis conversion.
        s = total_degree_index_set(2, 3)
        d = make_design(BasisFamily.LEGENDRE, s, 2)
        g = lambda z: 3 + 2 * z[:, 0] - z[:, 0] * z[:, 1]
        rep = fit_weighted_lsq(BasisFamily.LEGENDRE, s, d, g(d.points))
        z = np.random.default_rng(3).uniform(-1, 1, (1000, 2))
        pred = vandermonde(BasisFamily.LEGENDRE, s, z) @ rep.coefficients
        assert np.max(np.abs(pred - g(z))) < 1e-8

    def test_multiple_outputs(self):
        s = total_degree_index_set(2, 2)
        d = make_design(BasisFamily.LEGENDRE, s, 4)
        C = np.random.default_rng(0).standard_normal((len(s), 3))
        rep = fit_weighted_lsq(BasisFamily.LEGENDRE, s, d, vandermonde(BasisFamily.LEGENDRE, s, d.points) @ C)
        np.testing.assert_allclose(rep.coefficients, C, atol=1e-10)
        assert rep.residual_norm.shape == (3,)

    @given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 500))
    @settings(max_examples=25, deadline=None)
    def test_weights_irrelevant_for_consistent_systems(self, n_z, order, seed):
        s = total_degree_index_set(n_z, order)
        d = make_design(BasisFamily.LEGENDRE, s, seed)
        C = np.random.default_rng(seed).standard_normal(len(s))
        b = vandermonde(BasisFamily.LEGENDRE, s, d.points) @ C
        unweighted = DesignSet(d.points, np.ones(len(d)), d.family, d.order)
        a = fit_weighted_lsq(BasisFamily.LEGENDRE, s, d, b).coefficients
        u = fit_weighted_lsq(BasisFamily.LEGENDRE, s, unweighted, b).coefficients
        np.testing.assert_allclose(a, u, atol=1e-8)

    def test_deterministic(self):
        s = total_degree_index_set(3, 3)
        d = make_design(BasisFamily.HERMITE, s, 8)
        b = np.sin(d.points.sum(axis=1))
        a1 = fit_weighted_lsq(BasisFamily.HERMITE, s, d, b).coefficients
        a2 = fit_weighted_lsq(BasisFamily.HERMITE, s, d, b).coefficients
        assert a1.tobytes() == a2.tobytes()

    def test_rank_deficient(self):
        s = total_degree_index_set(2, 2)
        pts = np.tile([[0.1, 0.2]], (12, 1))
        d = DesignSet(pts, np.ones(12), BasisFamily.LEGENDRE, 2)
        with pytest.raises(DegenerateDesignError) as exc:
            fit_weighted_lsq(BasisFamily.LEGENDRE, s, d, np.ones(12))
        assert exc.value.rank == 1
        assert exc.value.n_columns == 6

    def test_too_few_points(self):
        s = total_degree_index_set(2, 2)
        d = DesignSet(np.random.default_rng(0).uniform(-1, 1, (4, 2)), np.ones(4), BasisFamily.LEGENDRE, 2)
        with pytest.raises(DegenerateDesignError):
            fit_weighted_lsq(BasisFamily.LEGENDRE, s, d, np.ones(4))

    def test_non_finite_values(self):
        s = total_degree_index_set(1, 1)
        d = make_design(BasisFamily.LEGENDRE, s, 0)
        with pytest.raises(InputError):
            fit_weighted_lsq(BasisFamily.LEGENDRE, s, d, [np.nan, 1, 2, 3])


class TestPriorSurrogate:
    def test_constant_model(self):
        prior = PriorSpec.uniform(2)
        sur = fit_prior_surrogate(FunctionModel(lambda z: 7.5, 2, 1), prior, 3, seed=0)
        np.testing.assert_allclose(sur.coefficients[0], 7.5, atol=1e-12)
        assert np.max(np.abs(sur.coefficients[1:])) < 1e-10
        z = np.random.default_rng(1).uniform(0, 1, (50, 2))
        np.testing.assert_allclose(sur.evaluate_batch(z), 7.5, atol=1e-10)

    @pytest.mark.parametrize("prior", [PriorSpec.uniform(3, 0.0, 2.0), PriorSpec.gaussian(3, 1.0, 0.5)])
    def test_basis_function_recovery(self, prior):
        s = total_degree_index_set(3, 2)
        model = PolynomialModel(prior.family, s, np.eye(len(s))[5], prior.affine_map())
        sur = fit_prior_surrogate(model, prior, 2, seed=3)
        np.testing.assert_allclose(sur.coefficients[:, 0], np.eye(len(s))[5], atol=1e-10)

    def test_offline_count(self):
        led = LedgeredModel(FunctionModel(lambda z: z.sum(), 2, 1))
        sur = fit_prior_surrogate(led, PriorSpec.uniform(2), 3, seed=0)
        assert led.ledger.count("offline") == 20
        assert sur.provenance["hf_evaluations"] == 20
        assert sur.generation == 0

    def test_failure_names_point(self):
        def boom(z):
            if z[0] > 0.5:
                raise RuntimeError("solver diverged")
            return z[0]

        with pytest.raises(ForwardModelError) as exc:
            fit_prior_surrogate(FunctionModel(boom, 1, 1), PriorSpec.uniform(1), 3, seed=0)
        assert exc.value.point[0] > 0.5
