import numpy as np
import pytest

from fimest.crlb import (
    CrlbMatrix,
    WeightMatrix,
    invert_to_crlb,
    regularize_fim,
    weighted_volume,
)
from fimest.errors import NumericalFailure, ShapeError, SingularWeight
from fimest.fim import fim_estimate_from_matrix


def estimate(matrix):
    return fim_estimate_from_matrix(np.asarray(matrix, dtype=float))


def random_spd(rng, d, floor=0.1):
    a = rng.standard_normal((d, d))
    return a @ a.T + floor * np.eye(d)


class TestRegularize:
    def test_identity_scaled(self):
        reg = regularize_fim(estimate(np.eye(3)), 0.1)
        assert np.allclose(reg.f_mat, 1.1 * np.eye(3))

    def test_zero_matrix_fallback(self):
        reg = regularize_fim(estimate(np.zeros((2, 2))), 0.1)
        assert np.allclose(reg.f_mat, 0.1 * np.eye(2))

    def test_negative_trace_fallback(self):
        reg = regularize_fim(estimate(-np.eye(2)), 0.5)
        assert np.allclose(reg.f_mat, -np.eye(2) + 0.5 * np.eye(2))

    def test_spectrum_shifts_by_loading(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((4, 4))
        sym = a + a.T
        eps = 1e-2
        before = np.linalg.eigvalsh(sym)
        after = np.linalg.eigvalsh(regularize_fim(estimate(sym), eps).f_mat)
        shift = eps * np.trace(sym) / 4 if np.trace(sym) > 0 else eps
        assert np.allclose(after, before + shift)

    def test_monotone_in_epsilon(self):
        rng = np.random.default_rng(1)
        f = estimate(random_spd(rng, 3))
        eigs = [
            np.linalg.eigvalsh(regularize_fim(f, eps).f_mat)
            for eps in (1e-4, 1e-3, 1e-2, 1e-1)
        ]
        for smaller, larger in zip(eigs, eigs[1:]):
            assert (larger >= smaller - 1e-12).all()

    def test_requires_positive_epsilon(self):
        with pytest.raises(ValueError):
            regularize_fim(estimate(np.eye(2)), 0.0)


class TestInvert:
    def test_scaled_identity(self):
        bound = invert_to_crlb(estimate(2.0 * np.eye(3)), epsilon=1e-12)
        assert np.allclose(bound.c_mat, 0.5 * np.eye(3), atol=1e-9)

    def test_diagonal(self):
        bound = invert_to_crlb(estimate(np.diag([1.0, 4.0])), epsilon=1e-12)
        assert np.allclose(np.diagonal(bound.c_mat), [1.0, 0.25], atol=1e-9)

    def test_product_is_identity(self):
        rng = np.random.default_rng(2)
        f = estimate(random_spd(rng, 5))
        reg = regularize_fim(f, 1e-3)
        bound = invert_to_crlb(f, epsilon=1e-3)
        assert np.abs(bound.c_mat @ reg.f_mat - np.eye(5)).max() < 1e-8

    def test_round_trip_spd(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            f_mat = random_spd(rng, int(rng.integers(2, 6)))
            bound = invert_to_crlb(estimate(f_mat), epsilon=1e-9)
            back = np.linalg.inv(bound.c_mat)
            rel = np.linalg.norm(back - f_mat, "fro") / np.linalg.norm(f_mat, "fro")
            assert rel < 1e-6

    def test_loading_recorded(self):
        bound = invert_to_crlb(estimate(2.0 * np.eye(4)), epsilon=1e-3)
        assert bound.loading_used == pytest.approx(1e-3 * 2.0)

    def test_unrecoverable_spectrum(self):
        with pytest.raises(NumericalFailure):
            invert_to_crlb(estimate(-np.eye(2)), epsilon=1e-6)

    def test_crlb_eigenvalues_shrink_as_epsilon_grows(self):
        rng = np.random.default_rng(4)
        f = estimate(random_spd(rng, 3))
        prev = None
        for eps in (1e-6, 1e-3, 1e-1):
            lam = np.linalg.eigvalsh(invert_to_crlb(f, epsilon=eps).c_mat)
            if prev is not None:
                assert (lam <= prev + 1e-12).all()
            prev = lam


class TestWeightedVolume:
    def test_identity_identity_is_zero(self):
        vol = weighted_volume(CrlbMatrix(np.eye(3), 0.0), WeightMatrix(np.ones(3)))
        assert vol == pytest.approx(0.0, abs=1e-12)

    def test_diagonal_case(self):
        c = CrlbMatrix(np.diag([2.0, 3.0]), 0.0)
        assert weighted_volume(c, WeightMatrix(np.ones(2))) == pytest.approx(np.log(6.0))

    def test_matches_direct_determinant(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            d = int(rng.integers(2, 7))
            c_mat = random_spd(rng, d)
            w = rng.uniform(0.1, 5.0, size=d)
            vol = weighted_volume(CrlbMatrix(c_mat, 0.0), WeightMatrix(w))
            lam, vecs = np.linalg.eigh(c_mat)
            sign, direct = np.linalg.slogdet(vecs @ np.diag(lam) @ np.diag(w) @ vecs.T)
            assert sign == 1.0
            assert abs(vol - direct) <= 1e-8 * max(1.0, abs(direct))

    def test_weight_decomposition(self):
        rng = np.random.default_rng(6)
        c = CrlbMatrix(random_spd(rng, 4), 0.0)
        w = rng.uniform(0.2, 3.0, size=4)
        lhs = weighted_volume(c, WeightMatrix(w)) - weighted_volume(c, WeightMatrix(np.ones(4)))
        assert lhs == pytest.approx(np.log(w).sum(), abs=1e-10)

    def test_zero_weight_rejected(self):
        c = CrlbMatrix(np.eye(2), 0.0)
        with pytest.raises(SingularWeight):
            weighted_volume(c, WeightMatrix([1.0, 0.0]))

    def test_weight_length_checked(self):
        c = CrlbMatrix(np.eye(2), 0.0)
        with pytest.raises(ShapeError):
            weighted_volume(c, WeightMatrix([1.0, 1.0, 1.0]))


@pytest.mark.slow
def test_gaussian_pipeline_bound_near_unit_variance():
    # unit-information mean model: the bound on each parameter variance is 1;
    # the estimated bound lands above it through the estimator's downward bias
    from fimest.fim import estimate_q, ls_fim, sample_perturbations
    from fimest.models import GaussianMeanModel
    from fimest.rng import derive_seed

    model = GaussianMeanModel(dim=4)
    diags = []
    for seed in range(5):
        design = sample_perturbations(
            4, 100, 0.2236, rng_seed=derive_seed(4040, seed, 0), mode="gaussian"
        )
        q = estimate_q(model, np.zeros(4), design, 1000, 1000, rng_seed=derive_seed(4040, seed, 1))
        bound = invert_to_crlb(ls_fim(design, q), epsilon=1e-3)
        diags.append(np.diagonal(bound.c_mat))
    assert np.abs(np.mean(diags, axis=0) - 1.0).max() <= 0.4


class TestTypes:
    def test_crlb_matrix_requires_spd(self):
        with pytest.raises(NumericalFailure):
            CrlbMatrix(np.diag([1.0, -0.5]), 0.0)
        with pytest.raises(NumericalFailure):
            CrlbMatrix(np.array([[1.0, 0.5], [0.0, 1.0]]), 0.0)

    def test_weights_nonnegative(self):
        with pytest.raises(ValueError):
            WeightMatrix([-1.0, 2.0])
        assert WeightMatrix([0.0, 2.0]).weights.tolist() == [0.0, 2.0]
