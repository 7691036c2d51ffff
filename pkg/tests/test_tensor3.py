import numpy as np
import pytest

from tubalgcn.tensor3 import (
    DimensionMismatchError,
    facewise_product,
    fold3,
    m_product,
    m_transform,
    m_inverse_transform,
    mode_n_product,
    unfold3,
)
from tubalgcn.transforms import build_dft, build_haar, build_identity, build_transform


def mode_n_loop(x, u, n):
    """Brute-force triple-loop evaluation of the mode-n product."""
    dims = list(x.shape)
    dims[n - 1] = u.shape[0]
    out = np.zeros(dims, dtype=np.result_type(x, u))
    for idx in np.ndindex(*dims):
        acc = 0.0
        for k in range(x.shape[n - 1]):
            src = list(idx)
            src[n - 1] = k
            acc += u[idx[n - 1], k] * x[tuple(src)]
        out[idx] = acc
    return out


def facewise_loop(x, y):
    i, j, t = x.shape
    k = y.shape[1]
    out = np.zeros((i, k, t), dtype=np.result_type(x, y))
    for s in range(t):
        out[:, :, s] = x[:, :, s] @ y[:, :, s]
    return out


class TestModeNProduct:
    def test_row_sum_case(self):
        x = np.array([1.0, 2.0]).reshape(2, 1, 1)
        u = np.array([[1.0, 1.0]])
        out = mode_n_product(x, u, 1)
        assert out.shape == (1, 1, 1)
        assert out[0, 0, 0] == 3.0

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_identity_matrix_is_noop(self, n):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(3, 4, 5))
        u = np.eye(x.shape[n - 1])
        np.testing.assert_array_equal(mode_n_product(x, u, n), x)

    @pytest.mark.parametrize("n,ushape", [(1, (4, 2)), (2, (5, 2)), (3, (2, 3))])
    def test_matches_loop_oracle(self, n, ushape):
        rng = np.random.default_rng(n)
        x = rng.normal(size=(2, 2, 3))
        u = rng.normal(size=ushape)
        np.testing.assert_allclose(mode_n_product(x, u, n), mode_n_loop(x, u, n), atol=1e-12)

    def test_dimension_mismatch_rejected(self):
        x = np.zeros((2, 2, 2))
        with pytest.raises(DimensionMismatchError):
            mode_n_product(x, np.zeros((3, 3)), 1)
        with pytest.raises(DimensionMismatchError):
            mode_n_product(x, np.eye(2), 4)


class TestUnfoldFold:
    def test_single_tube(self):
        x = np.array([1.0, 2.0, 3.0]).reshape(1, 1, 3)
        np.testing.assert_array_equal(unfold3(x), np.array([[1.0], [2.0], [3.0]]))

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(3, 2, 4))
        np.testing.assert_array_equal(fold3(unfold3(x), x.shape), x)

    def test_column_ordering(self):
        # Column i*J + j of the unfolding is the tube at (i, j).
        rng = np.random.default_rng(1)
        x = rng.normal(size=(2, 1, 2))
        m = unfold3(x)
        assert m.shape == (2, 2)
        for i in range(2):
            np.testing.assert_array_equal(m[:, i], x[i, 0, :])

    def test_inconsistent_dims_rejected(self):
        with pytest.raises(DimensionMismatchError):
            fold3(np.zeros((3, 4)), (2, 2, 2))


class TestMTransform:
    def test_identity(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(2, 3, 4))
        np.testing.assert_array_equal(m_transform(x, np.eye(4)), x)

    def test_permutation(self):
        x = np.array([1.0, 2.0]).reshape(1, 1, 2)
        swap = np.array([[0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_array_equal(m_transform(x, swap)[0, 0], [2.0, 1.0])

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(2, 2, 4))
        m = rng.normal(size=(4, 4)) + np.eye(4)
        np.testing.assert_allclose(m_transform(x, m), mode_n_loop(x, m, 3), atol=1e-12)

    def test_equals_fold_of_matrix_form(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(3, 2, 4))
        m = rng.normal(size=(4, 4))
        np.testing.assert_allclose(
            m_transform(x, m), fold3(m @ unfold3(x), x.shape), atol=1e-12
        )

    def test_size_mismatch_rejected(self):
        with pytest.raises(DimensionMismatchError):
            m_transform(np.zeros((2, 2, 3)), np.eye(4))


class TestInverseTransform:
    @pytest.mark.parametrize("kind", ["identity", "dft", "dct"])
    def test_round_trip(self, kind):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(3, 3, 4))
        tm = build_transform(kind, 4)
        back = m_inverse_transform(m_transform(x, tm.m), tm)
        assert np.max(np.abs(back - x)) <= 1e-10

    def test_haar_round_trip_t8(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(2, 2, 8))
        tm = build_haar(8)
        back = m_inverse_transform(m_transform(x, tm.m), tm)
        assert np.max(np.abs(back - x)) <= 1e-10

    @pytest.mark.parametrize("t", [2, 4, 8, 16])
    @pytest.mark.parametrize("kind", ["identity", "dft", "dct", "haar"])
    def test_round_trip_all_sizes(self, kind, t):
        rng = np.random.default_rng(t)
        x = rng.normal(size=(2, 3, t))
        tm = build_transform(kind, t)
        back = m_inverse_transform(m_transform(x, tm.m), tm)
        assert np.max(np.abs(back - x)) <= 1e-10


class TestFacewiseProduct:
    def test_dot_product_case(self):
        x = np.array([[1.0, 2.0]]).reshape(1, 2, 1)
        y = np.array([[3.0], [4.0]]).reshape(2, 1, 1)
        assert facewise_product(x, y)[0, 0, 0] == 11.0

    def test_scalar_tubes(self):
        x = np.array([2.0, 3.0]).reshape(1, 1, 2)
        y = np.array([5.0, 7.0]).reshape(1, 1, 2)
        np.testing.assert_array_equal(facewise_product(x, y)[0, 0], [10.0, 21.0])

    def test_matches_slice_loop(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(2, 3, 4))
        y = rng.normal(size=(3, 2, 4))
        np.testing.assert_allclose(facewise_product(x, y), facewise_loop(x, y), atol=1e-12)

    def test_mismatch_rejected(self):
        with pytest.raises(DimensionMismatchError):
            facewise_product(np.zeros((2, 3, 4)), np.zeros((2, 2, 4)))
        with pytest.raises(DimensionMismatchError):
            facewise_product(np.zeros((2, 3, 4)), np.zeros((3, 2, 5)))


class TestMProduct:
    def test_identity_m_equals_facewise(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(2, 3, 4))
        y = rng.normal(size=(3, 2, 4))
        tm = build_identity(4)
        np.testing.assert_array_equal(m_product(x, y, tm), facewise_product(x, y))

    def test_dft_tube_example(self):
        x = np.array([1.0, 2.0]).reshape(1, 1, 2)
        y = np.array([3.0, 4.0]).reshape(1, 1, 2)
        out = m_product(x, y, build_dft(2))
        np.testing.assert_allclose(out[0, 0], np.array([11.0, 10.0]) / np.sqrt(2), atol=1e-12)

    def test_haar_matches_composition(self):
        rng = np.random.default_rng(10)
        x = rng.normal(size=(2, 2, 4))
        y = rng.normal(size=(2, 2, 4))
        tm = build_haar(4)
        expected = m_transform(
            facewise_product(m_transform(x, tm.m), m_transform(y, tm.m)), tm.m_inv
        )
        np.testing.assert_allclose(m_product(x, y, tm), expected, atol=1e-12)

    def test_linear_in_first_operand(self):
        rng = np.random.default_rng(11)
        x1 = rng.normal(size=(2, 3, 4))
        x2 = rng.normal(size=(2, 3, 4))
        y = rng.normal(size=(3, 2, 4))
        tm = build_dft(4)
        a, b = 0.7, -1.3
        lhs = m_product(a * x1 + b * x2, y, tm)
        rhs = a * m_product(x1, y, tm) + b * m_product(x2, y, tm)
        assert np.max(np.abs(lhs - rhs)) <= 1e-10

    @pytest.mark.parametrize("t", [2, 4, 8])
    def test_dft_equals_scaled_circular_convolution(self, t):
        # The normalized DFT turns tube products into circular
        # convolution scaled by 1/sqrt(T).
        rng = np.random.default_rng(t)
        tm = build_dft(t)
        for _ in range(50):
            u = rng.normal(size=t)
            v = rng.normal(size=t)
            conv = np.array([sum(u[k] * v[(s - k) % t] for k in range(t)) for s in range(t)])
            out = m_product(u.reshape(1, 1, t), v.reshape(1, 1, t), tm)[0, 0]
            assert np.max(np.abs(out - conv / np.sqrt(t))) <= 1e-10

    def test_real_inputs_give_real_output(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=(2, 2, 4))
        y = rng.normal(size=(2, 2, 4))
        out = m_product(x, y, build_dft(4))
        assert not np.iscomplexobj(out)

    def test_all_kinds_match_naive_oracle(self):
        # Full compositional oracle across kinds and small random dims.
        rng = np.random.default_rng(13)
        for kind in ["identity", "dft", "dct", "haar"]:
            for _ in range(5):
                i, j, k = rng.integers(1, 5, size=3)
                t = int(rng.choice([2, 4, 8]))
                x = rng.normal(size=(i, j, t))
                y = rng.normal(size=(j, k, t))
                tm = build_transform(kind, t)
                xh = mode_n_loop(x, tm.m, 3)
                yh = mode_n_loop(y, tm.m, 3)
                expected = mode_n_loop(facewise_loop(xh, yh), tm.m_inv, 3)
                if np.iscomplexobj(expected):
                    expected = expected.real
                assert np.max(np.abs(m_product(x, y, tm) - expected)) <= 1e-10
