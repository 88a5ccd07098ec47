import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from larx.blockops import (
    BlockStructure,
    BlockVec,
    bds_transpose_commutes,
    blockwise_inner,
    bvec_direct_sum,
    direct_sum,
    factor_khatri_rao,
    khatri_rao_vec,
    kr_vec_identity,
    left_multiply_blocks,
)
from larx.errors import StructureError

from .oracles import block_diag_bruteforce, kron_blocks_bruteforce


class TestDirectSum:
    def test_single_block_is_itself(self):
        A = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(direct_sum([A]), A)

    def test_two_scalars(self):
        out = direct_sum([np.array([[1.0]]), np.array([[2.0]])])
        assert np.array_equal(out, np.array([[1.0, 0.0], [0.0, 2.0]]))

    def test_incompatible_shapes_allowed(self):
        out = direct_sum([np.array([[1.0], [2.0]]), np.array([[3.0]])])
        expected = np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 3.0]])
        assert np.array_equal(out, expected)

    def test_empty_sequence_rejected(self):
        with pytest.raises(StructureError):
            direct_sum([])

    def test_row_and_column_counts(self, rng):
        for _ in range(20):
            mats = [
                rng.normal(size=(rng.integers(1, 5), rng.integers(1, 5)))
                for _ in range(rng.integers(1, 5))
            ]
            out = direct_sum(mats)
            assert out.shape == (
                sum(m.shape[0] for m in mats),
                sum(m.shape[1] for m in mats),
            )
            assert np.array_equal(out, block_diag_bruteforce(mats))


class TestKhatriRao:
    def test_forced_by_definition(self):
        a = BlockVec.from_blocks([np.array([1.0, 2.0]), np.array([3.0])])
        b = BlockVec.from_blocks([np.array([1.0]), np.array([2.0, 3.0])])
        out = khatri_rao_vec(a, b)
        assert np.array_equal(out.data, np.array([1.0, 2.0, 6.0, 9.0]))
        assert out.structure.sizes == (2, 2)

    def test_all_ones_with_singleton_blocks_is_identity(self, rng):
        b = BlockVec.from_blocks([rng.normal(size=3), rng.normal(size=2)])
        ones = BlockVec.from_blocks([np.ones(1), np.ones(1)])
        assert np.array_equal(khatri_rao_vec(ones, b).data, b.data)

    def test_matches_bruteforce_loop(self, rng):
        for _ in range(30):
            sizes_a = [int(rng.integers(1, 5)) for _ in range(3)]
            sizes_b = [int(rng.integers(1, 5)) for _ in range(3)]
            a = BlockVec.from_blocks([rng.normal(size=s) for s in sizes_a])
            b = BlockVec.from_blocks([rng.normal(size=s) for s in sizes_b])
            expected = kron_blocks_bruteforce(a.blocks(), b.blocks())
            assert np.array_equal(khatri_rao_vec(a, b).data, expected)

    def test_mismatched_block_counts_rejected(self):
        a = BlockVec.from_blocks([np.ones(2)])
        b = BlockVec.from_blocks([np.ones(2), np.ones(1)])
        with pytest.raises(StructureError):
            khatri_rao_vec(a, b)


class TestFactorization:
    def test_singleton_blocks_reduce_to_plain_kronecker(self, rng):
        a = BlockVec.from_blocks([rng.normal(size=3)])
        b = BlockVec.from_blocks([rng.normal(size=2)])
        left, right = factor_khatri_rao(a, b)
        assert np.allclose(left, np.kron(a.data.reshape(-1, 1), np.eye(2)))
        assert np.allclose(left @ b.data, np.kron(a.data, b.data))
        assert np.allclose(right @ a.data, np.kron(a.data, b.data))

    def test_both_routes_reproduce_product_exactly(self, rng):
        for _ in range(30):
            k = int(rng.integers(1, 4))
            a = BlockVec.from_blocks([rng.normal(size=int(rng.integers(1, 5))) for _ in range(k)])
            b = BlockVec.from_blocks([rng.normal(size=int(rng.integers(1, 5))) for _ in range(k)])
            kr = khatri_rao_vec(a, b)
            left, right = factor_khatri_rao(a, b)
            assert np.array_equal(left @ b.data, kr.data)
            assert np.array_equal(right @ a.data, kr.data)

    def test_basis_vector_selects_first_block_column(self):
        # a = e1-like: only the first block is 1, others 0
        a = BlockVec.from_blocks([np.array([1.0]), np.array([0.0]), np.array([0.0])])
        b = BlockVec.from_blocks([np.array([2.0, 5.0]), np.array([3.0]), np.array([4.0, 1.0])])
        _, right = factor_khatri_rao(a, b)
        picked = right @ a.data
        # brute-force selection: only block 1 of b survives, rest zero
        expected = np.array([2.0, 5.0, 0.0, 0.0, 0.0])
        assert np.array_equal(picked, expected)


class TestDirectSumProperties:
    def test_transpose_commutes_trivial_cases(self):
        assert bds_transpose_commutes([np.eye(3)])
        assert bds_transpose_commutes([np.array([[2.0]]), np.array([[3.0]])])

    def test_transpose_commutes_random(self, rng):
        for _ in range(50):
            mats = [
                rng.integers(-9, 10, size=(int(rng.integers(1, 6)), int(rng.integers(1, 6)))).astype(float)
                for _ in range(int(rng.integers(1, 6)))
            ]
            assert bds_transpose_commutes(mats)

    def test_vector_direct_sum_is_kron_with_identity(self, rng):
        for _ in range(20):
            k = int(rng.integers(1, 5))
            a = BlockVec.from_blocks([rng.normal(size=int(rng.integers(1, 6))) for _ in range(k)])
            singles = BlockStructure(tuple([1] * k))
            assert np.array_equal(bvec_direct_sum(a), kr_vec_identity(a, singles))

    def test_left_multiplication_commutes(self, rng):
        for _ in range(20):
            k = int(rng.integers(1, 5))
            sizes = [(int(rng.integers(1, 4)), int(rng.integers(1, 4))) for _ in range(k)]
            mats = [rng.normal(size=s) for s in sizes]
            mults = [rng.normal(size=(int(rng.integers(1, 4)), s[0])) for s in sizes]
            direct = direct_sum([mu @ ma for mu, ma in zip(mults, mats)])
            indirect = left_multiply_blocks(
                direct_sum(mats), [s[0] for s in sizes], mults
            )
            assert np.allclose(direct, indirect, atol=1e-12, rtol=0)


class TestBlockwiseInner:
    def test_forced_arithmetic(self):
        a = BlockVec.from_blocks([np.array([1.0, 0.0]), np.array([2.0])])
        assert np.array_equal(blockwise_inner(a, a), np.array([1.0, 4.0]))

    def test_orthogonal_blocks_give_zero(self):
        a = BlockVec.from_blocks([np.array([1.0, 0.0]), np.array([0.0, 2.0])])
        b = BlockVec.from_blocks([np.array([0.0, 3.0]), np.array([5.0, 0.0])])
        assert np.array_equal(blockwise_inner(a, b), np.zeros(2))

    def test_matches_per_block_dots_and_symmetry(self, rng):
        for _ in range(25):
            sizes = [int(rng.integers(1, 6)) for _ in range(int(rng.integers(1, 5)))]
            a = BlockVec.from_blocks([rng.normal(size=s) for s in sizes])
            b = BlockVec.from_blocks([rng.normal(size=s) for s in sizes])
            expected = np.array([ai @ bi for ai, bi in zip(a.blocks(), b.blocks())])
            assert np.array_equal(blockwise_inner(a, b), expected)
            # symmetry through the direct sums
            assert np.array_equal(
                bvec_direct_sum(a).T @ b.data, bvec_direct_sum(b).T @ a.data
            )

    def test_structure_mismatch_rejected(self):
        a = BlockVec.from_blocks([np.ones(2)])
        b = BlockVec.from_blocks([np.ones(3)])
        with pytest.raises(StructureError):
            blockwise_inner(a, b)


@settings(max_examples=60, deadline=None)
@given(
    sizes=st.lists(st.integers(1, 5), min_size=1, max_size=4),
    seed=st.integers(0, 2**31 - 1),
)
def test_factorization_property(sizes, seed):
    rng = np.random.default_rng(seed)
    a = BlockVec.from_blocks([rng.integers(-5, 6, size=s).astype(float) for s in sizes])
    b = BlockVec.from_blocks(
        [rng.integers(-5, 6, size=int(rng.integers(1, 5))).astype(float) for _ in sizes]
    )
    kr = khatri_rao_vec(a, b)
    left, right = factor_khatri_rao(a, b)
    assert np.array_equal(left @ b.data, kr.data)
    assert np.array_equal(right @ a.data, kr.data)


def test_block_structure_validation():
    with pytest.raises(StructureError):
        BlockStructure((0, 2))
    with pytest.raises(StructureError):
        BlockStructure(())
    s = BlockStructure((2, 3))
    assert s.total == 5
    assert s.offsets == (0, 2)
    with pytest.raises(StructureError):
        BlockVec(np.ones(4), s)
