"""Block-structured linear algebra.

Dense implementations of the block-wise direct sum, the block-wise
(Khatri-Rao) Kronecker product for vectors, and the factorization
identities the latent-variable solvers rely on:

* ``direct_sum`` places a sequence of matrices on a block diagonal.
* ``khatri_rao_vec`` forms per-block Kronecker products of two block
  vectors.
* ``factor_khatri_rao`` splits ``a (*) b`` into ``(a (*) I_b) b`` and
  ``(I_a (*) b) a`` where the identity matrices carry the row-block
  structure of the other argument.
* ``blockwise_inner`` computes per-block inner products, the quadratic
  building block for piecemeal (per-group) constraints.

Everything here is dense: the matrices involved have at most a few tens
of rows and columns, so block-diagonal sparsity buys nothing.  All
operations validate block compatibility eagerly; silent misalignment is
the dominant bug class in this kind of code.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import StructureError

__all__ = [
    "BlockStructure",
    "BlockVec",
    "direct_sum",
    "bvec_direct_sum",
    "block_identity",
    "khatri_rao_vec",
    "kr_vec_identity",
    "kr_identity_vec",
    "factor_khatri_rao",
    "blockwise_inner",
    "bds_transpose_commutes",
    "left_multiply_blocks",
]


@dataclass(frozen=True)
class BlockStructure:
    """Ordered block lengths along one axis of a vector or matrix."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        if len(self.sizes) == 0:
            raise StructureError("block structure needs at least one block")
        if any(int(s) < 1 for s in self.sizes):
            raise StructureError(f"block sizes must be >= 1, got {self.sizes}")
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))

    @property
    def nblocks(self) -> int:
        return len(self.sizes)

    @property
    def total(self) -> int:
        return sum(self.sizes)

    @property
    def offsets(self) -> tuple[int, ...]:
        out, acc = [], 0
        for s in self.sizes:
            out.append(acc)
            acc += s
        return tuple(out)

    def slices(self) -> list[slice]:
        return [slice(o, o + s) for o, s in zip(self.offsets, self.sizes)]

    def compatible(self, other: "BlockStructure") -> bool:
        """Structures are compatible iff they have equal block counts."""
        return self.nblocks == other.nblocks


@dataclass(frozen=True)
class BlockVec:
    """A real column vector together with its row-block structure."""

    data: np.ndarray
    structure: BlockStructure

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float).reshape(-1)
        object.__setattr__(self, "data", data)
        if self.structure.total != data.shape[0]:
            raise StructureError(
                f"vector length {data.shape[0]} does not match block total "
                f"{self.structure.total}"
            )

    @classmethod
    def from_blocks(cls, blocks: Sequence[np.ndarray]) -> "BlockVec":
        blocks = [np.asarray(b, dtype=float).reshape(-1) for b in blocks]
        if not blocks:
            raise StructureError("cannot build a block vector from no blocks")
        structure = BlockStructure(tuple(b.shape[0] for b in blocks))
        return cls(np.concatenate(blocks), structure)

    @classmethod
    def ones_like_structure(cls, structure: BlockStructure) -> "BlockVec":
        return cls(np.ones(structure.total), structure)

    def blocks(self) -> list[np.ndarray]:
        return [self.data[s] for s in self.structure.slices()]

    def with_data(self, data: np.ndarray) -> "BlockVec":
        return BlockVec(np.asarray(data, dtype=float), self.structure)

    def __len__(self) -> int:
        return self.data.shape[0]


def _as_2d(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        return a.reshape(-1, 1)
    if a.ndim != 2:
        raise StructureError(f"expected a matrix, got ndim={a.ndim}")
    return a


def direct_sum(blocks: Iterable[np.ndarray]) -> np.ndarray:
    """Block-diagonal placement of a sequence of matrices.

    Dimension compatibility between the inputs is not required: the
    output has as many rows (columns) as the inputs have in total, and
    every off-diagonal entry is exactly zero.  1-d inputs are treated as
    column vectors.
    """
    mats = [_as_2d(b) for b in blocks]
    if not mats:
        raise StructureError("direct_sum of an empty sequence is undefined")
    rows = sum(m.shape[0] for m in mats)
    cols = sum(m.shape[1] for m in mats)
    out = np.zeros((rows, cols))
    r = c = 0
    for m in mats:
        out[r : r + m.shape[0], c : c + m.shape[1]] = m
        r += m.shape[0]
        c += m.shape[1]
    return out


def bvec_direct_sum(a: BlockVec) -> np.ndarray:
    """Direct sum of a block vector: a (total x nblocks) matrix whose
    j-th column carries block j in its own row range."""
    return direct_sum(a.blocks())


def block_identity(structure: BlockStructure) -> np.ndarray:
    """Identity matrix whose rows carry the given block structure."""
    return np.eye(structure.total)


def khatri_rao_vec(a: BlockVec, b: BlockVec) -> BlockVec:
    """Block-wise Kronecker product of two block vectors.

    Block i of the result is ``kron(a_i, b_i)``; the result's block
    sizes are the elementwise products of the input block sizes.
    """
    if not a.structure.compatible(b.structure):
        raise StructureError(
            f"block counts differ: {a.structure.nblocks} vs {b.structure.nblocks}"
        )
    return BlockVec.from_blocks(
        [np.kron(ai, bi) for ai, bi in zip(a.blocks(), b.blocks())]
    )


def kr_vec_identity(a: BlockVec, b_structure: BlockStructure) -> np.ndarray:
    """The factorization matrix ``a (*) I_b``.

    ``I_b`` is the identity carrying ``b_structure`` on its rows; block i
    of the result is ``kron(a_i, rows_i(I_b))``.  Multiplying by any
    vector with ``b_structure`` reproduces the block Kronecker product:
    ``(a (*) I_b) @ b == khatri_rao_vec(a, b)``.
    """
    if a.structure.nblocks != b_structure.nblocks:
        raise StructureError(
            f"block counts differ: {a.structure.nblocks} vs {b_structure.nblocks}"
        )
    eye = np.eye(b_structure.total)
    parts = [
        np.kron(ai.reshape(-1, 1), eye[sl, :])
        for ai, sl in zip(a.blocks(), b_structure.slices())
    ]
    return np.vstack(parts)


def kr_identity_vec(a_structure: BlockStructure, b: BlockVec) -> np.ndarray:
    """The factorization matrix ``I_a (*) b`` (see ``kr_vec_identity``)."""
    if a_structure.nblocks != b.structure.nblocks:
        raise StructureError(
            f"block counts differ: {a_structure.nblocks} vs {b.structure.nblocks}"
        )
    eye = np.eye(a_structure.total)
    parts = [
        np.kron(eye[sl, :], bi.reshape(-1, 1))
        for sl, bi in zip(a_structure.slices(), b.blocks())
    ]
    return np.vstack(parts)


def factor_khatri_rao(a: BlockVec, b: BlockVec) -> tuple[np.ndarray, np.ndarray]:
    """Both factorizations of the block Kronecker product.

    Returns ``(left, right) = (a (*) I_b, I_a (*) b)`` such that
    ``left @ b == right @ a == khatri_rao_vec(a, b)`` exactly.
    """
    if not a.structure.compatible(b.structure):
        raise StructureError(
            f"block counts differ: {a.structure.nblocks} vs {b.structure.nblocks}"
        )
    return kr_vec_identity(a, b.structure), kr_identity_vec(a.structure, b)


def blockwise_inner(a: BlockVec, b: BlockVec) -> np.ndarray:
    """Per-block inner products ``(a^ds)' b``: one scalar per block.

    Requires identical structures; symmetric in its arguments.
    """
    if a.structure != b.structure:
        raise StructureError(
            f"structures differ: {a.structure.sizes} vs {b.structure.sizes}"
        )
    return np.array([ai @ bi for ai, bi in zip(a.blocks(), b.blocks())])


def bds_transpose_commutes(blocks: Sequence[np.ndarray]) -> bool:
    """Check that transposing a direct sum equals the direct sum of the
    transposes, elementwise and exactly.  Test-surface helper."""
    mats = [_as_2d(b) for b in blocks]
    lhs = direct_sum(mats).T
    rhs = direct_sum([m.T for m in mats])
    return lhs.shape == rhs.shape and bool(np.array_equal(lhs, rhs))


def left_multiply_blocks(dsum: np.ndarray, row_sizes: Sequence[int], mults: Sequence[np.ndarray]) -> np.ndarray:
    """Left-multiply each row block of an existing direct sum and restack.

    Used to check that per-block left multiplication commutes with the
    direct sum: multiplying the blocks before or after assembly gives
    the same matrix.
    """
    if len(row_sizes) != len(mults):
        raise StructureError("one multiplier per row block required")
    out = []
    r = 0
    for size, m in zip(row_sizes, mults):
        out.append(_as_2d(m) @ dsum[r : r + size, :])
        r += size
    if r != dsum.shape[0]:
        raise StructureError("row sizes do not cover the direct sum")
    return np.vstack(out)
