"""Greedy selection of the sample-index set shared by all hyper-reduced models.

The index set stands for the sampling matrix S (selected identity columns);
its order matters because the first n indices define the square block used
by the sparse potential map.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SampleIndexSet:
    """Ordered set of distinct degree-of-freedom indices in [0, N)."""

    indices: np.ndarray
    ambient_dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int)
        object.__setattr__(self, "indices", idx)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("sample set must contain at least one index")
        if len(np.unique(idx)) != idx.size:
            raise ValueError("sample indices must be distinct")
        if idx.min() < 0 or idx.max() >= self.ambient_dim:
            raise ValueError("sample indices out of range")

    @property
    def m(self) -> int:
        return int(self.indices.size)

    def first(self, n: int) -> np.ndarray:
        """The first ``n`` indices (the square sub-block ordering)."""
        if n > self.m:
            raise ValueError("requested %d indices but only %d sampled" % (n, self.m))
        return self.indices[:n]


def greedy_sample_indices(residual_basis, m, protected_dofs=None) -> SampleIndexSet:
    """Select ``m`` row indices by a cyclic gappy-residual greedy rule.

    Basis columns are visited cyclically.  At each step the candidate row
    maximizing the magnitude of the current column's gappy reconstruction
    residual (least-squares fit over already-selected rows, in the span of
    previously visited columns) is added.  Ties break toward the lowest
    index.  Columns that vanish on the remaining rows fall back to plain
    largest-magnitude selection on the next column.
    """
    basis = np.atleast_2d(np.asarray(residual_basis, dtype=float))
    if basis.ndim != 2:
        raise ValueError("residual basis must be a 2-D array")
    big_n, k = basis.shape
    if k < 1:
        raise ValueError("residual basis needs at least one column")
    m = int(m)
    if not 1 <= m <= big_n:
        raise ValueError("need 1 <= m <= N, got m=%d, N=%d" % (m, big_n))

    selected: list[int] = []
    if protected_dofs is not None:
        for i in protected_dofs:
            i = int(i)
            if not 0 <= i < big_n:
                raise ValueError("protected index %d out of range" % i)
            if i not in selected:
                selected.append(i)
        if len(selected) > m:
            raise ValueError("more protected indices than samples requested")

    visited: list[int] = []  # distinct column indices already cycled through
    step = 0
    while len(selected) < m:
        col = step % k
        step += 1
        remaining = np.setdiff1d(np.arange(big_n), selected, assume_unique=False)

        residual = _gappy_residual(basis, col, visited, selected)
        if col not in visited:
            visited.append(col)

        pick = _argmax_abs(residual, remaining)
        if pick is None:
            # Degenerate: this column vanishes on every remaining row.  Fall
            # back to largest-magnitude selection on the next columns.
            logger.warning("greedy sampling: column %d vanishes on remaining rows", col)
            for fallback in range(1, k + 1):
                col_fb = (col + fallback) % k
                pick = _argmax_abs(basis[:, col_fb], remaining)
                if pick is not None:
                    break
            if pick is None:
                pick = int(remaining[0])
        selected.append(pick)

    return SampleIndexSet(indices=np.array(selected, dtype=int), ambient_dim=big_n)


def _gappy_residual(basis, col, visited, selected):
    """Residual of reconstructing column ``col`` from the visited columns,
    fitted on the selected rows only."""
    c = basis[:, col]
    prior = [j for j in visited if j != col]
    if not prior or not selected:
        return c
    sub = basis[np.ix_(selected, prior)]
    coeffs, *_ = np.linalg.lstsq(sub, c[selected], rcond=None)
    return c - basis[:, prior] @ coeffs


def _argmax_abs(values, candidates):
    """Lowest candidate index attaining the max magnitude; None if all zero."""
    mags = np.abs(values[candidates])
    best = mags.max() if mags.size else 0.0
    if best == 0.0:
        return None
    return int(candidates[np.argmax(mags)])


@dataclass(frozen=True)
class SampleSetDiagnostics:
    """Outcome of :func:`validate_sample_set` (purely informational)."""

    m: int
    ambient_dim: int
    size_rule_ok: bool
    sampled_block_spd: bool
    first_block_nonsingular: bool
    vectorized_operator_full_rank: bool | None
    messages: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        checks = [self.size_rule_ok, self.sampled_block_spd, self.first_block_nonsingular]
        if self.vectorized_operator_full_rank is not None:
            checks.append(self.vectorized_operator_full_rank)
        return all(checks)


def validate_sample_set(sample_set, min_m_for_matrix_gappy, pod_basis,
                        matrix_basis=None) -> SampleSetDiagnostics:
    """Check a sample set against the requirements of the matrix approximations.

    Reports whether (m^2 + m)/2 covers the matrix-basis size, whether the
    first-n sampled block of a probe SPD matrix admits a Cholesky factor,
    and (when the matrix basis is supplied) whether the upper-triangle
    vectorized sampled operator has full column rank.
    """
    phi = np.asarray(pod_basis, dtype=float)
    m = sample_set.m
    n = phi.shape[1]
    k = int(min_m_for_matrix_gappy)
    messages = []

    size_ok = (m * m + m) // 2 >= k
    if not size_ok:
        messages.append("(m^2+m)/2 = %d < %d basis matrices" % ((m * m + m) // 2, k))

    # Probe SPD matrix built from the basis itself; its sampled principal
    # block and the reduced block must both be safely positive definite.
    probe = np.eye(phi.shape[0]) + phi @ phi.T
    first = sample_set.first(min(n, m))
    block = probe[np.ix_(first, first)]
    try:
        np.linalg.cholesky(block)
        block_spd = True
    except np.linalg.LinAlgError:
        block_spd = False
        messages.append("sampled probe block is not positive definite")

    sub = phi[sample_set.first(min(n, m)), :]
    sv = np.linalg.svd(sub, compute_uv=False)
    nonsingular = bool(sv.size == n and sv[-1] > 1e-12 * max(sv[0], 1.0))
    if not nonsingular:
        messages.append("first-n rows of the basis are (numerically) singular")

    vec_ok = None
    if matrix_basis is not None:
        from .spd_approx import _upper_triangle_indices

        rows, cols = _upper_triangle_indices(m)
        s_idx = sample_set.indices
        op = np.column_stack(
            [np.asarray(a)[np.ix_(s_idx, s_idx)][rows, cols] for a in matrix_basis]
        )
        rank = np.linalg.matrix_rank(op)
        vec_ok = bool(rank == op.shape[1])
        if not vec_ok:
            messages.append("vectorized sampled operator rank %d < %d" % (rank, op.shape[1]))

    return SampleSetDiagnostics(
        m=m,
        ambient_dim=sample_set.ambient_dim,
        size_rule_ok=bool(size_ok),
        sampled_block_spd=block_spd,
        first_block_nonsingular=nonsingular,
        vectorized_operator_full_rank=vec_ok,
        messages=messages,
    )
