"""Truncated proper-orthogonal-decomposition bases from snapshot collections.

Snapshots are column-normalized before the thin SVD, and the basis is
truncated by an energy criterion on the squared singular values.  Basis
columns are defined only up to sign, so downstream code must compare
projectors rather than the columns themselves.
"""

import warnings
from dataclasses import dataclass

import numpy as np

# Singular values below this fraction of the largest one count as zero
# when the energy criterion requests the full spectrum.
ZERO_SINGULAR_RTOL = 1e-12


@dataclass(frozen=True)
class PODBasis:
    """Orthonormal basis with the spectrum and criterion that produced it.

    Attributes
    ----------
    columns : (N, n) ndarray
        Leading left singular vectors of the normalized snapshot matrix.
    singular_values : (k,) ndarray
        All computed singular values, nonincreasing.
    energy_criterion : float
        Fraction of squared singular-value mass retained by the truncation.
    """

    columns: np.ndarray
    singular_values: np.ndarray
    energy_criterion: float

    @property
    def n(self) -> int:
        """Retained basis dimension."""
        return self.columns.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.columns.shape[0]


def _check_energy(energy: float) -> float:
    energy = float(energy)
    if not 0.0 <= energy <= 1.0 or not np.isfinite(energy):
        raise ValueError("invalid energy criterion: %r" % energy)
    return energy


def pod_dimension(singular_values, energy) -> int:
    """Smallest k whose leading squared singular values reach ``energy``.

    Returns min{k : sum_{i<=k} s_i^2 / sum_j s_j^2 >= energy}.  Raises if
    every singular value is zero.
    """
    energy = _check_energy(energy)
    s = np.asarray(singular_values, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("singular values must be a nonempty 1-D sequence")
    total = np.sum(s**2)
    if total == 0.0:
        raise ValueError("all singular values are zero")
    fractions = np.cumsum(s**2) / total
    return int(np.searchsorted(fractions, energy) + 1 if energy > 0 else 1)


def compute_pod_basis(snapshots, energy) -> PODBasis:
    """Compute a truncated POD basis of the given snapshots.

    Parameters
    ----------
    snapshots : sequence of (N,) arrays, or (N, k) array with snapshot columns
    energy : float in [0, 1]
        Retained fraction of squared singular-value mass.

    Each snapshot is normalized to unit 2-norm before the decomposition;
    identically zero snapshots are dropped with a warning.
    """
    energy = _check_energy(energy)
    if isinstance(snapshots, np.ndarray) and snapshots.ndim == 2:
        mat = np.array(snapshots, dtype=float)
    else:
        vecs = [np.asarray(v, dtype=float).ravel() for v in snapshots]
        if not vecs:
            raise ValueError("no snapshots")
        mat = np.column_stack(vecs)
    if mat.size == 0 or mat.shape[1] == 0:
        raise ValueError("no snapshots")

    norms = np.linalg.norm(mat, axis=0)
    nonzero = norms > 0.0
    if not np.all(nonzero):
        warnings.warn(
            "dropping %d zero-norm snapshot(s)" % int(np.sum(~nonzero)),
            stacklevel=2,
        )
        mat = mat[:, nonzero]
        norms = norms[nonzero]
    if mat.shape[1] == 0:
        raise ValueError("no snapshots")

    u, s, _ = np.linalg.svd(mat / norms, full_matrices=False)

    s_rule = s
    if energy == 1.0:
        # Keep only genuinely nonzero modes when the full spectrum is asked for.
        keep = s > ZERO_SINGULAR_RTOL * s[0]
        s_rule = s[keep] if np.any(keep) else s[:1]
    n = pod_dimension(s_rule, energy)
    return PODBasis(columns=u[:, :n].copy(), singular_values=s, energy_criterion=energy)
