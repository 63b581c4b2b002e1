"""Shared test helpers: random SPD factories and a linear model double."""

import numpy as np
import pytest


def random_spd(rng, n, shift=None):
    """Random symmetric positive-definite matrix with a safe spectral floor."""
    a = rng.normal(size=(n, n))
    return a @ a.T + (n if shift is None else shift) * np.eye(n)


def random_orthonormal(rng, n, k):
    return np.linalg.qr(rng.normal(size=(n, k)))[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


class QuadraticModel:
    """Linear mechanical system exposing the truss evaluator protocol.

    Potential is the quadratic form of a constant SPD stiffness, the
    equilibrium is the origin, and the external force is a fixed spatial
    pattern with a sinusoidal amplitude.  Used where tests need an exactly
    quadratic potential (e.g. the structure-preserving exactness chain).
    """

    def __init__(self, mass, stiffness, force_pattern=None, tip_dof=0):
        self._mass = np.asarray(mass, dtype=float)
        self.stiffness = np.asarray(stiffness, dtype=float)
        self.dof_count = self._mass.shape[0]
        self.force_pattern = (np.zeros(self.dof_count) if force_pattern is None
                              else np.asarray(force_pattern, dtype=float))
        self.tip_dof = tip_dof
        self.mu = None

    # -- mass ---------------------------------------------------------------

    def mass_dense(self):
        return self._mass

    def mass_entries(self, rows, cols):
        return self._mass[np.ix_(np.asarray(rows, int), np.asarray(cols, int))]

    # -- potential ------------------------------------------------------------

    def potential_energy(self, q):
        q = np.asarray(q, dtype=float)
        return 0.5 * float(q @ (self.stiffness @ q))

    def potential_energy_sparse(self, dq_idx, dq_val):
        idx = np.asarray(dq_idx, int)
        val = np.asarray(dq_val, dtype=float)
        block = self.stiffness[np.ix_(idx, idx)]
        return 0.5 * float(val @ (block @ val))

    def internal_force(self, q):
        return self.stiffness @ np.asarray(q, dtype=float)

    def _scatter(self, dq_idx, dq_val):
        q = np.zeros(self.dof_count)
        q[np.asarray(dq_idx, int)] = dq_val
        return q

    def internal_force_rows(self, rows, dq_idx, dq_val):
        q = self._scatter(dq_idx, dq_val)
        return (self.stiffness @ q)[np.asarray(rows, int)]

    def internal_force_rows_dense(self, rows, q):
        return (self.stiffness @ np.asarray(q, dtype=float))[np.asarray(rows, int)]

    def tangent_stiffness(self, q):
        return self.stiffness

    def tangent_stiffness_block(self, rows, cols, dq_idx, dq_val):
        return self.stiffness[np.ix_(np.asarray(rows, int), np.asarray(cols, int))]

    def tangent_stiffness_rows_dense(self, rows, q):
        return self.stiffness[np.asarray(rows, int), :]

    # -- forcing ---------------------------------------------------------------

    def external_force(self, t, forcing=None):
        return np.sin(1.3 * t) * self.force_pattern

    def external_force_rows(self, rows, t, forcing=None):
        return np.sin(1.3 * t) * self.force_pattern[np.asarray(rows, int)]

    def tip_displacement(self, q):
        return float(np.asarray(q)[self.tip_dof])


def stiefel_feasibility_search(u, w, m, n, rng, restarts=12, iters=400):
    """Best residual of ``Psi.T u = w`` over matrices with orthonormal columns.

    Projected gradient descent on the Stiefel manifold (polar retraction)
    from several random starts; independent of the algebraic solvability
    condition it is used to probe.
    """
    u = np.asarray(u, dtype=float).reshape(m)
    w = np.asarray(w, dtype=float).reshape(n)

    def project(x):
        uu, _, vt = np.linalg.svd(x, full_matrices=False)
        return uu @ vt

    best = np.inf
    for _ in range(restarts):
        psi = project(rng.normal(size=(m, n)))
        step = 0.2
        for _ in range(iters):
            r = psi.T @ u - w
            value = float(r @ r)
            best = min(best, value)
            if value < 1e-18:
                return 0.0
            grad = np.outer(u, r)
            trial = project(psi - step * grad)
            r_t = trial.T @ u - w
            if float(r_t @ r_t) < value:
                psi = trial
                step = min(step * 1.3, 1.0)
            else:
                step *= 0.5
                if step < 1e-12:
                    break
    return best
