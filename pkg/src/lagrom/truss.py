"""Parameterized geometrically nonlinear truss: the full-order model.

A clamped--free prismatic lattice of three-dimensional bar elements with
Green--Lagrange strain and a quadratic (St. Venant--Kirchhoff) bar energy,
consistent mass, Rayleigh damping, and parameterized geometry, initial
condition, and forcing.  Sixteen parameters in the unit box control the
model; the force amplitude/frequency entries additionally admit the value
-2, which switches the corresponding load component off.

Bay topology: each bay carries 4 longitudinal chords, 4 perimeter bars in
its end cross-section, and 8 side-face diagonals (16 bars, 12 free degrees
of freedom per bay).  The clamped end face carries no degrees of freedom.

All operators expose sampled evaluators (selected rows/entries, sparse
displacement arguments) that reproduce the full assembly bit for bit; the
element-local arithmetic and accumulation order are shared between both
paths.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

DENSITY = 2700.0          # kg/m^3 (aluminum)
ELASTIC_MODULUS = 62.0e9  # Pa

# Deformed bar shorter than this fraction of its rest length is an error.
COLLAPSE_RTOL = 1e-9

# Corner order within a cross-section: counterclockwise from bottom-left
# in the (width, height) plane.  Corner 0 is the "bottom-left" chord whose
# end-face y-displacement is the reported quantity of interest.
_CORNERS = ((-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5))

# Side faces of a bay as corner pairs; each carries two crossing diagonals.
_SIDE_FACES = ((0, 1), (1, 2), (2, 3), (3, 0))


def validate_parameters(mu) -> np.ndarray:
    """Check the 16-parameter vector against its componentwise bounds."""
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (16,):
        raise ValueError("parameter vector must have 16 components")
    if np.any(mu[:8] < -1.0) or np.any(mu > 1.0):
        raise ValueError("geometry/initial-condition parameters must lie in [-1, 1]")
    if np.any(mu[8:] < -2.0):
        raise ValueError("force parameters must lie in [-2, 1]")
    return mu


@dataclass(frozen=True)
class ForcingConfig:
    """Experiment-level forcing data shared across parameter points.

    ``omega0`` is the fundamental frequency of the nominal structure and
    sets the scale of the force frequencies; load onset is at a quarter of
    ``final_time``.
    """

    nominal_amplitudes: tuple
    omega0: float
    final_time: float = 25.0
    directions: tuple = (1, 1, 2, 2)  # dof axis loaded per corner group


class TrussModel:
    """Assembled truss at one parameter value.

    Construction is O(N); all evaluators afterwards are pure in their
    arguments and safe for concurrent use.
    """

    def __init__(self, bays: int, mu):
        if bays < 1:
            raise ValueError("need at least one bay")
        self.bays = int(bays)
        self.mu = validate_parameters(mu)

        self.total_length = 200.0 + 50.0 * self.mu[0]
        self.area = 0.0025 * (1.0 + 0.5 * self.mu[1])
        self.width = 10.0 * (1.0 + self.mu[2])
        self.height = 10.0 * (1.0 + self.mu[3])
        self.density = DENSITY
        self.modulus = ELASTIC_MODULUS

        self._build_geometry()
        self._build_elements()
        self._mass_dense = None

    # -- geometry -----------------------------------------------------------

    def _build_geometry(self):
        bays = self.bays
        pitch = self.total_length / bays
        coords = np.empty((4 * (bays + 1), 3))
        for section in range(bays + 1):
            for corner, (wy, wz) in enumerate(_CORNERS):
                coords[4 * section + corner] = (
                    pitch * section, wy * self.width, wz * self.height)
        self.node_coords = coords
        self.dof_count = 12 * bays
        # Section-0 nodes are clamped; free dofs are numbered from section 1.
        # Quantity of interest: y-displacement of the end-face corner 0.
        self.tip_dof = self._dof(4 * bays + 0, 1)

    def _dof(self, node: int, axis: int) -> int:
        """Global dof of a node/axis; clamped dofs map to the zero pad slot."""
        if node < 4:
            return self.dof_count  # pad index, always reads zero
        return 3 * (node - 4) + axis

    def _build_elements(self):
        pairs = []
        for bay in range(1, self.bays + 1):
            lo, hi = 4 * (bay - 1), 4 * bay
            for c in range(4):                       # longitudinal chords
                pairs.append((lo + c, hi + c))
            for c1, c2 in _SIDE_FACES:               # end-face perimeter
                pairs.append((hi + c1, hi + c2))
            for c1, c2 in _SIDE_FACES:               # crossing diagonals
                pairs.append((lo + c1, hi + c2))
                pairs.append((lo + c2, hi + c1))
        self.elements = np.array(pairs, dtype=int)
        n_el = len(pairs)

        self.el_vec = (self.node_coords[self.elements[:, 1]]
                       - self.node_coords[self.elements[:, 0]])
        # Squared lengths use the same contraction as the strain kernel so
        # the undeformed state has exactly zero strain.
        self.el_length_sq = np.einsum("ij,ij->i", self.el_vec, self.el_vec)
        self.el_length = np.sqrt(self.el_length_sq)
        self.ea_over_l = self.modulus * self.area / self.el_length
        self.el_eal = self.modulus * self.area * self.el_length
        self.el_mass_coeff = self.density * self.area * self.el_length / 6.0

        dof1 = np.empty((n_el, 3), dtype=int)
        dof2 = np.empty((n_el, 3), dtype=int)
        for e, (n1, n2) in enumerate(self.elements):
            for axis in range(3):
                dof1[e, axis] = self._dof(n1, axis)
                dof2[e, axis] = self._dof(n2, axis)
        self.el_dof1 = dof1
        self.el_dof2 = dof2

        incident = [[] for _ in range(self.dof_count)]
        for e in range(n_el):
            for d in (*dof1[e], *dof2[e]):
                if d < self.dof_count:
                    incident[d].append(e)
        self._dof_elements = [np.array(sorted(set(lst)), dtype=int) for lst in incident]

    def elements_for_dofs(self, dofs) -> np.ndarray:
        """Ascending indices of elements incident to any of the given dofs."""
        dofs = np.asarray(dofs, dtype=int)
        if dofs.size == 0:
            return np.empty(0, dtype=int)
        return np.unique(np.concatenate([self._dof_elements[d] for d in dofs]))

    def dofs_needed_for_rows(self, rows) -> np.ndarray:
        """All dofs entering the element computations behind the given rows."""
        els = self.elements_for_dofs(rows)
        dofs = np.concatenate([self.el_dof1[els].ravel(), self.el_dof2[els].ravel()])
        return np.unique(dofs[dofs < self.dof_count])

    # -- displacement gathering ----------------------------------------------

    def _pad(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dof_count,):
            raise ValueError("configuration must have %d entries" % self.dof_count)
        return np.append(q, 0.0)

    def _gather_dense(self, q_pad, els):
        return q_pad[self.el_dof1[els]], q_pad[self.el_dof2[els]]

    def _gather_sparse(self, els, dq_idx, dq_val):
        dq_idx = np.asarray(dq_idx, dtype=int)
        dq_val = np.asarray(dq_val, dtype=float)
        if dq_idx.size == 0:
            return np.zeros((els.size, 3)), np.zeros((els.size, 3))
        order = np.argsort(dq_idx, kind="stable")
        idx_sorted, val_sorted = dq_idx[order], dq_val[order]

        def lookup(dofs):
            pos = np.searchsorted(idx_sorted, dofs)
            pos_c = np.minimum(pos, idx_sorted.size - 1)
            found = (idx_sorted[pos_c] == dofs) & (dofs < self.dof_count)
            return np.where(found, val_sorted[pos_c], 0.0)

        return lookup(self.el_dof1[els]), lookup(self.el_dof2[els])

    # -- element kernels ------------------------------------------------------

    def _element_strain(self, els, u1, u2):
        # Green--Lagrange strain with the squared-length difference expanded
        # analytically (2 x.du + du.du); the naive |x+du|^2 - L^2 form loses
        # ~8 digits to cancellation at working strain levels.
        du = u2 - u1
        d = self.el_vec[els] + du
        length_sq = self.el_length_sq[els]
        stretch = (2.0 * np.einsum("ij,ij->i", self.el_vec[els], du)
                   + np.einsum("ij,ij->i", du, du))
        if np.any(length_sq + stretch < (COLLAPSE_RTOL**2) * length_sq):
            raise FloatingPointError("bar element length collapse")
        strain = stretch / (2.0 * length_sq)
        return d, strain

    def _element_forces(self, els, u1, u2):
        d, strain = self._element_strain(els, u1, u2)
        f2 = (self.ea_over_l[els] * strain)[:, None] * d
        return f2

    def _element_stiffness(self, els, u1, u2):
        d, strain = self._element_strain(els, u1, u2)
        coeff = self.ea_over_l[els]
        outer = np.einsum("ik,il->ikl", d, d) / self.el_length_sq[els, None, None]
        k22 = coeff[:, None, None] * (strain[:, None, None] * np.eye(3) + outer)
        return k22

    # -- potential energy and derivatives --------------------------------------

    def potential_energy(self, q) -> float:
        q_pad = self._pad(q)
        els = np.arange(len(self.elements))
        u1, u2 = self._gather_dense(q_pad, els)
        _, strain = self._element_strain(els, u1, u2)
        return float(np.sum(0.5 * self.el_eal * strain**2))

    def potential_energy_sparse(self, dq_idx, dq_val) -> float:
        """Exact potential at equilibrium plus a sparse displacement.

        Elements not touching the displaced dofs stay at rest and carry
        zero energy, so only incident elements are evaluated.
        """
        els = self.elements_for_dofs(np.asarray(dq_idx, dtype=int))
        if els.size == 0:
            return 0.0
        u1, u2 = self._gather_sparse(els, dq_idx, dq_val)
        _, strain = self._element_strain(els, u1, u2)
        return float(np.sum(0.5 * self.el_eal[els] * strain**2))

    def internal_force(self, q) -> np.ndarray:
        """Potential gradient at configuration ``q``."""
        q_pad = self._pad(q)
        els = np.arange(len(self.elements))
        u1, u2 = self._gather_dense(q_pad, els)
        f2 = self._element_forces(els, u1, u2)
        out = np.zeros(self.dof_count + 1)
        # One concatenated scatter keeps a single, reproducible per-dof
        # accumulation order shared with the row evaluators.
        np.add.at(out, np.concatenate([self.el_dof2[els].ravel(),
                                       self.el_dof1[els].ravel()]),
                  np.concatenate([f2.ravel(), -f2.ravel()]))
        return out[:-1]

    def _force_rows_from(self, rows, els, u1, u2) -> np.ndarray:
        rows = np.asarray(rows, dtype=int)
        f2 = self._element_forces(els, u1, u2)
        pos = {int(d): i for i, d in enumerate(rows)}
        out = np.zeros(rows.size)
        for sign, dofs in ((1.0, self.el_dof2[els]), (-1.0, self.el_dof1[els])):
            for k in range(els.size):
                for axis in range(3):
                    p = pos.get(int(dofs[k, axis]))
                    if p is not None:
                        out[p] += sign * f2[k, axis]
        return out

    def internal_force_rows(self, rows, dq_idx, dq_val) -> np.ndarray:
        """Selected gradient entries at equilibrium plus a sparse displacement."""
        els = self.elements_for_dofs(rows)
        u1, u2 = self._gather_sparse(els, dq_idx, dq_val)
        return self._force_rows_from(rows, els, u1, u2)

    def internal_force_rows_dense(self, rows, q) -> np.ndarray:
        """Selected gradient entries at a dense configuration."""
        els = self.elements_for_dofs(rows)
        q_pad = self._pad(q)
        u1, u2 = self._gather_dense(q_pad, els)
        return self._force_rows_from(rows, els, u1, u2)

    def tangent_stiffness(self, q) -> np.ndarray:
        """Potential Hessian at ``q`` (dense, exactly symmetric)."""
        q_pad = self._pad(q)
        els = np.arange(len(self.elements))
        u1, u2 = self._gather_dense(q_pad, els)
        k22 = self._element_stiffness(els, u1, u2)
        n_pad = self.dof_count + 1
        out = np.zeros((n_pad, n_pad))
        d1, d2 = self.el_dof1[els], self.el_dof2[els]
        for (da, db, sign) in ((d2, d2, 1.0), (d1, d1, 1.0),
                               (d2, d1, -1.0), (d1, d2, -1.0)):
            flat = (da[:, :, None] * n_pad + db[:, None, :]).ravel()
            np.add.at(out.ravel(), flat, sign * k22.reshape(els.size, 9).ravel())
        return out[:-1, :-1]

    def _stiffness_entries_from(self, rows, cols, els, u1, u2) -> np.ndarray:
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        k22 = self._element_stiffness(els, u1, u2)
        rpos = {int(d): i for i, d in enumerate(rows)}
        cpos = {int(d): i for i, d in enumerate(cols)}
        out = np.zeros((rows.size, cols.size))
        d1, d2 = self.el_dof1[els], self.el_dof2[els]
        for (da, db, sign) in ((d2, d2, 1.0), (d1, d1, 1.0),
                               (d2, d1, -1.0), (d1, d2, -1.0)):
            for k in range(els.size):
                for ai in range(3):
                    p = rpos.get(int(da[k, ai]))
                    if p is None:
                        continue
                    for aj in range(3):
                        qp = cpos.get(int(db[k, aj]))
                        if qp is not None:
                            out[p, qp] += sign * k22[k, ai, aj]
        return out

    def tangent_stiffness_block(self, rows, cols, dq_idx, dq_val) -> np.ndarray:
        """Selected Hessian block at equilibrium plus a sparse displacement."""
        els = self.elements_for_dofs(np.concatenate([np.asarray(rows, dtype=int),
                                                     np.asarray(cols, dtype=int)]))
        u1, u2 = self._gather_sparse(els, dq_idx, dq_val)
        return self._stiffness_entries_from(rows, cols, els, u1, u2)

    def tangent_stiffness_rows_dense(self, rows, q) -> np.ndarray:
        """Selected Hessian rows (dense columns) at a dense configuration."""
        els = self.elements_for_dofs(rows)
        q_pad = self._pad(q)
        u1, u2 = self._gather_dense(q_pad, els)
        return self._stiffness_entries_from(rows, np.arange(self.dof_count),
                                            els, u1, u2)

    # -- mass -----------------------------------------------------------------

    def mass_dense(self) -> np.ndarray:
        if self._mass_dense is None:
            n_pad = self.dof_count + 1
            out = np.zeros((n_pad, n_pad))
            els = np.arange(len(self.elements))
            coeff = self.el_mass_coeff
            eye3 = np.eye(3)
            d1, d2 = self.el_dof1, self.el_dof2
            for (da, db, factor) in ((d1, d1, 2.0), (d2, d2, 2.0),
                                     (d1, d2, 1.0), (d2, d1, 1.0)):
                blocks = coeff[:, None, None] * (factor * eye3)
                flat = (da[:, :, None] * n_pad + db[:, None, :]).ravel()
                np.add.at(out.ravel(), flat, blocks.reshape(els.size, 9).ravel())
            self._mass_dense = out[:-1, :-1]
        return self._mass_dense

    def mass_matrix(self) -> scipy.sparse.csr_array:
        """Consistent mass on the free dofs (SPD)."""
        return scipy.sparse.csr_array(self.mass_dense())

    def mass_entries(self, rows, cols) -> np.ndarray:
        """Selected mass entries from element contributions only."""
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        els = self.elements_for_dofs(np.concatenate([rows, cols]))
        rpos = {int(d): i for i, d in enumerate(rows)}
        cpos = {int(d): i for i, d in enumerate(cols)}
        out = np.zeros((rows.size, cols.size))
        d1, d2 = self.el_dof1, self.el_dof2
        for (da, db, factor) in ((d1, d1, 2.0), (d2, d2, 2.0),
                                 (d1, d2, 1.0), (d2, d1, 1.0)):
            for k in els:
                coeff = self.el_mass_coeff[k] * factor
                for axis in range(3):
                    p = rpos.get(int(da[k, axis]))
                    qp = cpos.get(int(db[k, axis]))
                    if p is not None and qp is not None:
                        out[p, qp] += coeff
        return out

    # -- forcing and initial condition -----------------------------------------

    def load_patterns(self, directions=(1, 1, 2, 2)) -> np.ndarray:
        """Unit nodal loads distributed along the four corner chord lines.

        Every free node of chord line i carries a unit load along the
        configured axis, so the total applied force scales with the bay
        count (the force magnitudes are per-node amplitudes).
        """
        return self._load_patterns(directions)

    def _load_patterns(self, directions) -> np.ndarray:
        key = tuple(directions)
        cache = getattr(self, "_pattern_cache", {})
        if key not in cache:
            patterns = np.zeros((4, self.dof_count))
            for group in range(4):
                axis = directions[group]
                for section in range(1, self.bays + 1):
                    patterns[group, self._dof(4 * section + group, axis)] = 1.0
            cache[key] = patterns
            self._pattern_cache = cache
        return cache[key]

    def _force_components(self, t: float, forcing: ForcingConfig):
        onset = forcing.final_time / 4.0
        if t < onset:
            return np.zeros(4)
        amplitudes = np.asarray(forcing.nominal_amplitudes, dtype=float) \
            * (1.0 + 0.5 * self.mu[8:12])
        freqs = 3.0 * forcing.omega0 * (1.0 + 0.5 * self.mu[12:16])
        return amplitudes * np.sin(freqs * (t - onset))

    def external_force(self, t: float, forcing: ForcingConfig) -> np.ndarray:
        comps = self._force_components(t, forcing)
        return comps @ self._load_patterns(forcing.directions)

    def external_force_rows(self, rows, t: float, forcing: ForcingConfig) -> np.ndarray:
        comps = self._force_components(t, forcing)
        return comps @ self._load_patterns(forcing.directions)[:, np.asarray(rows, dtype=int)]

    def initial_displacement(self, forcing: ForcingConfig, rel_tol=1e-6,
                             max_iters=50) -> np.ndarray:
        """Superposed scaled static deflections under the nominal loads."""
        q = np.zeros(self.dof_count)
        for group in range(4):
            scale = 1.0 + 0.5 * self.mu[4 + group]
            amplitude = float(forcing.nominal_amplitudes[group])
            if scale == 0.0 or amplitude == 0.0:
                continue
            load = amplitude * self._load_patterns(forcing.directions)[group]
            q += scale * self.static_displacement(load, rel_tol=rel_tol,
                                                  max_iters=max_iters)
        return q

    def static_displacement(self, load, rel_tol=1e-6, max_iters=30) -> np.ndarray:
        """Solve the nonlinear static problem grad V(q) = load.

        Damped Newton with adaptive load continuation: slender parameter
        draws put the zero configuration far outside the full-load basin,
        so the load is ramped in as large increments as Newton tolerates.
        """
        load = np.asarray(load, dtype=float)
        q = np.zeros(self.dof_count)
        applied, increment = 0.0, 1.0
        while applied < 1.0:
            level = min(1.0, applied + increment)
            q_try, ok = self._damped_newton(q.copy(), level * load, rel_tol,
                                            max_iters)
            if ok:
                q, applied = q_try, level
                increment = min(2.0 * increment, 1.0)
            else:
                increment *= 0.5
                if increment < 1.0 / 4096.0:
                    raise RuntimeError("static Newton solve diverged")
        return q

    def _damped_newton(self, q, load, rel_tol, max_iters):
        """Newton descent on the total potential V(q) - load.q.

        The quartic bar energy makes the total potential coercive, so a
        minimizer (a stable equilibrium) always exists; Levenberg shifts
        keep the direction descending through indefinite tangent states
        that slender parameter draws pass through.
        """
        target = rel_tol * np.linalg.norm(load)
        residual = self.internal_force(q) - load     # gradient of the potential
        energy = self.potential_energy(q) - float(load @ q)
        for _ in range(max_iters):
            if np.linalg.norm(residual) <= target:
                return q, True
            stiffness = self.tangent_stiffness(q)
            scale = max(float(np.mean(np.abs(np.diagonal(stiffness)))), 1e-300)
            advanced = False
            for tau in (0.0, 1e-8, 1e-5, 1e-2, 1.0, 1e2):
                try:
                    delta = np.linalg.solve(
                        stiffness + tau * scale * np.eye(self.dof_count),
                        -residual)
                except np.linalg.LinAlgError:
                    continue
                slope = float(residual @ delta)
                if slope >= 0.0:
                    continue
                step = 1.0
                for _ in range(40):  # Armijo backtracking on the potential
                    q_try = q + step * delta
                    try:
                        e_try = self.potential_energy(q_try) - float(load @ q_try)
                    except FloatingPointError:
                        step *= 0.5
                        continue
                    if e_try <= energy + 1e-4 * step * slope:
                        q, energy = q_try, e_try
                        residual = self.internal_force(q) - load
                        advanced = True
                        break
                    step *= 0.5
                if advanced:
                    break
            if not advanced:
                return q, False
        return q, bool(np.linalg.norm(residual) <= target)

    def tip_displacement(self, q) -> float:
        """Reported quantity of interest: end-face corner-0 y-displacement."""
        return float(np.asarray(q)[self.tip_dof])


def build_truss(bays: int, mu) -> TrussModel:
    """Construct the parameterized truss model."""
    return TrussModel(bays, mu)


def fundamental_frequency(model: TrussModel) -> float:
    """Smallest frequency of the undeformed structure's (M, K0) pencil."""
    k0 = model.tangent_stiffness(np.zeros(model.dof_count))
    lam = scipy.linalg.eigh(k0, model.mass_dense(), eigvals_only=True,
                            subset_by_index=[0, 0])
    return float(np.sqrt(max(lam[0], 0.0)))


def rayleigh_coefficients(mass, stiffness, zeta, distinct_rtol=1e-6):
    """Mass/stiffness damping weights hitting the target modal ratio.

    Fits the damping ratio at the two smallest distinct pencil frequencies.
    Symmetric cross-sections make the lowest bending pair exactly
    degenerate, so equal-to-round-off frequencies are collapsed before the
    two-by-two solve; if no second distinct frequency exists the system is
    singular and an error is raised.
    """
    if zeta < 0:
        raise ValueError("damping ratio must be nonnegative")
    if zeta == 0.0:
        return 0.0, 0.0
    mass = np.asarray(mass, dtype=float) if not scipy.sparse.issparse(mass) \
        else mass.toarray()
    stiffness = np.asarray(stiffness, dtype=float)
    n = stiffness.shape[0]
    count = min(10, n)
    lam = scipy.linalg.eigh(stiffness, mass, eigvals_only=True,
                            subset_by_index=[0, count - 1])
    freqs = np.sqrt(np.clip(lam, 0.0, None))
    w1 = freqs[0]
    w2 = next((w for w in freqs[1:] if w > w1 * (1.0 + distinct_rtol)), None)
    if w1 <= 0.0 or w2 is None:
        raise ValueError("degenerate smallest pencil frequencies; "
                         "cannot fit Rayleigh coefficients")
    system = np.array([[0.5 / w1, 0.5 * w1],
                       [0.5 / w2, 0.5 * w2]])
    alpha, beta = np.linalg.solve(system, np.array([zeta, zeta]))
    return float(alpha), float(beta)


def rayleigh_matrix(model: TrussModel, zeta):
    """Damping data for one model: coefficients and the assembled matrix."""
    k0 = model.tangent_stiffness(np.zeros(model.dof_count))
    alpha, beta = rayleigh_coefficients(model.mass_dense(), k0, zeta)
    return alpha, beta, alpha * model.mass_dense() + beta * k0


def damping_matrix(model: TrussModel, alpha: float, beta: float) -> np.ndarray:
    """Rayleigh damping with externally fixed coefficients."""
    if alpha == 0.0 and beta == 0.0:
        return np.zeros((model.dof_count, model.dof_count))
    k0 = model.tangent_stiffness(np.zeros(model.dof_count))
    return alpha * model.mass_dense() + beta * k0
