"""Full 2-D discretization of the n = 1 case on the unit disk.

For n = 1 the Monge-Ampere operator is linear: ``dd^c u = (1/2pi) Lap(u) dA``,
so densities with respect to normalized area ``dV = dA/pi`` are ``Lap(u)/2``.
The disk is embedded in a uniform grid on the bounding square [-1, 1]^2 with
nodes at ``|z| < 1`` active; the function is implicitly 0 on and outside the
boundary circle.  Per-node distances to the circle (exact intersections) feed
two irregular-boundary stencils:

* a Shortley-Weller Laplacian, exact on quadratics, used for measures,
  subharmonicity checks and envelopes;
* a ghost-node scheme with linear interface extrapolation used by the
  Dirichlet solver.  It is globally second order with a genuine O(h^2) error
  on curved boundaries, which is what the convergence-order diagnostics
  measure.

The Dirichlet energy uses the edge-based quadratic form
``(1/2pi) [sum_edges (du)(dv) + sum_cut u_P v_P / theta]``; it is symmetric
positive semidefinite, so the n = 1 energy product inequality holds exactly
at the discrete level.

Linear systems are solved by a cached sparse LU factorization; the residual
(not the algorithm) is the contract and is checked on every solve.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import GridMismatch, InvariantViolation, SolverError
from .radial import RadialPotential

_SOLVE_RESIDUAL_TOL = 1e-10


class PlanarGrid:
    """Uniform grid on the bounding square with the open unit disk active."""

    def __init__(self, resolution: int):
        if resolution < 16:
            raise InvariantViolation(f"resolution must be at least 16, got {resolution}")
        self.resolution = int(resolution)
        self.axis = np.linspace(-1.0, 1.0, self.resolution)
        self.h = float(self.axis[1] - self.axis[0])
        X, Y = np.meshgrid(self.axis, self.axis, indexing="ij")
        self.X, self.Y = X, Y
        self.mask = X * X + Y * Y < 1.0
        self.ii, self.jj = np.nonzero(self.mask)
        self.num_interior = int(self.ii.size)
        self.index = -np.ones(self.mask.shape, dtype=np.int64)
        self.index[self.ii, self.jj] = np.arange(self.num_interior)
        self._build_arms()
        self._A_sw = None
        self._A_ghost = None
        self._lu_ghost = None
        self._form = None
        self._w_dv = None

    # offsets in the order +x, -x, +y, -y
    _OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1))

    def _build_arms(self):
        n = self.num_interior
        self.nbr = -np.ones((n, 4), dtype=np.int64)
        self.theta = np.ones((n, 4))
        x = self.X[self.ii, self.jj]
        y = self.Y[self.ii, self.jj]
        for a, (di, dj) in enumerate(self._OFFSETS):
            i2 = self.ii + di
            j2 = self.jj + dj
            ok = (i2 >= 0) & (i2 < self.resolution) & (j2 >= 0) & (j2 < self.resolution)
            inside = np.zeros(n, dtype=bool)
            inside[ok] = self.mask[i2[ok], j2[ok]]
            self.nbr[inside, a] = self.index[i2[inside], j2[inside]]
            cut = ~inside
            # exact circle intersection along the arm: |(x,y) + theta*h*e| = 1
            dx, dy = float(di), float(dj)
            b = 2.0 * self.h * (x[cut] * dx + y[cut] * dy)
            c = x[cut] ** 2 + y[cut] ** 2 - 1.0
            disc = b * b - 4.0 * self.h * self.h * c
            th = (-b + np.sqrt(disc)) / (2.0 * self.h * self.h)
            self.theta[cut, a] = np.minimum(th, 1.0)

    # -- cached operators ---------------------------------------------------

    def sw_laplacian(self) -> sp.csr_matrix:
        """Shortley-Weller -Laplacian on interior nodes (boundary value 0)."""
        if self._A_sw is None:
            self._A_sw = self._assemble(sw=True)
        return self._A_sw

    def ghost_laplacian(self) -> sp.csr_matrix:
        """-Laplacian with ghost-node linear interface extrapolation."""
        if self._A_ghost is None:
            self._A_ghost = self._assemble(sw=False)
        return self._A_ghost

    def _assemble(self, sw: bool) -> sp.csr_matrix:
        n = self.num_interior
        h2 = self.h * self.h
        rows, cols, vals = [], [], []
        diag = np.zeros(n)
        for pair in ((0, 1), (2, 3)):
            t1 = self.theta[:, pair[0]]
            t2 = self.theta[:, pair[1]]
            nb1 = self.nbr[:, pair[0]]
            nb2 = self.nbr[:, pair[1]]
            if sw:
                c1 = 2.0 / (t1 * (t1 + t2) * h2)
                c2 = 2.0 / (t2 * (t1 + t2) * h2)
                diag += 2.0 / (t1 * t2 * h2)
            else:
                c1 = np.full(n, 1.0 / h2)
                c2 = np.full(n, 1.0 / h2)
                diag += np.where(nb1 >= 0, 1.0 / h2, (1.0 / t1) / h2)
                diag += np.where(nb2 >= 0, 1.0 / h2, (1.0 / t2) / h2)
            for coeff, nb in ((c1, nb1), (c2, nb2)):
                have = nb >= 0
                rows.append(np.flatnonzero(have))
                cols.append(nb[have])
                vals.append(-coeff[have])
        rows.append(np.arange(n))
        cols.append(np.arange(n))
        vals.append(diag)
        A = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n))
        return A

    def solver_lu(self):
        if self._lu_ghost is None:
            self._lu_ghost = spla.splu(self.ghost_laplacian().tocsc())
        return self._lu_ghost

    def dirichlet_form_matrix(self) -> sp.csr_matrix:
        """Edge-based SPD matrix B with E(u, v) = u^T B v / (2 pi)."""
        if self._form is not None:
            return self._form
        n = self.num_interior
        rows, cols, vals = [], [], []
        diag = np.zeros(n)
        for a in (0, 2):                      # full edges counted once: +x, +y
            nb = self.nbr[:, a]
            have = np.flatnonzero(nb >= 0)
            q = nb[have]
            diag[have] += 1.0
            diag[q] += 1.0
            rows.extend((have, q))
            cols.extend((q, have))
            vals.extend((-np.ones(have.size), -np.ones(have.size)))
        for a in range(4):                    # cut edges belong to their node
            cut = self.nbr[:, a] < 0
            diag[cut] += 1.0 / self.theta[cut, a]
        rows.append(np.arange(n))
        cols.append(np.arange(n))
        vals.append(diag)
        self._form = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n))
        return self._form

    def dv_weights(self) -> np.ndarray:
        """Cell weights of dV = dA/pi, rescaled to sum to exactly 1."""
        if self._w_dv is None:
            w = np.full(self.num_interior, self.h * self.h / np.pi)
            self._w_dv = w / w.sum()
        return self._w_dv

    def radius(self) -> np.ndarray:
        return np.hypot(self.X[self.ii, self.jj], self.Y[self.ii, self.jj])

    def to_grid(self, values: np.ndarray, fill: float = 0.0) -> np.ndarray:
        out = np.full(self.mask.shape, fill)
        out[self.ii, self.jj] = values
        return out

    @property
    def mask_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.mask.tobytes())
        return h.hexdigest()[:16]

    @property
    def grid_hash(self) -> str:
        h = hashlib.sha256()
        h.update(str(self.resolution).encode())
        h.update(self.mask.tobytes())
        return h.hexdigest()[:16]

    def require_same(self, other: "PlanarGrid") -> None:
        if self.resolution != other.resolution:
            raise GridMismatch("operands live on different planar grids")

    def __eq__(self, other):
        return isinstance(other, PlanarGrid) and self.resolution == other.resolution

    def __hash__(self):
        return hash(("PlanarGrid", self.resolution))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=float))
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PlanarPotential:
    """Values u_ij <= 0 on interior nodes, implicitly 0 on and past the circle."""

    grid: PlanarGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))
        v = self.values
        if v.shape != (self.grid.num_interior,):
            raise InvariantViolation("values must be a vector over interior nodes")
        if not np.all(np.isfinite(v)):
            raise InvariantViolation("values must be finite")
        if np.any(v > 1e-9):
            raise InvariantViolation(f"values must be <= 0, max is {v.max():.3e}")

    def check_subharmonic(self, tol: float = 1e-6) -> None:
        """Raise unless the SW Laplacian is >= -tol at every interior node.

        Sampled kinky profiles need a tolerance of the order of the stencil's
        truncation error; solver outputs pass at the default.
        """
        f = ma_planar(self).f
        worst = float(f.min())
        if worst < -tol:
            p = int(np.argmin(f))
            raise InvariantViolation(
                f"subharmonicity fails at node {p}: density {worst:.3e} < -{tol:g}")

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __add__(self, other: "PlanarPotential") -> "PlanarPotential":
        self.grid.require_same(other.grid)
        return PlanarPotential(self.grid, self.values + other.values)

    def scaled(self, lam: float) -> "PlanarPotential":
        if lam < 0:
            raise ValueError("scaling factor must be nonnegative")
        return PlanarPotential(self.grid, lam * self.values)

    def to_dict(self) -> dict:
        return {"resolution": self.grid.resolution, "mask_hash": self.grid.mask_hash,
                "values": self.grid.to_grid(self.values).ravel().tolist()}

    def csv_rows(self):
        g = self.grid
        return [(int(i), int(j), float(g.axis[i]), float(g.axis[j]), float(v))
                for i, j, v in zip(g.ii, g.jj, self.values)]


@dataclass(frozen=True)
class PlanarDensity:
    """Nonnegative density w.r.t. dV = dA/pi plus optional circle atoms."""

    grid: PlanarGrid
    f: np.ndarray
    circle_atoms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "f", _readonly(self.f))
        object.__setattr__(self, "circle_atoms",
                           tuple((float(r), float(m)) for r, m in self.circle_atoms))
        if self.f.shape != (self.grid.num_interior,):
            raise InvariantViolation("density must be a vector over interior nodes")
        if not np.all(np.isfinite(self.f)):
            raise InvariantViolation("density must be finite")
        if np.any(self.f < -1e-12):
            raise InvariantViolation(f"density must be >= 0, min is {self.f.min():.3e}")
        for r, m in self.circle_atoms:
            if not 0.0 < r < 1.0:
                raise InvariantViolation(f"atom radius {r} outside (0, 1)")
            if m <= 0.0:
                raise InvariantViolation("atom mass must be positive")

    def grid_mass(self) -> float:
        return float(np.sum(self.f * self.grid.dv_weights()))

    def total_mass(self) -> float:
        return self.grid_mass() + sum(m for _, m in self.circle_atoms)

    def to_dict(self) -> dict:
        return {"resolution": self.grid.resolution, "mask_hash": self.grid.mask_hash,
                "density": self.grid.to_grid(self.f).ravel().tolist(),
                "circle_atoms": [list(a) for a in self.circle_atoms]}


# ---------------------------------------------------------------------------
# Operators


def _density_no_validate(grid: PlanarGrid, f: np.ndarray) -> PlanarDensity:
    d = PlanarDensity.__new__(PlanarDensity)
    object.__setattr__(d, "grid", grid)
    object.__setattr__(d, "f", _readonly(f))
    object.__setattr__(d, "circle_atoms", ())
    return d


def ma_planar(u: PlanarPotential) -> PlanarDensity:
    """Monge-Ampere density of u w.r.t. dV: Lap(u)/2 via the SW stencil.

    Emitted without clipping or atom detection; tiny negative values are the
    stencil's truncation error and the validation tolerance in
    ``check_subharmonic`` accounts for them.
    """
    A = u.grid.sw_laplacian()
    f = -(A @ u.values) / 2.0
    return _density_no_validate(u.grid, f)


def atom_potential(grid: PlanarGrid, radius: float, mass: float) -> np.ndarray:
    """Exact potential of a circle atom: mass * max(log|z|, log(radius))."""
    r = np.maximum(grid.radius(), 1e-300)
    return mass * np.maximum(np.log(r), np.log(radius))


def poisson_solve(mu: PlanarDensity, residual_tol: float = _SOLVE_RESIDUAL_TOL) -> PlanarPotential:
    """Dirichlet solve dd^c u = mu with zero boundary values.

    The grid density feeds the ghost-stencil system ``-Lap(u) = -2 f``; circle
    atoms are superposed analytically so atomic oracles are exact.  The
    algebraic residual is verified against ``residual_tol``.
    """
    grid = mu.grid
    values = np.zeros(grid.num_interior)
    if np.any(mu.f != 0.0):
        rhs = -2.0 * mu.f
        sol = grid.solver_lu().solve(rhs)
        res = float(np.max(np.abs(grid.ghost_laplacian() @ sol - rhs)))
        scale = max(1.0, float(np.max(np.abs(rhs))))
        if res > residual_tol * scale:
            raise SolverError(f"linear solve residual {res:.3e} above tolerance",
                              residual_history=[res])
        values += sol
    for r, m in mu.circle_atoms:
        values += atom_potential(grid, r, m)
    return PlanarPotential(grid, np.minimum(values, 0.0))


def radial_to_planar(u: RadialPotential, grid: PlanarGrid) -> PlanarPotential:
    """Sample a radial potential (n = 1 only) on the planar grid."""
    if u.grid.n != 1:
        raise ValueError("only n = 1 radial potentials have a planar image")
    r = grid.radius()
    t = np.log(np.maximum(r, np.exp(u.grid.t_min)))
    vals = np.interp(np.clip(t, u.grid.t_min, 0.0), u.grid.t, u.chi)
    return PlanarPotential(grid, np.minimum(vals, 0.0))


def mollify(mu: PlanarDensity, eps: float) -> PlanarDensity:
    """Convolve with the C0 bump kernel psi(d) = (2/(pi eps^2)) (1 - (d/eps)^2)_+.

    Circle atoms become the exact 2-D convolution of the circle measure with
    the kernel (a radially symmetric C0 ring profile); the grid density is
    smoothed by the sampled kernel.  Both parts are renormalized on the grid
    so total mass is preserved to rounding.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    grid = mu.grid
    w = grid.dv_weights()
    out = np.zeros(grid.num_interior)
    if np.any(mu.f != 0.0):
        half = int(np.ceil(eps / grid.h))
        off = np.arange(-half, half + 1) * grid.h
        DX, DY = np.meshgrid(off, off, indexing="ij")
        K = np.maximum(1.0 - (DX * DX + DY * DY) / (eps * eps), 0.0)
        K /= K.sum()
        full = grid.to_grid(mu.f)
        sm = _convolve2d_same(full, K)
        smoothed = sm[grid.ii, grid.jj]
        mass0 = float(np.sum(mu.f * w))
        mass1 = float(np.sum(smoothed * w))
        if mass1 > 0.0:
            smoothed *= mass0 / mass1
        out += smoothed
    for r, m in mu.circle_atoms:
        if r - eps <= 0.0 or r + eps >= 1.0:
            raise ValueError(f"eps = {eps} too large for an atom at radius {r}")
        ring = _ring_bump(grid, r, eps)
        mass1 = float(np.sum(ring * w))
        out += ring * (m / mass1)
    return PlanarDensity(grid, np.maximum(out, 0.0), circle_atoms=())


def _convolve2d_same(a: np.ndarray, k: np.ndarray) -> np.ndarray:
    from scipy.signal import fftconvolve
    out = fftconvolve(a, k, mode="same")
    return np.maximum(out, 0.0)


def _ring_bump(grid: PlanarGrid, r: float, eps: float, nquad: int = 512) -> np.ndarray:
    """Radial profile of the circle measure convolved with the bump kernel."""
    s = grid.radius()
    active = np.abs(s - r) <= eps + 1e-12
    dens = np.zeros(grid.num_interior)
    if not np.any(active):
        return dens
    th = np.linspace(0.0, 2.0 * np.pi, nquad, endpoint=False)
    d2 = (s[active, None] ** 2 + r * r
          - 2.0 * s[active, None] * r * np.cos(th)[None, :])
    d = np.sqrt(np.maximum(d2, 0.0))
    psi = np.where(d <= eps, (2.0 / (np.pi * eps * eps)) * (1.0 - (d / eps) ** 2), 0.0)
    dens[active] = psi.mean(axis=1) * np.pi      # density w.r.t. dV = dA/pi
    return dens


def neighbor_average(grid: PlanarGrid, values: np.ndarray) -> np.ndarray:
    """SW-weighted average of neighbours (boundary values 0)."""
    A = grid.sw_laplacian()
    diag = A.diagonal()
    return values - (A @ values) / diag


def subharmonic_envelope(grid: PlanarGrid, phi: np.ndarray,
                         tol: float = 1e-10, max_iter: int = 40000) -> PlanarPotential:
    """Largest w <= min(phi, 0) with nonnegative SW Laplacian.

    Monotone obstacle iteration ``w <- min(phi, neighbour-average(w))`` run to
    a fixed point; converges monotonically downward from the obstacle.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (grid.num_interior,):
        raise InvariantViolation("phi must be a vector over interior nodes")
    if not np.all(np.isfinite(phi)):
        raise InvariantViolation("phi must be finite")
    obstacle = np.minimum(phi, 0.0)
    w = obstacle.copy()
    res = np.inf
    for _ in range(max_iter):
        w_new = np.minimum(obstacle, neighbor_average(grid, w))
        res = float(np.max(np.abs(w_new - w)))
        w = w_new
        if res <= tol:
            return PlanarPotential(grid, w)
    raise SolverError(f"obstacle iteration stalled at residual {res:.3e}",
                      residual_history=[res])


def upper_envelope_seq(us: Sequence[PlanarPotential], j: int = 0) -> PlanarPotential:
    """Pointwise sup over the tail k >= j, then one envelope projection pass.

    For discretely subharmonic inputs the sup is already subharmonic, so the
    regularization pass is idempotent and the result dominates every tail
    member.
    """
    us = list(us)
    if not us:
        raise ValueError("need a nonempty list of potentials")
    if not 0 <= j < len(us):
        raise ValueError(f"tail index {j} out of range")
    grid = us[0].grid
    for u in us[1:]:
        grid.require_same(u.grid)
    sup = np.max(np.stack([u.values for u in us[j:]]), axis=0)
    reg = np.minimum(sup, neighbor_average(grid, sup))
    return PlanarPotential(grid, np.minimum(reg, 0.0))


# ---------------------------------------------------------------------------
# Energies


def dirichlet_pairing(u: PlanarPotential, v: PlanarPotential) -> float:
    """(1/2pi) int grad u . grad v over the disk (edge-based discrete form)."""
    u.grid.require_same(v.grid)
    B = u.grid.dirichlet_form_matrix()
    return float(u.values @ (B @ v.values)) / (2.0 * np.pi)


def mutual_energy_planar(u0: PlanarPotential, u1: PlanarPotential) -> float:
    """int (-u0) dd^c u1 realized through the symmetric Dirichlet form."""
    return dirichlet_pairing(u0, u1)


def energy_planar(u: PlanarPotential, p: float = 1.0) -> float:
    """p-energy; p = 1 uses the Dirichlet form, p != 1 a density quadrature."""
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    if p == 1.0:
        return dirichlet_pairing(u, u)
    f = np.maximum(ma_planar(u).f, 0.0)
    return float(np.sum((-u.values) ** p * f * u.grid.dv_weights()))


def energy_from_density(u: PlanarPotential) -> float:
    """int (-u) ma_planar(u) dV; agrees with the Dirichlet form to O(h)."""
    return float(np.sum((-u.values) * ma_planar(u).f * u.grid.dv_weights()))


def exp_integral_planar(u: PlanarPotential, s: float = 1.0) -> float:
    """int exp(-s u) dV over the disk; exactly 1 for the zero potential."""
    if s <= 0:
        raise ValueError(f"s must be positive, got {s}")
    return float(np.sum(u.grid.dv_weights() * np.exp(-s * u.values)))


def integrate_dv_planar(values: np.ndarray, grid: PlanarGrid) -> float:
    return float(np.sum(grid.dv_weights() * values))
