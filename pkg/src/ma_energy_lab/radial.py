"""Exact-quadrature calculus for rotation-invariant psh functions on the unit ball.

A rotation-invariant plurisubharmonic function on the unit ball of C^n is
``u(z) = chi(log |z|)`` with ``chi`` convex, nondecreasing and ``chi(0) = 0``.
Everything here works on the log-radius variable ``t = log|z| in [t_min, 0]``.

Discrete conventions (these make the closed-form oracle families exact):

* A potential is the piecewise-linear interpolant of its node values, extended
  constantly below ``t_min``.
* Its Monge-Ampere measure is the exact measure of that interpolant: a sum of
  circle atoms at the grid nodes.  The cumulative ``G(t) = mass of {|z| <= e^t}``
  satisfies ``G = (chi')^n`` with the slope taken on the interval to the
  *right* of each node, so jumps sit at their node and the cumulative is
  right-continuous.  The boundary circle never carries mass
  (``G[-1] == G[-2]`` by construction).
* ``dirichlet_solve`` inverts this exactly on the atomic class via
  ``chi(t) = -int_t^0 G(s)^{1/n} ds`` with ``G`` read as a right-continuous
  step function, which makes ``ma_measure(dirichlet_solve(mu)) == mu``.
* Energies are Stieltjes sums of node values against atom masses, exact for
  every piecewise-linear potential.
* ``dV`` is normalized Lebesgue measure: ``2n e^{2nt} dt`` plus the analytic
  tail below ``t_min``, with the weights rescaled so the zero potential
  integrates to exactly 1.  The boundary node carries no ``dV`` weight so
  that measures built from ``dV`` never charge the boundary circle.

All values are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import GridMismatch, InvariantViolation

TOL_CONVEX = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=float))
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RadialGrid:
    """Log-radius grid t_0 = t_min < ... < t_M = 0 for complex dimension n."""

    n: int
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", _readonly(self.t))
        if int(self.n) != self.n or self.n < 1:
            raise InvariantViolation(f"complex dimension must be an integer >= 1, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if self.t.ndim != 1 or self.t.size < 3:
            raise InvariantViolation("grid needs at least 3 nodes")
        if not np.all(np.isfinite(self.t)):
            raise InvariantViolation("grid nodes must be finite")
        if self.t[-1] != 0.0:
            raise InvariantViolation("last node must be t = 0 exactly (the boundary |z| = 1)")
        if self.t[0] >= 0.0:
            raise InvariantViolation("t_min must be negative")
        if np.any(np.diff(self.t) <= 0.0):
            raise InvariantViolation("grid nodes must be strictly increasing")

    @classmethod
    def make(cls, n: int, t_min: float = -20.0, num_nodes: int = 4001,
             include: Sequence[float] = ()) -> "RadialGrid":
        """Uniform grid on [t_min, 0], with any ``include`` values inserted as nodes.

        Inserting a node at the kink of a truncated-log potential keeps the
        atomic oracles exact there.
        """
        t = np.linspace(float(t_min), 0.0, int(num_nodes))
        if include:
            extra = np.asarray(include, dtype=float)
            if np.any(extra <= t_min) or np.any(extra > 0.0):
                raise InvariantViolation("inserted nodes must lie in (t_min, 0]")
            t = np.union1d(t, extra)
        t[-1] = 0.0
        return cls(n=n, t=t)

    @property
    def t_min(self) -> float:
        return float(self.t[0])

    @property
    def num_nodes(self) -> int:
        return int(self.t.size)

    @property
    def max_spacing(self) -> float:
        return float(np.max(np.diff(self.t)))

    @property
    def grid_hash(self) -> str:
        h = hashlib.sha256()
        h.update(str(self.n).encode())
        h.update(self.t.tobytes())
        return h.hexdigest()[:16]

    def require_same(self, other: "RadialGrid") -> None:
        if self.n != other.n or self.t.size != other.t.size or not np.array_equal(self.t, other.t):
            raise GridMismatch("operands live on different radial grids")


@dataclass(frozen=True)
class RadialPotential:
    """Node values chi(t_i) of a convex nondecreasing profile with chi(0) = 0."""

    grid: RadialGrid
    chi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "chi", _readonly(self.chi))
        chi, t = self.chi, self.grid.t
        if chi.shape != t.shape:
            raise InvariantViolation("chi must have one value per grid node")
        if not np.all(np.isfinite(chi)):
            bad = int(np.flatnonzero(~np.isfinite(chi))[0])
            raise InvariantViolation(f"non-finite value at node {bad} (t={t[bad]:g})")
        scale = max(1.0, abs(float(chi[0])))
        if abs(float(chi[-1])) > TOL_CONVEX * scale:
            raise InvariantViolation(f"boundary value chi(0) = {chi[-1]:.3e} must be 0")
        dchi = np.diff(chi)
        bad = np.flatnonzero(dchi < -TOL_CONVEX * scale)
        if bad.size:
            i = int(bad[0])
            raise InvariantViolation(f"not nondecreasing at node {i + 1} (t={t[i + 1]:g})")
        s = dchi / np.diff(t)
        bad = np.flatnonzero(np.diff(s) < -TOL_CONVEX * scale)
        if bad.size:
            i = int(bad[0])
            raise InvariantViolation(f"not convex at node {i + 1} (t={t[i + 1]:g})")

    def slopes(self) -> np.ndarray:
        """Interval slopes s_i = (chi_i - chi_{i-1}) / (t_i - t_{i-1}), i = 1..M."""
        return np.maximum(np.diff(self.chi) / np.diff(self.grid.t), 0.0)

    def sup_norm(self) -> float:
        return abs(float(self.chi[0]))

    def scaled(self, lam: float) -> "RadialPotential":
        if lam < 0:
            raise ValueError("scaling factor must be nonnegative")
        return RadialPotential(self.grid, lam * self.chi)

    def __add__(self, other: "RadialPotential") -> "RadialPotential":
        self.grid.require_same(other.grid)
        return RadialPotential(self.grid, self.chi + other.chi)

    def to_dict(self) -> dict:
        ma_origin = float(self.slopes()[0] ** self.grid.n)
        return {"n": self.grid.n, "t": self.grid.t.tolist(),
                "chi": self.chi.tolist(), "atom_at_origin": ma_origin}

    def csv_rows(self):
        return [(i, float(ti), float(ci)) for i, (ti, ci) in enumerate(zip(self.grid.t, self.chi))]


@dataclass(frozen=True)
class RadialMeasure:
    """Cumulative masses G(t_i) of a rotation-invariant positive measure.

    ``G[i]`` is the mass of the closed ball ``{|z| <= e^{t_i}}``; ``G[0]``
    includes everything at or below ``t_min`` and is reported as the atom at
    the origin.
    """

    grid: RadialGrid
    G: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "G", _readonly(self.G))
        G = self.G
        if G.shape != self.grid.t.shape:
            raise InvariantViolation("G must have one value per grid node")
        if not np.all(np.isfinite(G)):
            raise InvariantViolation("cumulative masses must be finite")
        total = max(1.0, float(G[-1]))
        if np.any(G < -TOL_CONVEX * total):
            bad = int(np.flatnonzero(G < -TOL_CONVEX * total)[0])
            raise InvariantViolation(f"negative cumulative mass at node {bad}")
        if np.any(np.diff(G) < -TOL_CONVEX * total):
            bad = int(np.flatnonzero(np.diff(G) < -TOL_CONVEX * total)[0])
            raise InvariantViolation(f"cumulative mass decreases at node {bad + 1}")

    @property
    def total_mass(self) -> float:
        return float(self.G[-1])

    @property
    def atom_at_origin(self) -> float:
        """Mass sitting at or below t_min; nonzero values flag truncation."""
        return float(self.G[0])

    def atoms(self) -> np.ndarray:
        """Node atom masses: a_0 = G_0, a_i = G_i - G_{i-1}."""
        a = np.empty_like(self.G)
        a[0] = self.G[0]
        a[1:] = np.diff(self.G)
        return np.maximum(a, 0.0)

    def scaled(self, lam: float) -> "RadialMeasure":
        if lam < 0:
            raise ValueError("scaling factor must be nonnegative")
        return RadialMeasure(self.grid, lam * self.G)

    def to_dict(self) -> dict:
        return {"n": self.grid.n, "t": self.grid.t.tolist(),
                "G": self.G.tolist(), "atom_at_origin": self.atom_at_origin}

    def csv_rows(self):
        return [(i, float(ti), float(gi)) for i, (ti, gi) in enumerate(zip(self.grid.t, self.G))]


# ---------------------------------------------------------------------------
# Monge-Ampere measures


def ma_measure(u: RadialPotential) -> RadialMeasure:
    """Monge-Ampere measure of a radial potential, G = (chi')^n.

    The slope is taken on the interval to the right of each node so the
    cumulative is right-continuous; ``max(t, c)`` with ``c`` on the grid maps
    to the exact unit atom at ``c``.
    """
    s = u.slopes()
    n = u.grid.n
    G = np.empty_like(u.chi)
    G[:-1] = s ** n
    G[-1] = s[-1] ** n
    return RadialMeasure(u.grid, G)


def mixed_ma(us: Sequence[RadialPotential]) -> RadialMeasure:
    """Mixed Monge-Ampere measure dd^c u_1 ^ ... ^ dd^c u_n, radially.

    The cumulative is the product of the n interval slopes.  Symmetric in its
    arguments and equal to ``ma_measure`` on the diagonal.
    """
    us = list(us)
    if not us:
        raise ValueError("need at least one potential")
    grid = us[0].grid
    if len(us) != grid.n:
        raise ValueError(f"need exactly n = {grid.n} potentials, got {len(us)}")
    for u in us[1:]:
        grid.require_same(u.grid)
    prod = np.ones(grid.num_nodes - 1)
    for u in us:
        prod *= u.slopes()
    G = np.empty(grid.num_nodes)
    G[:-1] = prod
    G[-1] = prod[-1]
    return RadialMeasure(grid, G)


def dirichlet_solve(mu: RadialMeasure) -> RadialPotential:
    """Solve (dd^c u)^n = mu for the radial potential with zero boundary values.

    ``chi(t) = -int_t^0 G(s)^{1/n} ds`` with G read as a right-continuous step
    function, so the inverse is exact on the atomic class and
    ``ma_measure(dirichlet_solve(mu))`` reproduces ``mu``.  Mass on the
    boundary circle itself (``G[-1] > G[-2]``) is not attainable by a
    potential with zero boundary data; on sampled smooth measures this is a
    one-cell gap covered by the round-trip tolerance.
    """
    G = np.maximum(mu.G, 0.0)
    s = G[:-1] ** (1.0 / mu.grid.n)      # slope on [t_l, t_{l+1}) from the left endpoint
    dchi = s * np.diff(mu.grid.t)
    chi = np.zeros(mu.grid.num_nodes)
    chi[:-1] = -np.cumsum(dchi[::-1])[::-1]
    return RadialPotential(mu.grid, chi)


# ---------------------------------------------------------------------------
# Energies and exponential integrals


def energy_p(u: RadialPotential, p: float = 1.0) -> float:
    """p-energy int (-u)^p (dd^c u)^n, Stieltjes sum of node values vs atoms."""
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    a = ma_measure(u).atoms()
    return float(np.sum((-u.chi) ** p * a))


def mutual_energy(u0: RadialPotential, us: Sequence[RadialPotential], p: float = 1.0) -> float:
    """int (-u0)^p dd^c u_1 ^ ... ^ dd^c u_n; equals energy_p on the diagonal."""
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    mix = mixed_ma(us)
    u0.grid.require_same(mix.grid)
    return float(np.sum((-u0.chi) ** p * mix.atoms()))


def integrate_against(u: RadialPotential, mu: RadialMeasure) -> float:
    """int (-u) d(mu) as a Stieltjes sum."""
    u.grid.require_same(mu.grid)
    return float(np.sum((-u.chi) * mu.atoms()))


def dv_weights(grid: RadialGrid) -> np.ndarray:
    """Node weights of normalized Lebesgue measure dV on the unit ball.

    Trapezoid weights of ``2n e^{2nt} dt`` plus the analytic tail below
    ``t_min``, rescaled to sum to exactly 1.  The boundary node's weight is
    folded into its neighbour so measures built from dV never charge the
    boundary circle.
    """
    t, n = grid.t, grid.n
    f = 2.0 * n * np.exp(2.0 * n * t)
    dt = np.diff(t)
    w = np.zeros_like(t)
    w[:-1] += 0.5 * dt * f[:-1]
    w[1:] += 0.5 * dt * f[1:]
    w[0] += np.exp(2.0 * n * t[0])
    w[-2] += w[-1]
    w[-1] = 0.0
    return w / w.sum()


def exp_integral(u: RadialPotential, s: float = 1.0, weights: np.ndarray | None = None) -> float:
    """int exp(-s u) dV over the unit ball; exactly 1 for the zero potential."""
    if s <= 0:
        raise ValueError(f"s must be positive, got {s}")
    if weights is None:
        weights = dv_weights(u.grid)
    return float(np.sum(weights * np.exp(-s * u.chi)))


def integrate_dv(values: np.ndarray, grid: RadialGrid, weights: np.ndarray | None = None) -> float:
    """int values dV with the shared normalized weights."""
    if weights is None:
        weights = dv_weights(grid)
    return float(np.sum(weights * values))


# ---------------------------------------------------------------------------
# Envelope and sampling


def _lower_convex_hull(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    hx: list[float] = []
    hy: list[float] = []
    for xi, yi in zip(t, y):
        while len(hx) >= 2:
            cross = (hx[-1] - hx[-2]) * (yi - hy[-2]) - (xi - hx[-2]) * (hy[-1] - hy[-2])
            if cross <= 0.0:
                hx.pop()
                hy.pop()
            else:
                break
        hx.append(float(xi))
        hy.append(float(yi))
    return np.interp(t, hx, hy)


def envelope_P(grid: RadialGrid, phi: np.ndarray | RadialPotential) -> RadialPotential:
    """Projection onto the cone: largest convex nondecreasing minorant of phi.

    Monotone-chain lower hull of the graph (with the boundary point pulled to
    ``min(phi(0), 0)``), then the nondecreasing flattening
    ``g(t) = inf_{s >= t} h(s)``, then the boundary value is clamped to 0.
    The clamp only acts when ``phi(0) < 0``, where no cone member can be a
    minorant at the boundary node; interior nodes keep the exact hull values.
    Idempotent, monotone in phi, and a minorant of phi away from that case.
    """
    if isinstance(phi, RadialPotential):
        grid.require_same(phi.grid)
        phi = phi.chi
    y = np.asarray(phi, dtype=float).copy()
    if y.shape != grid.t.shape:
        raise InvariantViolation("phi must have one value per grid node")
    if not np.all(np.isfinite(y)):
        raise InvariantViolation("phi must be finite")
    y[-1] = min(y[-1], 0.0)
    h = _lower_convex_hull(grid.t, y)
    g = np.minimum.accumulate(h[::-1])[::-1]
    g[-1] = 0.0
    return RadialPotential(grid, g)


def random_potential(grid: RadialGrid, seed: int, depth_scale: float = 1.0,
                     spike_rate: float = 5.0) -> RadialPotential:
    """Seeded sampler of piecewise-linear cone members.

    Double cumulative sum of nonnegative pseudo-random increments: exponential
    slope increments (with occasional heavy spikes for kinky samples) are
    accumulated into a nondecreasing slope profile, integrated backward from
    the anchored boundary value, and rescaled to a seed-dependent depth.  The
    first interval's slope is zero, so samples carry no atom at the origin.
    Deterministic in ``seed`` and exact under the Stieltjes quadrature.
    """
    rng = np.random.default_rng(seed)
    m = grid.num_nodes - 1
    inc = rng.exponential(1.0, size=m)
    spikes = rng.random(m) < spike_rate / m
    inc[spikes] *= rng.uniform(5.0, 50.0, size=int(spikes.sum()))
    inc[0] = 0.0
    slope = np.cumsum(inc)
    dchi = slope * np.diff(grid.t)
    chi = np.zeros(grid.num_nodes)
    chi[:-1] = -np.cumsum(dchi[::-1])[::-1]
    depth = depth_scale * (0.3 + 1.2 * rng.random())
    if chi[0] < 0.0:
        chi *= depth / (-chi[0])
    return RadialPotential(grid, chi)


# ---------------------------------------------------------------------------
# Closed-form family builders (grid realizations)


def truncated_log_potential(grid: RadialGrid, m: float, c: float) -> RadialPotential:
    """chi = m * max(t, c).  Exact when c is a grid node (see RadialGrid.make)."""
    if m < 0 or c >= 0:
        raise ValueError("need m >= 0 and c < 0")
    return RadialPotential(grid, m * np.maximum(grid.t, c))


def quadratic_potential(grid: RadialGrid, a: float = 1.0) -> RadialPotential:
    """chi = a (e^{2t} - 1), i.e. u = a (|z|^2 - 1)."""
    if a < 0:
        raise ValueError("need a >= 0")
    return RadialPotential(grid, a * (np.exp(2.0 * grid.t) - 1.0))


def circle_measure(grid: RadialGrid, radius: float, mass: float = 1.0) -> RadialMeasure:
    """Uniform measure of the given mass on the circle |z| = radius.

    The measure's node must be on the grid for the atom to sit exactly at
    ``log(radius)``; build the grid with ``include=(log(radius),)``.
    """
    if not 0.0 < radius < 1.0:
        raise ValueError("radius must lie in (0, 1)")
    c = np.log(radius)
    if not np.any(grid.t == c):
        raise InvariantViolation("grid has no node at log(radius); build it with include=")
    G = np.where(grid.t >= c, float(mass), 0.0)
    return RadialMeasure(grid, G)


def measure_from_cumulative(grid: RadialGrid, fn: Callable[[np.ndarray], np.ndarray]) -> RadialMeasure:
    """Sample a continuum cumulative G(t) at the nodes."""
    return RadialMeasure(grid, np.asarray(fn(grid.t), dtype=float))
