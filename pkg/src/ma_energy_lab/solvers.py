"""Constructive solvers for (dd^c u)^n = k e^{-u} dV / int e^{-u} dV.

Three routes, each instrumented with a full per-iteration trace:

* ``fixed_point_solve`` damps the map ``u <- P((1-eta) u + eta T(u))`` where
  ``T(u)`` solves the Dirichlet problem with the normalized exponential
  right-hand side.  Existence below the threshold ``k < (2n)^n`` does not
  promise Picard convergence, so damping is configurable and oscillation or
  divergence are reported as terminal statuses, not exceptions.
* ``variational_solve`` minimizes ``F(u) = e(u)/(n+1) - log int e^{-u} dV``
  (the k = 1 normalization) by projected descent on the node values with a
  backtracking line search; F never increases on accepted steps.  The descent
  direction is the raw gradient preconditioned by the tridiagonal part of the
  Hessian; the raw gradient itself is exposed for finite-difference
  validation.
* ``approximation_scheme`` and ``truncation_scheme`` realize the measure
  regularization routes on the n = 1 disk.

The stationarity measure everywhere is ``euler_lagrange_residual``: the total
variation gap between the Monge-Ampere measure of the iterate and the
normalized exponential measure.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import InvariantViolation
from . import planar as pl
from .radial import (RadialGrid, RadialMeasure, RadialPotential, dirichlet_solve,
                     dv_weights, energy_p, envelope_P, ma_measure)

RADIAL_TOL = 1e-8
PLANAR_TOL = 1e-6

STATUS_CONVERGED = "converged"
STATUS_MAX_ITER = "max_iter"
STATUS_DIVERGED = "diverged"
STATUS_OSCILLATING = "oscillating"


@dataclass
class SolverTrace:
    """Per-iteration record of a solver run."""

    residual_sup: list = field(default_factory=list)
    residual_l1: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    functional: list = field(default_factory=list)
    step: list = field(default_factory=list)
    status: str = STATUS_MAX_ITER
    iterations: int = 0
    wall_time_s: float = 0.0
    note: str = ""

    def append(self, residual_sup, residual_l1, mass, energy, functional, step):
        self.residual_sup.append(float(residual_sup))
        self.residual_l1.append(float(residual_l1))
        self.mass.append(float(mass))
        self.energy.append(float(energy))
        self.functional.append(float(functional) if functional is not None else float("nan"))
        self.step.append(float(step))

    @property
    def converged(self) -> bool:
        return self.status == STATUS_CONVERGED

    def csv_rows(self):
        return [(i, rs, rl, m, e, f, st) for i, (rs, rl, m, e, f, st) in enumerate(
            zip(self.residual_sup, self.residual_l1, self.mass,
                self.energy, self.functional, self.step))]

    def summary(self) -> dict:
        last = -1 if self.residual_sup else None
        return {
            "status": self.status,
            "iterations": self.iterations,
            "final_residual_sup": self.residual_sup[last] if last is not None else None,
            "final_residual_l1": self.residual_l1[last] if last is not None else None,
            "final_mass": self.mass[last] if last is not None else None,
            "final_energy": self.energy[last] if last is not None else None,
            "final_functional": self.functional[last] if last is not None else None,
            "note": self.note,
        }


@dataclass
class FixedPointConfig:
    """Configuration of the damped fixed-point run."""

    n: int = 1
    k: float = 1.0
    geometry: str = "radial"
    eta: float = 0.5
    tol: float | None = None
    max_iter: int = 5000
    t_min: float = -20.0
    radial_nodes: int = 4001
    resolution: int = 128
    initializer: RadialPotential | pl.PlanarPotential | None = None

    def __post_init__(self):
        if self.k < 0:
            raise InvariantViolation("k must be nonnegative")
        if self.geometry not in ("radial", "planar-disk"):
            raise InvariantViolation(f"unknown geometry {self.geometry!r}")
        if self.geometry == "planar-disk" and self.n != 1:
            raise InvariantViolation("the planar disk supports n = 1 only")
        if not 0.0 < self.eta <= 1.0:
            raise InvariantViolation("damping eta must lie in (0, 1]")
        if self.tol is None:
            self.tol = RADIAL_TOL if self.geometry == "radial" else PLANAR_TOL

    @property
    def below_threshold(self) -> bool:
        return self.k < (2.0 * self.n) ** self.n

    def echo(self) -> dict:
        return {"n": self.n, "k": self.k, "geometry": self.geometry, "eta": self.eta,
                "tol": self.tol, "max_iter": self.max_iter, "t_min": self.t_min,
                "radial_nodes": self.radial_nodes, "resolution": self.resolution}


# ---------------------------------------------------------------------------
# The map T and the stationarity residual


def normalized_exp_measure(u: RadialPotential, k: float,
                           weights: np.ndarray | None = None) -> RadialMeasure:
    """Cumulative of k e^{-u} dV / int e^{-u} dV on u's grid.

    Node atoms are dV-cell masses; the boundary cell is lumped into its
    neighbour so the boundary circle carries nothing, and the cumulative is
    rescaled to end at exactly k.
    """
    if weights is None:
        weights = dv_weights(u.grid)
    dens = weights * np.exp(-u.chi)
    G = np.cumsum(dens)
    G[-1] = G[-2]
    if G[-1] > 0.0:
        G = G * (k / G[-1])
    return RadialMeasure(u.grid, G)


def apply_T(u: RadialPotential | pl.PlanarPotential, k: float,
            weights: np.ndarray | None = None):
    """Dirichlet solution with right-hand side k e^{-u} dV / int e^{-u} dV.

    The output's total Monge-Ampere mass is k by construction (the
    normalization happens on the discrete measure itself).
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if isinstance(u, RadialPotential):
        return dirichlet_solve(normalized_exp_measure(u, k, weights))
    grid = u.grid
    w = grid.dv_weights()
    dens = np.exp(-u.values) * w
    dens *= k / dens.sum()
    return pl.poisson_solve(pl.PlanarDensity(grid, dens / w, circle_atoms=()))


def euler_lagrange_residual(u, k: float = 1.0) -> float:
    """TV gap between (dd^c u)^n and the normalized exponential measure.

    Radial measures compare atom-by-atom through their cumulatives; planar
    ones as densities.  The zero potential against k = 1 gives exactly 1
    (pure mass mismatch).
    """
    if isinstance(u, RadialPotential):
        a = ma_measure(u).atoms()
        rho = normalized_exp_measure(u, k).atoms()
        return float(np.sum(np.abs(a - rho)))
    w = u.grid.dv_weights()
    f = pl.ma_planar(u).f
    dens = np.exp(-u.values) * w
    rho = dens / dens.sum() * k / w
    return float(np.sum(np.abs(f - rho) * w))


def _sup_gap(a, b) -> float:
    if isinstance(a, RadialPotential):
        return float(np.max(np.abs(a.chi - b.chi)))
    return float(np.max(np.abs(a.values - b.values)))


def _project(u):
    if isinstance(u, RadialPotential):
        return envelope_P(u.grid, u.chi)
    return u


def _combine(u, v, eta):
    if isinstance(u, RadialPotential):
        return RadialPotential(u.grid, (1.0 - eta) * u.chi + eta * v.chi)
    return pl.PlanarPotential(u.grid, (1.0 - eta) * u.values + eta * v.values)


def fixed_point_solve(config: FixedPointConfig):
    """Damped Picard iteration for the exponential right-hand side.

    Converged means three things at once: the fixed-point residual
    ``sup|u - T(u)|`` is at or below ``tol``, the last accepted step moved the
    potential by at most ``tol``, and the equation residual (TV) is within
    ``10 tol``.  Divergence and oscillation are legitimate terminal statuses
    above the solvable range and are reported, not raised.
    """
    t0 = time.perf_counter()
    trace = SolverTrace()
    k, eta, tol = config.k, config.eta, config.tol
    if config.geometry == "radial":
        grid = RadialGrid.make(config.n, config.t_min, config.radial_nodes)
        w = dv_weights(grid)
        zero = RadialPotential(grid, np.zeros(grid.num_nodes))
    else:
        grid = pl.PlanarGrid(config.resolution)
        w = None
        zero = pl.PlanarPotential(grid, np.zeros(grid.num_interior))
    u = config.initializer if config.initializer is not None else apply_T(zero, k, w)

    best_res = np.inf
    upticks = 0
    for it in range(1, config.max_iter + 1):
        try:
            uT = apply_T(u, k, w)
        except (FloatingPointError, OverflowError):
            trace.status, trace.note = STATUS_DIVERGED, "overflow in T"
            break
        res = _sup_gap(u, uT)
        el = euler_lagrange_residual(u, k)
        if isinstance(u, RadialPotential):
            mass = ma_measure(u).total_mass
            e_val = energy_p(u, 1.0)
        else:
            mass = float(np.sum(pl.ma_planar(u).f * grid.dv_weights()))
            e_val = pl.energy_planar(u, 1.0)
        if not np.isfinite(res) or not np.isfinite(e_val) or e_val > 1e12:
            trace.append(res, el, mass, e_val, None, 0.0)
            trace.status, trace.note = STATUS_DIVERGED, "energy overflow"
            break
        new = _project(_combine(u, uT, eta))
        step = _sup_gap(u, new)
        trace.append(res, el, mass, e_val, None, step)
        if res <= tol and step <= tol and el <= 10.0 * tol:
            u = new
            trace.status = STATUS_CONVERGED
            break
        if res > best_res * (1.0 + 1e-12):
            upticks += 1
        best_res = min(best_res, res)
        if it > 200 and upticks > it // 2:
            trace.status, trace.note = STATUS_OSCILLATING, "residual keeps rebounding"
            u = new
            break
        u = new
    trace.iterations = len(trace.residual_sup)
    trace.wall_time_s = time.perf_counter() - t0
    return u, trace


def k_scan(n: int, k_list: Sequence[float], config: FixedPointConfig | None = None,
           max_workers: int = 1) -> list[dict]:
    """Run the fixed-point solver across k values and tabulate the outcomes."""
    base = config or FixedPointConfig(n=n)

    def one(k):
        cfg = FixedPointConfig(n=n, k=float(k), geometry=base.geometry, eta=base.eta,
                               tol=base.tol, max_iter=base.max_iter, t_min=base.t_min,
                               radial_nodes=base.radial_nodes, resolution=base.resolution)
        u, tr = fixed_point_solve(cfg)
        sup_u = u.sup_norm()
        return {"k": float(k), "status": tr.status, "iterations": tr.iterations,
                "final_mass": tr.mass[-1] if tr.mass else None,
                "energy": tr.energy[-1] if tr.energy else None,
                "sup_u": sup_u, "below_threshold": cfg.below_threshold}

    ks = [float(k) for k in k_list]
    if max_workers > 1 and len(ks) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=max_workers) as ex:
            rows = list(ex.map(one, ks))
    else:
        rows = [one(k) for k in ks]
    rows.sort(key=lambda r: r["k"])
    sups = [r["sup_u"] for r in rows if r["status"] == STATUS_CONVERGED]
    monotone = all(b >= a - 1e-12 for a, b in zip(sups, sups[1:]))
    for r in rows:
        r["sup_u_monotone_in_k"] = monotone
    return rows


# ---------------------------------------------------------------------------
# Variational route (k = 1)


def functional_F(u: RadialPotential, weights: np.ndarray | None = None) -> float:
    """F(u) = e(u)/(n+1) - log int e^{-u} dV."""
    if weights is None:
        weights = dv_weights(u.grid)
    n = u.grid.n
    e = energy_p(u, 1.0)
    V = float(np.sum(weights * np.exp(-u.chi)))
    return e / (n + 1.0) - float(np.log(V))


def grad_F(u: RadialPotential, weights: np.ndarray | None = None) -> np.ndarray:
    """Exact gradient of the discrete F with respect to chi_0..chi_{M-1}.

    The energy part is (s_j^n - s_{j+1}^n) per node (with s_0 = 0), the
    entropy part the normalized exponential cell mass.  Zero exactly at the
    discrete stationarity condition: MA atoms equal to exponential atoms.
    """
    if weights is None:
        weights = dv_weights(u.grid)
    n = u.grid.n
    s = u.slopes()
    sn = np.concatenate(([0.0], s ** n))
    ge = sn[:-1] - sn[1:]
    dens = weights * np.exp(-u.chi)
    rho = dens / dens.sum()
    return ge + rho[:-1]


def _tridiag_hessian(u: RadialPotential, weights: np.ndarray) -> np.ndarray:
    """Banded tridiagonal part of the Hessian of F, used as a preconditioner."""
    t = u.grid.t
    n = u.grid.n
    dt = np.diff(t)
    s = u.slopes()
    c = (n + 1.0) * n * np.maximum(s, 1e-9) ** (n - 1) / dt
    m = t.size - 1
    diag = np.zeros(m)
    off = np.zeros(m - 1)
    diag[:] += c[:]
    diag[1:] += c[:-1]
    off[:] = -c[:-1]
    dens = weights * np.exp(-u.chi)
    diag += (dens / dens.sum())[:-1]
    ab = np.zeros((3, m))
    ab[0, 1:] = off
    ab[1] = diag
    ab[2, :-1] = off
    return ab


@dataclass
class VariationalConfig:
    n: int = 1
    t_min: float = -20.0
    radial_nodes: int = 4001
    tol: float = 1e-5
    max_iter: int = 500
    initializer: RadialPotential | None = None

    def echo(self) -> dict:
        return {"n": self.n, "t_min": self.t_min, "radial_nodes": self.radial_nodes,
                "tol": self.tol, "max_iter": self.max_iter}


def variational_solve(config: VariationalConfig):
    """Projected descent on F over the radial cone (k = 1 normalization).

    Each step goes along the preconditioned negative gradient, projects back
    onto the cone with the envelope and backtracks until F decreases;
    terminates when the stationarity residual reaches ``tol`` or the step
    collapses.  F is strictly nonincreasing along accepted steps by
    construction.
    """
    t0 = time.perf_counter()
    grid = RadialGrid.make(config.n, config.t_min, config.radial_nodes)
    w = dv_weights(grid)
    u = config.initializer if config.initializer is not None else apply_T(
        RadialPotential(grid, np.zeros(grid.num_nodes)), 1.0, w)
    trace = SolverTrace()
    F = functional_F(u, w)
    for it in range(1, config.max_iter + 1):
        el = euler_lagrange_residual(u, 1.0)
        mass = ma_measure(u).total_mass
        if el <= config.tol:
            trace.append(el, el, mass, energy_p(u, 1.0), F, 0.0)
            trace.status = STATUS_CONVERGED
            break
        g = grad_F(u, w)
        d = solve_banded((1, 1), _tridiag_hessian(u, w), g)
        alpha, accepted = 1.0, None
        for _ in range(50):
            chi = u.chi.copy()
            chi[:-1] -= alpha * d
            trial = envelope_P(grid, chi)
            Ft = functional_F(trial, w)
            if Ft <= F - 1e-14:
                accepted = (trial, Ft)
                break
            alpha *= 0.5
        if accepted is None:
            trace.append(el, el, mass, energy_p(u, 1.0), F, 0.0)
            trace.status = STATUS_MAX_ITER
            trace.note = "line search collapsed before reaching tol"
            break
        step = _sup_gap(u, accepted[0])
        u, F = accepted
        trace.append(el, el, mass, energy_p(u, 1.0), F, step)
    else:
        trace.status = STATUS_MAX_ITER
        trace.note = "iteration budget exhausted"
    trace.iterations = len(trace.residual_sup)
    trace.wall_time_s = time.perf_counter() - t0
    return u, trace


# ---------------------------------------------------------------------------
# First-variation check


@dataclass
class DirectionalDerivativeReport:
    analytic: float
    rows: list                    # (t, quotient, gap)
    bracket_ok: bool
    gaps_shrink: bool

    def to_json_dict(self) -> dict:
        return {"analytic": self.analytic,
                "rows": [list(r) for r in self.rows],
                "bracket_ok": self.bracket_ok,
                "gaps_shrink": self.gaps_shrink}


def directional_derivative_check(u: RadialPotential, v: RadialPotential,
                                 t_list: Sequence[float]) -> DirectionalDerivativeReport:
    """One-sided difference quotients of J(u + t v) around the envelope.

    ``J(u) = -log int e^{-u} dV``.  Positive t keeps u + t v in the cone;
    negative t projects with the envelope first.  Concavity of J along the
    segment makes the quotients bracket the analytic derivative
    ``int v e^{-u} dV / int e^{-u} dV`` from below (t > 0) and above (t < 0),
    with first-order gaps.
    """
    u.grid.require_same(v.grid)
    if not any(t > 0 for t in t_list) or not any(t < 0 for t in t_list):
        raise ValueError("t_list must contain both signs")
    w = dv_weights(u.grid)
    dens = w * np.exp(-u.chi)
    V = dens.sum()
    analytic = float(np.sum(dens * v.chi) / V)
    J0 = -float(np.log(V))

    rows = []
    for t in sorted(t_list):
        chi = u.chi + t * v.chi
        if t >= 0:
            cand = RadialPotential(u.grid, chi)
        else:
            cand = envelope_P(u.grid, chi)
        Jt = -float(np.log(np.sum(w * np.exp(-cand.chi))))
        q = (Jt - J0) / t
        rows.append((float(t), q, q - analytic))
    # J concave along the segment: quotients decrease in t through the derivative
    neg = [r for r in rows if r[0] < 0]
    pos = [r for r in rows if r[0] > 0]
    bracket_ok = all(r[2] >= -1e-12 for r in neg) and all(r[2] <= 1e-12 for r in pos)
    def shrinking(side):
        gaps = [abs(r[2]) for r in sorted(side, key=lambda r: abs(r[0]), reverse=True)]
        return all(b <= a + 1e-15 for a, b in zip(gaps, gaps[1:]))
    return DirectionalDerivativeReport(analytic, rows, bracket_ok,
                                       shrinking(neg) and shrinking(pos))


# ---------------------------------------------------------------------------
# Measure regularization routes (n = 1 disk)


@dataclass
class ApproximationStage:
    eps: float
    mass: float
    energy: float
    sup_error_vs_direct: float
    envelope_sup_error: float


@dataclass
class ApproximationResult:
    stages: list
    envelope: pl.PlanarPotential
    direct: pl.PlanarPotential
    energies_nondecreasing: bool
    envelope_errors_decreasing: bool
    fitted_rate: float | None

    def to_json_dict(self) -> dict:
        return {"stages": [vars(s) for s in self.stages],
                "energies_nondecreasing": self.energies_nondecreasing,
                "envelope_errors_decreasing": self.envelope_errors_decreasing,
                "fitted_rate": self.fitted_rate}


def approximation_scheme(mu: pl.PlanarDensity, eps_list: Sequence[float],
                         energy_tol: float = 1e-6) -> ApproximationResult:
    """Mollify-and-solve route to the Dirichlet solution of a rough measure.

    For each width in the decreasing ``eps_list``: mollify, solve, record.
    Tail upper envelopes are compared against the direct solve of ``mu``
    (exact for circle atoms), their sup errors must decrease, and the
    solutions' energies must be nondecreasing within ``energy_tol`` relative.
    """
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    direct = pl.poisson_solve(mu)
    us, stages = [], []
    for eps in eps_list:
        ueps = pl.poisson_solve(pl.mollify(mu, eps))
        us.append(ueps)
        stages.append([eps,
                       pl.mollify(mu, eps).total_mass(),
                       pl.energy_planar(ueps, 1.0),
                       float(np.max(np.abs(ueps.values - direct.values)))])
    env_errors = []
    last_env = None
    for j in range(len(us)):
        env = pl.upper_envelope_seq(us, j)
        env_errors.append(float(np.max(np.abs(env.values - direct.values))))
        last_env = env
    out = [ApproximationStage(eps=s[0], mass=s[1], energy=s[2],
                              sup_error_vs_direct=s[3], envelope_sup_error=e)
           for s, e in zip(stages, env_errors)]
    energies = [s.energy for s in out]
    scale = max(abs(e) for e in energies) or 1.0
    nondec = all(b >= a - energy_tol * scale for a, b in zip(energies, energies[1:]))
    errs_dec = all(b < a for a, b in zip(env_errors, env_errors[1:]))
    rate = None
    if all(e > 0 for e in env_errors):
        rate = float(np.polyfit(np.log(eps_list), np.log(env_errors), 1)[0])
    return ApproximationResult(out, last_env, direct, nondec, errs_dec, rate)


@dataclass
class TruncationResult:
    j_values: list
    potentials: list
    masses: list
    pointwise_nonincreasing: bool

    def to_json_dict(self) -> dict:
        return {"j_values": self.j_values, "masses": self.masses,
                "pointwise_nonincreasing": self.pointwise_nonincreasing}


def truncation_scheme(f: pl.PlanarDensity, j_list: Sequence[float],
                      tol: float = 1e-10) -> TruncationResult:
    """Solve with the truncated densities min(f, j) dV for increasing j.

    Solutions decrease pointwise (more mass pushes the potential down) and
    their masses increase toward the mass of f dV.
    """
    if f.circle_atoms:
        raise ValueError("truncation acts on atom-free densities")
    j_list = [float(j) for j in j_list]
    if any(b <= a for a, b in zip(j_list, j_list[1:])):
        raise ValueError("j_list must be strictly increasing")
    grid = f.grid
    pots, masses = [], []
    for j in j_list:
        dens = pl.PlanarDensity(grid, np.minimum(f.f, j))
        masses.append(dens.total_mass())
        pots.append(pl.poisson_solve(dens))
    mono = all(np.all(b.values <= a.values + tol)
               for a, b in zip(pots, pots[1:]))
    return TruncationResult(j_list, pots, masses, mono)
