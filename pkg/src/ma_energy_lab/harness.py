"""Property-test engine for the energy and mass inequalities.

Each check evaluates one inequality on deterministic oracle families or
seeded random samples and reports the worst LHS/RHS ratio, the sample that
attains it and the number of violations above ``1 + tol``.  The random radial
samples are piecewise linear, so every functional entering a ratio is the
exact continuum value of a genuine potential: violations can only come from
floating-point rounding, and the default relative tolerance of 1e-8 is
generous.  Grid-quadrature families use 1e-6.

Every potential-based check also re-evaluates its ratio on the samples
rescaled by 0.5 and 2 and counts any drift beyond tolerance, since both sides
of each inequality must scale consistently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import families as fam
from .errors import GridMismatch
from .planar import PlanarPotential, dirichlet_pairing
from .radial import (RadialGrid, RadialMeasure, RadialPotential, energy_p,
                     integrate_against, ma_measure, mixed_ma, mutual_energy,
                     random_potential)

TOL_CLOSED_FORM = 1e-8
TOL_GRID = 1e-6


@dataclass
class InequalityReport:
    inequality_id: str
    seed: int | None
    samples: int
    worst_ratio: float
    argmax: str
    violations: int
    tolerance: float
    empirical_constant: float | None = None
    degenerate: int = 0
    homogeneity_failures: int = 0
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.homogeneity_failures == 0

    def to_json_dict(self) -> dict:
        out = {
            "id": self.inequality_id,
            "seed": self.seed,
            "samples": self.samples,
            "worst_ratio": self.worst_ratio,
            "argmax": self.argmax,
            "violations": self.violations,
            "tolerance": self.tolerance,
            "empirical_constant": self.empirical_constant,
            "degenerate": self.degenerate,
            "homogeneity_failures": self.homogeneity_failures,
        }
        out.update(self.notes)
        return out


def sample_tuples(grid: RadialGrid, count: int, arity: int, seed: int,
                  include_diagonal: bool = True) -> list[tuple[RadialPotential, ...]]:
    """Seeded tuples of random potentials on a shared grid.

    The first tuple is diagonal (all entries equal) so equality cases are
    always exercised.
    """
    tuples = []
    base = seed * 1_000_003
    for i in range(count):
        if i == 0 and include_diagonal:
            u = random_potential(grid, base)
            tuples.append(tuple([u] * arity))
        else:
            tuples.append(tuple(random_potential(grid, base + arity * i + j)
                                for j in range(arity)))
    return tuples


def _ratio_stats(ratios, labels, tol):
    ratios = np.asarray(ratios, dtype=float)
    if ratios.size == 0:
        raise ValueError("no non-degenerate samples to evaluate")
    worst = int(np.argmax(ratios))
    violations = int(np.sum(ratios > 1.0 + tol))
    return float(ratios[worst]), labels[worst], violations


def _homogeneity_drift(ratio_fn, sample, base_ratio, tol) -> int:
    fails = 0
    for lam in (0.5, 2.0):
        scaled = tuple(u.scaled(lam) for u in sample)
        r = ratio_fn(scaled)
        if r is None:
            continue
        if abs(r - base_ratio) > tol * max(1.0, abs(base_ratio)):
            fails += 1
    return fails


# ---------------------------------------------------------------------------


def check_energy_holder(samples: Sequence[tuple], n: int, p: float = 1.0,
                        tol: float = TOL_CLOSED_FORM, seed: int | None = None,
                        check_homogeneity: bool = True) -> InequalityReport:
    """Energy product bound for tuples (u_0, ..., u_n).

    For p = 1 the constant is 1 and violations are counted.  For p != 1 the
    constant is unknown (and exceeds 1), so the check only reports the largest
    observed ratio as an empirical estimate; the exponents are p/(n+p) on the
    u_0 factor and 1/(n+p) on the rest, which is the homogeneity-consistent
    form.
    """
    if not samples:
        raise ValueError("empty sample set")

    def ratio_of(tup):
        u0, rest = tup[0], list(tup[1:])
        lhs = mutual_energy(u0, rest, p)
        factors = [energy_p(u0, p) ** (p / (n + p))]
        factors += [energy_p(u, p) ** (1.0 / (n + p)) for u in rest]
        rhs = float(np.prod(factors))
        if rhs == 0.0:
            return None
        return lhs / rhs

    ratios, labels, degenerate, homo = [], [], 0, 0
    for i, tup in enumerate(samples):
        if len(tup) != n + 1:
            raise ValueError(f"sample {i}: need n + 1 = {n + 1} potentials, got {len(tup)}")
        r = ratio_of(tup)
        if r is None:
            degenerate += 1
            continue
        ratios.append(r)
        labels.append(f"sample[{i}]")
        if check_homogeneity:
            homo += _homogeneity_drift(ratio_of, tup, r, 1e-9)
    worst, arg, violations = _ratio_stats(ratios, labels, tol)
    assert_mode = (p == 1.0)
    return InequalityReport(
        inequality_id=f"energy-holder-p{p:g}-n{n}",
        seed=seed, samples=len(samples), worst_ratio=worst, argmax=arg,
        violations=violations if assert_mode else 0, tolerance=tol,
        empirical_constant=worst, degenerate=degenerate,
        homogeneity_failures=homo,
        notes={"assertion_mode": assert_mode})


def check_energy_holder_planar(pairs: Sequence[tuple[PlanarPotential, PlanarPotential]],
                               tol: float = TOL_CLOSED_FORM,
                               seed: int | None = None) -> InequalityReport:
    """n = 1 planar energy product bound through the discrete Dirichlet form.

    The form is PSD, so the bound is exact linear algebra at any resolution.
    """
    if not pairs:
        raise ValueError("empty sample set")
    ratios, labels, degenerate = [], [], 0
    for i, (u0, u1) in enumerate(pairs):
        lhs = abs(dirichlet_pairing(u0, u1))
        rhs = np.sqrt(dirichlet_pairing(u0, u0) * dirichlet_pairing(u1, u1))
        if rhs == 0.0:
            degenerate += 1
            continue
        ratios.append(lhs / rhs)
        labels.append(f"pair[{i}]")
    worst, arg, violations = _ratio_stats(ratios, labels, tol)
    return InequalityReport(
        inequality_id="energy-holder-p1-n1-planar",
        seed=seed, samples=len(pairs), worst_ratio=worst, argmax=arg,
        violations=violations, tolerance=tol, empirical_constant=worst,
        degenerate=degenerate)


def check_mass_holder(samples: Sequence[tuple], n: int, tol: float = TOL_CLOSED_FORM,
                      seed: int | None = None,
                      check_homogeneity: bool = True) -> InequalityReport:
    """Mass product bound: int(-u0) dd^c u1 ^...^ dd^c un against the geometric
    mean of int(-u0)(dd^c uj)^n."""
    if not samples:
        raise ValueError("empty sample set")

    def ratio_of(tup):
        u0, rest = tup[0], list(tup[1:])
        lhs = mutual_energy(u0, rest, 1.0)
        factors = [mutual_energy(u0, [u] * n, 1.0) for u in rest]
        rhs = float(np.prod([f ** (1.0 / n) for f in factors]))
        if rhs == 0.0:
            return None
        return lhs / rhs

    ratios, labels, degenerate, homo = [], [], 0, 0
    for i, tup in enumerate(samples):
        if len(tup) != n + 1:
            raise ValueError(f"sample {i}: need n + 1 = {n + 1} potentials, got {len(tup)}")
        r = ratio_of(tup)
        if r is None:
            degenerate += 1
            continue
        ratios.append(r)
        labels.append(f"sample[{i}]")
        if check_homogeneity:
            homo += _homogeneity_drift(ratio_of, tup, r, 1e-9)
    worst, arg, violations = _ratio_stats(ratios, labels, tol)
    return InequalityReport(
        inequality_id=f"mass-holder-n{n}",
        seed=seed, samples=len(samples), worst_ratio=worst, argmax=arg,
        violations=violations, tolerance=tol, degenerate=degenerate,
        homogeneity_failures=homo)


def check_subadditivity(pairs: Sequence[tuple], n: int, mode: str,
                        tol: float = TOL_CLOSED_FORM, seed: int | None = None,
                        check_homogeneity: bool = True) -> InequalityReport:
    """Subadditivity of mass^{1/n} and of e^{1/(n+1)} on the cone."""
    if mode not in ("mass", "energy"):
        raise ValueError(f"mode must be 'mass' or 'energy', got {mode!r}")
    if not pairs:
        raise ValueError("empty sample set")

    def ratio_of(tup):
        u, v = tup
        if mode == "mass":
            lhs = ma_measure(u + v).total_mass ** (1.0 / n)
            rhs = (ma_measure(u).total_mass ** (1.0 / n)
                   + ma_measure(v).total_mass ** (1.0 / n))
        else:
            q = 1.0 / (n + 1.0)
            lhs = energy_p(u + v, 1.0) ** q
            rhs = energy_p(u, 1.0) ** q + energy_p(v, 1.0) ** q
        if rhs == 0.0:
            return None
        return lhs / rhs

    ratios, labels, degenerate, homo = [], [], 0, 0
    for i, tup in enumerate(pairs):
        r = ratio_of(tup)
        if r is None:
            degenerate += 1
            continue
        ratios.append(r)
        labels.append(f"pair[{i}]")
        if check_homogeneity:
            homo += _homogeneity_drift(ratio_of, tup, r, 1e-9)
    worst, arg, violations = _ratio_stats(ratios, labels, tol)
    return InequalityReport(
        inequality_id=f"subadditivity-{mode}-n{n}",
        seed=seed, samples=len(pairs), worst_ratio=worst, argmax=arg,
        violations=violations, tolerance=tol, degenerate=degenerate,
        homogeneity_failures=homo)


# ---------------------------------------------------------------------------
# Exponential bounds on the truncated-log scan family


def check_exp_energy(n: int, b: float,
                     m_values: np.ndarray | None = None,
                     c_values: np.ndarray | None = None,
                     tol: float = TOL_CLOSED_FORM,
                     seed: int | None = None) -> InequalityReport:
    """Exponential-energy bound int e^{-u} dV <= B exp(b e(u)).

    Above the threshold ``b > 1/(2n)^n`` the sup of the ratio over the scan
    family is asserted to be finite, attained away from the scan boundary and
    stable when the family is extended; the sup is the empirical B.  At or
    below the threshold the scan is exploration only: the ratio table is
    reported without assertions (the sharp family direction grows without
    bound there).
    """
    if m_values is None:
        m_values = np.linspace(0.1, 8.0, 80)
    if c_values is None:
        c_values = -np.geomspace(0.1, 30.0, 61)
    m_values = np.asarray(m_values, dtype=float)
    c_values = np.asarray(c_values, dtype=float)
    threshold = 1.0 / (2.0 * n) ** n
    assertion_mode = b > threshold

    ratios, (im, ic) = fam.exp_energy_scan(n, b, m_values, c_values)
    worst = float(ratios[im, ic])
    arg = f"m={m_values[im]:g}, c={c_values[ic]:g}"
    violations = 0
    notes = {"assertion_mode": assertion_mode, "b": b, "threshold": threshold}
    if assertion_mode:
        interior = (0 < im < len(m_values) - 1) and (0 < ic < len(c_values) - 1)
        m_ext = np.linspace(m_values.min(), 2.0 * m_values.max(), 2 * len(m_values))
        c_ext = -np.geomspace(abs(c_values).min(), 2.0 * abs(c_values).max(),
                              2 * len(c_values))
        ratios_ext, _ = fam.exp_energy_scan(n, b, m_ext, c_ext)
        stable = float(ratios_ext.max()) <= worst * (1.0 + 1e-6)
        if not interior:
            violations += 1
        if not stable:
            violations += 1
        notes.update({"argmax_interior": interior, "stable_under_extension": stable,
                      "extended_sup": float(ratios_ext.max())})
    return InequalityReport(
        inequality_id=f"exp-energy-n{n}-b{b:g}",
        seed=seed, samples=int(ratios.size), worst_ratio=worst, argmax=arg,
        violations=violations, tolerance=tol, empirical_constant=worst,
        notes=notes)


def check_exp_mass(n: int, mu_bound: float,
                   m_values: np.ndarray | None = None,
                   c_values: np.ndarray | None = None,
                   tol: float = TOL_CLOSED_FORM,
                   seed: int | None = None) -> InequalityReport:
    """Exponential integrability int e^{-2u} dV under a total-mass constraint.

    Samples whose Monge-Ampere mass exceeds ``mu_bound^n`` are rejected (the
    bound requires ``mu_bound < n``).  The constant is unknown, so the check
    is qualitative: the sup over the constrained family must be finite and
    stable when the c-scan is extended deeper.
    """
    if not 0.0 < mu_bound < n:
        raise ValueError(f"mu_bound must lie in (0, n), got {mu_bound}")
    if m_values is None:
        m_values = np.linspace(0.1, 1.5, 15)
    if c_values is None:
        c_values = -np.geomspace(0.1, 30.0, 41)
    accepted, rejected = [], 0
    sup2 = 0.0
    arg = ""
    for m in np.asarray(m_values, dtype=float):
        if fam.tlog_mass(m, n) > mu_bound ** n + 1e-12:
            rejected += 1
            continue
        for c in np.asarray(c_values, dtype=float):
            v = fam.tlog_exp_integral(m, c, n, s=2.0)
            accepted.append(v)
            if v > sup2:
                sup2, arg = v, f"m={m:g}, c={c:g}"
    if not accepted:
        raise ValueError("every sample violated the mass precondition")
    deeper = float(max(fam.tlog_exp_integral(m, 2.0 * np.asarray(c_values).min(), n, s=2.0)
                       for m in m_values if fam.tlog_mass(m, n) <= mu_bound ** n + 1e-12))
    stable = deeper <= sup2 * (1.0 + 1e-6) or not np.isfinite(deeper)
    violations = 0 if (np.isfinite(sup2) and stable) else 1
    return InequalityReport(
        inequality_id=f"exp-mass-n{n}-mu{mu_bound:g}",
        seed=seed, samples=len(accepted), worst_ratio=sup2, argmax=arg,
        violations=violations, tolerance=tol, empirical_constant=sup2,
        degenerate=rejected,
        notes={"rejected_mass_precondition": rejected, "stable_under_extension": stable})


# ---------------------------------------------------------------------------


def estimate_M1_constant(mu: RadialMeasure, sample_count: int = 200, seed: int = 0) -> float:
    """Largest observed int(-u) dmu / e(u)^{1/(n+1)} over seeded samples.

    Nondecreasing in ``sample_count`` for a fixed seed (samples are nested).
    Returns 0 for the zero measure.
    """
    if mu.total_mass == 0.0:
        return 0.0
    n = mu.grid.n
    best = 0.0
    for i in range(sample_count):
        u = random_potential(mu.grid, seed * 1_000_003 + i)
        e = energy_p(u, 1.0)
        if e == 0.0:
            continue
        best = max(best, integrate_against(u, mu) / e ** (1.0 / (n + 1.0)))
    return best


@dataclass
class StabilityProbeResult:
    sup_diff: float
    l2_diff: float
    fitted_exponent: float | None
    scales: list
    sup_diffs: list
    l2_diffs: list

    def to_json_dict(self) -> dict:
        return {"sup_diff": self.sup_diff, "l2_diff": self.l2_diff,
                "fitted_exponent": self.fitted_exponent,
                "scales": self.scales, "sup_diffs": self.sup_diffs,
                "l2_diffs": self.l2_diffs}


def stability_probe(rho1, rho2, scales=(1.0, 0.5, 0.25, 0.125)) -> StabilityProbeResult:
    """Solution stability in the density: sup|u1 - u2| against ||g - h||_2.

    Solves the Dirichlet problems for ``rho1`` and ``rho1 + s (rho2 - rho1)``
    over the scale scan and fits the exponent of sup-difference against the
    L2(dV) density gap.  Identical densities skip the fit.
    """
    from .planar import PlanarDensity, poisson_solve
    rho1.grid.require_same(rho2.grid)
    if rho1.circle_atoms or rho2.circle_atoms:
        raise ValueError("the stability probe needs square-integrable densities (no atoms)")
    grid = rho1.grid
    w = grid.dv_weights()
    delta = rho2.f - rho1.f
    u1 = poisson_solve(rho1)
    sup_diffs, l2_diffs, used = [], [], []
    for s in scales:
        f = np.maximum(rho1.f + s * delta, 0.0)
        us = poisson_solve(PlanarDensity(grid, f))
        sup_diffs.append(float(np.max(np.abs(us.values - u1.values))))
        l2_diffs.append(float(np.sqrt(np.sum((f - rho1.f) ** 2 * w))))
        used.append(float(s))
    if l2_diffs[0] == 0.0:
        return StabilityProbeResult(0.0, 0.0, None, used, sup_diffs, l2_diffs)
    pos = [(sd, ld) for sd, ld in zip(sup_diffs, l2_diffs) if sd > 0 and ld > 0]
    exponent = None
    if len(pos) >= 2:
        sd, ld = np.array([p[0] for p in pos]), np.array([p[1] for p in pos])
        exponent = float(np.polyfit(np.log(ld), np.log(sd), 1)[0])
    return StabilityProbeResult(sup_diffs[0], l2_diffs[0], exponent,
                                used, sup_diffs, l2_diffs)


@dataclass
class L1ProbeRow:
    j: float
    energy: float
    int_dv: float
    int_dmw: float


@dataclass
class L1ProbeResult:
    rows: list
    energies_exact: bool
    dv_decreasing: bool
    dmw_decreasing: bool

    def to_json_dict(self) -> dict:
        return {"rows": [vars(r) for r in self.rows],
                "energies_exact": self.energies_exact,
                "dv_decreasing": self.dv_decreasing,
                "dmw_decreasing": self.dmw_decreasing}


def l1_convergence_probe(j_list: Sequence[float], w: RadialPotential | None = None,
                         n: int = 1, t_min: float = -20.0,
                         num_nodes: int = 4001) -> L1ProbeResult:
    """Unit-energy family that converges to zero: tabulate its decay.

    For ``u_j = j^{1/(n+1)} max(log|z|, -1/j)`` the energy is exactly 1 while
    ``int (-u_j) dV`` and ``int (-u_j) (dd^c w)^n`` decay like ``j^{-1/2}``
    (sup-norm decay; the mass runs to the boundary).
    """
    from .radial import dv_weights, integrate_dv
    rows = []
    for j in j_list:
        m, c = fam.counterexample_params(j, n)
        grid = RadialGrid.make(n, t_min=t_min, num_nodes=num_nodes, include=(c,))
        u = fam.counterexample_potential(grid, j)
        e = energy_p(u, 1.0)
        int_dv = integrate_dv(-u.chi, grid, dv_weights(grid))
        if w is not None:
            wg = RadialPotential(grid, np.interp(grid.t, w.grid.t, w.chi))
            int_dmw = integrate_against(u, ma_measure(wg))
        else:
            int_dmw = float("nan")
        rows.append(L1ProbeRow(float(j), e, int_dv, int_dmw))
    energies_exact = all(abs(r.energy - 1.0) <= 1e-10 for r in rows)
    dv_dec = all(b.int_dv < a.int_dv for a, b in zip(rows, rows[1:]))
    dmw_dec = (w is None) or all(b.int_dmw < a.int_dmw for a, b in zip(rows, rows[1:]))
    return L1ProbeResult(rows, energies_exact, dv_dec, dmw_dec)
