"""Closed-form functionals for the oracle families.

Two families carry most of the testing load because every functional of
theirs has an elementary antiderivative on the ball of C^n:

* truncated logarithms ``u = m * max(log|z|, c)`` with ``m > 0, c < 0``:
  a single circle atom of mass ``m^n`` at ``t = c``;
* quadratics ``u = a (|z|^2 - 1)`` with the smooth measure ``(2a)^n e^{2nt}``.

The scaling counterexample ``u_j = j^{1/(n+1)} max(log|z|, -1/j)`` keeps unit
energy while converging to zero uniformly, which is what the L1-convergence
probe tabulates.
"""

from __future__ import annotations

import numpy as np

from .radial import RadialGrid, RadialPotential, truncated_log_potential


# -- truncated-log family ---------------------------------------------------


def tlog_mass(m: float, n: int) -> float:
    return m ** n


def tlog_energy_p(m: float, c: float, n: int, p: float = 1.0) -> float:
    """int (-u)^p (dd^c u)^n = m^{n+p} |c|^p (single atom at t = c)."""
    return m ** (n + p) * abs(c) ** p


def tlog_exp_integral(m: float, c: float, n: int, s: float = 1.0) -> float:
    """int exp(-s u) dV, split at e^c.

    Equals ``e^{(2n - sm) c} + 2n (1 - e^{(2n - sm) c}) / (2n - sm)`` away
    from the resonant slope ``sm = 2n``, where it is ``1 + 2n |c|``.
    """
    a = 2.0 * n - s * m
    if abs(a) < 1e-13:
        return 1.0 + 2.0 * n * abs(c)
    e = np.exp(a * c)
    return float(e + 2.0 * n * (1.0 - e) / a)


def tlog_int_minus_u_dv(m: float, c: float, n: int) -> float:
    """int (-u) dV = m (1 - e^{2nc}) / (2n)."""
    return m * (1.0 - np.exp(2.0 * n * c)) / (2.0 * n)


# -- quadratic family -------------------------------------------------------


def quad_mass(a: float, n: int) -> float:
    return (2.0 * a) ** n


def quad_energy(a: float, n: int) -> float:
    """e(u) = 2^n a^{n+1} / (n+1)."""
    return 2.0 ** n * a ** (n + 1) / (n + 1.0)


def quad_exp_integral(a: float, s: float = 1.0) -> float:
    """n = 1 only: int exp(-s a (|z|^2 - 1)) dV = (e^{sa} - 1) / (sa)."""
    x = s * a
    if x == 0.0:
        return 1.0
    return float((np.exp(x) - 1.0) / x)


# -- unit-energy counterexample family --------------------------------------


def counterexample_params(j: float, n: int) -> tuple[float, float]:
    """(m, c) of u_j = j^{1/(n+1)} max(log|z|, -1/j); e(u_j) = 1 for every j."""
    return j ** (1.0 / (n + 1.0)), -1.0 / j


def counterexample_potential(grid: RadialGrid, j: float) -> RadialPotential:
    m, c = counterexample_params(j, grid.n)
    return truncated_log_potential(grid, m, c)


def counterexample_int_dv(j: float, n: int) -> float:
    m, c = counterexample_params(j, n)
    return tlog_int_minus_u_dv(m, c, n)


# -- scan helpers -----------------------------------------------------------


def exp_energy_ratio(m: float, c: float, n: int, b: float) -> float:
    """LHS / RHS of the exponential-energy bound on the truncated-log family:
    int e^{-u} dV over exp(b e(u))."""
    log_rhs = b * tlog_energy_p(m, c, n, 1.0)
    return float(tlog_exp_integral(m, c, n, 1.0) * np.exp(-log_rhs))


def exp_energy_scan(n: int, b: float, m_values: np.ndarray, c_values: np.ndarray):
    """Ratio table over the (m, c) grid; returns (ratios, argmax indices)."""
    M, C = np.meshgrid(m_values, c_values, indexing="ij")
    ratios = np.empty(M.shape)
    for i in range(M.shape[0]):
        for k in range(M.shape[1]):
            ratios[i, k] = exp_energy_ratio(M[i, k], C[i, k], n, b)
    im, ic = np.unravel_index(np.argmax(ratios), ratios.shape)
    return ratios, (int(im), int(ic))
