"""Numerical laboratory for the complex Monge-Ampere equation
(dd^c u)^n = k e^{-u} dV / int e^{-u} dV and the energy calculus around it.

Two discrete representations: radial potentials on a log-radius grid (any
complex dimension n) and a full 2-D grid on the unit disk (n = 1).  On top of
them sit the Dirichlet solvers, energy and exponential functionals, envelope
projections, a damped fixed-point solver, a variational minimizer, measure
regularization schemes and a property-test harness for the energy and mass
inequalities.  The ``ma-lab`` console script drives everything in batch mode.
"""

from .errors import GridMismatch, InvariantViolation, SolverError
from .radial import (RadialGrid, RadialMeasure, RadialPotential, circle_measure,
                     dirichlet_solve, dv_weights, energy_p, envelope_P,
                     exp_integral, integrate_against, ma_measure,
                     measure_from_cumulative, mixed_ma, mutual_energy,
                     quadratic_potential, random_potential,
                     truncated_log_potential)
from .planar import (PlanarDensity, PlanarGrid, PlanarPotential,
                     dirichlet_pairing, energy_from_density, energy_planar,
                     exp_integral_planar, ma_planar, mollify,
                     mutual_energy_planar, poisson_solve, radial_to_planar,
                     subharmonic_envelope, upper_envelope_seq)
from .harness import (InequalityReport, check_energy_holder,
                      check_energy_holder_planar, check_exp_energy,
                      check_exp_mass, check_mass_holder, check_subadditivity,
                      estimate_M1_constant, l1_convergence_probe,
                      sample_tuples, stability_probe)
from .solvers import (ApproximationResult, FixedPointConfig, SolverTrace,
                      VariationalConfig,apply_T, approximation_scheme,
                      directional_derivative_check, euler_lagrange_residual,
                      fixed_point_solve, functional_F, grad_F, k_scan,
                      truncation_scheme, variational_solve)

__version__ = "0.1.0"

__all__ = [
    "GridMismatch", "InvariantViolation", "SolverError",
    "RadialGrid", "RadialMeasure", "RadialPotential", "circle_measure",
    "dirichlet_solve", "dv_weights", "energy_p", "envelope_P", "exp_integral",
    "integrate_against", "ma_measure", "measure_from_cumulative", "mixed_ma",
    "mutual_energy", "quadratic_potential", "random_potential",
    "truncated_log_potential",
    "PlanarDensity", "PlanarGrid", "PlanarPotential", "dirichlet_pairing",
    "energy_from_density", "energy_planar", "exp_integral_planar", "ma_planar",
    "mollify", "mutual_energy_planar", "poisson_solve", "radial_to_planar",
    "subharmonic_envelope", "upper_envelope_seq",
    "InequalityReport", "check_energy_holder", "check_energy_holder_planar",
    "check_exp_energy", "check_exp_mass", "check_mass_holder",
    "check_subadditivity", "estimate_M1_constant", "l1_convergence_probe",
    "sample_tuples", "stability_probe",
    "ApproximationResult", "FixedPointConfig", "SolverTrace",
    "VariationalConfig", "apply_T", "approximation_scheme",
    "directional_derivative_check", "euler_lagrange_residual",
    "fixed_point_solve", "functional_F", "grad_F", "k_scan",
    "truncation_scheme", "variational_solve",
]
