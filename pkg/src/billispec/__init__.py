"""billispec: elliptical billiards, Laplace spectra of (deformed) ellipses,
Hadamard variational formulas, and numerical spectral-rigidity diagnostics."""

__version__ = "0.1.0"

from .backend import backend_name
from .geometry import (DeformationField, DomainSpec, EllipseDomain,
                       boundary_point, deformed, dilation_field, ellipse,
                       eval_deformation, perimeter, translation_field)
from .billiards import (InvariantCurve, LengthGroup, PeriodicFamily,
                        PhasePoint, billiard_map, billiard_orbit,
                        caustic_invariant, gamma1, invariant_curve,
                        length_spectrum, multiplicity_filter, periodic_family,
                        rotation_number)
from .spectral import (SolverOptions, SpectrumResult, boundary_cauchy_data,
                       load_spectrum, save_spectrum, solve_spectrum)
from .hadamard import (EigVariation, SmoothedTraceVariation, eig_variation,
                       finite_difference_variation, greens_variation,
                       trace_variation)
from .rigidity import (RatioContract, RigidityReport, abel_derivative,
                       abel_moments, abel_transform, first_nonflat_order,
                       null_space_test, ratio_contract, reparametrize_flat,
                       rigidity_integral)
