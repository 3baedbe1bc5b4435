"""spikelab: a numerical laboratory for -Delta u = u^p as p -> infinity.

Positive solutions on a planar domain concentrate at a single spike
whose height tends to sqrt(e) and whose location minimizes the Robin
function; the package solves the PDE adaptively, computes the spectrum
of the linearized operator, builds Green/Robin machinery, and checks
the asymptotic laws against a high-accuracy radial oracle on the disk.
"""

from .geometry import DomainSpec, TriMesh, build_mesh
from .lane_emden import (Branch, Solution, continuation_sweep, detect_peaks,
                         liouville_guess, newton_solve, newton_solve_frame,
                         rescale_solution, solve_at)
from .green_robin import RobinData, boundary_identity, robin_critical_point
from .spectral import SpectrumReport, linearized_spectrum, morse_index
from .asymptotics import (KernelFit, PredictionReport, e_U_ball_integral,
                          extrapolate, far_field_check, fit_kernel,
                          liouville_U, morse_sandwich_check, predict)
from .radial_oracle import disk_robin, radial_spectrum, shoot_radial

__version__ = "0.1.0"
