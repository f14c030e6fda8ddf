"""Gibbs states approximated by weighted n-preimage measures.

Two exactly computable families are covered: hyperbolic toral
endomorphisms (with small trigonometric perturbations) and one-sided
subshifts of finite type with locally constant potentials.
"""

__version__ = "0.1.0"

from .errors import (CertificationError, ConfigError, EmptyDictionary, GibbsError, IllegalWord,
                     InvalidMeasure, PhaseSpaceMismatch, ResourceCapExceeded, SingularMatrix)
from .measure import (AtomicMeasure, Character, Cylinder, ShiftMeasure, ShiftPoint, Tabulated,
                      TestDictionary, TorusMeasure, TorusPoint, fourier_coefficient, integrate,
                      weak_star_distance)
from .potential import LocallyConstantPotential, TrigPotential
from .shift import (HaarOracle, MarkovOracle, ShiftSystem, gibbs_ratio, lifted_cylinder_measure,
                    oracle_cylinder_measure, shift_preimages)
from .torus import (LatticeMap, MapClass, TrigPolynomial, classify, fixed_point_count, fixed_points,
                    forward, preimages, smith_normal_form)
from .estimators import (ConvergenceReport, SamplerSpec, birkhoff_deviation, l1_convergence_report,
                         l1_convergence_statistic, periodic_point_measure, pointwise_sequence,
                         pressure_estimate, weighted_preimage_measure)
from .tree import PreimageTree, build_tree

__all__ = [name for name in dir() if not name.startswith("_")]
