"""Monte Carlo simulation of the discrete radial Poissonian web and its scaling laws."""
from .errors import ContaminationError, DegenerateFitError, DomainError, ParameterError
from .streams import (MarkSequence, RngStream, flip_fair_coin, sample_nearest_mark,
                      sample_poisson_marks)
from .radial import (ModelParams, RadialFamily, RadialPath, build_drpw, crossing_count,
                     in_region, restrict_family, successor_radial)
from .transforms import (PlanarPath, PlanarPathFamily, family_hausdorff, lambda_discrepancy,
                         map_T, map_T_inv, map_lambda, map_psi, map_psi_inv, path_distance,
                         planar_hausdorff, rescale_diffusive)
from .levels import (LevelPath, LevelSystem, cansado_check, grid_paths, halvings_to_agreement,
                     level_spacing, path_from, successor_level)
from .coalescence import (SurvivalCurve, TailFit, difference_process, drift_test, fit_tail,
                          sample_tau, separation_scan)
from .convergence import (CltReport, EtaCount, b1_sweep, b2_sweep, clt_test, covariance_check,
                          covariance_report, eta, eta_mean_bound, multipath_test,
                          single_path_value)

__version__ = "0.1.0"
