"""Predator prey-switching models: simulation, stability analysis and ABC fitting."""

__version__ = "0.1.0"

from .errors import (ConvergenceFailure, DegenerateSliding, EventLocalizationFailure,
                     InfeasibleSteadyState, IntegrationError, NonFiniteState,
                     NonMonotonicTimes, NotSliding, ParameterError, ParseError,
                     PreySwitchError, RejectCandidate, StarvedAcceptance, StepFailure,
                     ZeroVector)
from .models import (ModelParams, State3, State4, filippov_sliding_rhs, normal_components,
                     rhs_piecewise, rhs_smooth1, rhs_smooth2, sliding_coefficient,
                     switching_function)
from .integrate import (IntegratorOptions, Segment, Trajectory, integrate_fixed,
                        integrate_piecewise, integrate_smooth)
from .equilibria import (StabilityReport, characteristic_cubic_smooth1, k0_threshold,
                         k1_threshold, routh_hurwitz_cubic, stability_map, stability_smooth1,
                         stability_smooth2, steady_state_smooth1, steady_state_smooth2)
from .dataio import (TimeSeries, export_population, generate_synthetic, import_population,
                     load_timeseries, normalize_l2, save_timeseries)
from .fitting import (FitConfig, ParticlePopulation, PriorSpec, abc_pmc, distance, peak_align,
                      sample_posterior, simulate_candidate)
