"""Max-min phase design for passive reflecting surfaces serving several users."""

from .beams import (PatternGrid, RegionSpec, power_ratio_report, quantize_phases,
                    scattered_pattern, widebeam_directions)
from .channel import ChannelMatrix, assemble_channel, bs_ris_gain, ris_ue_gain
from .geometry import (Direction, RisLayout, Scenario, Terminal, WeightedUser,
                       arrival_distance, build_grid_layout, departure_delay,
                       direction_vector, wavelength_from_frequency)
from .maxmin import (PhaseConfig, Solution, SolverOptions, agd_minimize, max_fn,
                     moreau_gradient, moreau_value, objective_components, objective_jacobian,
                     project_simplex, smoothed_objective, solve_maxmin, user_powers)

__version__ = "0.1.0"
