"""Rough-path sampling, occupation-measure potentials, and the scaling-law
experiments built on them."""

__version__ = "0.1.0"

from .process_sim import (ProcessSpec, SamplePath, SDECoefficients, simulate,
                          simulate_fbm, simulate_rosenblatt, simulate_stable,
                          solve_young_sde, save_path, load_path)
from .occupation import (OccupationMeasure, PotentialEstimate, AdmissibleParams,
                         Rejection, occupation_measure, riesz_potential,
                         rescaled_potential, local_time_histogram,
                         sup_potential_over_space, check_admissible,
                         unit_ball_volume)
