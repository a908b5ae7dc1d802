"""Metastability and tunneling of condensed zero-range processes on finite graphs."""
from .errors import *  # noqa: F401,F403
from .experiments import (ExperimentConfig, ExperimentReport, run_condensation_remark,
                          run_h_conditions, run_mt1, run_tunneling, run_zk)
from .extrapolate import ConvergenceReport, convergence_report, fit_power_law
from .graph import (SiteGraph, StarStructure, build_graph, capacity_S, complete, dirichlet_form_S,
                    equilibrium_potential_S, from_matrix, ring, star_structure)
from .measure import (MeasureTable, MetaPartition, conditional_vs_grand_canonical, meta_partition,
                      stationary_measure, tail_masses)
from .model import (LimitConstants, ZrpModel, capacity_limit, default_scales, jump_rates,
                    limit_constants, tunneling_rates)
from .potential import (capacity_N, dirichlet_form_N, equilibrium_potential, lemma68_rates,
                        trace_rates_exact)
from .simulation import (CondensatePath, Trajectory, check_M1, check_M3, condensate_path,
                         empirical_generator, hitting_time, simulate, trace_path)
from .space import ConfigSpace, enumerate_space

__version__ = "0.1.0"
