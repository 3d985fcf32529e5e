"""Age-stratified, geo-referenced epidemic simulation on synthetic urban
social networks.

Pipeline: ``population`` lays out a tiled territory and its residents;
``network`` builds the two-layer social graph (household cliques plus
distance- and age-assortative acquaintances); ``contacts`` turns the graph
into daily contact realizations under six configurations sharing one total
contact mass; ``epidemic`` runs discrete-time SIR ensembles; ``metrics``
computes the observables; ``experiment``/``cli`` orchestrate and serialize.
"""

from .contacts import (Configuration, ContactKernel, calibrate_beta,
                       index_case_secondary_events, make_kernel)
from .epidemic import (EpidemicParams, SimulationResult, outbreak_filter,
                       r0_index, run, run_ensemble)
from .errors import ConfigurationError, InputError, UrbanEpiError
from .experiment import (ExperimentConfig, ScanSpec, build_assets, load_config,
                         placement_study, run_experiment, scan_experiment)
from .network import (SocialGraph, build_acquaintances, build_households,
                      build_social_graph, degree_stats, sample_fitness)
from .population import (AGE_GROUP_NAMES, N_AGE_GROUPS, CsvGridDensity,
                         Population, RadialDensity, Territory, UniformDensity,
                         build_grid, populate, tile_distance)

__version__ = "0.1.0"
