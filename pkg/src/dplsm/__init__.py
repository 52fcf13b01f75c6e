"""Latent space models of dyadic contact data with a Dirichlet-process
prior on latent coordinates."""

from .data import (DataError, DyadTable, InteractionRecord, ObservationWindow,
                   build_dyad_table, dyad_transition_counts, ingest_records,
                   split_windows)
from .latent import (ClusterTable, crp_simulate, expected_mass_points,
                     latent_distance, radius_density, sample_angles,
                     sample_h0, sample_radius, spherical_to_cartesian)
from .model import (LinkCoefficients, PopulationParams, Variant,
                    aggregated_loglik, dyad_params, link_mu, link_p,
                    marginal_loglik, prob_nonempty_future, simulate_network)
from .sampler import (ChainOutput, HyperpriorConfig, PosteriorDraw,
                      SamplerConfig, run_chain, scaling_experiment)

__version__ = "0.1.0"
