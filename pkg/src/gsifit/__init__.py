"""Personalized generalized safety index: scoring, rho estimation, simulation, analysis."""

from .analytics import (ClusterResult, DegenerateInput, DescriptiveSummary, TestResult, describe,
                        kde_1d, mann_whitney_u, mean_shift, pearson, silhouette,
                        wilcoxon_signed_rank)
from .estimation import (Aggregation, EstimationResult, LikelihoodConfig, Method, Observation,
                         UnidentifiableRho, build_observation, fit_rho, fit_rho_fixed_step,
                         fit_rho_grid, fit_rho_quasi_newton, log_likelihood,
                         log_likelihood_grad, normalize_likert)
from .safety import (RHO_MAX, RHO_MIN, ProxemicsZone, SafetyParams, TrajectorySample,
                     ValidationError, classify_zone, gsi, gsi_curve, gsi_grad_rho,
                     safety_margin, stopping_distance)
from .simulator import (CohortDataset, EpisodeSpec, OperatingMode, Role, SyntheticParticipant,
                        generate_cohort, generate_episode, synth_rating)

__version__ = "0.1.0"
