"""Structural equation modeling for diffusion processes at high frequency.

The package simulates the latent-factor diffusion system, computes the
realized covariance of the observed process, fits the LISREL covariance
structure by quasi-likelihood, runs the chi-squared goodness-of-fit
tests and performs adaptive-lasso-style sparse estimation with the
penalized test.
"""

__version__ = "0.1.0"

from .matrixcalc import asymcov_w, duplication, half_dim, logdet_pd, symmetrize, unvech, vech
from .sde import (AffineDrift, DiffusionSystem, PathSample, SamplingGrid,
                  euler_maruyama, ou_drift, path_from_csv, path_to_csv,
                  replication_seed, simulate_observations)
from .model import (ModelSpec, ParameterMask, build_mask, build_sigma,
                    check_local_identifiability, pack, parse_model_config,
                    sigma_and_jacobian, sigma_jacobian, unpack)
from .realized import RealizedCov, clt_zscores, realized_cov, realized_cov_from_array
from .qmle import (FitResult, contrast_f, contrast_gradient, fit, loglik_value,
                   saturated_loglik, standard_errors, theoretical_se)
from .inference import (TestReport, TestUndefinedError, chi2_sf,
                        chi2_upper_quantile, gof_test, penalized_gof_test)
from .sparse import (LsaResult, PenaltyConfig, PlsaResult, SparseFitResult,
                     adaptive_weights, default_g, lsa_estimate, plsa_estimate,
                     po_refit, restrict_mask, sparse_pipeline)
from .config import (ExperimentConfig, load_experiment_config, load_model_spec,
                     load_system, parse_experiment_config, parse_system_config,
                     resolve_penalty)
from .harness import AggregateReport, emit_tables, run_experiment, run_replication
