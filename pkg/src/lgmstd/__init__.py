"""Standardization of latent Gaussian model effects and variance-partitioning priors."""
__version__ = "0.1.0"

from .effects import (Categorical, ContinuousUniform, DiscreteUniform, Empirical,
                      EffectSpec, decompose, make_categorical, make_icar, make_linear,
                      make_pspline, make_rw)
from .standardize import (StandardizedEffect, geometric_mean_constant, scaling_constant,
                          standardize, standardize_intrinsic)
from .qmod import fit_lambda, target_null_space
from .priors import implied_phi_density, vp_from_sigmas, sigmas_from_vp
from .inference import fit_grid, gaussian_log_marginal
from .study import SimulationConfig, run_study
