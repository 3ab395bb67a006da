"""Error bounds for Gaussian process regression under bounded-support noise.

Exact GP posteriors, our deterministic and probabilistic bounds with the
published baselines, deep-kernel feature maps, benchmark systems and
grid-based stochastic barrier certificates.
"""

from .barrier import (BarrierCertificate, Partition, RegionDynamicsInterval, region_dynamics,
                      safety_probability, successors, synthesize, verify_certificate)
from .bounds import (BoundContext, abbasi_bound, chowdhury_bound, compute_cstar, coverage_report,
                     det_bound, hashimoto_bound, lambda_x, lemma3_term, maddalena_bound,
                     prob_bound, seeger_bound, uniform_bound)
from .errors import (ConditioningError, ConfigError, InputError, InvalidBoundError,
                     TrainingDivergenceError)
from .gp import Dataset, FittedGP, fit, predict_mean, predict_var, weights
from .kernels import FeatureMap, KernelSpec, kernel_eval, kernel_matrix, train_feature_map
from .systems import DynSystem, NoiseSpec, builtin_system, generate_dataset, sample_noise

__version__ = "0.1.0"
