"""Numerical laboratory for stochastic minimax optimization.

Discrete methods (gradient descent-ascent, extragradient, Hamiltonian
descent), their diffusion approximations, exact moment formulas on bilinear
and quadratic games, and a Monte Carlo harness that cross-validates the
simulations against the closed forms.
"""

from .core import DiagMatrix, RngStream, StateVector, psd_sqrt
from .errors import (ConfigError, Degenerate, DivergenceDetected,
                     DivergentRegime, GridMismatch, InvalidDimension,
                     InvalidInput, InvalidTag, NotPSD, NotSymmetric,
                     QuadratureError, SaddleSimError, SgdaBilinearDivergence,
                     StatisticMismatch, UnsupportedNoise)
from .landscapes import (Landscape, NoiseKind, NoiseSpec, NonBilinear1,
                         NonBilinear2, NonBilinear3, Quadratic)
from .optimizers import (Method, OptimizerConfig, Sampling, Scheduler,
                         Trajectory, run_optimizer, run_optimizer_batch)
from .sde import (SdeLabel, SdeModel, build_seg_sde, build_seg_small_rho_sde,
                  build_sgda_sde, build_shgd_sde, euler_maruyama,
                  euler_maruyama_batch, scheduled_sde)

__version__ = "0.1.0"
