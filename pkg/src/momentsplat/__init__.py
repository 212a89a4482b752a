"""Moment-based volume rendering of 3D Gaussian scenes on the CPU."""

from .adc import REFERENCE_SPLIT, SplitParams, clone, init_density, prune_mask, split, split_optimize
from .bounds import MomentSolver, TransmittanceEstimate, canonical_measure, reconstruct_power, reconstruct_trig
from .core import Camera, Gaussian1D, Gaussian3D, Ray, Scene, evaluate_sh, project_to_ray, project_to_rays
from .errors import (ConfigError, DegenerateMomentError, InvalidPrimitiveError, MomentSplatError, NumericOverflowError,
                     ProxyDegenerateError, SchemaError, UsageError)
from .metrics import compare
from .moments import MomentVector, accumulate, moment_vector, power_moments_1d, trig_moments_1d, zeroth_moment
from .proxy import ScreenEllipse, confidence_proxy, ewa_proxy
from .quadrature import QuadratureConfig
from .render import ImageBuffer, RenderConfig, render
from .warp import WarpConfig, unwarp, warp

__version__ = "0.1.0"
