"""Laplace-Beltrami solver built on second-kind boundary integral equations."""

__version__ = "0.1.0"

from .analytic import spherical_harmonic  # noqa: E402,F401
from .kernels import KernelKind, eval_kernel  # noqa: E402,F401
from .mesh import build_reference_element, sphere_mesh, torus_mesh  # noqa: E402,F401
from .quadrature import QuadConfig  # noqa: E402,F401
from .solver import SolverConfig, lb_solve  # noqa: E402,F401
