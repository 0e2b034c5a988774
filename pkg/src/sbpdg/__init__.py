"""DG and flux reconstruction schemes on triangles in a common matrix form,
with executable checks of summation-by-parts, equivalence, conservation and
energy stability."""
from .operators import build_operators
from .solver import SchemeConfig, build_discretization, run_scheme

__version__ = "0.1.0"
__all__ = ["SchemeConfig", "build_discretization", "build_operators", "run_scheme"]
