"""Bounded whole-line and whole-plane solutions from Dirichlet truncations.

Submodules: :mod:`~boundsol.expr` (expressions), :mod:`~boundsol.grid`,
:mod:`~boundsol.problems`, :mod:`~boundsol.bvp1d` (Newton and continuation),
:mod:`~boundsol.variational` (energy minimization), :mod:`~boundsol.driver`
(domain-expansion studies), :mod:`~boundsol.pde2d` and :mod:`~boundsol.cli`.
"""
__version__ = "0.1.0"

from .kernels import BACKEND as KERNEL_BACKEND  # noqa: E402
from .problems import preset  # noqa: E402

__all__ = ["__version__", "KERNEL_BACKEND", "preset"]
