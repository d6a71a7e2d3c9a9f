"""Figure rendering for trihalo harness CSV outputs."""

from .io import BenchRow, ConvergenceRow, FigureInputError, read_bench, read_convergence
from .render import FIGURE_KINDS, FigureSpec, render

__version__ = "0.1.0"
