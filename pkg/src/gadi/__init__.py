"""Low-rank generalized ADI solvers for Lyapunov and Riccati equations."""

from .care import CareProblem, CareSolution, kleinman_newton, kleinman_newton_dense
from .errors import GadiError
from .lyap import Criterion, LyapProblem, LyapSolution, SolveOptions, gadi_dense, r1_adi, r2_adi, rgadi
from .matcore import LowRankFactors
from .probgen import Family, ProblemSpec, generate

__all__ = [
    "CareProblem",
    "CareSolution",
    "Criterion",
    "Family",
    "GadiError",
    "LowRankFactors",
    "LyapProblem",
    "LyapSolution",
    "ProblemSpec",
    "SolveOptions",
    "gadi_dense",
    "generate",
    "kleinman_newton",
    "kleinman_newton_dense",
    "r1_adi",
    "r2_adi",
    "rgadi",
]
