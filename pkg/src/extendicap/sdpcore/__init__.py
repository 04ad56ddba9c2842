"""Block-structured SDP: representation, interior-point solve, verification."""

from .problem import SdpProblem, SdpSolution, herm_embed, herm_lift
from .solver import SolveOptions, solve
from .verify import ResidualReport, verify_solution
from .firstorder import admm_solve

__all__ = [
    "SdpProblem",
    "SdpSolution",
    "SolveOptions",
    "solve",
    "verify_solution",
    "ResidualReport",
    "admm_solve",
    "herm_embed",
    "herm_lift",
]
