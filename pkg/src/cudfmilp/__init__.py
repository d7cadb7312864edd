"""Package upgradeability problems (CUDF) as 0-1 integer linear programs."""

from .cudf import (
    Atom,
    CudfParseError,
    PackageUnit,
    Request,
    Universe,
    VersionConstraint,
    expand_atom,
    match,
    parse_configuration,
    parse_document,
    write_configuration,
    write_document,
)
from .encoder import IlpModel, LinearConstraint, Objective, VarId, build_model, criteria_values
from .solver import SolveOutcome, lexicographic_solve, solve, solve_bruteforce
from .validator import check_consistency, check_request, diff_configurations

__version__ = "0.1.0"
