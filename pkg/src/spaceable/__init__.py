"""Exact witnesses and certificates for lineability and spaceability in l_p and L_p."""

__version__ = "0.1.0"

from .numerics import RealExpr, enclose, compare_strict, pseries_tail_bound  # noqa: E402
from .sequences import (  # noqa: E402
    SymbolicSequence,
    witness_vector,
    lq_membership,
    linear_combination,
    partial_pnorm,
    coordinate,
)
