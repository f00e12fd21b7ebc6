"""Sum-product digraphs over matrix rings M_n(F_q): exact counting, audits and spectra."""

__version__ = "0.1.0"

from .errors import (
    AuditFailure,
    BudgetExceeded,
    CapExceeded,
    ConfigError,
    NoConvergence,
    SumProductError,
)
from .fq_linalg import FieldSpec, MatFq, MatrixRing, field_from_order, field_make, mat_rank
from .digraph import GraphParams, SumProductDigraph, audit_graph
from .spectrum import second_singular_direction

__all__ = [
    "AuditFailure",
    "BudgetExceeded",
    "CapExceeded",
    "ConfigError",
    "FieldSpec",
    "GraphParams",
    "MatFq",
    "MatrixRing",
    "NoConvergence",
    "SumProductDigraph",
    "SumProductError",
    "audit_graph",
    "field_from_order",
    "field_make",
    "mat_rank",
    "second_singular_direction",
]
