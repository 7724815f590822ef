"""Governance gateway for clinical AI prediction services.

The package wraps externally served predictive models with executable
risk-mitigation controls: versioned service passports, role-based access,
regulation and disclaimer gating, data quality gates, a confirmed prediction
workflow, per-case feature attribution, post-market performance monitoring,
bias evidence, usability instruments, case review sessions, and a
hash-chained audit trail.
"""

__version__ = "0.1.0"
