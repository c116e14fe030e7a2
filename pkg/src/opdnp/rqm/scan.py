"""J_CR scans of the selectivity factor."""

from ..results import SweepResult
from .rates import dq_rate_constants, selectivity_factor, rqm_polarization

JSCAN_COLUMNS = ["J", "R_D1", "k_dq", "P"]
JSCAN_UNITS = ["cm-1", "1", "s-1", "1"]
KEY_PAIR = ("Q-3/2", "D1+1/2")


def j_scan_row(params, J, grid, **kw):
    table = dq_rate_constants(params.replace(J_CR=J), grid, **kw)
    R = selectivity_factor(table)
    return (J, R, table.k_dq[KEY_PAIR], rqm_polarization(R)), list(table.diagnostics)


def j_scan(params, J_values, grid, **kw):
    """One row (J, R_D1, k_dq(Q-3/2 -> D1+1/2), P) per J value; J must be negative."""
    J_values = list(J_values)
    if not J_values:
        raise ValueError("J list is empty")
    bad = [J for J in J_values if J >= 0]
    if bad:
        raise ValueError(f"j_scan accepts J_CR < 0 only, got {bad}")
    res = SweepResult(JSCAN_COLUMNS, JSCAN_UNITS)
    for J in J_values:
        row, diag = j_scan_row(params, J, grid, **kw)
        res.add_row(row, diag)
    return res
