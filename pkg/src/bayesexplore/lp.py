"""Exact two-phase simplex over the rationals.

All variables are nonnegative.  Pivoting follows Bland's rule (smallest
eligible index enters, smallest basic index leaves among ratio ties), so the
solver terminates and is a deterministic function of its input.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

GE, LE, EQ = ">=", "<=", "="
_RELATIONS = (GE, LE, EQ)

OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"


@dataclass
class LinearProgram:
    """maximize objective.x  s.t. constraints, x >= 0.

    `objective` and each constraint's coefficients are sparse maps from
    variable index to a rational.
    """

    num_vars: int
    objective: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)  # (coeffs, relation, rhs)

    def add(self, coeffs, relation, rhs=0):
        if relation not in _RELATIONS:
            raise ValueError(f"unknown relation {relation!r}")
        coeffs = {int(i): Fraction(v) for i, v in coeffs.items() if v != 0}
        for i in coeffs:
            if not 0 <= i < self.num_vars:
                raise IndexError(f"variable index {i} out of range")
        self.constraints.append((coeffs, relation, Fraction(rhs)))

    def with_objective(self, objective) -> "LinearProgram":
        return LinearProgram(self.num_vars, dict(objective), list(self.constraints))


@dataclass
class LpOutcome:
    status: str
    value: Optional[Fraction] = None
    point: Optional[dict] = None
    pivots: int = 0

    def x(self, i) -> Fraction:
        return self.point.get(i, Fraction(0))


def check_point(lp: LinearProgram, point: dict) -> list:
    """Constraint indices violated by `point` (empty list means feasible)."""
    bad = []
    for j in range(lp.num_vars):
        if point.get(j, 0) < 0:
            bad.append(("nonneg", j))
    for k, (coeffs, rel, rhs) in enumerate(lp.constraints):
        lhs = sum((c * point.get(i, 0) for i, c in coeffs.items()), Fraction(0))
        if (rel == GE and lhs < rhs) or (rel == LE and lhs > rhs) or (rel == EQ and lhs != rhs):
            bad.append(("row", k))
    return bad


def format_tableau(rows, rhs, obj, obj_val, basis) -> str:
    lines = []
    for r, row in enumerate(rows):
        cells = " ".join(f"{str(v):>7}" for v in row)
        lines.append(f"x{basis[r]:<4}| {cells} | {rhs[r]}")
    lines.append("obj  | " + " ".join(f"{str(v):>7}" for v in obj) + f" | {obj_val}")
    return "\n".join(lines)


class _Tableau:
    def __init__(self, rows, rhs, basis, ncols, debug=None):
        self.rows = rows
        self.rhs = rhs
        self.basis = basis
        self.ncols = ncols
        self.debug = debug
        self.pivots = 0

    def pivot(self, r, c):
        row = self.rows[r]
        p = row[c]
        if p != 1:
            inv = 1 / p
            self.rows[r] = row = [v * inv for v in row]
            self.rhs[r] *= inv
        for k in range(len(self.rows)):
            if k == r:
                continue
            f = self.rows[k][c]
            if f:
                other = self.rows[k]
                self.rows[k] = [a - f * b if b else a for a, b in zip(other, row)]
                self.rhs[k] -= f * self.rhs[r]
        self.basis[r] = c
        self.pivots += 1

    def reduced_costs(self, cost):
        """Reduced costs c_j - c_B B^-1 A_j and the current objective value."""
        red = list(cost)
        val = Fraction(0)
        for r, b in enumerate(self.basis):
            cb = cost[b]
            if cb:
                row = self.rows[r]
                red = [x - cb * y if y else x for x, y in zip(red, row)]
                val += cb * self.rhs[r]
        return red, val

    def optimize(self, cost, allowed):
        """Maximize cost.x over columns in `allowed`; returns 'optimal' or 'unbounded'."""
        while True:
            red, val = self.reduced_costs(cost)
            if self.debug is not None:
                self.debug.append(format_tableau(self.rows, self.rhs, red, val, self.basis))
            entering = next((j for j in range(self.ncols) if allowed[j] and red[j] > 0), None)
            if entering is None:
                return OPTIMAL
            best = None
            for r, row in enumerate(self.rows):
                a = row[entering]
                if a > 0:
                    ratio = self.rhs[r] / a
                    if best is None or ratio < best[0] or (ratio == best[0] and self.basis[r] < self.basis[best[1]]):
                        best = (ratio, r)
            if best is None:
                return UNBOUNDED
            self.pivot(best[1], entering)


def solve(lp: LinearProgram, debug: Optional[list] = None) -> LpOutcome:
    """Solve `lp` exactly.  If `debug` is a list, tableau dumps are appended to it."""
    n = lp.num_vars
    rows, rhs, kinds = [], [], []
    for coeffs, rel, b in lp.constraints:
        row = [Fraction(0)] * n
        for i, v in coeffs.items():
            row[i] = Fraction(v)
        b = Fraction(b)
        if b < 0:
            row = [-v for v in row]
            b = -b
            rel = {GE: LE, LE: GE, EQ: EQ}[rel]
        rows.append(row)
        rhs.append(b)
        kinds.append(rel)

    n_slack = sum(1 for k in kinds if k != EQ)
    n_art = sum(1 for k in kinds if k != LE)
    ncols = n + n_slack + n_art
    full, basis = [], []
    s_col, a_col = n, n + n_slack
    art_cols = set()
    for row, kind in zip(rows, kinds):
        ext = row + [Fraction(0)] * (n_slack + n_art)
        if kind == LE:
            ext[s_col] = Fraction(1)
            basis.append(s_col)
            s_col += 1
        else:
            if kind == GE:
                ext[s_col] = Fraction(-1)
                s_col += 1
            ext[a_col] = Fraction(1)
            basis.append(a_col)
            art_cols.add(a_col)
            a_col += 1
        full.append(ext)

    tab = _Tableau(full, list(rhs), basis, ncols, debug)
    allowed = [True] * ncols

    if art_cols:
        cost1 = [Fraction(-1) if j in art_cols else Fraction(0) for j in range(ncols)]
        tab.optimize(cost1, allowed)
        _, val = tab.reduced_costs(cost1)
        if val != 0:
            return LpOutcome(INFEASIBLE, pivots=tab.pivots)
        # drive zero-level artificials out of the basis, dropping redundant rows
        r = 0
        while r < len(tab.rows):
            if tab.basis[r] in art_cols:
                col = next((j for j in range(ncols) if j not in art_cols and tab.rows[r][j] != 0), None)
                if col is None:
                    del tab.rows[r], tab.rhs[r], tab.basis[r]
                    continue
                tab.pivot(r, col)
            r += 1
        for j in art_cols:
            allowed[j] = False

    cost2 = [Fraction(0)] * ncols
    for i, v in lp.objective.items():
        if not 0 <= i < n:
            raise IndexError(f"objective index {i} out of range")
        cost2[i] = Fraction(v)
    status = tab.optimize(cost2, allowed)
    if status == UNBOUNDED:
        return LpOutcome(UNBOUNDED, pivots=tab.pivots)
    point = {j: Fraction(0) for j in range(n)}
    for r, b in enumerate(tab.basis):
        if b < n:
            point[b] = tab.rhs[r]
    value = sum((Fraction(v) * point[i] for i, v in lp.objective.items()), Fraction(0))
    return LpOutcome(OPTIMAL, value, point, tab.pivots)


def max_coordinate(lp: LinearProgram, i: int, debug: Optional[list] = None) -> LpOutcome:
    if not 0 <= i < lp.num_vars:
        raise IndexError(f"variable index {i} out of range (num_vars={lp.num_vars})")
    return solve(lp.with_objective({i: 1}), debug)
