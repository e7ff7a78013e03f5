"""Dense two-phase primal simplex with bounded variables.

Problems are always minimizations. Rows are ``<=``, ``=`` or ``>=``;
variables carry a finite lower bound (default 0) and an optional upper
bound handled by bound flips rather than extra rows. The solver returns
primal values, one dual per row and reduced costs per variable.

Dual sign convention (min sense): ``<=`` rows have duals <= 0, ``>=`` rows
duals >= 0, ``=`` rows are free.
"""

from __future__ import annotations

import dataclasses
import logging
import os
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ifdp.errors import MalformedProblem, NumericalBreakdown


FEAS_TOL = 1e-8
OPT_TOL = 1e-7
PIVOT_TOL = 1e-9
TINY_PIVOT = 1e-11
BLAND_AFTER = 1000
REFACTOR_EVERY = 100
RESIDUAL_TOL = 1e-6
DEBUG_DUMP = os.environ.get("IFDP_LP_DEBUG", "") not in ("", "0")

LE, EQ, GE = "<=", "=", ">="
_RELATIONS = (LE, EQ, GE)

logger = logging.getLogger(__name__)


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True, eq=False)
class LpProblem:
    """A minimization LP in dense row form."""

    costs: np.ndarray
    matrix: np.ndarray
    relations: tuple
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    var_names: tuple = ()
    row_names: tuple = ()

    def __post_init__(self):
        costs = np.asarray(self.costs, dtype=float).reshape(-1)
        n = costs.size
        matrix = np.asarray(self.matrix, dtype=float)
        if matrix.size == 0:
            matrix = matrix.reshape(len(self.relations), n)
        if matrix.ndim != 2 or matrix.shape[1] != n:
            raise MalformedProblem(
                f"Constraint matrix shape {matrix.shape} does not match {n} variable(s)"
            )
        m = matrix.shape[0]
        rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        if rhs.size != m or len(self.relations) != m:
            raise MalformedProblem(
                f"{m} row(s) but {rhs.size} right-hand side(s) and {len(self.relations)} relation(s)"
            )
        bad = [r for r in self.relations if r not in _RELATIONS]
        if bad:
            raise MalformedProblem(f"Unknown relation(s): {sorted(set(bad))}")
        if not np.all(np.isfinite(rhs)):
            raise MalformedProblem("Right-hand sides must be finite")
        if not np.all(np.isfinite(matrix)) or not np.all(np.isfinite(costs)):
            raise MalformedProblem("Costs and coefficients must be finite")
        lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.size != n or upper.size != n:
            raise MalformedProblem("Bound vectors must have one entry per variable")
        if not np.all(np.isfinite(lower)):
            raise MalformedProblem("Lower bounds must be finite")
        if np.any(upper < lower - FEAS_TOL):
            raise MalformedProblem("Upper bound below lower bound")
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "relations", tuple(self.relations))
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", np.maximum(upper, lower))

    @property
    def num_vars(self):
        return self.costs.size

    @property
    def num_rows(self):
        return self.rhs.size

    def with_bounds(self, lower, upper):
        """Return a copy with replaced variable bounds."""
        return dataclasses.replace(self, lower=lower, upper=upper)


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    objective: float | None = None
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    dual_objective: float | None = None
    iterations: int = 0

    @property
    def optimal(self):
        return self.status is LpStatus.OPTIMAL


class ModelBuilder:
    """Incremental construction of LP/MIP problems with named variables and rows."""

    def __init__(self):
        self._names = []
        self._lower = []
        self._upper = []
        self._costs = []
        self._integer = []
        self._rows = []

    @property
    def num_vars(self):
        return len(self._names)

    @property
    def num_rows(self):
        return len(self._rows)

    @property
    def integer_indices(self):
        return tuple(i for i, flag in enumerate(self._integer) if flag)

    def add_var(self, name, lower=0.0, upper=None, cost=0.0, integer=False):
        self._names.append(name)
        self._lower.append(float(lower))
        self._upper.append(np.inf if upper is None else float(upper))
        self._costs.append(float(cost))
        self._integer.append(bool(integer))
        return len(self._names) - 1

    def set_cost(self, index, cost):
        self._costs[index] = float(cost)

    def add_row(self, coefs, relation, rhs, name=None):
        """Add a row. coefs is a mapping or iterable of (variable index, coefficient)."""
        if relation not in _RELATIONS:
            raise MalformedProblem(f"Unknown relation {relation!r}")
        items = coefs.items() if isinstance(coefs, dict) else coefs
        merged = {}
        for index, value in items:
            merged[index] = merged.get(index, 0.0) + float(value)
        merged = {k: v for k, v in merged.items() if v != 0.0}
        self._rows.append((merged, relation, float(rhs), name or f"row{len(self._rows)}"))
        return len(self._rows) - 1

    def to_lp(self):
        matrix = np.zeros((len(self._rows), len(self._names)))
        for r, (coefs, _, _, _) in enumerate(self._rows):
            for index, value in coefs.items():
                matrix[r, index] = value
        return LpProblem(
            costs=np.array(self._costs, dtype=float),
            matrix=matrix,
            relations=tuple(row[1] for row in self._rows),
            rhs=np.array([row[2] for row in self._rows], dtype=float),
            lower=np.array(self._lower, dtype=float),
            upper=np.array(self._upper, dtype=float),
            var_names=tuple(self._names),
            row_names=tuple(row[3] for row in self._rows),
        )


class _Tableau:
    """Explicit basis inverse over a standard-form system A x = b, 0 <= x <= u.

    Basic values are recomputed from the nonbasic bound states on every
    iteration; pivots and bound flips only touch the bookkeeping.
    """

    def __init__(self, A, b, upper, basis):
        self.A = A
        self.b = b
        self.upper = upper
        self.basis = np.array(basis, dtype=int)
        self.at_upper = np.zeros(A.shape[1], dtype=bool)
        self.is_basic = np.zeros(A.shape[1], dtype=bool)
        self.is_basic[self.basis] = True
        # the starting basis is made of unit slack and artificial columns
        self.Binv = np.eye(A.shape[0])
        self.beta = b.copy()
        self.pivots = 0
        self.since_refactor = 0

    @property
    def rows(self):
        return self.A.shape[0]

    def nonbasic_values(self):
        return np.where(self.at_upper & ~self.is_basic, self.upper, 0.0)

    def values(self):
        x = self.nonbasic_values()
        x[self.basis] = self.beta
        return x

    def update_beta(self):
        self.beta = self.Binv @ (self.b - self.A @ self.nonbasic_values())

    def refactor(self):
        self.since_refactor = 0
        if self.rows == 0:
            return
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown(f"Singular basis during refactorization: {exc}") from exc
        self.update_beta()

    def pivot(self, r, j, col):
        """Swap column j into basis row r; col is B^-1 A_j. Returns the leaving column."""
        piv = col[r]
        if abs(piv) < TINY_PIVOT:
            raise NumericalBreakdown(f"Pivot magnitude {abs(piv):.3e} below {TINY_PIVOT:g}")
        row = self.Binv[r] / piv
        self.Binv -= np.outer(col, row)
        self.Binv[r] = row
        leaving = int(self.basis[r])
        self.is_basic[leaving] = False
        self.basis[r] = j
        self.is_basic[j] = True
        self.at_upper[j] = False
        self.pivots += 1
        self.since_refactor += 1
        return leaving

    def run(self, costs, max_iter, target=None):
        """Primal simplex on the current basis. Returns 'optimal' or 'unbounded'."""
        bland = False
        degenerate_run = 0
        retried = False
        for _ in range(max_iter):
            if self.since_refactor >= REFACTOR_EVERY:
                self.refactor()
            else:
                self.update_beta()
            if target is not None and costs @ self.values() <= target:
                return "optimal"
            d = costs - (costs[self.basis] @ self.Binv) @ self.A
            movable = ~self.is_basic & (self.upper > 0.0)
            candidates = movable & (
                (~self.at_upper & (d < -OPT_TOL)) | (self.at_upper & (d > OPT_TOL))
            )
            eligible = np.flatnonzero(candidates)
            if eligible.size == 0:
                if self.since_refactor == 0:
                    return "optimal"
                # confirm optimality on a fresh inverse
                self.refactor()
                continue
            if bland:
                j = int(eligible[0])
            else:
                j = int(eligible[np.argmax(np.abs(d[eligible]))])
            sgn = -1.0 if self.at_upper[j] else 1.0
            col = self.Binv @ self.A[:, j]
            alpha = sgn * col

            t_best = self.upper[j]
            leave = -1
            to_upper = False
            beta = np.maximum(self.beta, 0.0)
            ub_basis = self.upper[self.basis]
            dec = alpha > PIVOT_TOL
            inc = (alpha < -PIVOT_TOL) & np.isfinite(ub_basis)
            ratios = np.full(self.rows, np.inf)
            ratios[dec] = beta[dec] / alpha[dec]
            ratios[inc] = np.maximum(ub_basis[inc] - self.beta[inc], 0.0) / (-alpha[inc])
            if self.rows and np.isfinite(ratios).any():
                t_min = ratios.min()
                if t_min < t_best:
                    ties = np.flatnonzero(ratios <= t_min + PIVOT_TOL)
                    if bland:
                        r = int(ties[np.argmin(self.basis[ties])])
                    else:
                        r = int(ties[np.argmax(np.abs(alpha[ties]))])
                    t_best = t_min
                    leave = r
                    to_upper = bool(inc[r])

            if not np.isfinite(t_best):
                weak = (np.abs(alpha) > TINY_PIVOT) & (np.abs(alpha) <= PIVOT_TOL)
                if weak.any():
                    if retried:
                        raise NumericalBreakdown(
                            f"Only tiny pivots ({np.abs(alpha[weak]).max():.3e}) block column {j}"
                        )
                    retried = True
                    self.refactor()
                    continue
                return "unbounded"

            retried = False
            if t_best <= 1e-12:
                degenerate_run += 1
                if degenerate_run >= BLAND_AFTER and not bland:
                    logger.debug("Switching to Bland's rule after %d degenerate pivots", degenerate_run)
                    bland = True
            else:
                degenerate_run = 0

            if leave < 0:
                self.at_upper[j] = not self.at_upper[j]
                continue
            leaving = self.pivot(leave, j, col)
            self.at_upper[leaving] = to_upper
        raise NumericalBreakdown(f"Simplex exceeded {max_iter} iterations")

    def dump(self, label):
        logger.debug(
            "%s basis inverse (basis=%s):\n%s\nbeta=%s",
            label,
            self.basis.tolist(),
            np.array2string(self.Binv, precision=4, suppress_small=True),
            np.array2string(self.beta, precision=6),
        )


def solve_lp(p: LpProblem, debug=False) -> LpSolution:
    """Solve a minimization LP with the two-phase bounded primal simplex.

    Artificials left basic at zero after phase I stay in the basis with
    their upper bound set to zero, which also covers redundant rows.
    """
    debug = debug or DEBUG_DUMP
    m, n = p.num_rows, p.num_vars
    lower = p.lower
    upper = p.upper - lower
    rhs = p.rhs - p.matrix @ lower
    scale = 1.0 + (np.abs(rhs).max() if m else 0.0)

    nonempty = np.any(p.matrix != 0.0, axis=1) if m else np.zeros(0, dtype=bool)
    for i in np.flatnonzero(~nonempty):
        rel, val = p.relations[i], rhs[i]
        if (rel == LE and val < -FEAS_TOL) or (rel == GE and val > FEAS_TOL) or (
            rel == EQ and abs(val) > FEAS_TOL
        ):
            return LpSolution(LpStatus.INFEASIBLE)
    kept = np.flatnonzero(nonempty)

    signs = np.where(rhs[kept] < 0, -1.0, 1.0)
    row_signs = np.ones(m)
    row_signs[kept] = signs
    A_rows = p.matrix[kept] * signs[:, None]
    b = rhs[kept] * signs
    relations = []
    for k, i in enumerate(kept):
        rel = p.relations[i]
        if signs[k] < 0 and rel != EQ:
            rel = GE if rel == LE else LE
        relations.append(rel)

    mk = len(kept)
    slack_cols = []
    art_rows = []
    for k, rel in enumerate(relations):
        if rel == LE:
            slack_cols.append((k, 1.0))
        elif rel == GE:
            slack_cols.append((k, -1.0))
            art_rows.append(k)
        else:
            art_rows.append(k)
    n_slack = len(slack_cols)
    n_art = len(art_rows)
    N = n + n_slack + n_art
    first_art = n + n_slack
    A = np.zeros((mk, N))
    A[:, :n] = A_rows
    basis = [-1] * mk
    for s, (k, coef) in enumerate(slack_cols):
        A[k, n + s] = coef
        if coef > 0:
            basis[k] = n + s
    for a, k in enumerate(art_rows):
        A[k, first_art + a] = 1.0
        basis[k] = first_art + a
    col_upper = np.concatenate([upper, np.full(n_slack + n_art, np.inf)])

    tab = _Tableau(A, b, col_upper, basis)
    max_iter = 50 * (mk + N) + 100

    if n_art:
        phase1_costs = np.zeros(N)
        phase1_costs[first_art:] = 1.0
        tab.run(phase1_costs, max_iter, target=FEAS_TOL * scale * 1e-3)
        tab.refactor()
        if debug:
            tab.dump("phase I")
        infeasibility = float(phase1_costs @ tab.values())
        if infeasibility > FEAS_TOL * scale:
            logger.debug("LP infeasible: phase I residual %.3e", infeasibility)
            return LpSolution(LpStatus.INFEASIBLE, iterations=tab.pivots)
        stuck = int(np.count_nonzero(tab.basis >= first_art))
        if stuck:
            logger.debug("%d artificial(s) stay basic at zero", stuck)
        tab.upper[first_art:] = 0.0
        tab.at_upper[first_art:] = False

    costs = np.concatenate([p.costs, np.zeros(N - n)])
    outcome = tab.run(costs, max_iter)
    if outcome == "unbounded":
        return LpSolution(LpStatus.UNBOUNDED, iterations=tab.pivots)
    tab.refactor()
    if debug:
        tab.dump("phase II")

    x = np.clip(tab.values()[:n], 0.0, upper) + lower
    _check_residuals(p, x)

    duals = np.zeros(m)
    if mk:
        duals[kept] = row_signs[kept] * (costs[tab.basis] @ tab.Binv)
    reduced = p.costs - p.matrix.T @ duals
    finite_upper = np.where(np.isfinite(p.upper), p.upper, 0.0)
    bound_terms = np.where(reduced > 0, p.lower * reduced, 0.0) + np.where(
        reduced < 0, finite_upper * reduced, 0.0
    )
    dual_objective = float(p.rhs @ duals + bound_terms.sum())
    objective = float(p.costs @ x)
    return LpSolution(
        LpStatus.OPTIMAL,
        x=x,
        objective=objective,
        duals=duals,
        reduced_costs=reduced,
        dual_objective=dual_objective,
        iterations=tab.pivots,
    )


def _check_residuals(p, x):
    if p.num_rows == 0:
        return
    activity = p.matrix @ x
    tol = RESIDUAL_TOL * (1.0 + np.abs(p.rhs).max())
    for i, rel in enumerate(p.relations):
        gap = activity[i] - p.rhs[i]
        if (rel == LE and gap > tol) or (rel == GE and gap < -tol) or (rel == EQ and abs(gap) > tol):
            raise NumericalBreakdown(
                f"Row {p.row_names[i] if p.row_names else i} violated by {gap:.3e} after solve"
            )
