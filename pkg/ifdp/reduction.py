"""3-SAT formulas and their reduction to IFDP instances.

Literals use the DIMACS convention: variable i (1-based) is ``i`` and its
negation ``-i``. The reduced instance is feasible with completion time at
most 1 exactly when the formula is satisfiable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from ifdp.errors import ParseError, PreconditionViolated
from ifdp.model import Arc, Flow, Network, normalize


@dataclass(frozen=True)
class Formula:
    num_vars: int
    clauses: tuple

    def __post_init__(self):
        clauses = tuple(tuple(int(lit) for lit in clause) for clause in self.clauses)
        for clause in clauses:
            for lit in clause:
                if lit == 0 or abs(lit) > self.num_vars:
                    raise ValueError(f"Literal {lit} outside variables 1..{self.num_vars}")
        object.__setattr__(self, "clauses", clauses)

    def satisfied_by(self, assignment):
        """assignment[i] is the value of variable i + 1."""
        return all(
            any(assignment[abs(lit) - 1] == (lit > 0) for lit in clause)
            for clause in self.clauses
        )


def read_dimacs(text) -> Formula:
    """Parse DIMACS CNF text."""
    header = None
    clauses = []
    current = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("%"):
            break
        if line.startswith("p"):
            parts = line.split()
            if header is not None:
                raise ParseError("duplicate problem line", line=lineno)
            if len(parts) != 4 or parts[1] != "cnf":
                raise ParseError(f"expected 'p cnf <vars> <clauses>', got {line!r}", line=lineno)
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise ParseError(f"non-integer counts in {line!r}", line=lineno) from None
            continue
        if header is None:
            raise ParseError("clause before the problem line", line=lineno)
        for token in line.split():
            try:
                lit = int(token)
            except ValueError:
                raise ParseError(f"invalid literal {token!r}", line=lineno) from None
            if abs(lit) > header[0]:
                raise ParseError(f"literal {lit} exceeds {header[0]} variables", line=lineno)
            if lit == 0:
                clauses.append(tuple(current))
                current = []
            else:
                current.append(lit)
    if header is None:
        raise ParseError("missing problem line")
    if current:
        clauses.append(tuple(current))
    if len(clauses) != header[1]:
        raise ParseError(f"header declares {header[1]} clauses, found {len(clauses)}")
    return Formula(header[0], tuple(clauses))


def brute_force_sat(formula: Formula):
    """Return a satisfying assignment (tuple of bools) or None."""
    for assignment in itertools.product((False, True), repeat=formula.num_vars):
        if formula.satisfied_by(assignment):
            return assignment
    return None


def check_preconditions(formula: Formula):
    k = len(formula.clauses)
    problems = []
    for j, clause in enumerate(formula.clauses):
        if len(clause) != 3 or len(set(clause)) != 3:
            problems.append(f"clause {j} must have three distinct literals: {clause}")
        if any(-lit in clause for lit in clause):
            problems.append(f"clause {j} contains a variable and its negation: {clause}")
    for var in range(1, formula.num_vars + 1):
        for lit in (var, -var):
            count = sum(lit in clause for clause in formula.clauses)
            if not 1 <= count <= k - 1:
                problems.append(f"literal {lit} appears {count} time(s); needs 1..{k - 1}")
    if problems:
        raise PreconditionViolated("; ".join(problems))


class _Builder:
    def __init__(self):
        self.nodes = 0
        self.arcs = []

    def node(self):
        self.nodes += 1
        return self.nodes - 1

    def arc(self, tail, head):
        self.arcs.append(Arc(tail, head, 1.0))
        return tail, head


def reduce_3sat(formula: Formula):
    """Build the IFDP instance for formula: unit capacities, sizes and deadlines.

    Literal flow i has two paths sharing the arc (o, e). The positive path
    continues through one arc per occurrence of x_i and ends at d; the
    negative path does the same for not-x_i and reaches d through one extra
    connector node. Clause flow j has three paths o_j -> e_j -> (start of an
    occurrence arc) -> (end of it) -> d_j, one per literal of the clause.
    """
    check_preconditions(formula)
    b = _Builder()
    flows = []
    occurrence = {}
    for var in range(1, formula.num_vars + 1):
        origin, entry, dest = b.node(), b.node(), b.node()
        b.arc(origin, entry)
        for lit in (var, -var):
            clauses = [j for j, clause in enumerate(formula.clauses) if lit in clause]
            inner = [b.node() for _ in range(len(clauses) - 1)]
            last = dest
            if lit < 0:
                last = b.node()
            path = [entry] + inner + [last]
            for j, (tail, head) in zip(clauses, zip(path, path[1:])):
                occurrence[(j, lit)] = b.arc(tail, head)
            if lit < 0:
                b.arc(last, dest)
        flows.append(Flow(origin, dest, 1.0, 1.0))
    for j, clause in enumerate(formula.clauses):
        origin, entry, dest = b.node(), b.node(), b.node()
        b.arc(origin, entry)
        for lit in clause:
            tail, head = occurrence[(j, lit)]
            b.arc(entry, tail)
            b.arc(head, dest)
        flows.append(Flow(origin, dest, 1.0, 1.0))
    network = Network(node_count=b.nodes, arcs=tuple(b.arcs), units=(1.0,))
    return normalize(network, flows)
