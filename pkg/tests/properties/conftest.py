"""Seeded generators shared by the randomized property suites.

Every suite is marked slow and pinned to one xdist group so that
``python run_tests.py properties`` spreads suites, not seeds, over workers.
"""

import itertools

import numpy as np
import pytest

from ifdp.errors import PreconditionViolated
from ifdp.reduction import Formula, check_preconditions
from tests.conftest import make_instance


def seeds(count, group):
    """Parametrize over seeds 0..count-1, all on the xdist worker for group."""
    return pytest.mark.parametrize(
        "seed",
        [pytest.param(s, marks=pytest.mark.xdist_group(name=group)) for s in range(count)],
    )


def random_instance(seed):
    """3-4 node ring with chords, 2-3 flows, small integer capacities.

    Sized to stay under the default oracle caps.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 5))
    ring = [(i, (i + 1) % n) for i in range(n)]
    chords = [p for p in itertools.permutations(range(n), 2) if p not in ring]
    picked = rng.choice(len(chords), size=int(rng.integers(0, 3)), replace=False)
    arcs = [(i, j, float(rng.choice([1, 1, 2]))) for i, j in ring + [chords[k] for k in picked]]

    flows = []
    for _ in range(int(rng.integers(2, 4))):
        o, d = (int(v) for v in rng.choice(n, size=2, replace=False))
        flows.append((o, d, float(rng.choice([0.5, 1.0, 1.5, 2.0])), None))
    base = make_instance(n, arcs, flows)

    with_deadlines = []
    for e, (o, d, size, _) in enumerate(flows):
        deadline = None
        if rng.random() >= 0.3:
            earliest = base.earliest_completion(base.deadline_order[e])
            deadline = round(float(rng.uniform(1.0, 3.0)) * earliest, 3)
        with_deadlines.append((o, d, size, deadline))
    return make_instance(n, arcs, with_deadlines)


def bottleneck_instance(seed):
    """Sources feed a hub whose single arc to the sink every flow must cross."""
    rng = np.random.default_rng(seed)
    sources = int(rng.integers(1, 4))
    hub, sink = sources, sources + 1
    cap = float(rng.integers(1, 4))
    arcs = [(s, hub, cap) for s in range(sources)] + [(hub, sink, cap)]
    flows = []
    clock = 0.0
    for _ in range(int(rng.integers(2, 5))):
        size = float(rng.integers(1, 5))
        clock += size / cap
        deadline = round(clock * float(rng.uniform(0.8, 1.6)), 3)
        flows.append((int(rng.integers(0, sources)), sink, size, deadline))
    return make_instance(sink + 1, arcs, flows)


def random_formula(seed):
    """A formula accepted by the reduction.

    Even seeds draw clauses over four variables; odd seeds relabel and
    flip the all-signs formula on three variables, dropping one clause
    for every other odd seed so both outcomes appear.
    """
    rng = np.random.default_rng(seed)
    if seed % 2 == 1:
        flips = rng.choice([1, -1], size=3)
        order = rng.permutation(3)
        clauses = [
            tuple(int(flips[v] * s * (order[v] + 1)) for v, s in enumerate(signs))
            for signs in itertools.product((1, -1), repeat=3)
        ]
        rng.shuffle(clauses)
        if seed % 4 == 3:
            clauses = clauses[:-1]
        return Formula(3, tuple(clauses))
    for _ in range(1000):
        clauses = []
        for _ in range(int(rng.integers(4, 7))):
            variables = rng.choice(4, size=3, replace=False) + 1
            clauses.append(tuple(int(v * rng.choice([1, -1])) for v in variables))
        formula = Formula(4, tuple(clauses))
        try:
            check_preconditions(formula)
        except PreconditionViolated:
            continue
        return formula
    raise RuntimeError(f"no admissible formula for seed {seed}")
