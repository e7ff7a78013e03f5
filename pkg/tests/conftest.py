import pytest

from ifdp.model import validate_instance


def make_instance(nodes, arcs, flows, units=(1.0,), cap=1.0):
    """arcs: (i, j) or (i, j, cap); flows: (origin, destination, size, deadline or None)."""
    return validate_instance({
        "nodes": nodes,
        "arcs": [
            {"i": a[0], "j": a[1], "cap": a[2] if len(a) > 2 else cap} for a in arcs
        ],
        "units": list(units),
        "flows": [
            {"origin": o, "destination": d, "size": s, "deadline": t} for o, d, s, t in flows
        ],
    })


TRIANGLE_ARCS = [(0, 1), (1, 2), (2, 0)]
TRIANGLE_FLOWS = [(0, 2, 0.5, 1.0), (1, 0, 1.5, 2.0), (2, 1, 1.0, 3.0)]


@pytest.fixture
def triangle():
    return make_instance(3, TRIANGLE_ARCS, TRIANGLE_FLOWS)


@pytest.fixture
def triangle_tight_a():
    flows = [(0, 2, 0.5, 0.4)] + TRIANGLE_FLOWS[1:]
    return make_instance(3, TRIANGLE_ARCS, flows)


@pytest.fixture
def star():
    return make_instance(
        5,
        [(0, 3), (1, 3), (2, 3), (3, 4)],
        [(0, 4, 1.0, 1.0), (1, 4, 1.0, 2.0), (2, 4, 1.0, 3.0), (1, 3, 2.0, 3.0)],
    )


@pytest.fixture
def edf_pair():
    return make_instance(2, [(0, 1)], [(0, 1, 1.0, 1.0), (0, 1, 2.0, 3.0)])


@pytest.fixture
def edf_missed():
    return make_instance(2, [(0, 1)], [(0, 1, 1.0, 1.0), (0, 1, 2.0, 2.0)])


@pytest.fixture
def single_arc():
    """One arc of capacity 2, unit 1, one unbounded flow of size 3."""
    return make_instance(2, [(0, 1, 2.0)], [(0, 1, 3.0, None)])


@pytest.fixture
def disjoint_pair():
    """Two flows on separate arcs; the short one has a tight deadline."""
    return make_instance(4, [(0, 1), (2, 3)], [(0, 1, 1.0, 1.0), (2, 3, 10.0, 10.0)])
