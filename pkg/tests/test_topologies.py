import pytest

from ifdp.graphs import reachable
from ifdp.topologies import Topology, get_all, get_by_kind, get_by_name


class TestTopology:
    def test_attributes_stored(self):
        t = Topology(
            name="line",
            kind="example",
            nodes=2,
            arcs=[[0, 1]],
            capacity=3,
            units=[1, 2],
            flows=[{"origin": 0, "destination": 1, "size": 2}],
        )
        assert t.name == "line"
        assert t.arcs == [(0, 1)]
        assert t.capacity == 3.0
        assert t.units == (1.0, 2.0)
        assert t.links == []

    def test_defaults(self):
        t = Topology(name="x", kind="benchmark", nodes=2)
        assert t.flows == []
        assert t.units == (2.0,)
        assert t.capacity == 10.0

    def test_repr(self):
        r = repr(Topology(name="ring", kind="benchmark", nodes=4))
        assert "ring" in r
        assert "benchmark" in r

    def test_eq_same(self):
        assert Topology(name="a", kind="x", nodes=1) == Topology(name="a", kind="y", nodes=2)

    def test_eq_different(self):
        assert Topology(name="a", kind="x", nodes=1) != Topology(name="b", kind="x", nodes=1)

    def test_eq_not_implemented_for_other_types(self):
        t = Topology(name="a", kind="x", nodes=1)
        assert t.__eq__("not-a-topology") is NotImplemented

    def test_links_are_bidirectional(self):
        t = Topology(name="pair", kind="benchmark", nodes=2, links=[[0, 1]])
        assert t.directed_arcs() == [(0, 1), (1, 0)]

    def test_network_overrides(self):
        t = Topology(name="pair", kind="benchmark", nodes=2, links=[[0, 1]])
        network = t.network(capacity=4, units=(2.0, 1.0))
        assert [a.capacity for a in network.arcs] == [4.0, 4.0]
        assert network.units == (1.0, 2.0)

    def test_example_instance_requires_flows(self):
        with pytest.raises(KeyError, match="no bundled flows"):
            Topology(name="x", kind="benchmark", nodes=2).example_instance()


class TestRegistryIntegrity:
    def test_not_empty(self):
        assert len(get_all()) > 0

    def test_unique_names(self):
        names = [t.name for t in get_all()]
        assert len(names) == len(set(names))

    def test_valid_kinds(self):
        for t in get_all():
            assert t.kind in ("benchmark", "example"), f"{t.name} has invalid kind"

    def test_arcs_within_node_range(self):
        for t in get_all():
            for i, j in t.directed_arcs():
                assert 0 <= i < t.nodes and 0 <= j < t.nodes, f"{t.name} arc ({i},{j})"

    def test_no_duplicate_arcs(self):
        for t in get_all():
            arcs = t.directed_arcs()
            assert len(arcs) == len(set(arcs)), f"{t.name} repeats an arc"

    def test_benchmarks_strongly_connected(self):
        for t in get_by_kind("benchmark"):
            network = t.network()
            for d in range(1, t.nodes):
                assert reachable(network, 0, d), f"{t.name}: node {d} unreachable"
                assert reachable(network, d, 0), f"{t.name}: node 0 unreachable from {d}"

    @pytest.mark.parametrize("name, nodes, links", [
        ("small", 6, 8),
        ("softlayer", 11, 17),
        ("geant", 22, 36),
    ])
    def test_benchmark_sizes(self, name, nodes, links):
        t = get_by_name(name)
        assert t.nodes == nodes
        assert len(t.links) == links
        assert t.capacity == 10.0
        assert t.units == (2.0,)


class TestGetAll:
    def test_returns_copy(self):
        a = get_all()
        count = len(a)
        a.append("junk")
        assert len(get_all()) == count


class TestGetByName:
    def test_found(self):
        assert get_by_name("geant").nodes == 22

    def test_case_insensitive(self):
        assert get_by_name("Triangle").name == "triangle"

    def test_not_found_raises_key_error(self):
        with pytest.raises(KeyError, match="no-such-net"):
            get_by_name("no-such-net")

    def test_all_names_retrievable(self):
        for t in get_all():
            assert get_by_name(t.name) == t


class TestGetByKind:
    def test_benchmarks(self):
        assert {t.name for t in get_by_kind("benchmark")} == {"small", "softlayer", "geant"}

    def test_examples(self):
        assert {t.name for t in get_by_kind("example")} == {"triangle", "star"}

    def test_unknown_returns_empty(self):
        assert get_by_kind("mesh") == []


class TestExampleInstances:
    def test_triangle_matches_fixture(self, triangle):
        inst = get_by_name("triangle").example_instance()
        assert inst.flows == triangle.flows
        assert inst.network == triangle.network

    def test_star_matches_fixture(self, star):
        assert get_by_name("star").example_instance().flows == star.flows
