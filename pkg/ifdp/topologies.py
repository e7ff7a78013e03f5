import copy
import json
import os

from ifdp.model import Arc, Flow, Network, UNBOUNDED, normalize


class Topology:
    def __init__(self, name, kind, nodes, links=None, arcs=None, capacity=10.0,
                 units=(2.0,), flows=None, description=""):
        self.name = name
        self.kind = kind
        self.nodes = nodes
        self.links = [tuple(link) for link in links] if links is not None else []
        self.arcs = [tuple(arc) for arc in arcs] if arcs is not None else []
        self.capacity = float(capacity)
        self.units = tuple(float(u) for u in units)
        self.flows = list(flows) if flows is not None else []
        self.description = description

    def __repr__(self):
        return f"Topology(name={self.name!r}, kind={self.kind!r}, nodes={self.nodes})"

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return self.name == other.name

    def directed_arcs(self):
        """Explicit arcs, then both directions of every bidirectional link."""
        pairs = list(self.arcs)
        for i, j in self.links:
            pairs.extend([(i, j), (j, i)])
        return pairs

    def network(self, capacity=None, units=None):
        cap = self.capacity if capacity is None else float(capacity)
        return Network(
            node_count=self.nodes,
            arcs=tuple(Arc(i, j, cap) for i, j in self.directed_arcs()),
            units=tuple(sorted(self.units if units is None else units)),
        )

    def example_instance(self):
        """The bundled flows on this topology. Raises KeyError when there are none."""
        if not self.flows:
            raise KeyError(f"Topology {self.name!r} has no bundled flows")
        flows = [
            Flow(fl["origin"], fl["destination"], float(fl["size"]),
                 UNBOUNDED if fl.get("deadline") is None else float(fl["deadline"]))
            for fl in self.flows
        ]
        return normalize(self.network(), flows)


_REGISTRY_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "topologies.json")


def _load():
    with open(_REGISTRY_PATH, encoding="utf-8") as f:
        raw = json.load(f)
    return [Topology(name=name, **entry) for name, entry in raw.items()]


TOPOLOGIES = _load()


def get_all():
    """Returns a copy of every registered topology."""
    return [copy.copy(t) for t in TOPOLOGIES]


def get_by_name(name):
    """Returns a single Topology by name (case-insensitive). Raises KeyError if not found."""
    for topology in TOPOLOGIES:
        if topology.name == name.lower():
            return topology
    raise KeyError(f"No topology named {name!r}")


def get_by_kind(kind):
    """Filter topologies by kind ('benchmark' or 'example')."""
    return [t for t in TOPOLOGIES if t.kind == kind]
