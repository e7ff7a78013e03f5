"""networkx views of a Network: reachability pruning, routing and cuts."""

from __future__ import annotations

from functools import lru_cache

import networkx as nx

from ifdp.model import ROUTE_TOL


_SOURCE = "source"


def usable_arcs(network, integral=True):
    """Arc indices that can carry any rate (at least one whole unit when integral)."""
    if integral:
        return tuple(k for k in range(len(network.arcs)) if network.max_units(k, 0) >= 1)
    return tuple(k for k, a in enumerate(network.arcs) if a.capacity > 0)


def network_graph(network, arcs=None, integral=True):
    """Directed graph over the given (default: usable) arcs; edges keep their arc index."""
    graph = nx.DiGraph()
    graph.add_nodes_from(range(network.node_count))
    for k in usable_arcs(network, integral) if arcs is None else arcs:
        a = network.arcs[k]
        graph.add_edge(a.tail, a.head, index=k, capacity=a.capacity)
    return graph


@lru_cache(maxsize=4096)
def relevant_arcs(inst, f, integral=True):
    """Arcs that lie on some origin-to-destination walk of internal flow f.

    An arc (i, j) is kept when i is reachable from the origin, the
    destination is reachable from j, and the arc neither enters the origin
    nor leaves the destination.
    """
    fl = inst.flow(f)
    graph = network_graph(inst.network, integral=integral)
    forward = nx.descendants(graph, fl.origin) | {fl.origin}
    if fl.destination not in forward:
        return ()
    backward = nx.ancestors(graph, fl.destination) | {fl.destination}
    kept = []
    for i, j, data in graph.edges(data=True):
        if i in forward and j in backward and j != fl.origin and i != fl.destination:
            kept.append(data["index"])
    return tuple(sorted(kept))


def reachable(network, origin, destination, integral=True):
    return nx.has_path(network_graph(network, integral=integral), origin, destination)


def _capacity_graph(network, capacities):
    graph = nx.DiGraph()
    graph.add_nodes_from(range(network.node_count))
    for k, cap in capacities.items():
        if cap > 0:
            a = network.arcs[k]
            graph.add_edge(a.tail, a.head, capacity=float(cap), index=k)
    return graph


def max_flow_value(network, origin, destination, capacities):
    """Max origin-to-destination flow over arcs with the given {arc index: capacity}."""
    graph = _capacity_graph(network, capacities)
    if not graph.has_node(origin) or not graph.has_node(destination):
        return 0.0
    return float(nx.maximum_flow_value(graph, origin, destination))


def route_flow(network, origin, destination, capacities, demand):
    """Route exactly demand units over the capacities; returns {arc index: rate} or None."""
    if demand <= 0:
        return {}
    graph = _capacity_graph(network, capacities)
    graph.add_edge(_SOURCE, origin, capacity=float(demand))
    value, flow = nx.maximum_flow(graph, _SOURCE, destination)
    if value < demand - ROUTE_TOL * max(1.0, demand):
        return None
    routed = {}
    for i, heads in flow.items():
        if i == _SOURCE:
            continue
        for j, y in heads.items():
            if y > 0:
                routed[graph[i][j]["index"]] = float(y)
    return routed


def separating_arcs(network, origin, destination, integral=True):
    """Usable arcs whose removal disconnects destination from origin."""
    graph = network_graph(network, integral=integral)
    if not nx.has_path(graph, origin, destination):
        return set()
    cuts = set()
    for i, j, data in list(graph.edges(data=True)):
        graph.remove_edge(i, j)
        if not nx.has_path(graph, origin, destination):
            cuts.add(data["index"])
        graph.add_edge(i, j, **data)
    return cuts
