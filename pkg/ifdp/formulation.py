"""The integer multicommodity rate block shared by every formulation.

A block carries, for a set of flows, end-to-end rates r_f, per-arc rates
y_fa and unit counts z_fam tied together by flow conservation, the
allocation link y <= sum_m u_m z and per-arc capacity. TSA adds one block
per time slice, the column-generation pricing problem and MFA one block
each, and the single-flow maximum rate is a one-flow block.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

from ifdp.graphs import relevant_arcs
from ifdp.lp_engine import EQ, LE, ModelBuilder
from ifdp.mip_engine import MipProblem, MipStatus, solve_mip
from ifdp.model import RATE_TOL, RateVector


logger = logging.getLogger(__name__)


@dataclass
class RateBlock:
    flows: tuple
    rate: dict = field(default_factory=dict)
    arc_rate: dict = field(default_factory=dict)
    units: dict = field(default_factory=dict)


def add_rate_block(builder: ModelBuilder, inst, flows, integral=True, switch=None, tag=""):
    """Add rate variables and rows for flows; returns the block's variable map.

    switch: optional variable index w; capacity rows become sum u z <= c w.
    Continuous blocks use a single unit column bounded by c/u_1.
    """
    network = inst.network
    block = RateBlock(flows=tuple(flows))
    arc_terms = {}
    for f in block.flows:
        arcs = relevant_arcs(inst, f, integral)
        fl = inst.flow(f)
        r = builder.add_var(f"r[{f}]{tag}", upper=None if arcs else 0.0)
        block.rate[f] = r
        if not arcs:
            continue
        node_terms = {}
        for a in arcs:
            arc = network.arcs[a]
            y = builder.add_var(f"y[{f},{arc.tail},{arc.head}]{tag}")
            block.arc_rate[(f, a)] = y
            link = {y: 1.0}
            unit_range = range(len(network.units)) if integral else (0,)
            for m in unit_range:
                u = network.units[m]
                bound = network.max_units(a, m) if integral else arc.capacity / u
                if bound <= 0:
                    continue
                z = builder.add_var(f"z[{f},{arc.tail},{arc.head},{m}]{tag}", upper=bound, integer=integral)
                block.units[(f, a, m)] = z
                link[z] = -u
                arc_terms.setdefault(a, []).append((z, u))
            builder.add_row(link, LE, 0.0, name=f"link[{f},{arc.tail},{arc.head}]{tag}")
            node_terms.setdefault(arc.tail, []).append((y, 1.0))
            node_terms.setdefault(arc.head, []).append((y, -1.0))
        for node, terms in sorted(node_terms.items()):
            row = dict()
            for var, coef in terms:
                row[var] = row.get(var, 0.0) + coef
            if node == fl.origin:
                row[r] = -1.0
            elif node == fl.destination:
                row[r] = 1.0
            builder.add_row(row, EQ, 0.0, name=f"flow[{f},{node}]{tag}")
    for a, terms in sorted(arc_terms.items()):
        row = {z: u for z, u in terms}
        cap = network.arcs[a].capacity
        if switch is None:
            builder.add_row(row, LE, cap, name=f"cap[{a}]{tag}")
        else:
            row[switch] = -cap
            builder.add_row(row, LE, 0.0, name=f"cap[{a}]{tag}")
    return block


def block_vector(inst, block: RateBlock, x, integral=True) -> RateVector:
    """Read a RateVector out of solved values; flows below RATE_TOL are dropped."""
    rates = [0.0] * inst.flow_count
    for f, var in block.rate.items():
        if x[var] > RATE_TOL:
            rates[f] = float(x[var])
    allocation = []
    for (f, a, m), var in sorted(block.units.items()):
        if rates[f] <= 0:
            continue
        count = int(round(x[var])) if integral else float(x[var])
        if count > (0 if integral else 1e-12):
            allocation.append((f, a, m, count))
    arc_rates = []
    for (f, a), var in sorted(block.arc_rate.items()):
        if rates[f] > 0 and x[var] > 1e-12:
            arc_rates.append((f, a, float(x[var])))
    return RateVector(tuple(rates), tuple(allocation), tuple(arc_rates))


@lru_cache(maxsize=1024)
def max_single_flow_vector(inst, f, integral=True) -> RateVector:
    """Rate vector of internal flow f alone at its maximum integer-unit rate."""
    builder = ModelBuilder()
    block = add_rate_block(builder, inst, (f,), integral=integral)
    builder.set_cost(block.rate[f], -1.0)
    if not block.arc_rate:
        return RateVector.zero(inst.flow_count)
    sol = solve_mip(MipProblem.from_builder(builder))
    if sol.status is not MipStatus.OPTIMAL:
        logger.warning("Single-flow rate MIP for flow %d ended %s", f, sol.status.value)
        return RateVector.zero(inst.flow_count)
    return block_vector(inst, block, sol.x, integral=integral)


def max_single_flow_rate(inst, f) -> float:
    """Maximum end-to-end rate of internal flow f with all other flows absent."""
    return max_single_flow_vector(inst, f).rates[f]


def earliest_completion(inst, f) -> float:
    """e_f = s_f / max rate; infinite when the destination is unreachable."""
    rate = max_single_flow_rate(inst, f)
    return inst.flow(f).size / rate if rate > 0 else math.inf
