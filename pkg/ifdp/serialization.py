"""Instance and schedule files.

Both formats are UTF-8 JSON documents with a fixed schema; unknown keys are
rejected.

Instance::

    {
      "description": "optional free text",
      "nodes": 3,
      "arcs": [{"i": 0, "j": 1, "cap": 1.0}],
      "units": [1.0],
      "flows": [{"origin": 0, "destination": 2, "size": 0.5, "deadline": 1.0}]
    }

Node ids are 0-based. ``deadline`` may be null (no deadline).

Schedule::

    {"segments": [{"duration": 0.5,
                   "rates": [1.0, 0.0, 0.0],
                   "allocation": [{"flow": 0, "i": 0, "j": 1, "unit_index": 0, "count": 1}]}]}

Rates and allocation flow ids use the instance's input order. Per-arc rates
are not stored; they are re-derived on read by routing each flow's rate
over its allocated capacity.
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping

from ifdp.errors import ParseError
from ifdp.graphs import route_flow
from ifdp.model import RateVector, Schedule, Segment, validate_instance


_INSTANCE_KEYS = {"description", "nodes", "arcs", "units", "flows"}
_ARC_KEYS = {"i", "j", "cap"}
_FLOW_KEYS = {"origin", "destination", "size", "deadline"}
_SCHEDULE_KEYS = {"segments"}
_SEGMENT_KEYS = {"duration", "rates", "allocation"}
_ALLOCATION_KEYS = {"flow", "i", "j", "unit_index", "count"}


def _load_json(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc


def _check_keys(obj, allowed, where, required=()):
    if not isinstance(obj, Mapping):
        raise ParseError(f"expected an object, got {type(obj).__name__}", field=where or "<root>")
    for key in obj:
        if key not in allowed:
            raise ParseError("unknown field", field=f"{where}.{key}" if where else key)
    for key in required:
        if key not in obj:
            raise ParseError("missing field", field=f"{where}.{key}" if where else key)


def instance_to_dict(inst, description=None):
    doc = {}
    if description:
        doc["description"] = description
    doc["nodes"] = inst.network.node_count
    doc["arcs"] = [{"i": a.tail, "j": a.head, "cap": a.capacity} for a in inst.network.arcs]
    doc["units"] = list(inst.network.units)
    doc["flows"] = [
        {
            "origin": fl.origin,
            "destination": fl.destination,
            "size": fl.size,
            "deadline": fl.deadline if fl.bounded else None,
        }
        for fl in inst.flows
    ]
    return doc


def loads_instance(text):
    doc = _load_json(text)
    _check_keys(doc, _INSTANCE_KEYS, "", required=("nodes", "arcs", "units", "flows"))
    for k, arc in enumerate(doc.get("arcs") or []):
        _check_keys(arc, _ARC_KEYS, f"arcs[{k}]", required=("i", "j", "cap"))
    for k, fl in enumerate(doc.get("flows") or []):
        _check_keys(fl, _FLOW_KEYS, f"flows[{k}]", required=("origin", "destination", "size"))
    return validate_instance(doc)


def dumps_instance(inst, description=None):
    return json.dumps(instance_to_dict(inst, description), indent=2) + "\n"


def read_instance(path):
    with open(path, encoding="utf-8") as f:
        return loads_instance(f.read())


def write_instance(inst, path, description=None):
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps_instance(inst, description))


def schedule_to_dict(inst, sched):
    network = inst.network
    segments = []
    for seg in sched.segments:
        rates = [0.0] * inst.flow_count
        for f, r in enumerate(seg.vector.rates):
            rates[inst.external_index(f)] = r
        allocation = []
        for f, a, m, count in seg.vector.allocation:
            arc = network.arcs[a]
            allocation.append({
                "flow": inst.external_index(f),
                "i": arc.tail,
                "j": arc.head,
                "unit_index": m,
                "count": int(count) if float(count).is_integer() else count,
            })
        segments.append({"duration": seg.duration, "rates": rates, "allocation": allocation})
    return {"segments": segments}


def dumps_schedule(inst, sched):
    return json.dumps(schedule_to_dict(inst, sched), indent=2) + "\n"


def loads_schedule(text, inst):
    """Parse a schedule for inst, mapping input-order flow ids to internal ones."""
    doc = _load_json(text)
    _check_keys(doc, _SCHEDULE_KEYS, "", required=("segments",))
    if not isinstance(doc["segments"], list):
        raise ParseError("expected a list", field="segments")
    F = inst.flow_count
    segments = []
    for k, seg in enumerate(doc["segments"]):
        where = f"segments[{k}]"
        _check_keys(seg, _SEGMENT_KEYS, where, required=("duration", "rates"))
        duration = _number(seg["duration"], f"{where}.duration")
        raw_rates = seg["rates"]
        if not isinstance(raw_rates, list) or len(raw_rates) != F:
            raise ParseError(f"expected {F} rates", field=f"{where}.rates")
        rates = [0.0] * F
        for e, r in enumerate(raw_rates):
            rates[inst.deadline_order[e]] = _number(r, f"{where}.rates[{e}]")
        allocation = []
        for n, entry in enumerate(seg.get("allocation", [])):
            loc = f"{where}.allocation[{n}]"
            _check_keys(entry, _ALLOCATION_KEYS, loc, required=tuple(sorted(_ALLOCATION_KEYS)))
            e = entry["flow"]
            if not isinstance(e, int) or not 0 <= e < F:
                raise ParseError(f"flow id {e!r} out of range", field=f"{loc}.flow")
            a = inst.network.arc_index.get((entry["i"], entry["j"]))
            if a is None:
                raise ParseError(f"no arc ({entry['i']},{entry['j']})", field=loc)
            m = entry["unit_index"]
            if not isinstance(m, int) or not 0 <= m < len(inst.network.units):
                raise ParseError(f"unit index {m!r} out of range", field=f"{loc}.unit_index")
            count = _number(entry["count"], f"{loc}.count")
            allocation.append((inst.deadline_order[e], a, m, count))
        arc_rates = _route_segment(inst, rates, allocation)
        vector = RateVector(tuple(rates), tuple(allocation), arc_rates)
        segments.append(Segment(vector, duration))
    return Schedule(tuple(segments))


def _number(value, field):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ParseError(f"expected a finite number, got {value!r}", field=field)
    return float(value) if isinstance(value, float) else value


def _route_segment(inst, rates, allocation):
    units = inst.network.units
    arc_rates = []
    for f, r in enumerate(rates):
        if r <= 0:
            continue
        capacities = {}
        for g, a, m, count in allocation:
            if g == f:
                capacities[a] = capacities.get(a, 0.0) + units[m] * count
        fl = inst.flow(f)
        routed = route_flow(inst.network, fl.origin, fl.destination, capacities, r)
        if routed is None:
            continue
        arc_rates.extend((f, a, y) for a, y in sorted(routed.items()))
    return tuple(arc_rates)


def read_schedule(path, inst):
    with open(path, encoding="utf-8") as f:
        return loads_schedule(f.read(), inst)


def write_schedule(inst, sched, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps_schedule(inst, sched))
