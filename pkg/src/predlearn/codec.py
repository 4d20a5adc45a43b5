"""Binding codec: propositions -> slot schedules -> firing traces -> propositions.

Each role-filler set gets its own slot(s) in one cycle. In PHASE_LAG_1 the
predicate is driven for one slot and its argument for the next; in
PHASE_LAG_0 both share one slot. The RB is driven across its role's slots
and the P unit across all slots of its roles.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict, fields
from enum import Enum

import numpy as np

from .errors import (AmbiguousTrace, CapacityExceeded, ParseError, SchemaError, UnknownUnit,
                     ValidationError)
from .network import FORMAT_VERSION, Layer, Network, PO_LAYERS, Proposition, Role, check_version
from .oscillation import FiringTrace, unit_bursts


class Mode(str, Enum):
    PHASE_LAG_1 = "PHASE_LAG_1"
    PHASE_LAG_0 = "PHASE_LAG_0"


@dataclass
class CodecParams:
    mode: Mode = Mode.PHASE_LAG_1
    slot_width: int = 10
    gap: int = 0          # steps between a predicate slot and its argument slot
    rest: int = 0         # undriven steps after each role-filler set
    k_max: int = 4
    amplitude: float = 1.0

    def __post_init__(self):
        try:
            self.mode = Mode(self.mode)
        except ValueError:
            raise ValidationError(f"codec.mode must be one of {[m.value for m in Mode]}") from None
        for name, lo in (("slot_width", 1), ("gap", 0), ("rest", 0), ("k_max", 1)):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < lo:
                raise ValidationError(f"codec.{name} must be an integer >= {lo}")
            setattr(self, name, int(v))
        if not 0.0 < self.amplitude <= 1.0:
            raise ValidationError("codec.amplitude must lie in (0, 1]")

    def to_dict(self):
        d = asdict(self)
        d["mode"] = self.mode.value
        return d

    @classmethod
    def from_dict(cls, d):
        extra = set(d) - {f.name for f in fields(cls)}
        if extra:
            raise SchemaError(f"unknown parameter(s) {sorted(extra)}", "codec")
        return cls(**d)


@dataclass
class FiringSchedule:
    mode: Mode
    intervals: dict = field(default_factory=dict)   # unit id -> [(start, end)], end exclusive
    amplitude: float = 1.0

    def __post_init__(self):
        self.mode = Mode(self.mode)
        for u, ivs in self.intervals.items():
            ivs = [tuple(int(x) for x in iv) for iv in ivs]
            last = -1
            for s, e in ivs:
                if s < 0 or e <= s or s < last:
                    raise ValidationError(f"intervals of {u!r} must be ordered, non-empty and disjoint")
                last = e
            self.intervals[u] = ivs

    @property
    def horizon(self):
        return max((ivs[-1][1] for ivs in self.intervals.values() if ivs), default=0)

    def drive_matrix(self, index, n_steps):
        D = np.zeros((n_steps, len(index)))
        for u, ivs in self.intervals.items():
            if u not in index:
                raise UnknownUnit(f"schedule references unknown unit {u!r}")
            for s, e in ivs:
                D[s:e, index[u]] = self.amplitude
        return D

    def to_dict(self):
        return {"format_version": FORMAT_VERSION, "mode": self.mode.value,
                "amplitude": self.amplitude,
                "intervals": {u: [list(iv) for iv in ivs] for u, ivs in self.intervals.items()}}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        check_version(d)
        try:
            return cls(d["mode"], {u: [tuple(iv) for iv in ivs] for u, ivs in d["intervals"].items()},
                       float(d.get("amplitude", 1.0)))
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"malformed schedule ({e!r})") from None

    @classmethod
    def from_json(cls, text):
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise ParseError(str(e)) from None


def encode(propositions, mode=Mode.PHASE_LAG_1, cycle_params: CodecParams | None = None):
    """Slot schedule for one cycle, slots assigned in role order.

    A unit may appear in only one role of one schedule; a shared unit would
    have to fire in two slots and the trace could not say which binding a
    burst belongs to.
    """
    cp = cycle_params or CodecParams(mode=mode)
    mode = Mode(mode)
    props = list(propositions)
    n_roles = sum(len(p.roles) for p in props)
    if n_roles > cp.k_max:
        raise CapacityExceeded(f"{n_roles} role-filler sets exceed k_max={cp.k_max}")
    w, iv, t = cp.slot_width, {}, 0

    def put(u, s, e):
        if u in iv:
            raise ValidationError(f"unit {u!r} appears in more than one role of the schedule")
        iv[u] = [(s, e)]

    for p in props:
        if not p.roles:
            raise ValidationError(f"proposition {p.p_unit!r} has no roles")
        t0 = t
        for r in p.roles:
            if r.predicate == r.argument:
                raise ValidationError(f"role {r.rb_unit!r} binds {r.predicate!r} to itself")
            if mode is Mode.PHASE_LAG_1:
                put(r.predicate, t, t + w)
                put(r.argument, t + w + cp.gap, t + 2 * w + cp.gap)
                put(r.rb_unit, t, t + 2 * w + cp.gap)
                t += 2 * w + cp.gap + cp.rest
            else:
                put(r.predicate, t, t + w)
                put(r.argument, t, t + w)
                put(r.rb_unit, t, t + w)
                t += w + cp.rest
        put(p.p_unit, t0, t - cp.rest)
    return FiringSchedule(mode, iv, cp.amplitude)


def _rb_for(net: Network, pred, arg):
    a = set(net.structural_neighbors(pred, Layer.RB))
    both = [u for u in net.structural_neighbors(arg, Layer.RB) if u in a]
    return both[0] if len(both) == 1 else ""


def decode(trace: FiringTrace, network: Network, mode=Mode.PHASE_LAG_1,
           cycle_params: CodecParams | None = None, bank=None, threshold=None):
    """Recover propositions from the bursts in a trace.

    PHASE_LAG_1: PO bursts are taken in onset order and paired; the first of
    a pair is the predicate and must peak before the second (the argument),
    within two slot widths. PHASE_LAG_0: PO bursts whose peaks lie within one
    step form a role-filler set of exactly one PO_PRED and one PO_OBJ unit.
    Each role then goes to the overlapping P burst with the latest onset.
    """
    cp = cycle_params or CodecParams(mode=mode)
    mode = Mode(mode)
    th = network.params.activation_threshold if threshold is None else threshold
    po, pb = [], []
    for i, u in enumerate(trace.unit_ids):
        t = network.tokens.get(u)
        if t is None or (bank is not None and t.bank != bank):
            continue
        if t.is_po:
            po.extend((b, i) for b in unit_bursts(trace, u, th))
        elif t.layer is Layer.P:
            pb.extend(unit_bursts(trace, u, th))
    po = [b for b, _ in sorted(po, key=lambda x: (x[0].start, x[0].peak, x[1]))]

    roles = []   # (start, end, predicate, argument)
    if mode is Mode.PHASE_LAG_1:
        if len(po) % 2 and po[-1].start >= trace.n_steps - 2 * cp.slot_width - cp.gap:
            po = po[:-1]    # its partner would fall past the end of the trace
        if len(po) % 2:
            raise AmbiguousTrace(f"{len(po)} PO bursts cannot be paired into roles",
                                 [b.start for b in po])
        for a, b in zip(po[0::2], po[1::2]):
            if not 0 < b.peak - a.peak <= 2 * cp.slot_width + cp.gap:
                raise AmbiguousTrace(f"bursts of {a.unit!r} and {b.unit!r} are not in direct sequence",
                                     [a.peak, b.peak])
            roles.append((a.start, b.end, a.unit, b.unit))
    else:
        i = 0
        while i < len(po):
            j = i + 1
            while j < len(po) and abs(po[j].peak - po[i].peak) <= 1:
                j += 1
            cl = po[i:j]
            i = j
            preds = [b for b in cl if network.tokens[b.unit].layer is Layer.PO_PRED]
            objs = [b for b in cl if network.tokens[b.unit].layer is Layer.PO_OBJ]
            if len(cl) != 2 or len(preds) != 1 or len(objs) != 1:
                raise AmbiguousTrace(f"synchronous cluster {[b.unit for b in cl]} is not one "
                                     "predicate plus one object", [b.peak for b in cl])
            a, b = preds[0], objs[0]
            roles.append((min(a.start, b.start), max(a.end, b.end), a.unit, b.unit))

    props = []
    for s, e, pred, arg in roles:
        # the proposition whose P unit came on most recently, while the role was on
        cand = [p for p in pb if p.start <= e and p.end >= s]
        if not cand:
            raise AmbiguousTrace(f"role ({pred}, {arg}) overlaps no proposition burst", [s, e])
        last = max(p.start for p in cand)
        cand = [p for p in cand if p.start == last]
        if len(cand) > 1:
            raise AmbiguousTrace(f"role ({pred}, {arg}) starts two proposition bursts at once", [s, e])
        p_unit = cand[0].unit
        role = Role(_rb_for(network, pred, arg), pred, arg)
        if props and props[-1].p_unit == p_unit:
            if role not in props[-1].roles:   # the same role again in a later cycle
                props[-1].roles.append(role)
        else:
            props.append(Proposition(p_unit, [role]))
    return props


def roundtrip(network: Network, propositions, cycle_params: CodecParams | None = None,
              backend=None, bank=None):
    """decode(run(encode(S))) on a copy of the network (state reset first)."""
    from .oscillation import run
    cp = cycle_params or CodecParams()
    sched = encode(propositions, cp.mode, cp)
    if sched.horizon == 0:
        return []
    net = network.copy()
    net.reset_state()
    trace, _ = run(net, sched, sched.horizon, sync=cp.mode is Mode.PHASE_LAG_0, backend=backend)
    return decode(trace, net, cp.mode, cp, bank=bank)
