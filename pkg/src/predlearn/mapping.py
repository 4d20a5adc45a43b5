"""Cross-bank mapping by Hebbian co-activity with divisive normalization."""
from __future__ import annotations

import json

import numpy as np

from .errors import AllZeroHypotheses, ParseError, SchemaError, UnknownUnit
from .network import FORMAT_VERSION, Bank, Kind, Layer, Network, Proposition, check_version
from .oscillation import FiringTrace


class MappingTable:
    """Hypotheses h and weights w for every same-layer (driver, recipient) pair.

    Per layer the pairs form a block: rows are driver units, columns are
    recipient units. h persists across episodes until :meth:`reset`.
    """

    def __init__(self, blocks=None):
        # layer -> (driver ids, recipient ids, h, w)
        self.blocks = {}
        for layer, (d, r) in (blocks or {}).items():
            self.blocks[Layer(layer)] = (list(d), list(r), np.zeros((len(d), len(r))),
                                         np.zeros((len(d), len(r))))

    @classmethod
    def from_network(cls, net: Network, driver=Bank.DRIVER, recipient=Bank.RECIPIENT):
        blocks = {}
        for layer in Layer:
            d = [t.id for t in net.tokens_where(layer=layer, bank=driver)]
            r = [t.id for t in net.tokens_where(layer=layer, bank=recipient)]
            if d and r:
                blocks[layer] = (d, r)
        return cls(blocks)

    def h(self, u, v):
        return self._get(u, v, 2)

    def w(self, u, v):
        return self._get(u, v, 3)

    def _get(self, u, v, k):
        for blk in self.blocks.values():
            if u in blk[0] and v in blk[1]:
                return float(blk[k][blk[0].index(u), blk[1].index(v)])
        raise UnknownUnit(f"({u!r}, {v!r}) is not a same-layer driver/recipient pair")

    def pairs(self):
        for layer, (d, r, h, w) in self.blocks.items():
            for i, u in enumerate(d):
                for j, v in enumerate(r):
                    yield layer, u, v, float(h[i, j]), float(w[i, j])

    def reset(self):
        for d, r, h, w in self.blocks.values():
            h[:] = 0.0
            w[:] = 0.0
        return self

    # ---- io ------------------------------------------------------------
    def to_dict(self):
        return {"format_version": FORMAT_VERSION,
                "pairs": [{"layer": l.value, "driver": u, "recipient": v, "h": h, "w": w}
                          for l, u, v, h, w in self.pairs()]}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        check_version(d)
        try:
            blocks, vals = {}, []
            for p in d["pairs"]:
                l = Layer(p["layer"])
                dr, rc = blocks.setdefault(l, ([], []))
                if p["driver"] not in dr:
                    dr.append(p["driver"])
                if p["recipient"] not in rc:
                    rc.append(p["recipient"])
                vals.append((l, p["driver"], p["recipient"], float(p["h"]), float(p["w"])))
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"malformed mapping table ({e!r})") from None
        t = cls(blocks)
        for l, u, v, h, w in vals:
            d, r, H, W = t.blocks[l]
            H[d.index(u), r.index(v)] = h
            W[d.index(u), r.index(v)] = w
        return t

    @classmethod
    def from_json(cls, text):
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise ParseError(str(e)) from None


def accumulate_hypotheses(table: MappingTable, trace: FiringTrace):
    """h(u, v) += sum_t a_u(t) a_v(t) dt; no normalization."""
    for d, r, h, _ in table.blocks.values():
        for u in d + r:
            if not trace.has(u):
                raise UnknownUnit(f"trace has no column for mapped unit {u!r}")
        A = np.stack([trace.col(u) for u in d], axis=1)
        B = np.stack([trace.col(v) for v in r], axis=1)
        h += (A.T @ B) * trace.dt
    return table


def update_mapping_weights(table: MappingTable):
    """w(u, v) = h(u, v) / max(row max, column max), per layer block."""
    if not any(h.size and h.max() > 0 for _, _, h, _ in table.blocks.values()):
        raise AllZeroHypotheses("no coactivity recorded between the banks")
    for _, _, h, w in table.blocks.values():
        if not h.size:
            continue
        den = np.maximum(h.max(axis=1, keepdims=True), h.max(axis=0, keepdims=True))
        np.divide(h, den, out=w, where=den > 0)
        w[den == 0] = 0.0
    return table


def best_mapping(table: MappingTable):
    """Greedy one-to-one readout: descending weight, ties by (driver id, recipient id)."""
    out = {}
    for d, r, _, w in table.blocks.values():
        cand = sorted(((-float(w[i, j]), u, v) for i, u in enumerate(d) for j, v in enumerate(r)
                       if w[i, j] > 0))
        used = set()
        for _, u, v in cand:
            if u not in out and v not in used:
                out[u] = v
                used.add(v)
    return dict(sorted(out.items()))


def write_mapping_connections(net: Network, table: MappingTable):
    """Store the nonzero weights as MAPPING connections (not used by the dynamics)."""
    for _, u, v, _, w in table.pairs():
        if w > 0:
            net.connect(u, v, w, Kind.MAPPING)
        else:
            net.disconnect(u, v, Kind.MAPPING)
    return net


def mapping_episode(net: Network, propositions, table: MappingTable | None = None,
                    cycle_params=None, backend=None, tail=None):
    """Drive the driver roles one at a time and accumulate hypotheses.

    Each role (predicate, argument, RB and its P unit) is run as its own
    episode from a reset state. Recipient units are only reached through the
    semantic pool and lag the driver by a few steps, so within one long
    schedule the lag would pile up from slot to slot; separate episodes keep
    every recipient response aligned with the role that caused it. Each run
    continues ``tail`` undriven steps (default one slot width) past the
    schedule. Runs on a copy; returns (table, traces).
    """
    from .codec import encode, CodecParams
    from .oscillation import run
    cp = cycle_params or CodecParams()
    work = net.copy()
    table = table if table is not None else MappingTable.from_network(work)
    tail = cp.slot_width if tail is None else int(tail)
    traces = []
    for p in propositions:
        for r in p.roles:
            work.reset_state()
            sched = encode([Proposition(p.p_unit, [r])], cp.mode, cp)
            trace, _ = run(work, sched, sched.horizon + tail, sync=cp.mode.value == "PHASE_LAG_0",
                           backend=backend)
            accumulate_hypotheses(table, trace)
            traces.append(trace)
    return table, traces
