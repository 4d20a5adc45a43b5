"""Per-timestep activation dynamics.

Update for unit i (Jacobi: all terms use the previous step's activations)::

    net_i = (1 + bias_i) * (sum_j w_ij a_j + ext_i)
    a_i  <- clip(a_i + dt * (net_i - leak * a_i - lateral_gain * max_c a_c), 0, 1)

where c ranges over competitors (same bank, same tier, same group, different
coalition). A unit whose inhibitor is refractory or held is clamped to 0.

Excitation through the semantic pool is directional: driver PO tokens drive
features, and features drive PO tokens in the other banks (normalized by the
token's total feature weight). Driver tokens get no feature input back.
Structural links are two-way in the driver and bottom-up elsewhere, so
recipient and memory structures follow their features instead of
oscillating on their own.

Inhibitors accumulate ``inhibitor_gain * (a_yoked + topdown * sum w a_higher)``
and fire at ``threshold * span``. The span is the number of yoked units for a PO
inhibitor and the number of firing slots of the role-filler set for an RB
inhibitor. A fired inhibitor stays held until every driven inhibitor of its
competition group has fired, which is what lets k groups share one cycle.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import UnknownUnit, ValidationError
from .network import Bank, Kind, Layer, Network, PO_LAYERS, tier

try:
    if os.environ.get("PREDLEARN_PURE_PYTHON"):
        raise ImportError
    from ._ckernel import Kernel as _CKernel
except ImportError:  # extension not built
    _CKernel = None
from ._pykernel import Kernel as _PyKernel

BACKENDS = ("compiled", "python")
# steps a PO stays clamped after its RB's inhibitor fires
CHILD_REFRACTORY = 1


def available_backends():
    return [b for b in BACKENDS if b == "python" or _CKernel is not None]


def default_backend():
    return "compiled" if _CKernel is not None else "python"


def _kernel_class(backend):
    backend = backend or default_backend()
    if backend == "compiled":
        if _CKernel is None:
            raise ValidationError("compiled kernel not built; use backend='python'")
        return _CKernel
    if backend == "python":
        return _PyKernel
    raise ValidationError(f"unknown backend {backend!r}")


def _csr(rows, n, with_w=False):
    ptr = np.zeros(n + 1, dtype=np.int32)
    idx, w = [], []
    for i in range(n):
        r = rows.get(i, [])
        ptr[i + 1] = ptr[i] + len(r)
        for e in r:
            if with_w:
                idx.append(e[0])
                w.append(e[1])
            else:
                idx.append(e)
    idx = np.array(idx, dtype=np.int32)
    if with_w:
        return ptr, idx, np.array(w, dtype=np.float64)
    return ptr, idx


@dataclass
class Compiled:
    """Flat array view of a network for one run mode."""
    unit_ids: list
    index: dict
    n: int
    act: np.ndarray
    gain: np.ndarray
    exc_ptr: np.ndarray
    exc_idx: np.ndarray
    exc_w: np.ndarray
    comp_ptr: np.ndarray
    comp_idx: np.ndarray
    blk_ptr: np.ndarray
    blk_idx: np.ndarray
    m: int
    inh_members: list      # per kernel inhibitor, unit ids it is yoked to
    mem_ptr: np.ndarray
    mem_idx: np.ndarray
    in_ptr: np.ndarray
    in_idx: np.ndarray
    in_w: np.ndarray
    child_ptr: np.ndarray
    child_idx: np.ndarray
    grp: np.ndarray
    n_grp: int
    thr: np.ndarray
    acc: np.ndarray
    refr: np.ndarray
    held: np.ndarray
    dt: float
    leak: float
    lat: float
    delta: float
    rlen: int
    crefr: int = 1


def coalitions(net: Network, sync: bool):
    """Map token id -> coalition key. In sync mode the PO units reachable through
    one RB fire as a single coalition (shared inhibitor, no mutual inhibition)."""
    parent = {uid: uid for uid in net.tokens}

    def find(u):
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    if sync:
        for rb in net.tokens_where(layer=Layer.RB):
            pos = net.structural_neighbors(rb.id, PO_LAYERS)
            for a, b in zip(pos, pos[1:]):
                ra, rb_ = find(a), find(b)
                if ra != rb_:
                    # keep the earliest-inserted unit as root for determinism
                    order = list(net.tokens)
                    if order.index(ra) < order.index(rb_):
                        parent[rb_] = ra
                    else:
                        parent[ra] = rb_
    return {uid: find(uid) for uid in net.tokens}


def compile_network(net: Network, sync: bool = False) -> Compiled:
    p = net.params
    unit_ids = list(net.semantics) + list(net.tokens)
    index = {u: i for i, u in enumerate(unit_ids)}
    n = len(unit_ids)
    coal = coalitions(net, sync)
    coal_size = {}
    for u, c in coal.items():
        coal_size[c] = coal_size.get(c, 0) + 1

    act = np.array([net.unit(u).activation for u in unit_ids], dtype=np.float64)
    gain = np.ones(n)
    for t in net.tokens.values():
        if sync and t.is_po and coal_size[coal[t.id]] > 1:
            continue    # no within-set priority when the set fires together
        gain[index[t.id]] = 1.0 + t.firing_bias

    fanin = {}
    for c in net.connections.values():
        if c.kind is Kind.SEMANTIC:
            fanin[c.source] = fanin.get(c.source, 0.0) + c.weight
    exc = {}
    for c in net.connections.values():
        s, t = index[c.source], index[c.target]
        if c.kind is Kind.STRUCTURAL:
            # source is the higher-layer end; top-down flow only in the driver
            exc.setdefault(s, []).append((t, c.weight))
            if net.tokens[c.source].bank is Bank.DRIVER:
                exc.setdefault(t, []).append((s, c.weight))
        elif c.kind is Kind.SEMANTIC:
            if net.tokens[c.source].bank is Bank.DRIVER:
                exc.setdefault(t, []).append((s, c.weight))
            elif fanin[c.source] > 0:
                exc.setdefault(s, []).append((t, c.weight * p.semantic_gain / fanin[c.source]))
        # mapping weights stay out of the dynamics
    exc_ptr, exc_idx, exc_w = _csr(exc, n, with_w=True)

    groups = {}
    for t in net.tokens.values():
        groups.setdefault((t.bank, tier(t.layer), t.group), []).append(t.id)
    comp = {}
    for members in groups.values():
        for u in members:
            comp[index[u]] = [index[v] for v in members if coal[v] != coal[u]]
    comp_ptr, comp_idx = _csr(comp, n)

    # kernel inhibitors: one per RB, one per PO coalition
    inh_members, inh_of = [], {}
    for t in net.tokens.values():
        if t.layer is Layer.P:
            continue
        key = coal[t.id] if t.is_po else t.id
        if key not in inh_of:
            inh_of[key] = len(inh_members)
            inh_members.append([])
        inh_members[inh_of[key]].append(t.id)
    m = len(inh_members)
    kidx = {u: inh_of[coal[u]] if net.tokens[u].is_po else inh_of[u]
            for ms in inh_members for u in ms}

    blk = {}
    for k, ms in enumerate(inh_members):
        for u in ms:
            blk.setdefault(index[u], []).append(k)
    blk_ptr, blk_idx = _csr(blk, n)
    mem_ptr, mem_idx = _csr({k: [index[u] for u in ms] for k, ms in enumerate(inh_members)}, m)

    higher = {}
    for c in net.connections.values():
        if c.kind is Kind.STRUCTURAL:
            higher.setdefault(c.target, []).append((c.source, c.weight))
    inputs, children = {}, {}
    thr = np.zeros(m)
    grp_key, grp = {}, np.zeros(m, dtype=np.int32)
    acc = np.zeros(m)
    refr = np.zeros(m, dtype=np.int32)
    held = np.zeros(m, dtype=np.uint8)
    for k, ms in enumerate(inh_members):
        first = net.tokens[ms[0]]
        row = [(index[u], 1.0) for u in ms]
        if p.inhibitor_topdown > 0:
            for u in ms:
                for h, w in higher.get(u, []):
                    row.append((index[h], p.inhibitor_topdown * w))
        inputs[k] = row
        if first.layer is Layer.RB:
            kids = []
            for po in net.structural_neighbors(first.id, PO_LAYERS):
                if kidx[po] not in kids:
                    kids.append(kidx[po])
            children[k] = kids
            span = max(len(kids), 1)
        else:
            span = len(ms)
        st = net.inhibitors[first.id]
        thr[k] = st.threshold * span
        acc[k] = st.accumulator
        refr[k] = st.refractory_remaining
        held[k] = st.held
        g = (first.bank, tier(first.layer), first.group)
        grp[k] = grp_key.setdefault(g, len(grp_key))
    in_ptr, in_idx, in_w = _csr(inputs, m, with_w=True)
    child_ptr, child_idx = _csr(children, m)

    return Compiled(unit_ids, index, n, act, gain, exc_ptr, exc_idx, exc_w, comp_ptr, comp_idx,
                    blk_ptr, blk_idx, m, inh_members, mem_ptr, mem_idx, in_ptr, in_idx, in_w,
                    child_ptr, child_idx, grp, len(grp_key), thr, acc, refr, held,
                    float(p.dt), float(p.leak), float(p.lateral_gain), float(p.inhibitor_gain),
                    int(p.refractory_len), CHILD_REFRACTORY)


class Simulator:
    """Compiled network plus a kernel; commits state back on request."""

    def __init__(self, net: Network, sync: bool = False, backend: str | None = None):
        self.net = net
        self.sync = sync
        self.backend = backend or default_backend()
        self.c = compile_network(net, sync)
        self.kernel = _kernel_class(self.backend)(self.c)

    def ext_vector(self, external_input):
        e = np.zeros(self.c.n)
        for uid, v in (external_input or {}).items():
            if uid not in self.c.index:
                raise UnknownUnit(f"external input references unknown unit {uid!r}")
            v = float(v)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"external input for {uid!r} outside [0, 1]")
            e[self.c.index[uid]] = v
        return e

    def step(self, external_input=None):
        self.kernel.step(self.ext_vector(external_input))

    def step_inhibitors(self):
        self.kernel.step_inhibitors()

    def run(self, drive: np.ndarray) -> np.ndarray:
        out = np.zeros((drive.shape[0], self.c.n))
        self.kernel.run(np.ascontiguousarray(drive, dtype=np.float64), out)
        return out

    def commit(self):
        act, _, acc, refr, held = self.kernel.state()
        net = self.net
        for i, uid in enumerate(self.c.unit_ids):
            net.unit(uid).activation = float(act[i])
        for k, ms in enumerate(self.c.inh_members):
            for u in ms:
                inh = net.inhibitors[u]
                inh.accumulator = float(acc[k])
                inh.refractory_remaining = int(refr[k])
                inh.held = bool(held[k])
        return net


def step(network: Network, external_input=None, sync=False, backend=None):
    """One activation update, committed to ``network``; returns id -> activation.

    The last net input is not part of the saved state, so a following
    ``step_inhibitors`` call on the same network treats every unit as undriven
    when deciding phase-set release. Use :class:`Simulator` for long runs.
    """
    sim = Simulator(network, sync, backend)
    sim.step(external_input)
    sim.commit()
    return {u: network.unit(u).activation for u in sim.c.unit_ids}


def step_inhibitors(network: Network, sync=False, backend=None):
    """One inhibitor update, committed to ``network``; returns the inhibitor map."""
    sim = Simulator(network, sync, backend)
    sim.step_inhibitors()
    sim.commit()
    return network.inhibitors
