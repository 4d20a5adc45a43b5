"""Multi-cycle runs, firing traces and burst/phase analysis."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import Simulator
from .errors import (InsufficientCycles, NoBursts, ParseError, SchemaError, UnknownUnit,
                     ValidationError)
from .network import FORMAT_VERSION, Layer, Network, PO_LAYERS, check_version, tier


@dataclass
class FiringTrace:
    dt: float
    unit_ids: list
    activations: np.ndarray   # [timestep, unit]

    def __post_init__(self):
        self.activations = np.asarray(self.activations, dtype=np.float64)
        if self.activations.ndim != 2 or self.activations.shape[1] != len(self.unit_ids):
            raise ValidationError(
                f"trace matrix shape {self.activations.shape} does not match {len(self.unit_ids)} units")
        self._index = {u: i for i, u in enumerate(self.unit_ids)}

    @property
    def n_steps(self):
        return self.activations.shape[0]

    def col(self, uid):
        if uid not in self._index:
            raise UnknownUnit(f"unit {uid!r} not in trace")
        return self.activations[:, self._index[uid]]

    def has(self, uid):
        return uid in self._index

    def scaled(self, c):
        return FiringTrace(self.dt, list(self.unit_ids), self.activations * c)

    def subset(self, ids):
        ids = list(ids)
        return FiringTrace(self.dt, ids, self.activations[:, [self._index[u] for u in ids]])

    # ---- io ------------------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "unit_id", "activation"])
        for t in range(self.n_steps):
            row = self.activations[t]
            for i, u in enumerate(self.unit_ids):
                w.writerow([t, u, repr(float(row[i]))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, dt=0.5):
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["t", "unit_id", "activation"]:
            raise ParseError("trace CSV must start with header t,unit_id,activation")
        ids, seen, data = [], {}, {}
        try:
            for r in rows[1:]:
                if not r:
                    continue
                t, u, a = int(r[0]), r[1], float(r[2])
                if u not in seen:
                    seen[u] = len(ids)
                    ids.append(u)
                data[(t, u)] = a
        except (ValueError, IndexError) as e:
            raise ParseError(f"bad trace CSV row: {e}") from None
        T = 1 + max((t for t, _ in data), default=-1)
        A = np.zeros((T, len(ids)))
        for (t, u), a in data.items():
            A[t, seen[u]] = a
        if A.size and (A.min() < 0 or A.max() > 1):
            raise ParseError("trace activations outside [0, 1]")
        return cls(dt, ids, A)

    def to_json(self) -> str:
        return json.dumps({"format_version": FORMAT_VERSION, "dt": self.dt, "unit_ids": self.unit_ids,
                           "activations": self.activations.tolist()}, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(str(e)) from None
        check_version(d)
        try:
            return cls(float(d["dt"]), list(d["unit_ids"]),
                       np.array(d["activations"], dtype=np.float64).reshape(-1, len(d["unit_ids"])))
        except KeyError as e:
            raise SchemaError(f"missing field {e}") from None


def export_raster(trace: FiringTrace, path):
    Path(path).write_text(trace.to_csv())


def load_trace(path, dt=0.5):
    text = Path(path).read_text()
    if str(path).endswith(".json"):
        return FiringTrace.from_json(text)
    return FiringTrace.from_csv(text, dt)


@dataclass(frozen=True)
class BurstEvent:
    unit: str
    start: int
    end: int      # inclusive
    peak: int

    @property
    def length(self):
        return self.end - self.start + 1


@dataclass(frozen=True)
class Group:
    """One role binding: an RB unit and the PO units under it."""
    rb: str
    units: tuple


@dataclass
class PhaseSet:
    members: list = field(default_factory=list)   # Group values

    @property
    def rbs(self):
        return [g.rb for g in self.members]


# ---- running -----------------------------------------------------------
def drive_matrix(drive, index, n_steps):
    D = np.zeros((n_steps, len(index)))
    if drive is None:
        return D
    if hasattr(drive, "drive_matrix"):
        return drive.drive_matrix(index, n_steps)
    if isinstance(drive, np.ndarray):
        if drive.shape != D.shape:
            raise ValidationError(f"drive array shape {drive.shape}, expected {D.shape}")
        D[:] = drive
    elif callable(drive):
        for t in range(n_steps):
            for u, v in (drive(t) or {}).items():
                D[t, _idx(index, u)] = v
    else:
        for u, v in drive.items():
            D[:, _idx(index, u)] = v
    if D.size and (D.min() < 0 or D.max() > 1):
        raise ValidationError("external input outside [0, 1]")
    return D


def _idx(index, u):
    if u not in index:
        raise UnknownUnit(f"drive references unknown unit {u!r}")
    return index[u]


def run(network: Network, drive=None, n_steps: int = 1, sync: bool = False, backend=None):
    """Alternate step and step_inhibitors for n_steps; returns (trace, network).

    ``drive`` is a dict (constant input), a callable t -> dict, an array
    [n_steps, n_units] in trace unit order, or anything with ``drive_matrix``
    (e.g. a codec schedule). The network is updated in place.
    """
    if int(n_steps) != n_steps or n_steps < 1:
        raise ValidationError("n_steps must be an integer >= 1")
    sim = Simulator(network, sync, backend)
    D = drive_matrix(drive, sim.c.index, int(n_steps))
    A = sim.run(D)
    sim.commit()
    return FiringTrace(network.params.dt, list(sim.c.unit_ids), A), network


# ---- analysis ----------------------------------------------------------
def _runs(x, th):
    on = np.concatenate([[False], x >= th, [False]])
    d = np.diff(on.astype(np.int8))
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def unit_bursts(trace: FiringTrace, uid, threshold=0.5):
    x = trace.col(uid)
    return [BurstEvent(uid, s, e, s + int(np.argmax(x[s:e + 1]))) for s, e in _runs(x, threshold)]


def extract_bursts(trace: FiringTrace, threshold: float = 0.5):
    """All bursts (maximal supra-threshold runs), sorted by (start, unit order)."""
    if not 0.0 < threshold < 1.0:
        raise ValidationError("threshold must lie in (0, 1)")
    out = []
    for i, u in enumerate(trace.unit_ids):
        out.extend((b.start, i, b) for b in unit_bursts(trace, u, threshold))
    return [b for _, _, b in sorted(out, key=lambda x: (x[0], x[1]))]


def bursts_by_unit(trace, threshold=0.5):
    return {u: unit_bursts(trace, u, threshold) for u in trace.unit_ids}


def rb_groups(network: Network, bank=None):
    out = []
    for rb in network.tokens_where(layer=Layer.RB, bank=bank):
        out.append(Group(rb.id, tuple(network.structural_neighbors(rb.id, PO_LAYERS))))
    return out


def _merge(iv):
    iv = sorted(iv)
    out = []
    for s, e in iv:
        if out and s <= out[-1][1] + 1:
            out[-1][1] = max(out[-1][1], e)
        else:
            out.append([s, e])
    return [tuple(x) for x in out]


def group_intervals(trace, group: Group, threshold=0.5):
    iv = []
    for u in (group.rb,) + group.units:
        if trace.has(u):
            iv.extend(_runs(trace.col(u), threshold))
    return _merge(iv)


def settle_time(trace, groups, threshold=0.5):
    """End of the first cycle: every active group has finished its first burst."""
    firsts = [ivs[0][1] for ivs in (group_intervals(trace, g, threshold) for g in groups) if ivs]
    return max(firsts) + 1 if firsts else 0


def _overlap(a, b):
    i = j = 0
    while i < len(a) and j < len(b):
        if a[i][0] <= b[j][1] and b[j][0] <= a[i][1]:
            return True
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return False


def detect_phase_sets(trace: FiringTrace, network: Network, threshold=None, bank=None):
    """Partition RB groups into phase sets.

    Groups whose activity spans interleave and whose bursts never overlap
    share a phase set; overlapping groups are split. The first cycle is
    dropped. Greedy assignment in order of first post-settling onset.
    """
    th = network.params.activation_threshold if threshold is None else threshold
    if not any(len(_runs(trace.activations[:, i], th)) >= 2 for i in range(len(trace.unit_ids))):
        raise InsufficientCycles("no unit bursts twice; trace too short for phase analysis")
    groups = [g for g in rb_groups(network, bank) if trace.has(g.rb)]
    settle = settle_time(trace, groups, th)
    ivs = {}
    for g in groups:
        kept = [iv for iv in group_intervals(trace, g, th) if iv[0] >= settle]
        if kept:
            ivs[g] = kept
    order = sorted(ivs, key=lambda g: (ivs[g][0][0], groups.index(g)))
    sets: list[PhaseSet] = []
    for g in order:
        span = (ivs[g][0][0], ivs[g][-1][1])
        for ps in sets:
            if any(_overlap(ivs[g], ivs[h]) for h in ps.members):
                continue
            if not any(span[0] <= ivs[h][-1][1] and ivs[h][0][0] <= span[1] for h in ps.members):
                continue
            ps.members.append(g)
            break
        else:
            sets.append(PhaseSet([g]))
    return sets


def pairwise_lag(trace: FiringTrace, unit_a, unit_b, threshold=0.5):
    """Median over a's bursts of (nearest b peak - a peak); positive: a leads."""
    pa = [b.peak for b in unit_bursts(trace, unit_a, threshold)]
    pb = np.array([b.peak for b in unit_bursts(trace, unit_b, threshold)])
    if not pa or not len(pb):
        raise NoBursts(f"no bursts for {unit_a if not pa else unit_b!r}")
    lags = []
    for p in pa:
        d = pb - p
        best = np.min(np.abs(d))
        lags.append(int(d[np.abs(d) == best].max()))   # tie: take the later one
    return float(np.median(lags))


def burst_period(trace, uid, threshold=0.5, after=0):
    on = [b.start for b in unit_bursts(trace, uid, threshold) if b.start >= after]
    if len(on) < 2:
        raise InsufficientCycles(f"unit {uid!r} bursts fewer than twice")
    return float(np.median(np.diff(on)))


def duty_cycle(trace, uid, threshold=0.5, after=0):
    """Mean burst length over mean onset-to-onset period, complete bursts only."""
    bs = [b for b in unit_bursts(trace, uid, threshold) if b.start >= after and b.end < trace.n_steps - 1]
    if len(bs) < 2:
        raise InsufficientCycles(f"unit {uid!r} has fewer than two complete bursts")
    per = np.mean(np.diff([b.start for b in bs]))
    return float(np.mean([b.length for b in bs[:-1]]) / per)


def exclusivity_violations(trace, network: Network, after=None, threshold=None):
    """Timesteps where two units of one (bank, tier, group) are both at/above threshold.

    Units of one coalition (sync mode) should be passed as already merged by
    the caller; here every token counts separately.
    """
    th = network.params.activation_threshold if threshold is None else threshold
    after = network.params.settling_steps if after is None else after
    groups = {}
    for t in network.tokens.values():
        if trace.has(t.id):
            groups.setdefault((t.bank, tier(t.layer), t.group), []).append(t.id)
    bad = []
    for key, ids in groups.items():
        if len(ids) < 2:
            continue
        on = np.stack([trace.col(u) >= th for u in ids], axis=1)[after:]
        for t in np.flatnonzero(on.sum(1) > 1):
            bad.append((int(t) + after, key))
    return bad
