"""Network data model: semantic pool, layered token banks, connections, inhibitors.

The dynamics live in :mod:`predlearn.dynamics`; this module only holds state,
enforces the structural invariants and handles (de)serialization.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field, fields, asdict
from enum import Enum
from pathlib import Path
from typing import Iterable

from .errors import (DuplicateId, LayerViolation, SchemaError, UnknownUnit,
                     ValidationError, VersionError, ParseError)

FORMAT_VERSION = 1


class Layer(str, Enum):
    PO_PRED = "PO_PRED"
    PO_OBJ = "PO_OBJ"
    RB = "RB"
    P = "P"


class Bank(str, Enum):
    DRIVER = "DRIVER"
    RECIPIENT = "RECIPIENT"
    MEMORY = "MEMORY"


class Kind(str, Enum):
    STRUCTURAL = "STRUCTURAL"
    SEMANTIC = "SEMANTIC"
    MAPPING = "MAPPING"


PO_LAYERS = (Layer.PO_PRED, Layer.PO_OBJ)
BANK_ORDER = {Bank.DRIVER: 0, Bank.RECIPIENT: 1, Bank.MEMORY: 2}
_RANK = {Layer.P: 2, Layer.RB: 1, Layer.PO_PRED: 0, Layer.PO_OBJ: 0}


def tier(layer: Layer) -> str:
    """Competition tier; predicate and object units compete in one PO tier."""
    return "PO" if layer in PO_LAYERS else layer.value


@dataclass
class DynamicsParams:
    dt: float = 0.5
    leak: float = 0.5
    lateral_gain: float = 1.6
    inhibitor_gain: float = 0.1
    inhibitor_threshold: float = 1.0
    refractory_len: int = 10
    activation_threshold: float = 0.5
    # gain on the higher-layer term of inhibitor accumulation (x structural weight)
    inhibitor_topdown: float = 0.0
    # semantic -> non-driver token gain, applied after fan-in normalization
    semantic_gain: float = 1.0
    # steps excluded before exclusivity checks
    settling_steps: int = 60

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("dt", "leak", "lateral_gain", "inhibitor_gain",
                     "inhibitor_threshold", "refractory_len", "semantic_gain"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                raise ValidationError(f"params.{name} must be > 0, got {v!r}")
        if not 0.0 < self.activation_threshold < 1.0:
            raise ValidationError("params.activation_threshold must lie in (0, 1)")
        if self.inhibitor_topdown < 0:
            raise ValidationError("params.inhibitor_topdown must be >= 0")
        if int(self.refractory_len) != self.refractory_len:
            raise ValidationError("params.refractory_len must be an integer")
        if int(self.settling_steps) != self.settling_steps or self.settling_steps < 0:
            raise ValidationError("params.settling_steps must be a non-negative integer")
        self.refractory_len = int(self.refractory_len)
        self.settling_steps = int(self.settling_steps)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise SchemaError(f"unknown parameter(s) {sorted(extra)}", "params")
        return cls(**d)

    def replace(self, **kw):
        d = self.to_dict()
        d.update(kw)
        return DynamicsParams.from_dict(d)


@dataclass
class SemanticUnit:
    id: str
    label: str
    activation: float = 0.0


@dataclass
class TokenUnit:
    id: str
    layer: Layer
    bank: Bank
    activation: float = 0.0
    firing_bias: float = 0.0
    group: str = ""          # extra key on top of (bank, tier) for lateral competition
    name: str = ""           # human-readable handle (item id, predicate name)
    instance_of: str = ""    # memory predicate this token was copied from

    @property
    def is_po(self):
        return self.layer in PO_LAYERS


@dataclass
class Connection:
    source: str
    target: str
    weight: float
    kind: Kind


@dataclass
class Inhibitor:
    yoked_unit: str
    accumulator: float = 0.0
    threshold: float = 1.0
    refractory_remaining: int = 0
    # set on firing, cleared when every driven member of the competition group has fired
    held: bool = False


@dataclass
class Predicate:
    po_unit: str
    semantic_weights: dict = field(default_factory=dict)
    provenance: list = field(default_factory=list)
    name: str = ""
    # argument name -> number of times bound; tracked but unused by the dynamics
    bindings: dict = field(default_factory=dict)

    def vector(self, labels):
        return [self.semantic_weights.get(l, 0.0) for l in labels]


@dataclass(frozen=True)
class Role:
    rb_unit: str
    predicate: str
    argument: str


@dataclass
class Proposition:
    p_unit: str
    roles: list

    @property
    def arity(self):
        return len(self.roles)


class Network:
    """Mutable container for one simulated network.

    Units keep insertion order; this order fixes the kernel layout and the
    JSON layout, which is what makes runs and files reproducible.
    """

    def __init__(self, params: DynamicsParams | None = None):
        self.params = params if params is not None else DynamicsParams()
        self.semantics: dict[str, SemanticUnit] = {}
        self.tokens: dict[str, TokenUnit] = {}
        self.connections: dict[tuple, Connection] = {}
        self.inhibitors: dict[str, Inhibitor] = {}
        self.predicates: dict[str, Predicate] = {}
        self.propositions: dict[str, Proposition] = {}
        self.next_id = 0
        self._by_label: dict[str, str] = {}

    # ---- units -------------------------------------------------------
    def _new_id(self, prefix):
        while True:
            uid = f"{prefix}{self.next_id}"
            self.next_id += 1
            if uid not in self.tokens and uid not in self.semantics:
                return uid

    def has_unit(self, uid):
        return uid in self.tokens or uid in self.semantics

    def unit(self, uid):
        if uid in self.tokens:
            return self.tokens[uid]
        if uid in self.semantics:
            return self.semantics[uid]
        raise UnknownUnit(f"unknown unit id {uid!r}")

    def add_semantic(self, label, uid=None, activation=0.0):
        if label in self._by_label:
            raise DuplicateId(f"semantic label {label!r} already in pool")
        uid = uid if uid is not None else f"s:{label}"
        if self.has_unit(uid):
            raise DuplicateId(f"duplicate unit id {uid!r}")
        self.semantics[uid] = SemanticUnit(uid, label, float(activation))
        self._by_label[label] = uid
        return uid

    def semantic_id(self, label):
        return self._by_label.get(label)

    def labels(self):
        return [s.label for s in self.semantics.values()]

    def add_token(self, layer, bank, uid=None, firing_bias=0.0, group="", name="",
                  instance_of="", activation=0.0):
        layer, bank = Layer(layer), Bank(bank)
        if uid is None:
            uid = self._new_id("u")
        elif self.has_unit(uid):
            raise DuplicateId(f"duplicate unit id {uid!r}")
        if firing_bias < 0:
            raise ValidationError(f"firing_bias of {uid!r} must be >= 0")
        self.tokens[uid] = TokenUnit(uid, layer, bank, float(activation), float(firing_bias),
                                     group, name, instance_of)
        if layer is not Layer.P:
            self.inhibitors[uid] = Inhibitor(uid, threshold=self.params.inhibitor_threshold)
        return uid

    def remove_unit(self, uid):
        """Delete a token unit together with every connection touching it."""
        if uid not in self.tokens:
            raise UnknownUnit(f"unknown token id {uid!r}")
        for key in [k for k in self.connections if uid in (k[0], k[1])]:
            del self.connections[key]
        self.inhibitors.pop(uid, None)
        del self.tokens[uid]

    def tokens_where(self, layer=None, bank=None):
        out = []
        for t in self.tokens.values():
            if layer is not None and t.layer != layer:
                continue
            if bank is not None and t.bank != bank:
                continue
            out.append(t)
        return out

    # ---- connections -------------------------------------------------
    def _key(self, a, b, kind):
        """Canonical orientation: structural high->low, semantic token->feature,
        mapping by bank order."""
        ua, ub = self.unit(a), self.unit(b)
        if kind is Kind.SEMANTIC:
            tok, sem = (ua, ub) if isinstance(ua, TokenUnit) else (ub, ua)
            if not isinstance(tok, TokenUnit) or not isinstance(sem, SemanticUnit):
                raise LayerViolation(f"semantic connection {a}-{b} must join a PO token and a feature")
            if not tok.is_po:
                raise LayerViolation(f"semantic connection on non-PO unit {tok.id!r}")
            return tok.id, sem.id
        if not isinstance(ua, TokenUnit) or not isinstance(ub, TokenUnit):
            raise LayerViolation(f"{kind.value} connection {a}-{b} must join two tokens")
        if kind is Kind.STRUCTURAL:
            if ua.bank != ub.bank:
                raise LayerViolation(f"structural connection {a}-{b} crosses banks")
            if abs(_RANK[ua.layer] - _RANK[ub.layer]) != 1:
                raise LayerViolation(
                    f"structural connection {a}({ua.layer.value})-{b}({ub.layer.value}) "
                    "does not join adjacent layers")
            return (a, b) if _RANK[ua.layer] > _RANK[ub.layer] else (b, a)
        if ua.layer != ub.layer or ua.bank == ub.bank:
            raise LayerViolation(f"mapping connection {a}-{b} must join same-layer units in different banks")
        return (a, b) if BANK_ORDER[ua.bank] < BANK_ORDER[ub.bank] else (b, a)

    def connect(self, a, b, weight, kind):
        kind = Kind(kind)
        w = float(weight)
        if not 0.0 <= w <= 1.0:
            raise ValidationError(f"connection weight {w} outside [0, 1]")
        s, t = self._key(a, b, kind)
        self.connections[(s, t, kind)] = Connection(s, t, w, kind)

    def disconnect(self, a, b, kind):
        kind = Kind(kind)
        s, t = self._key(a, b, kind)
        self.connections.pop((s, t, kind), None)

    def weight(self, a, b, kind):
        kind = Kind(kind)
        s, t = self._key(a, b, kind)
        c = self.connections.get((s, t, kind))
        return 0.0 if c is None else c.weight

    def semantic_weights(self, po_unit):
        """label -> weight for one PO unit, in pool order."""
        out = {}
        for c in self.connections.values():
            if c.kind is Kind.SEMANTIC and c.source == po_unit:
                out[self.semantics[c.target].label] = c.weight
        order = {uid: i for i, uid in enumerate(self.semantics)}
        return dict(sorted(out.items(), key=lambda kv: order[self._by_label[kv[0]]]))

    def structural_neighbors(self, uid, layer=None):
        out = []
        for c in self.connections.values():
            if c.kind is not Kind.STRUCTURAL:
                continue
            other = c.target if c.source == uid else c.source if c.target == uid else None
            if other is not None and (layer is None or self.tokens[other].layer in _as_tuple(layer)):
                out.append(other)
        return out

    # ---- state -------------------------------------------------------
    def reset_state(self):
        """Zero activations and inhibitor state; weights untouched."""
        for u in self.semantics.values():
            u.activation = 0.0
        for u in self.tokens.values():
            u.activation = 0.0
        for inh in self.inhibitors.values():
            inh.accumulator = 0.0
            inh.refractory_remaining = 0
            inh.held = False

    def checksum(self):
        """Digest of everything that counts as a weight: connections and the pool."""
        h = hashlib.sha256()
        for s in self.semantics.values():
            h.update(f"S|{s.id}|{s.label}\n".encode())
        for k in sorted(self.connections, key=lambda k: (k[0], k[1], k[2].value)):
            c = self.connections[k]
            h.update(f"C|{c.source}|{c.target}|{c.kind.value}|{c.weight!r}\n".encode())
        return h.hexdigest()

    def copy(self):
        return copy.deepcopy(self)

    def refresh_predicate(self, po_unit):
        pred = self.predicates[po_unit]
        pred.semantic_weights = self.semantic_weights(po_unit)
        return pred

    def __repr__(self):
        return (f"Network({len(self.semantics)} semantics, {len(self.tokens)} tokens, "
                f"{len(self.connections)} connections)")

    # ---- serialization ----------------------------------------------
    def to_dict(self):
        return {
            "format_version": FORMAT_VERSION,
            "params": self.params.to_dict(),
            "next_id": self.next_id,
            "semantics": [{"id": s.id, "label": s.label, "activation": s.activation}
                          for s in self.semantics.values()],
            "tokens": [{"id": t.id, "layer": t.layer.value, "bank": t.bank.value,
                        "activation": t.activation, "firing_bias": t.firing_bias,
                        "group": t.group, "name": t.name, "instance_of": t.instance_of}
                       for t in self.tokens.values()],
            "connections": [{"source": c.source, "target": c.target, "weight": c.weight,
                             "kind": c.kind.value} for c in self.connections.values()],
            "inhibitors": [{"yoked_unit": i.yoked_unit, "accumulator": i.accumulator,
                            "threshold": i.threshold,
                            "refractory_remaining": i.refractory_remaining, "held": i.held}
                           for i in self.inhibitors.values()],
            "predicates": [{"po_unit": p.po_unit, "name": p.name, "provenance": p.provenance,
                            "bindings": p.bindings} for p in self.predicates.values()],
            "propositions": [{"p_unit": p.p_unit,
                              "roles": [[r.rb_unit, r.predicate, r.argument] for r in p.roles]}
                             for p in self.propositions.values()],
        }

    @classmethod
    def from_dict(cls, d):
        check_version(d)
        try:
            net = cls(DynamicsParams.from_dict(d.get("params", {})))
            for s in d.get("semantics", []):
                if isinstance(s, str):
                    net.add_semantic(s)
                else:
                    net.add_semantic(s["label"], s.get("id"), s.get("activation", 0.0))
            for t in d.get("tokens", []):
                net.add_token(t["layer"], t["bank"], t["id"], t.get("firing_bias", 0.0),
                              t.get("group", ""), t.get("name", ""), t.get("instance_of", ""),
                              t.get("activation", 0.0))
            for c in d.get("connections", []):
                for end in (c["source"], c["target"]):
                    if not net.has_unit(end):
                        raise UnknownUnit(f"connection references unknown unit {end!r}")
                net.connect(c["source"], c["target"], c["weight"], c["kind"])
            for i in d.get("inhibitors", []):
                inh = net.inhibitors.get(i["yoked_unit"])
                if inh is None:
                    raise UnknownUnit(f"inhibitor references unknown unit {i['yoked_unit']!r}")
                inh.accumulator = float(i["accumulator"])
                inh.threshold = float(i["threshold"])
                inh.refractory_remaining = int(i["refractory_remaining"])
                inh.held = bool(i["held"])
            for p in d.get("predicates", []):
                net.unit(p["po_unit"])
                net.predicates[p["po_unit"]] = Predicate(p["po_unit"], {}, list(p.get("provenance", [])),
                                                         p.get("name", ""), dict(p.get("bindings", {})))
                net.refresh_predicate(p["po_unit"])
            for p in d.get("propositions", []):
                roles = [Role(*r) for r in p["roles"]]
                for r in roles:
                    for uid in (r.rb_unit, r.predicate, r.argument):
                        net.unit(uid)
                net.propositions[p["p_unit"]] = Proposition(p["p_unit"], roles)
            net.next_id = int(d.get("next_id", len(net.tokens)))
        except (KeyError, TypeError) as e:
            if isinstance(e, UnknownUnit):
                raise
            raise SchemaError(f"malformed network document ({e!r})") from None
        return net


def _as_tuple(x):
    return x if isinstance(x, tuple) else (x,)


def check_version(d):
    if not isinstance(d, dict):
        raise SchemaError("top-level JSON value must be an object")
    v = d.get("format_version", FORMAT_VERSION)
    if v != FORMAT_VERSION:
        raise VersionError(f"unsupported format_version {v!r} (expected {FORMAT_VERSION})")


@dataclass
class NetworkSpec:
    """Declarative description of a network (same field names as the saved file)."""
    semantics: list = field(default_factory=list)
    tokens: list = field(default_factory=list)
    connections: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d):
        check_version(d)
        return cls(list(d.get("semantics", [])), list(d.get("tokens", [])),
                   list(d.get("connections", [])), dict(d.get("params", {})))

    def to_dict(self):
        return {"format_version": FORMAT_VERSION, "semantics": self.semantics,
                "tokens": self.tokens, "connections": self.connections, "params": self.params}


def build_network(spec: NetworkSpec | dict) -> Network:
    if isinstance(spec, dict):
        spec = NetworkSpec.from_dict(spec)
    return Network.from_dict({"format_version": FORMAT_VERSION, "params": spec.params,
                              "semantics": spec.semantics, "tokens": spec.tokens,
                              "connections": spec.connections})


def dumps_network(net: Network) -> str:
    return json.dumps(net.to_dict(), indent=2, sort_keys=True) + "\n"


def save_network(net: Network, path):
    Path(path).write_text(dumps_network(net))


def load_network(path) -> Network:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e}") from None
    return Network.from_dict(d)


def units_in(net: Network, ids: Iterable[str]):
    return [net.unit(u) for u in ids]
