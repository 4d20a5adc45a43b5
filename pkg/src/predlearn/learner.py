"""Predicate discovery by intersective comparison, refinement, binding and application."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, asdict, fields

import numpy as np

from .errors import (ArityExceeded, DimensionMismatch, EmptyIntersection, SchemaError,
                     UnknownLabel, UnknownUnit, ValidationError, ZeroWeightPredicate)
from .network import (Bank, Kind, Layer, Network, PO_LAYERS, Predicate, Proposition, Role)


@dataclass
class LearnerParams:
    refinement_rate: float = 0.3     # eta
    prune_threshold: float = 0.01    # epsilon_prune
    apply_threshold: float = 0.8     # theta_apply
    # a comparison refines the best predicate if it scores the pair's
    # intersection at least this high, else recruits a new predicate
    refine_threshold: float = 0.5
    max_arity: int = 3
    # structural weights of recruited units
    role_weight: float = 0.6         # RB - PO
    relation_weight: float = 0.5     # P - RB, before the role-order factor
    role_priority: float = 0.2       # earlier roles get P - RB weight x (1 + priority * (arity - rank))
    predicate_bias: float = 0.5      # firing_bias of recruited predicate units

    def __post_init__(self):
        if not 0.0 < self.refinement_rate <= 1.0:
            raise ValidationError("learner.refinement_rate must lie in (0, 1]")
        if not 0.0 <= self.prune_threshold < 1.0:
            raise ValidationError("learner.prune_threshold must lie in [0, 1)")
        for name in ("apply_threshold", "refine_threshold"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"learner.{name} must lie in [0, 1]")
        if int(self.max_arity) != self.max_arity or self.max_arity < 1:
            raise ValidationError("learner.max_arity must be an integer >= 1")
        for name in ("role_weight", "relation_weight"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ValidationError(f"learner.{name} must lie in (0, 1]")
        if self.role_priority < 0 or self.predicate_bias < 0:
            raise ValidationError("learner.role_priority and predicate_bias must be >= 0")
        self.max_arity = int(self.max_arity)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        extra = set(d) - {f.name for f in fields(cls)}
        if extra:
            raise SchemaError(f"unknown parameter(s) {sorted(extra)}", "learner")
        return cls(**d)


def check_features(net: Network, item: dict):
    """Validate a feature vector (label -> value in [0, 1]) against the pool."""
    out = {}
    for label, v in item.items():
        if net.semantic_id(label) is None:
            raise UnknownLabel(f"feature {label!r} is not in the semantic pool")
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0.0 <= v <= 1.0:
            raise ValidationError(f"feature {label!r} value {v!r} outside [0, 1]")
        out[label] = float(v)
    return out


def present_item(net: Network, item: dict, bank=Bank.DRIVER, name=""):
    """Load a feature vector as a PO_OBJ token; returns the token id.

    The token is left fully active and its features take the listed values.
    """
    item = check_features(net, item)
    if not item:
        warnings.warn(f"item {name!r} has no features; its unit gets no semantic connections")
    uid = net.add_token(Layer.PO_OBJ, bank, name=name, activation=1.0)
    for label, v in item.items():
        sid = net.semantic_id(label)
        if v > 0:
            net.connect(uid, sid, v, Kind.SEMANTIC)
        net.semantics[sid].activation = v
    return uid


def _unit_id(x):
    return x.po_unit if isinstance(x, Predicate) else x


def _evoked(net: Network, uid):
    """Feature activations a token drives at its current activation."""
    a = net.tokens[uid].activation
    return {l: a * w for l, w in net.semantic_weights(uid).items()}


def intersection(net: Network, unit_a, unit_b, prune=0.0):
    """min over the two items' effective feature activations, in pool order."""
    ea, eb = _evoked(net, unit_a), _evoked(net, unit_b)
    out = {}
    for label in net.labels():
        v = min(ea.get(label, 0.0), eb.get(label, 0.0))
        if v > 0 and v >= prune:
            out[label] = v
    return out


def _name_for(weights: dict, taken=()):
    if not weights:
        return ""
    top = max(weights.values())
    base = next(l for l, w in weights.items() if w == top)
    name, i = base, 2
    while name in taken:
        name, i = f"{base}#{i}", i + 1
    return name


def _coactivate(net, *uids):
    for u in uids:
        if u not in net.tokens:
            raise UnknownUnit(f"unknown item unit {u!r}")
        net.tokens[u].activation = 1.0


def compare_and_learn(net: Network, item_a, item_b, lp: LearnerParams | None = None, name=None):
    """Recruit a MEMORY predicate unit holding the intersection of two presented items."""
    lp = lp or LearnerParams()
    _coactivate(net, item_a, item_b)
    inter = intersection(net, item_a, item_b, lp.prune_threshold)
    if not inter:
        raise EmptyIntersection(f"items {item_a!r} and {item_b!r} share no feature above "
                                f"{lp.prune_threshold}")
    taken = {p.name for p in net.predicates.values()}
    name = name or _name_for(inter, taken)
    uid = net.add_token(Layer.PO_PRED, Bank.MEMORY, firing_bias=lp.predicate_bias, name=name)
    for label, v in inter.items():
        net.connect(uid, net.semantic_id(label), v, Kind.SEMANTIC)
    net.predicates[uid] = Predicate(uid, {}, [{"op": "compare", "items": _names(net, item_a, item_b)}],
                                    name, {})
    return net.refresh_predicate(uid)


def _names(net, *uids):
    return [net.tokens[u].name or u for u in uids]


def refine_predicate(net: Network, predicate, item_pair, lp: LearnerParams | None = None):
    """Move the weights toward a new pair's intersection: w <- (1 - eta) w + eta i_new."""
    lp = lp or LearnerParams()
    uid = _unit_id(predicate)
    if uid not in net.predicates:
        raise UnknownUnit(f"{uid!r} is not a learned predicate")
    a, b = item_pair
    _coactivate(net, a, b)
    inter = intersection(net, a, b, lp.prune_threshold)
    if not inter:
        raise EmptyIntersection(f"items {a!r} and {b!r} share no feature above {lp.prune_threshold}")
    eta = lp.refinement_rate
    old = net.semantic_weights(uid)
    for label in net.labels():
        w, i = old.get(label, 0.0), inter.get(label, 0.0)
        if w == 0.0 and i == 0.0:
            continue
        net.connect(uid, net.semantic_id(label), min(1.0, w * (1.0 - eta) + eta * i), Kind.SEMANTIC)
    pred = net.predicates[uid]
    pred.provenance.append({"op": "refine", "items": _names(net, a, b)})
    return net.refresh_predicate(uid)


def instantiate(net: Network, predicate, bank):
    """Token copy of a memory predicate in another bank (same feature weights)."""
    uid = _unit_id(predicate)
    src = net.tokens[uid]
    new = net.add_token(Layer.PO_PRED, bank, firing_bias=src.firing_bias, name=src.name,
                        instance_of=uid)
    for label, w in net.semantic_weights(uid).items():
        net.connect(new, net.semantic_id(label), w, Kind.SEMANTIC)
    return new


def bind(net: Network, predicate, argument, lp: LearnerParams | None = None):
    """Recruit an RB joining a predicate and an argument; returns the RB id.

    If the predicate lives in another bank than the argument, a token copy is
    made in the argument's bank (and removed again by ``unbind``).
    """
    lp = lp or LearnerParams()
    pid = _unit_id(predicate)
    for u in (pid, argument):
        if u not in net.tokens:
            raise UnknownUnit(f"unknown unit {u!r}")
    pt, at = net.tokens[pid], net.tokens[argument]
    if pt.layer is not Layer.PO_PRED or at.layer not in PO_LAYERS:
        raise ValidationError("bind expects a PO_PRED predicate and a PO argument")
    if pt.bank != at.bank:
        pid = instantiate(net, pid, at.bank)
    rb = net.add_token(Layer.RB, at.bank)
    net.connect(rb, pid, lp.role_weight, Kind.STRUCTURAL)
    net.connect(rb, argument, lp.role_weight, Kind.STRUCTURAL)
    mem = net.tokens[pid].instance_of or pid
    if mem in net.predicates:
        b = net.predicates[mem].bindings
        key = at.name or argument
        b[key] = b.get(key, 0) + 1
    return rb


def role_of(net: Network, rb):
    """(predicate unit, argument unit) under an RB."""
    pred = [u for u in net.structural_neighbors(rb, Layer.PO_PRED)]
    arg = [u for u in net.structural_neighbors(rb, PO_LAYERS) if u not in pred]
    if len(pred) != 1 or len(arg) != 1:
        raise ValidationError(f"RB {rb!r} does not join exactly one predicate and one argument")
    return pred[0], arg[0]


def unbind(net: Network, rb):
    """Destroy a role binding. Copied predicate tokens go with it, and so does
    any proposition that used the RB."""
    if rb not in net.tokens or net.tokens[rb].layer is not Layer.RB:
        raise UnknownUnit(f"{rb!r} is not an RB unit")
    pred, _ = role_of(net, rb)
    for p_unit, prop in list(net.propositions.items()):
        if any(r.rb_unit == rb for r in prop.roles):
            del net.propositions[p_unit]
            net.remove_unit(p_unit)
    net.remove_unit(rb)
    if net.tokens[pred].instance_of and not net.structural_neighbors(pred):
        net.remove_unit(pred)


def form_relation(net: Network, rb_list, lp: LearnerParams | None = None):
    """New P unit over ordered RBs. Role order is written into the new P-RB
    weights (earlier roles get larger weights), so existing units stay untouched."""
    lp = lp or LearnerParams()
    rb_list = list(rb_list)
    if not rb_list:
        raise ValidationError("form_relation needs at least one RB")
    if len(rb_list) > lp.max_arity:
        raise ArityExceeded(f"{len(rb_list)} roles exceed max arity {lp.max_arity}")
    if len(set(rb_list)) != len(rb_list):
        raise ValidationError("duplicate RB in role list")
    banks = set()
    for rb in rb_list:
        if rb not in net.tokens or net.tokens[rb].layer is not Layer.RB:
            raise UnknownUnit(f"{rb!r} is not an RB unit")
        banks.add(net.tokens[rb].bank)
    if len(banks) != 1:
        raise ValidationError("all RBs of a proposition must live in one bank")
    k = len(rb_list)
    p = net.add_token(Layer.P, banks.pop())
    roles = []
    for rank, rb in enumerate(rb_list):
        w = lp.relation_weight * (1.0 + lp.role_priority * (k - rank))
        net.connect(p, rb, min(w, 1.0), Kind.STRUCTURAL)
        pred, arg = role_of(net, rb)
        roles.append(Role(rb, pred, arg))
    prop = Proposition(p, roles)
    net.propositions[p] = prop
    return prop


def predicate_weights(net: Network | None, predicate):
    if isinstance(predicate, Predicate) and (net is None or predicate.po_unit not in net.tokens):
        return dict(predicate.semantic_weights)
    return net.semantic_weights(_unit_id(predicate))


def apply_predicate(net: Network, predicate, novel_item) -> float:
    """Match score sum_s w(s) act(s) / sum_s w(s); reads only, never writes.

    ``novel_item`` is a feature dict or the id of a presented token, whose
    evoked feature activations are then used.
    """
    w = predicate_weights(net, predicate)
    total = sum(w.values())
    if total <= 0:
        raise ZeroWeightPredicate(f"predicate {_unit_id(predicate)!r} has no positive weights")
    if isinstance(novel_item, str):
        if novel_item not in net.tokens:
            raise UnknownUnit(f"unknown item unit {novel_item!r}")
        act = {l: v for l, v in net.semantic_weights(novel_item).items()}
    else:
        act = check_features(net, novel_item) if net is not None else dict(novel_item)
    return sum(wv * act.get(l, 0.0) for l, wv in w.items()) / total


def should_bind(score, lp: LearnerParams | None = None):
    return score >= (lp or LearnerParams()).apply_threshold


@dataclass
class ComposedStructure:
    superposition: np.ndarray
    storage: np.ndarray

    def retrieve(self, pred_vec):
        """Argument vector stored under a predicate vector: T^T p, unit-normalized."""
        p = np.asarray(pred_vec, dtype=np.float64)
        if p.shape != (self.storage.shape[0],):
            raise DimensionMismatch(f"predicate vector has shape {p.shape}, "
                                    f"expected ({self.storage.shape[0]},)")
        r = self.storage.T @ p
        n = np.linalg.norm(r)
        return r / n if n > 0 else r


def compose_vectors(roles) -> ComposedStructure:
    """Sum of (pred + arg) vectors for reading out, sum of outer(pred, arg) for storage."""
    roles = [(np.asarray(p, dtype=np.float64), np.asarray(a, dtype=np.float64)) for p, a in roles]
    if not roles:
        raise DimensionMismatch("no roles to compose")
    d = roles[0][0].shape
    for p, a in roles:
        if p.ndim != 1 or p.shape != d or a.shape != d:
            raise DimensionMismatch(f"role vectors must all be 1-d of shape {d}")
    sup = np.zeros(d[0])
    T = np.zeros((d[0], d[0]))
    for p, a in roles:
        sup += p + a
        T += np.outer(p, a)
    return ComposedStructure(sup, T)
