import numpy as np
import pytest
from hypothesis import given, strategies as st

from structgen import pool
from predlearn import learner as L
from predlearn.errors import (ArityExceeded, DimensionMismatch, EmptyIntersection, UnknownLabel,
                              UnknownUnit, ValidationError, ZeroWeightPredicate)
from predlearn.network import Bank, Kind, Layer

pytestmark = pytest.mark.filterwarnings("ignore:item .* has no features")

LABELS = [f"f{i}" for i in range(8)]
vec = st.lists(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]) | st.floats(0, 1), min_size=8, max_size=8)


def feats(v):
    return {l: x for l, x in zip(LABELS, v) if x > 0}


def test_present_item_sets_pool():
    net = pool(8)
    u = L.present_item(net, {"f1": 0.5, "f3": 0.0}, name="it")
    assert net.tokens[u].activation == 1.0 and net.tokens[u].layer is Layer.PO_OBJ
    assert net.semantic_weights(u) == {"f1": 0.5}
    assert net.semantics["s:f1"].activation == 0.5


@pytest.mark.parametrize("item,exc", [({"nope": 1.0}, UnknownLabel), ({"f0": 1.2}, ValidationError),
                                      ({"f0": True}, ValidationError)])
def test_bad_items(item, exc):
    with pytest.raises(exc):
        L.present_item(pool(8), item)


def test_empty_item_warns():
    with pytest.warns(UserWarning):
        L.present_item(pool(8), {})


@given(vec, vec)
def test_intersection_is_elementwise_min(va, vb):
    net = pool(8)
    a = L.present_item(net, feats(va))
    b = L.present_item(net, feats(vb), Bank.RECIPIENT)
    want = {l: min(x, y) for l, x, y in zip(LABELS, va, vb) if min(x, y) > 0}
    try:
        pred = L.compare_and_learn(net, a, b, L.LearnerParams(prune_threshold=0.0))
    except EmptyIntersection:
        assert want == {}
        return
    assert pred.semantic_weights == want
    assert net.tokens[pred.po_unit].bank is Bank.MEMORY
    assert net.tokens[pred.po_unit].firing_bias == 0.5


def test_prune_and_provenance():
    net = pool(8)
    a = L.present_item(net, {"f0": 1.0, "f1": 0.005}, name="A")
    b = L.present_item(net, {"f0": 0.8, "f1": 1.0}, Bank.RECIPIENT, name="B")
    p = L.compare_and_learn(net, a, b)
    assert p.semantic_weights == {"f0": 0.8}
    assert p.name == "f0" and p.provenance == [{"op": "compare", "items": ["A", "B"]}]
    p2 = L.compare_and_learn(net, a, b)
    assert p2.name == "f0#2"


def test_empty_intersection():
    net = pool(8)
    a = L.present_item(net, {"f0": 1.0})
    b = L.present_item(net, {"f1": 1.0})
    with pytest.raises(EmptyIntersection):
        L.compare_and_learn(net, a, b)
    assert not net.predicates


@given(vec, vec, st.floats(0.05, 1.0), st.integers(1, 12))
def test_refinement_closed_form(v0, v1, eta, n):
    # repeating one pair n times: w_n = i + (w_0 - i)(1 - eta)^n per feature
    net = pool(8)
    lp = L.LearnerParams(refinement_rate=eta, prune_threshold=0.0)
    a = L.present_item(net, feats(v0))
    b = L.present_item(net, feats(v0), Bank.RECIPIENT)
    try:
        p = L.compare_and_learn(net, a, b, lp)
        c = L.present_item(net, feats(v1))
        d = L.present_item(net, feats(v1), Bank.RECIPIENT)
        for _ in range(n):
            p = L.refine_predicate(net, p, (c, d), lp)
    except EmptyIntersection:
        return
    for l, w0, i in zip(LABELS, v0, v1):
        assert p.semantic_weights.get(l, 0.0) == pytest.approx(i + (w0 - i) * (1 - eta) ** n, abs=1e-12)
    assert len(p.provenance) == n + 1 and p.provenance[-1]["op"] == "refine"


def test_refine_errors():
    net = pool(8)
    a = L.present_item(net, {"f0": 1.0})
    with pytest.raises(UnknownUnit):
        L.refine_predicate(net, a, (a, a))


def learned(net=None):
    net = net or pool(8)
    a = L.present_item(net, {"f0": 1.0, "f1": 0.5})
    b = L.present_item(net, {"f0": 1.0, "f1": 1.0}, Bank.RECIPIENT)
    return net, L.compare_and_learn(net, a, b)


def test_apply_score_and_purity():
    net, p = learned()
    c = net.checksum()
    assert L.apply_predicate(net, p, {"f0": 1.0}) == pytest.approx(1.0 / 1.5)
    assert L.apply_predicate(net, p, {"f0": 1.0, "f1": 1.0}) == pytest.approx(1.0)
    assert L.apply_predicate(None, p, {"f0": 1.0, "f1": 1.0}) == pytest.approx(1.0)
    assert L.should_bind(0.8) and not L.should_bind(0.79)
    assert net.checksum() == c


@given(vec, vec)
def test_apply_score_in_unit_interval(vp, vi):
    net = pool(8)
    a = L.present_item(net, feats(vp))
    try:
        p = L.compare_and_learn(net, a, a)
    except EmptyIntersection:
        return
    s = L.apply_predicate(net, p, feats(vi))
    assert 0.0 <= s <= 1.0 + 1e-12


def test_apply_errors():
    net = pool(8)
    u = net.add_token(Layer.PO_PRED, Bank.MEMORY)
    with pytest.raises(ZeroWeightPredicate):
        L.apply_predicate(net, u, {"f0": 1.0})
    _, p = learned(net)
    with pytest.raises(UnknownUnit):
        L.apply_predicate(net, p, "nope")
    with pytest.raises(UnknownLabel):
        L.apply_predicate(net, p, {"zz": 1.0})


def test_bind_unbind_cross_bank():
    net, p = learned()
    arg = L.present_item(net, {"f2": 1.0}, name="x")
    c = net.checksum()
    n_tokens = len(net.tokens)
    rb = L.bind(net, p, arg)
    pred, a = L.role_of(net, rb)
    assert a == arg and net.tokens[pred].instance_of == p.po_unit
    assert net.tokens[pred].bank is Bank.DRIVER
    assert net.semantic_weights(pred) == p.semantic_weights
    assert net.weight(rb, pred, Kind.STRUCTURAL) == 0.6
    assert p.bindings == {"x": 1}
    prop = L.form_relation(net, [rb])
    L.unbind(net, rb)
    assert prop.p_unit not in net.tokens and prop.p_unit not in net.propositions
    assert len(net.tokens) == n_tokens and net.checksum() == c


def test_bind_errors():
    net, p = learned()
    arg = L.present_item(net, {"f2": 1.0})
    with pytest.raises(ValidationError):
        L.bind(net, arg, p.po_unit)
    with pytest.raises(UnknownUnit):
        L.bind(net, p, "nope")
    with pytest.raises(UnknownUnit):
        L.unbind(net, arg)


def test_form_relation_weights_and_arity():
    net, p = learned()
    rbs = [L.bind(net, p, L.present_item(net, {f"f{i}": 1.0})) for i in range(4)]
    prop = L.form_relation(net, rbs[:3])
    ws = [net.weight(prop.p_unit, rb, Kind.STRUCTURAL) for rb in rbs[:3]]
    assert ws == pytest.approx([0.8, 0.7, 0.6])       # 0.5 (1 + 0.2 (3 - rank))
    assert [r.rb_unit for r in prop.roles] == rbs[:3]
    with pytest.raises(ArityExceeded):
        L.form_relation(net, rbs)
    with pytest.raises(ValidationError):
        L.form_relation(net, [rbs[0], rbs[0]])
    with pytest.raises(ValidationError):
        L.form_relation(net, [])


def test_form_relation_one_bank():
    net, p = learned()
    r1 = L.bind(net, p, L.present_item(net, {"f2": 1.0}))
    r2 = L.bind(net, p, L.present_item(net, {"f3": 1.0}, Bank.RECIPIENT))
    with pytest.raises(ValidationError):
        L.form_relation(net, [r1, r2])


@pytest.mark.parametrize("kw", [{"refinement_rate": 0}, {"prune_threshold": 1.0}, {"max_arity": 0},
                                {"apply_threshold": 1.5}, {"role_weight": 0}])
def test_params_validated(kw):
    with pytest.raises(ValidationError):
        L.LearnerParams(**kw)


def test_params_roundtrip():
    lp = L.LearnerParams(refinement_rate=0.2)
    assert L.LearnerParams.from_dict(lp.to_dict()) == lp


@given(st.integers(1, 4), st.integers(0, 1000))
def test_compose_retrieves_orthogonal_arguments(k, seed):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(2 * k + 2, 2 * k + 2)))
    roles = [(Q[:, 2 * i], Q[:, 2 * i + 1]) for i in range(k)]
    cs = L.compose_vectors(roles)
    assert np.allclose(cs.superposition, sum(p + a for p, a in roles))
    for p, a in roles:
        assert np.allclose(cs.retrieve(p), a)


def test_compose_errors():
    with pytest.raises(DimensionMismatch):
        L.compose_vectors([])
    with pytest.raises(DimensionMismatch):
        L.compose_vectors([(np.ones(3), np.ones(4))])
    with pytest.raises(DimensionMismatch):
        L.compose_vectors([(np.ones(3), np.ones(3))]).retrieve(np.ones(2))


def test_predicate_survives_removal_of_source_items():
    net = pool(8)
    a = L.present_item(net, {"f0": 1.0, "f1": 0.5})
    b = L.present_item(net, {"f0": 1.0, "f1": 1.0}, Bank.RECIPIENT)
    p = L.compare_and_learn(net, a, b)
    before = L.apply_predicate(net, p, {"f0": 1.0})
    net.remove_unit(a)
    net.remove_unit(b)
    assert L.apply_predicate(net, p, {"f0": 1.0}) == before
    rb = L.bind(net, p, L.present_item(net, {"f2": 1.0}))
    assert L.role_of(net, rb)[0] in net.tokens
