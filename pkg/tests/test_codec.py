import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from structgen import pool, random_props
from predlearn.codec import CodecParams, FiringSchedule, Mode, decode, encode, roundtrip
from predlearn.errors import AmbiguousTrace, CapacityExceeded, UnknownUnit, ValidationError
from predlearn.network import Bank, Proposition, Role
from predlearn.oscillation import FiringTrace

P = Proposition("p", [Role("rb1", "a", "x"), Role("rb2", "b", "y")])


def test_encode_lag1_frozen():
    s = encode([P], Mode.PHASE_LAG_1, CodecParams(slot_width=3, gap=1, rest=2))
    assert s.intervals == {"a": [(0, 3)], "x": [(4, 7)], "rb1": [(0, 7)],
                           "b": [(9, 12)], "y": [(13, 16)], "rb2": [(9, 16)], "p": [(0, 16)]}
    assert s.horizon == 18 - 2


def test_encode_lag0_frozen():
    s = encode([P], Mode.PHASE_LAG_0, CodecParams(mode=Mode.PHASE_LAG_0, slot_width=4))
    assert s.intervals == {"a": [(0, 4)], "x": [(0, 4)], "rb1": [(0, 4)],
                           "b": [(4, 8)], "y": [(4, 8)], "rb2": [(4, 8)], "p": [(0, 8)]}


def test_encode_errors():
    with pytest.raises(CapacityExceeded):
        encode([P, Proposition("q", [Role(f"r{i}", f"c{i}", f"z{i}") for i in range(3)])])
    with pytest.raises(ValidationError):
        encode([P, Proposition("q", [Role("rb3", "a", "z")])])            # unit reuse
    with pytest.raises(ValidationError):
        encode([Proposition("q", [Role("r", "a", "a")])])
    with pytest.raises(ValidationError):
        encode([Proposition("q", [])])


@pytest.mark.parametrize("kw", [{"slot_width": 0}, {"gap": -1}, {"mode": "X"}, {"amplitude": 0},
                                {"k_max": 1.5}])
def test_params_validated(kw):
    with pytest.raises(ValidationError):
        CodecParams(**kw)


def test_schedule_json_and_drive():
    s = encode([P], Mode.PHASE_LAG_1, CodecParams(amplitude=0.8))
    back = FiringSchedule.from_json(s.to_json())
    assert back == s
    D = s.drive_matrix({u: i for i, u in enumerate(sorted(s.intervals))}, s.horizon)
    assert set(np.unique(D)) == {0.0, 0.8}
    with pytest.raises(UnknownUnit):
        s.drive_matrix({"a": 0}, 5)
    with pytest.raises(ValidationError):
        FiringSchedule(Mode.PHASE_LAG_1, {"a": [(3, 2)]})


def ideal_trace(net, props, cp, order=None):
    """Raster equal to the schedule itself (activation 1 while driven)."""
    s = encode(props, cp.mode, cp)
    ids = list(net.tokens)
    A = s.drive_matrix({u: i for i, u in enumerate(ids)}, s.horizon)
    return FiringTrace(0.5, ids, A)


def one_prop(seed=0, n_roles=2):
    rng = np.random.default_rng(seed)
    net = pool(12)
    return net, random_props(rng, net, n_roles=n_roles, max_props=1)


@pytest.mark.parametrize("mode", list(Mode))
def test_decode_ideal_raster(mode):
    net, props = one_prop()
    cp = CodecParams(mode=mode)
    assert decode(ideal_trace(net, props, cp), net, mode, cp) == props


def test_forged_swapped_order_changes_binding():
    # argument fired before predicate: the decoder reads the first as the predicate
    net, props = one_prop(3, n_roles=1)
    r = props[0].roles[0]
    swapped = [Proposition(props[0].p_unit, [Role(r.rb_unit, r.argument, r.predicate)])]
    cp = CodecParams()
    out = decode(ideal_trace(net, swapped, cp), net, Mode.PHASE_LAG_1, cp)
    assert out[0].roles[0].predicate == r.argument
    assert out != props


def test_decode_odd_bursts_ambiguous():
    net, props = one_prop()
    cp = CodecParams()
    tr = ideal_trace(net, props, cp)
    A = np.concatenate([tr.activations, np.zeros((60, len(tr.unit_ids)))])
    A[tr.n_steps + 5:tr.n_steps + 8, tr.unit_ids.index(props[0].roles[0].predicate)] = 1.0
    with pytest.raises(AmbiguousTrace) as e:
        decode(FiringTrace(0.5, tr.unit_ids, A), net, Mode.PHASE_LAG_1, cp)
    assert e.value.timesteps


def test_decode_trailing_burst_dropped():
    net, props = one_prop()
    cp = CodecParams()
    tr = ideal_trace(net, props, cp)
    A = np.concatenate([tr.activations, np.zeros((4, len(tr.unit_ids)))])
    A[-3:, tr.unit_ids.index(props[0].roles[0].predicate)] = 1.0
    A[-3:, tr.unit_ids.index(props[0].p_unit)] = 1.0
    assert decode(FiringTrace(0.5, tr.unit_ids, A), net, Mode.PHASE_LAG_1, cp) == props


def test_decode_sync_cluster_needs_pred_and_obj():
    net, props = one_prop(n_roles=2)
    cp = CodecParams(mode=Mode.PHASE_LAG_0)
    tr = ideal_trace(net, props, cp)
    A = tr.activations.copy()
    r0, r1 = props[0].roles
    A[:, tr.unit_ids.index(r1.argument)] = A[:, tr.unit_ids.index(r0.argument)]
    A[:, tr.unit_ids.index(r1.predicate)] = 0.0
    with pytest.raises(AmbiguousTrace):
        decode(FiringTrace(0.5, tr.unit_ids, A), net, Mode.PHASE_LAG_0, cp)


def test_decode_without_p_burst():
    net, props = one_prop()
    cp = CodecParams()
    tr = ideal_trace(net, props, cp)
    A = tr.activations.copy()
    A[:, tr.unit_ids.index(props[0].p_unit)] = 0.0
    with pytest.raises(AmbiguousTrace):
        decode(FiringTrace(0.5, tr.unit_ids, A), net, Mode.PHASE_LAG_1, cp)


@pytest.mark.parametrize("mode", list(Mode))
def test_roundtrip_leaves_network_untouched(mode):
    net, props = one_prop(5, n_roles=3)
    c, d = net.checksum(), net.to_dict()
    assert roundtrip(net, props, CodecParams(mode=mode)) == props
    assert net.checksum() == c and net.to_dict() == d


def test_roundtrip_empty():
    assert roundtrip(pool(3), []) == []


@settings(max_examples=30)
@given(st.integers(0, 10_000), st.sampled_from(list(Mode)), st.sampled_from([Bank.DRIVER, Bank.RECIPIENT]))
def test_roundtrip_property(seed, mode, bank):
    rng = np.random.default_rng(seed)
    net = pool(12)
    props = random_props(rng, net, bank)
    assert roundtrip(net, props, CodecParams(mode=mode)) == props
