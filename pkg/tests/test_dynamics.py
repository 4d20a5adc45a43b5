import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from structgen import pool, random_props
from predlearn import available_backends, step, step_inhibitors
from predlearn.dynamics import Simulator, compile_network
from predlearn.errors import UnknownUnit, ValidationError
from predlearn.network import Bank, DynamicsParams, Kind, Layer, Network
from predlearn.oscillation import run

BACKENDS = available_backends()


def single(params=None, layer=Layer.PO_OBJ):
    net = Network(params)
    net.add_token(layer, Bank.DRIVER, "u")
    return net


# Hand-derived Euler steps of a' = dt (ext - leak a), clipped at 1:
#   dt=.5 leak=.5: 0.5, 0.5 + .5(1 - .25) = 0.875, 0.875 + .5(1 - .4375) > 1 -> 1
#   dt=.1 leak=.3: 0.1, 0.1 + .1(1 - .03) = 0.197, 0.197 + .1(1 - .0591) = 0.29109
@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("params,want", [
    (None, [0.5, 0.875, 1.0]),
    (DynamicsParams(dt=0.1, leak=0.3), [0.1, 0.197, 0.29109]),
])
def test_single_unit_oracle(backend, params, want):
    net = single(params)
    got = [step(net, {"u": 1.0}, backend=backend)["u"] for _ in want]
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_bias_scales_net_input(backend):
    net = Network(DynamicsParams(dt=0.1))
    net.add_token(Layer.PO_PRED, Bank.DRIVER, "u", firing_bias=0.5)
    assert step(net, {"u": 1.0}, backend=backend)["u"] == pytest.approx(0.15, abs=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_inhibitor_fires_and_refires(backend):
    # constant activation 1, gain .1, threshold 1: fires on call 10, then
    # 10 refractory calls, then 10 more calls of accumulation
    net = single()
    net.tokens["u"].activation = 1.0
    fired = []
    for i in range(1, 41):
        step_inhibitors(net, backend=backend)
        if net.inhibitors["u"].refractory_remaining == net.params.refractory_len:
            fired.append(i)
    assert fired == [10, 30]


@pytest.mark.parametrize("backend", BACKENDS)
def test_refractory_clamps_to_zero(backend):
    net = single()
    net.tokens["u"].activation = 0.9
    net.inhibitors["u"].refractory_remaining = 3
    assert step(net, {"u": 1.0}, backend=backend)["u"] == 0.0


@pytest.mark.parametrize("backend", BACKENDS)
def test_lateral_winner_take_all(backend):
    net = Network()
    net.add_token(Layer.PO_OBJ, Bank.DRIVER, "a")
    net.add_token(Layer.PO_PRED, Bank.DRIVER, "b")          # same PO tier
    net.add_token(Layer.PO_OBJ, Bank.RECIPIENT, "c")        # other bank: no competition
    sim = Simulator(net, backend=backend)
    d = np.zeros((30, 3))
    d[:, 0], d[:, 1], d[:, 2] = 1.0, 0.6, 0.6
    act = sim.run(d)
    i = sim.c.index
    assert act[8, i["a"]] > 0.9 and act[8, i["b"]] == 0.0
    assert act[8, i["c"]] > 0.5


def test_semantic_flow_is_directional():
    net = pool(2)
    d = net.add_token(Layer.PO_OBJ, Bank.DRIVER, "d")
    r = net.add_token(Layer.PO_OBJ, Bank.RECIPIENT, "r")
    net.connect(d, "s:f0", 1.0, Kind.SEMANTIC)
    net.connect(r, "s:f0", 1.0, Kind.SEMANTIC)
    net.connect(r, "s:f1", 1.0, Kind.SEMANTIC)
    trace, _ = run(net.copy(), {d: 1.0}, 6)
    assert trace.col("s:f0")[-1] > 0 and trace.col("s:f1").max() == 0
    assert trace.col("r")[-1] > 0
    # a recipient token never feeds the pool
    trace, _ = run(net.copy(), {r: 1.0}, 6)
    assert trace.col("s:f0").max() == 0 and trace.col("d").max() == 0


def test_structural_flow_by_bank():
    net = Network()
    for b, tag in ((Bank.DRIVER, "d"), (Bank.RECIPIENT, "r")):
        net.add_token(Layer.RB, b, tag + "rb")
        net.add_token(Layer.PO_OBJ, b, tag + "po")
        net.connect(tag + "rb", tag + "po", 1.0, Kind.STRUCTURAL)
    trace, _ = run(net.copy(), {"drb": 1.0, "rrb": 1.0}, 4)
    assert trace.col("dpo")[-1] > 0           # driver: top-down
    assert trace.col("rpo").max() == 0        # elsewhere: bottom-up only
    trace, _ = run(net.copy(), {"rpo": 1.0}, 4)
    assert trace.col("rrb")[-1] > 0


def test_mapping_connections_ignored():
    net = Network()
    net.add_token(Layer.PO_OBJ, Bank.DRIVER, "a")
    net.add_token(Layer.PO_OBJ, Bank.RECIPIENT, "b")
    net.connect("a", "b", 1.0, Kind.MAPPING)
    trace, _ = run(net, {"a": 1.0}, 5)
    assert trace.col("b").max() == 0


def test_input_validation():
    net = single()
    with pytest.raises(UnknownUnit):
        step(net, {"zz": 1.0})
    with pytest.raises(ValidationError):
        step(net, {"u": 1.5})
    with pytest.raises(ValidationError):
        Simulator(net, backend="gpu")


def test_compile_layout_follows_insertion_order():
    net = pool(3)
    net.add_token(Layer.P, Bank.DRIVER, "p")
    c = compile_network(net)
    assert c.unit_ids == ["s:f0", "s:f1", "s:f2", "p"]


# ---- properties -------------------------------------------------------------
def random_net(seed, n_roles):
    rng = np.random.default_rng(seed)
    net = pool(12)
    props = random_props(rng, net, n_roles=n_roles)
    random_props(rng, net, Bank.RECIPIENT, n_roles=max(1, n_roles - 1))
    return net, props, rng


net_cases = st.tuples(st.integers(0, 10_000), st.integers(1, 4), st.booleans())


@given(net_cases)
def test_activations_bounded(case):
    seed, k, sync = case
    net, props, rng = random_net(seed, k)
    drive = {p.p_unit: float(rng.uniform(0.2, 1.0)) for p in props}
    trace, _ = run(net, drive, 80, sync=sync)
    assert trace.activations.min() >= 0.0 and trace.activations.max() <= 1.0


@given(net_cases)
def test_runs_deterministic(case):
    seed, k, sync = case
    net, props, _ = random_net(seed, k)
    drive = {p.p_unit: 1.0 for p in props}
    a, _ = run(net.copy(), drive, 60, sync=sync)
    b, _ = run(net.copy(), drive, 60, sync=sync)
    assert np.array_equal(a.activations, b.activations)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernel not built")
@settings(max_examples=40)
@given(net_cases)
def test_backends_bit_identical(case):
    seed, k, sync = case
    net, props, _ = random_net(seed, k)
    drive = {p.p_unit: 1.0 for p in props}
    a, na = run(net.copy(), drive, 120, sync=sync, backend="compiled")
    b, nb = run(net.copy(), drive, 120, sync=sync, backend="python")
    assert np.array_equal(a.activations, b.activations)
    assert na.to_dict() == nb.to_dict()


@given(net_cases)
def test_run_commits_state(case):
    seed, k, sync = case
    net, props, _ = random_net(seed, k)
    drive = {p.p_unit: 1.0 for p in props}
    full, _ = run(net.copy(), drive, 40, sync=sync)
    work = net.copy()
    _, work = run(work, drive, 25, sync=sync)
    rest, _ = run(work, drive, 15, sync=sync)
    assert np.array_equal(full.activations[25:], rest.activations)


def test_pure_python_fallback_selected_by_env():
    import os
    import subprocess
    import sys
    env = dict(os.environ, PREDLEARN_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import predlearn; print(predlearn.default_backend(), "
                          "predlearn.available_backends())"], env=env, capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip() == "python ['python']"
