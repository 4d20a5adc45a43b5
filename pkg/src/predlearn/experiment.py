"""Datasets, experiment configuration and the end-to-end pipeline."""
from __future__ import annotations

import json
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import learner as L
from .codec import CodecParams, Mode, roundtrip
from .errors import DanglingId, EmptyIntersection, ParseError, SchemaError, ValidationError
from .network import (FORMAT_VERSION, Bank, DynamicsParams, Network, dumps_network)
from .oscillation import FiringTrace, run

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


# ---- dataset ---------------------------------------------------------------
@dataclass
class Dataset:
    objects: dict = field(default_factory=dict)      # id -> {label: value}
    comparisons: list = field(default_factory=list)  # [(id, id)]
    eval_pairs: list = field(default_factory=list)   # [((id, id), label)]

    def labels(self):
        """Feature labels in order of first appearance."""
        out = {}
        for feats in self.objects.values():
            for l in feats:
                out.setdefault(l, None)
        return list(out)

    def to_dict(self):
        return {"objects": [{"id": i, "features": f} for i, f in self.objects.items()],
                "comparisons": [list(c) for c in self.comparisons],
                "eval_pairs": [{"pair": list(p), "label": l} for p, l in self.eval_pairs]}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _need(cond, msg, path):
    if not cond:
        raise SchemaError(msg, path)


def parse_dataset(d) -> Dataset:
    _need(isinstance(d, dict), "dataset must be a JSON object", "$")
    extra = set(d) - {"objects", "comparisons", "eval_pairs", "format_version"}
    _need(not extra, f"unknown field(s) {sorted(extra)}", "$")
    objs = d.get("objects", [])
    _need(isinstance(objs, list), "must be a list", "objects")
    ds = Dataset()
    for i, o in enumerate(objs):
        p = f"objects[{i}]"
        _need(isinstance(o, dict), "must be an object", p)
        _need(isinstance(o.get("id"), str) and o["id"], "missing or non-string id", p + ".id")
        _need(o["id"] not in ds.objects, f"duplicate id {o['id']!r}", p + ".id")
        feats = o.get("features", {})
        _need(isinstance(feats, dict), "must be an object", p + ".features")
        for k, v in feats.items():
            _need(isinstance(v, (int, float)) and not isinstance(v, bool) and 0.0 <= v <= 1.0,
                  "feature value must be a number in [0, 1]", f"{p}.features.{k}")
        ds.objects[o["id"]] = {k: float(v) for k, v in feats.items()}
    if not ds.objects:
        warnings.warn("dataset has no objects")

    def ref(x, path):
        _need(isinstance(x, str), "id must be a string", path)
        if x not in ds.objects:
            raise DanglingId(f"{path}: unknown object id {x!r}")
        return x

    comps = d.get("comparisons", [])
    _need(isinstance(comps, list), "must be a list", "comparisons")
    for i, c in enumerate(comps):
        p = f"comparisons[{i}]"
        _need(isinstance(c, list) and len(c) == 2, "must be a pair of ids", p)
        ds.comparisons.append((ref(c[0], p + "[0]"), ref(c[1], p + "[1]")))
    evs = d.get("eval_pairs", [])
    _need(isinstance(evs, list), "must be a list", "eval_pairs")
    for i, e in enumerate(evs):
        p = f"eval_pairs[{i}]"
        _need(isinstance(e, dict), "must be an object", p)
        pair = e.get("pair")
        _need(isinstance(pair, list) and len(pair) == 2, "must be a pair of ids", p + ".pair")
        _need(isinstance(e.get("label"), str), "missing or non-string label", p + ".label")
        ds.eval_pairs.append(((ref(pair[0], p + ".pair[0]"), ref(pair[1], p + ".pair[1]")), e["label"]))
    return ds


def ingest(path) -> Dataset:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e}") from None
    return parse_dataset(d)


# ---- synthetic task --------------------------------------------------------
DOMAINS = {"shapes": ["circle", "square", "triangle", "hexagon", "star", "oval", "cross",
                      "diamond", "arrow", "ring", "cube", "cone"],
           "textures": ["rough", "smooth", "striped", "dotted", "woven", "glossy", "matte",
                        "grainy", "furry", "scaly", "ridged", "porous"]}


def generate(seed=0, n_train=8, n_eval=40, n_magnitude=3, n_distractors=4):
    """Relative-magnitude task. Large objects carry the ``more`` features and
    small ones the ``less`` features (graded values), each plus distractors of
    their own domain. Training compares like with like in the shapes domain;
    evaluation pairs a large and a small texture object."""
    rng = np.random.default_rng(seed)
    mags = {r: [r] + [f"{r}.{i}" for i in range(2, n_magnitude + 1)] for r in ("more", "less")}
    objs, count = [], {}

    def make(domain, rel):
        count[domain] = count.get(domain, 0) + 1
        oid = f"{domain[:2]}{count[domain]:03d}"
        f = {l: round(float(rng.uniform(0.7, 1.0)), 3) for l in mags[rel]}
        for j in rng.choice(len(DOMAINS[domain]), n_distractors, replace=False):
            f[f"{domain}:{DOMAINS[domain][int(j)]}"] = round(float(rng.uniform(0.3, 1.0)), 3)
        objs.append({"id": oid, "features": f})
        return oid

    comps = []
    for _ in range(n_train):
        for rel in ("more", "less"):
            comps.append([make("shapes", rel), make("shapes", rel)])
    evals = []
    for _ in range(n_eval):
        big, small = make("textures", "more"), make("textures", "less")
        if rng.random() < 0.5:
            evals.append({"pair": [big, small], "label": "more"})
        else:
            evals.append({"pair": [small, big], "label": "less"})
    return parse_dataset({"objects": objs, "comparisons": comps, "eval_pairs": evals})


# ---- config ----------------------------------------------------------------
@dataclass
class ExperimentConfig:
    params: DynamicsParams = field(default_factory=DynamicsParams)
    learner: L.LearnerParams = field(default_factory=L.LearnerParams)
    codec: CodecParams = field(default_factory=CodecParams)
    seed: int = 0
    out_dir: str = "out"
    network_file: str = "network.json"
    trace_file: str = "trace.csv"
    report_file: str = "report.json"
    run_steps: int = 200          # free-running steps for the exported trace
    decode_pairs: int = 20        # eval pairs used for the decode roundtrip
    record_wall_time: bool = False

    _SCALARS = ("seed", "out_dir", "network_file", "trace_file", "report_file", "run_steps",
                "decode_pairs", "record_wall_time")

    def __post_init__(self):
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ValidationError("seed must be an integer")
        for name in ("run_steps", "decode_pairs"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise ValidationError(f"{name} must be a non-negative integer")

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise SchemaError("config must be a table/object", "$")
        extra = set(d) - {"params", "learner", "codec", "format_version", *cls._SCALARS}
        if extra:
            raise SchemaError(f"unknown field(s) {sorted(extra)}", "$")
        kw = {k: d[k] for k in cls._SCALARS if k in d}
        try:
            return cls(DynamicsParams.from_dict(d.get("params", {})),
                       L.LearnerParams.from_dict(d.get("learner", {})),
                       CodecParams.from_dict(d.get("codec", {})), **kw)
        except TypeError as e:
            raise SchemaError(str(e)) from None

    def to_dict(self):
        d = {k: getattr(self, k) for k in self._SCALARS}
        d.update(params=self.params.to_dict(), learner=self.learner.to_dict(), codec=self.codec.to_dict())
        return d


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        if str(path).endswith(".toml"):
            d = tomllib.loads(text)
        else:
            d = json.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ParseError(f"{path}: {e}") from None
    return ExperimentConfig.from_dict(d)


# ---- pipeline --------------------------------------------------------------
@dataclass
class MetricsReport:
    predicate_purity: dict
    decode_accuracy: float | None
    generalization_accuracy: float | None
    wall_time: float | None
    details: dict = field(default_factory=dict)

    def to_dict(self):
        d = {"format_version": FORMAT_VERSION, "predicate_purity": self.predicate_purity,
             "decode_accuracy": self.decode_accuracy,
             "generalization_accuracy": self.generalization_accuracy,
             "wall_time": self.wall_time}
        d.update(self.details)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def relation_of(pred):
    """Relation label of a predicate: its name without '.n' and '#n' suffixes."""
    return pred.name.split("#")[0].split(".")[0]


def build_pool(ds: Dataset, params=None):
    net = Network(params)
    for l in ds.labels():
        net.add_semantic(l)
    return net


def _token(net, cache, ds, oid, bank):
    key = (oid, bank)
    if key not in cache:
        cache[key] = L.present_item(net, ds.objects[oid], bank, name=oid)
    return cache[key]


def learn(ds: Dataset, cfg: ExperimentConfig | None = None, net: Network | None = None):
    """Run the listed comparisons in order. A comparison refines the best
    matching predicate (score of its intersection >= refine threshold) or
    else recruits a new one. Returns (network, log)."""
    cfg = cfg or ExperimentConfig()
    lp = cfg.learner
    net = net if net is not None else build_pool(ds, cfg.params)
    cache, log = {}, []
    for a, b in ds.comparisons:
        ua = _token(net, cache, ds, a, Bank.DRIVER)
        ub = _token(net, cache, ds, b, Bank.RECIPIENT)
        net.tokens[ua].activation = net.tokens[ub].activation = 1.0
        inter = L.intersection(net, ua, ub, lp.prune_threshold)
        best, score = None, -1.0
        for p in net.predicates.values():
            if inter and sum(p.semantic_weights.values()) > 0:
                s = L.apply_predicate(net, p, inter)
                if s > score:
                    best, score = p, s
        try:
            if best is not None and score >= lp.refine_threshold:
                L.refine_predicate(net, best, (ua, ub), lp)
                log.append({"pair": [a, b], "op": "refine", "predicate": best.po_unit,
                            "score": score})
            else:
                p = L.compare_and_learn(net, ua, ub, lp)
                log.append({"pair": [a, b], "op": "learn", "predicate": p.po_unit})
        except EmptyIntersection:
            log.append({"pair": [a, b], "op": "skip-empty"})
        net.tokens[ua].activation = net.tokens[ub].activation = 0.0
    for s in net.semantics.values():
        s.activation = 0.0
    return net, log


def purity(pred, ds: Dataset):
    """Weight on features present in every provenance item / total weight."""
    items = [i for ep in pred.provenance for i in ep["items"] if i in ds.objects]
    total = sum(pred.semantic_weights.values())
    if not items or total <= 0:
        return 0.0
    inv = set.intersection(*({l for l, v in ds.objects[i].items() if v > 0} for i in items))
    return sum(w for l, w in pred.semantic_weights.items() if l in inv) / total


def predicates_by_relation(net: Network):
    """relation -> predicate with the most provenance (first on ties)."""
    out = {}
    for p in net.predicates.values():
        r = relation_of(p)
        if r not in out or len(p.provenance) > len(out[r].provenance):
            out[r] = p
    return out


def classify(net: Network, pair_features, relations):
    """Relation R maximizing apply(R, a) - apply(R, b); None if nothing scores."""
    fa, fb = pair_features
    best, arg = None, None
    for r, p in sorted(relations.items()):
        s = L.apply_predicate(net, p, fa) - L.apply_predicate(net, p, fb)
        if best is None or s > best:
            best, arg = s, r
    return arg


def bound_copy(net: Network, ds: Dataset, pair, relations, lp=None):
    """Copy of ``net`` with the pair presented in the driver and each item bound
    to its best-fitting predicate, formed into one proposition."""
    work = net.copy()
    rbs = []
    for oid in pair:
        u = L.present_item(work, ds.objects[oid], Bank.DRIVER, name=oid)
        work.tokens[u].activation = 0.0
        p = max(sorted(relations.items()), key=lambda kv: L.apply_predicate(work, kv[1], ds.objects[oid]))[1]
        rbs.append(L.bind(work, p, u, lp))
    prop = L.form_relation(work, rbs, lp)
    work.reset_state()
    return work, prop


def run_experiment(cfg: ExperimentConfig, ds: Dataset, write=True):
    """Learn, evaluate, bind/run/decode, and write network, trace and report.

    The written network is the learned one plus the first evaluation pair
    bound into a driver proposition (the structure behind the trace).
    """
    t0 = time.perf_counter()
    out = Path(cfg.out_dir)
    paths = [out / cfg.network_file, out / cfg.trace_file, out / cfg.report_file]
    written = []
    try:
        net, log = learn(ds, cfg)
        details = {"seed": cfg.seed, "n_objects": len(ds.objects),
                   "n_comparisons": len(ds.comparisons), "n_eval_pairs": len(ds.eval_pairs),
                   "learning_log": log}
        preds = list(net.predicates.values())
        details["predicates"] = [{"unit": p.po_unit, "name": p.name, "relation": relation_of(p),
                                  "weights": p.semantic_weights, "comparisons": len(p.provenance)}
                                 for p in preds]
        pur = {p.po_unit: purity(p, ds) for p in preds}
        relations = predicates_by_relation(net)

        # one-shot generalization, audited for weight changes
        gen_acc = None
        before = net.checksum()
        if relations and ds.eval_pairs:
            hits = 0
            for pair, label in ds.eval_pairs:
                pred = classify(net, (ds.objects[pair[0]], ds.objects[pair[1]]), relations)
                hits += pred == label
            gen_acc = hits / len(ds.eval_pairs)
        after = net.checksum()
        if before != after:
            raise RuntimeError("evaluation changed network weights")
        details["weight_checksum"] = after
        details["eval_checksum_unchanged"] = True

        # bind -> run -> decode on copies
        dec_acc, trace = None, FiringTrace(net.params.dt, [], np.zeros((0, 0)))
        saved = net
        pairs = [p for p, _ in ds.eval_pairs][:cfg.decode_pairs]
        if relations and pairs:
            ok = 0
            for i, pair in enumerate(pairs):
                work, prop = bound_copy(net, ds, pair, relations, cfg.learner)
                try:
                    ok += roundtrip(work, [prop], cfg.codec, bank=Bank.DRIVER) == [prop]
                except Exception as e:   # an undecodable trace counts as a miss
                    if not isinstance(e, (ValidationError, RuntimeError)):
                        raise
                if i == 0 and cfg.run_steps > 0:
                    # the saved network carries this bound structure, so the
                    # exported trace can be decoded against it
                    trace, saved = run(work, {prop.p_unit: 1.0}, cfg.run_steps,
                                       sync=cfg.codec.mode is Mode.PHASE_LAG_0)
            dec_acc = ok / len(pairs)

        wall = round(time.perf_counter() - t0, 6) if cfg.record_wall_time else None
        report = MetricsReport(pur, dec_acc, gen_acc, wall, details)
        if write:
            out.mkdir(parents=True, exist_ok=True)
            for path, text in zip(paths, (dumps_network(saved), trace.to_csv(), report.to_json())):
                written.append(path)
                path.write_text(text)
        return report
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        raise
