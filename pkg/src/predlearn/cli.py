"""Command line entry point: ``predlearn <subcommand> ...``.

Exit codes: 0 success, 2 invalid input, 1 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import learner as L
from .codec import CodecParams, Mode, decode
from .errors import ParseError, SimulationError, ValidationError
from .experiment import (ExperimentConfig, generate, ingest, learn, load_config, run_experiment)
from .mapping import MappingTable, accumulate_hypotheses, best_mapping, update_mapping_weights
from .network import Layer, load_network, save_network
from .oscillation import export_raster, load_trace, run


def _config(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out_dir", None) is not None:
        cfg.out_dir = args.out_dir
    return cfg


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e}") from None


def cmd_gen(args):
    cfg = _config(args)
    ds = generate(cfg.seed, args.n_train, args.n_eval)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "dataset.json").write_text(ds.to_json())
    print(out / "dataset.json")


def cmd_learn(args):
    cfg = _config(args)
    net, log = learn(ingest(args.dataset), cfg)
    save_network(net, args.out)
    for p in net.predicates.values():
        print(f"{p.po_unit}\t{p.name}\t{len(p.provenance)}")


def cmd_run(args):
    cfg = _config(args)
    rep = run_experiment(cfg, ingest(args.dataset))
    print(f"predicates\t{len(rep.predicate_purity)}")
    print(f"generalization_accuracy\t{rep.generalization_accuracy}")
    print(f"decode_accuracy\t{rep.decode_accuracy}")
    print(f"out_dir\t{cfg.out_dir}")


def cmd_map(args):
    net = load_network(args.network)
    trace = load_trace(args.trace, net.params.dt)
    table = accumulate_hypotheses(MappingTable.from_network(net), trace)
    update_mapping_weights(table)
    for u, v in best_mapping(table).items():
        print(f"{u}\t{v}\t{table.w(u, v)!r}")


def cmd_apply(args):
    net = load_network(args.net)
    item = _read_json(args.item)
    if isinstance(item, dict) and "features" in item:
        item = item["features"]
    if not isinstance(item, dict):
        raise ValidationError("item file must hold a feature object")
    preds = list(net.predicates.values())
    if args.predicate:
        preds = [p for p in preds if args.predicate in (p.name, p.po_unit)]
        if not preds:
            raise ValidationError(f"no predicate named {args.predicate!r}")
    lp = L.LearnerParams()
    for p in preds:
        s = L.apply_predicate(net, p, item)
        print(f"{p.po_unit}\t{p.name}\t{s!r}\t{'bind' if L.should_bind(s, lp) else '-'}")


def cmd_decode(args):
    net = load_network(args.network)
    trace = load_trace(args.trace, net.params.dt)
    cp = CodecParams(mode=args.mode, slot_width=args.slot_width)
    bank = None if args.bank == "ALL" else args.bank
    for p in decode(trace, net, cp.mode, cp, bank=bank):
        roles = " ".join(f"{r.predicate}({r.argument})" for r in p.roles)
        print(f"{p.p_unit}\t{roles}")


def _drive(spec):
    out = {}
    for s in spec or []:
        uid, _, v = s.partition("=")
        try:
            out[uid] = float(v) if v else 1.0
        except ValueError:
            raise ValidationError(f"bad drive {s!r}; expected UNIT=VALUE") from None
    return out


def cmd_trace(args):
    net = load_network(args.network)
    drive = _drive(args.drive)
    if not drive:
        drive = {t.id: 1.0 for t in net.tokens.values() if t.layer is Layer.P}
    trace, _ = run(net, drive, args.steps, sync=args.sync)
    export_raster(trace, args.out)
    print(args.out)


def build_parser():
    ap = argparse.ArgumentParser(prog="predlearn", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, out_dir=True):
        p.add_argument("--config", help="JSON or TOML experiment config")
        p.add_argument("--seed", type=int)
        if out_dir:
            p.add_argument("--out-dir", dest="out_dir")

    p = sub.add_parser("gen", help="write a synthetic relative-magnitude dataset")
    common(p)
    p.add_argument("--n-train", type=int, default=8)
    p.add_argument("--n-eval", type=int, default=40)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("learn", help="run the comparisons of a dataset, save the network")
    common(p, out_dir=False)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_learn)

    p = sub.add_parser("run", help="full experiment: network JSON, trace CSV, report JSON")
    common(p)
    p.add_argument("--dataset", required=True)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("map", help="best driver->recipient mapping from a trace (TSV)")
    p.add_argument("--trace", required=True)
    p.add_argument("--network", required=True)
    p.set_defaults(fn=cmd_map)

    p = sub.add_parser("apply", help="score a feature item under the learned predicates")
    p.add_argument("--net", required=True)
    p.add_argument("--item", required=True)
    p.add_argument("--predicate")
    p.set_defaults(fn=cmd_apply)

    p = sub.add_parser("decode", help="decode propositions from a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--network", required=True)
    p.add_argument("--mode", default=Mode.PHASE_LAG_1.value, choices=[m.value for m in Mode])
    p.add_argument("--slot-width", type=int, default=10)
    p.add_argument("--bank", default="DRIVER", choices=["DRIVER", "RECIPIENT", "MEMORY", "ALL"])
    p.set_defaults(fn=cmd_decode)

    p = sub.add_parser("trace", help="run a saved network and export a CSV raster")
    p.add_argument("--network", required=True)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--drive", action="append", metavar="UNIT=VALUE",
                   help="constant external input (default: every P unit at 1.0)")
    p.add_argument("--sync", action="store_true", help="phase-lag-0 (synchrony) mode")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_trace)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    warnings.simplefilter("default")
    try:
        args.fn(args)
    except (ValidationError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (SimulationError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
