"""Command-line front end: reproducible, file-driven experiments.

Every output embeds the resolved configuration (seed included), so identical
invocations produce byte-identical files. Exit codes: 0 success, 1 domain
error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import coupling, decay, glauber, jacobian, oracle
from .errors import SpinMixError
from .graphs import (
    ColoringInstance,
    Pinning,
    PottsInstance,
    generate_girth_graph,
    girth,
    parse_graph_spec,
    read_graph,
    read_instance,
    read_pinning,
    write_graph,
)
from .tree import exact_tree_marginals


def _parse_depths(spec):
    if ":" in spec:
        lo, hi = spec.split(":")
        return list(range(int(lo), int(hi) + 1))
    return [int(spec)]


def _load_graph(args):
    if getattr(args, "graph_file", None):
        return read_graph(args.graph_file)
    if getattr(args, "graph", None):
        return parse_graph_spec(args.graph)
    raise SpinMixError("provide --graph SPEC or --graph-file PATH")


def _load_instance(args, graph):
    if getattr(args, "instance", None):
        return read_instance(args.instance, graph)
    if args.q is None:
        raise SpinMixError("provide --q or --instance")
    if getattr(args, "beta", None) is not None:
        return PottsInstance(graph, args.q, args.beta)
    return ColoringInstance.full(graph, args.q)


def _load_pinning(args):
    if getattr(args, "pin", None):
        return read_pinning(args.pin)
    return Pinning()


def _emit(payload, args, fmt=None):
    fmt = fmt or getattr(args, "format", "json")
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",) and v is not None}
    if fmt == "csv":
        lines = [f"# {k}={v}" for k, v in sorted(config.items())]
        rows = payload["rows"]
        lines.append(payload["header"])
        lines += [",".join(str(x) for x in row) for row in rows]
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps({"config": config, "result": payload}, sort_keys=True, indent=2) + "\n"
    out = getattr(args, "out", None)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_marginals(args):
    graph = _load_graph(args)
    inst = _load_instance(args, graph)
    pin = _load_pinning(args)
    if graph.is_forest():
        table = exact_tree_marginals(inst, graph, pin)
        margs = {str(v): [float(x) for x in table[v]] for v in table.vertices()}
    else:
        gt = oracle.enumerate_gibbs(inst, pin, args.state_cap)
        margs = {str(v): [float(x) for x in gt.marginal(v)] for v in gt.free}
    if args.format == "csv":
        rows = [(v, c, p) for v, ps in sorted(margs.items(), key=lambda kv: int(kv[0])) for c, p in enumerate(ps)]
        _emit({"header": "vertex,color,probability", "rows": rows}, args)
    else:
        _emit({"marginals": margs}, args)
    return 0


def _cmd_certify(args):
    report = jacobian.certify_contraction(
        args.family.replace("-", "_"),
        args.q,
        args.delta_max,
        beta=args.beta,
        mode=args.mode,
        samples=args.samples,
        seed=args.seed,
    )
    _emit(report.to_dict(), args, fmt="json")
    return 0


def _cmd_influence(args):
    graph = _load_graph(args)
    inst = _load_instance(args, graph)
    pin = _load_pinning(args)
    infl = oracle.influence_matrix(inst, pin, args.state_cap)
    lam = oracle.spectral_independence(inst, pin, args.state_cap)
    if args.decay_u is not None:
        depths = _parse_depths(args.decay_depths or "1:4")
        rows = []
        for r in depths:
            rows.append((r, oracle.influence_decay_at_R(inst, pin, args.decay_u, r, args.state_cap)))
        _emit({"header": "distance,total_influence", "rows": rows}, args, fmt="csv")
        return 0
    payload = {
        "lambda_max": lam,
        "index": [[int(v), int(c)] for v, c in infl.index],
        "entries": [[float(x) for x in row] for row in infl.entries],
    }
    _emit(payload, args, fmt="json")
    return 0


def _cmd_glauber(args):
    graph = _load_graph(args)
    inst = _load_instance(args, graph)
    pin = _load_pinning(args)
    if args.kind == "exact_tv":
        report = glauber.tv_decay_report(inst, pin, horizon=args.steps, state_cap=args.state_cap)
    elif args.kind == "coalescence":
        report = glauber.coalescence_estimate(inst, pin, trials=args.trials, seed=args.seed, max_steps=args.steps)
    elif args.kind == "autocorrelation":
        report = glauber.autocorrelation_estimate(inst, pin, steps=args.steps, burnin=args.burnin, seed=args.seed)
    else:
        raise SpinMixError(f"unknown diagnostic kind {args.kind!r}")
    if args.format == "csv":
        rows = list(enumerate(report.values, start=1))
        _emit({"header": "index,value", "rows": rows}, args)
    else:
        _emit(report.to_dict(), args)
    return 0


def _cmd_couple(args):
    graph = _load_graph(args)
    inst = _load_instance(args, graph)
    pin = _load_pinning(args)
    result = coupling.run_coupling_trials(
        inst, pin, args.u, args.b, args.c, args.R,
        trials=args.trials, seed=args.seed, depth_cap=args.depth_cap,
        state_cap=args.state_cap, threads=args.threads,
    )
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func" and v is not None}
    lines = [json.dumps({"config": config, "mean_hamming": result["mean_hamming"],
                         "completed": result["completed"], "discarded": result["discarded"]}, sort_keys=True)]
    for o in result["outcomes"]:
        lines.append(json.dumps({"hamming": o.hamming, "x": {str(k): v for k, v in sorted(o.x.items())},
                                 "y": {str(k): v for k, v in sorted(o.y.items())}}, sort_keys=True))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_decay(args):
    graph = _load_graph(args)
    if args.kind == "ssm":
        inst = _load_instance(args, graph)
        profile = decay.ssm_profile(graph, inst, r=args.root, depths=_parse_depths(args.depths),
                                    strategy=args.strategy, seed=args.seed)
    elif args.kind == "wsm":
        profile = decay.wsm_profile_potts(graph, args.q, args.beta, r=args.root,
                                          depths=_parse_depths(args.depths), strategy=args.strategy, seed=args.seed)
    elif args.kind == "tid":
        inst = _load_instance(args, graph)
        profile = decay.tid_profile(graph, inst, args.root or 0, _parse_depths(args.depths), args.state_cap)
    else:
        raise SpinMixError(f"unknown decay kind {args.kind!r}")
    if args.format == "csv":
        rows = list(zip(profile.distances, profile.values))
        _emit({"header": "distance,value", "rows": rows}, args)
    else:
        _emit(profile.to_dict(), args)
    return 0


def _cmd_constants(args):
    if args.family == "potts":
        report = decay.potts_regime_constants(args.q, args.beta, args.delta_max, args.delta_hat)
    else:
        report = decay.coloring_regime_constants(args.q, args.delta_max, args.delta_hat)
    _emit(report.to_dict(), args, fmt="json")
    return 0


def _cmd_gen_graph(args):
    g = generate_girth_graph(args.n, args.max_degree, args.min_girth, args.seed,
                             target_edges=args.target_edges)
    if args.out:
        write_graph(g, args.out)
    else:
        sys.stdout.write(f"{g.n} {len(g.edges)}\n")
        for u, v in g.edges:
            sys.stdout.write(f"{u} {v}\n")
    gv = girth(g)
    sys.stderr.write(f"girth={gv} edges={len(g.edges)}\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="spinmix", description=__doc__)
    parser.add_argument("--threads", type=int, default=1, help="parallel workers (default 1 for bit-reproducibility)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, graph=True, instance=True, pin=True):
        if graph:
            p.add_argument("--graph", help="builtin spec: bintree:h dary:d:h path:n cycle:n complete:n")
            p.add_argument("--graph-file")
        if instance:
            p.add_argument("--q", type=int)
            p.add_argument("--beta", type=float)
            p.add_argument("--instance", help="instance JSON path")
        if pin:
            p.add_argument("--pin", help="pinning JSON path")
        p.add_argument("--out")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--state-cap", type=int, default=10**6)

    p = sub.add_parser("marginals", help="exact conditional marginals")
    common(p)
    p.set_defaults(func=_cmd_marginals)

    p = sub.add_parser("certify", help="contraction certificate scan")
    p.add_argument("--family", required=True, choices=("coloring", "coloring-unweighted", "potts"))
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--delta-max", type=int, required=True, help="maximum degree Delta")
    p.add_argument("--beta", type=float)
    p.add_argument("--mode", choices=("strong", "weak"), default="strong")
    p.add_argument("--samples", type=int, default=10**4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("influence", help="influence matrix and spectral independence")
    common(p)
    p.add_argument("--decay-u", type=int, help="emit per-distance influence sums for this center")
    p.add_argument("--decay-depths", help="a:b range for --decay-u")
    p.set_defaults(func=_cmd_influence)

    p = sub.add_parser("glauber", help="heat-bath dynamics diagnostics")
    common(p)
    p.add_argument("--kind", choices=("exact_tv", "coalescence", "autocorrelation"), default="exact_tv")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--burnin", type=int, default=1000)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--eps", type=float, default=0.25)
    p.set_defaults(func=_cmd_glauber)

    p = sub.add_parser("couple", help="local coupling trials")
    common(p)
    p.add_argument("--u", type=int, required=True)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--c", type=int, required=True)
    p.add_argument("--R", type=int, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--depth-cap", type=int, default=coupling.DEFAULT_DEPTH_CAP)
    p.set_defaults(func=_cmd_couple)

    p = sub.add_parser("decay", help="SSM / WSM / TID decay profiles")
    p.add_argument("--kind", choices=("ssm", "wsm", "tid"), required=True)
    p.add_argument("--tree", dest="graph", help="builtin tree spec")
    p.add_argument("--graph-file")
    p.add_argument("--q", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--instance")
    p.add_argument("--root", type=int)
    p.add_argument("--depths", default="1:8")
    p.add_argument("--strategy", choices=("auto", "exact", "heuristic"), default="auto")
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--state-cap", type=int, default=10**6)
    p.set_defaults(func=_cmd_decay)

    p = sub.add_parser("constants", help="derived decay constants")
    p.add_argument("--family", choices=("coloring", "potts"), default="coloring")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--delta-max", type=int, required=True)
    p.add_argument("--beta", type=float)
    p.add_argument("--delta-hat", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_constants)

    p = sub.add_parser("gen-graph", help="bounded-degree large-girth generator")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--max-degree", type=int, required=True)
    p.add_argument("--min-girth", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target-edges", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_gen_graph)

    return parser


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except SpinMixError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
