"""Command-line front end: ``gcnpac {gen-graph, bound, verify, mc-check}``.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .gcn import load_model, make_dataset, random_features, random_model
from .graphs import GRAPH_KINDS, PropagationKind, build_propagation, generate, load_edge_list, write_edge_list
from .montecarlo import McConfig, check_lemma6, check_perturbation_bound, check_perturbation_condition
from .pacbayes import PacParams, bound_for, layer_norms, optimal_posteriors, prior_variance
from .reports import SUMMARY_FIELDS, report_summary, to_csv, to_json
from .sensitivity import Design, FilterKind, FilterSpec, build_design
from . import verify

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_VERIFY = 0, 1, 2, 3
DESIGNS = ("exact", "diagonal", "lowrank", "spectral", "baseline")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _name_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--out", type=Path, help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    return p


def _graph_args(p: argparse.ArgumentParser, required_kind: bool = False):
    p.add_argument("--kind", choices=GRAPH_KINDS, required=required_kind, help="graph family")
    p.add_argument("--n", type=int, help="node count")
    p.add_argument("--k", type=int, help="degree for --kind regular")
    p.add_argument("--p", type=float, help="edge probability for --kind erdos_renyi")
    p.add_argument("--sizes", type=_int_list, help="block sizes for --kind sbm, e.g. 4,4")
    p.add_argument("--p-in", type=float, help="within-block probability for sbm")
    p.add_argument("--p-out", type=float, help="between-block probability for sbm")


def _instance_args(p: argparse.ArgumentParser):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--graph", type=Path, help="edge-list file")
    _graph_args(p)
    p.add_argument("--propagation", choices=[k.value for k in PropagationKind],
                   default=PropagationKind.NORMALIZED_ADJACENCY.value)
    msrc = p.add_mutually_exclusive_group()
    msrc.add_argument("--model", type=Path, help="model JSON file")
    msrc.add_argument("--widths", type=_int_list, help="random model widths h_0,...,h_d")
    p.add_argument("--activation", choices=("relu", "tanh", "identity"), default="relu")
    p.add_argument("--filter", choices=[k.value for k in FilterKind], default="identity")
    p.add_argument("--xi", type=float, help="filter parameter (default depends on the filter)")
    p.add_argument("--gamma", type=float, default=0.1, help="margin (default 0.1)")
    p.add_argument("--bound", type=float, default=1.0, help="feature row-norm bound B")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="gcnpac", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-graph", parents=[common], help="generate a graph and write an edge list")
    _graph_args(g, required_kind=True)

    b = sub.add_parser("bound", parents=[common], help="evaluate generalization bounds")
    _instance_args(b)
    b.add_argument("--designs", type=_name_list, default=["diagonal", "lowrank", "spectral", "baseline"],
                   help=f"comma-separated subset of {','.join(DESIGNS)}")
    b.add_argument("--delta", type=float, default=0.05)
    b.add_argument("--cover", type=float, help="union-bound cover constant (default d sqrt(m))")
    b.add_argument("--samples", type=int, default=50, help="dataset size m")
    b.add_argument("--teacher-seed", type=int,
                   help="seed of the labelling model and features (default --seed, so a random "
                        "model labels its own data)")

    v = sub.add_parser("verify", parents=[common], help="run the property and sampling suites")
    v.add_argument("--trials", type=int, default=10000, help="trials for sampling checks")
    v.add_argument("--bound-trials", type=int, default=1000,
                   help="trials for the forward-pass perturbation checks")
    v.add_argument("--break-dominance", action="store_true",
                   help="negative control: shrink certified sensitivity matrices 10x")

    m = sub.add_parser("mc-check", parents=[common], help="Monte Carlo checks on one instance")
    _instance_args(m)
    m.add_argument("--design", choices=("diagonal", "lowrank", "spectral"), default="spectral")
    m.add_argument("--trials", type=int, default=1000)
    m.add_argument("--epsilon", type=float, default=1e-3)
    m.add_argument("--tolerance", type=float, default=0.05)
    return parser


def _emit(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _gen(args, require=True):
    if args.kind is None:
        if require:
            raise ValidationError("give --graph FILE or a generator --kind")
        return None
    return generate(args.kind, args.n, args.seed, k=args.k, p=args.p, sizes=args.sizes,
                    p_in=args.p_in, p_out=args.p_out)


def cmd_gen_graph(args) -> int:
    g = _gen(args)
    if args.out is not None:
        write_edge_list(g, args.out)
    else:
        sys.stdout.write("\n".join([f"n={g.n}"] + [f"{i} {j}" for i, j in g.edges]) + "\n")
    s = g.summary()
    print(f"n={s['n']} edges={s['edges']} d_max={s['d_max']} d_min={s['d_min']}", file=sys.stderr)
    return EXIT_OK


def _load_instance(args):
    if args.graph is not None:
        if args.kind is not None:
            raise ValidationError("give either --graph or --kind, not both")
        graph = load_edge_list(args.graph)
    else:
        graph = _gen(args)
    if args.model is not None:
        model = load_model(args.model)
    elif args.widths:
        model = random_model(args.widths, args.activation, seed=args.seed)
    else:
        raise ValidationError("give --model FILE or --widths h_0,...,h_d")
    prop = build_propagation(graph, args.propagation)
    filt = FilterSpec(FilterKind(args.filter), args.xi)
    return graph, model, prop, filt


def cmd_bound(args) -> int:
    graph, model, prop, filt = _load_instance(args)
    unknown = [d for d in args.designs if d not in DESIGNS]
    if not args.designs or unknown:
        raise ValidationError(f"designs must be a nonempty subset of {DESIGNS}, got {args.designs}")
    tseed = args.teacher_seed if args.teacher_seed is not None else args.seed
    teacher = random_model(model.widths, model.activation, seed=tseed)
    samples = make_dataset(graph, teacher, args.samples, args.bound, seed=tseed, kind=prop.kind)
    params = PacParams(gamma=args.gamma, delta=args.delta, bound=args.bound, cover_constant=args.cover)
    reports, rows = [], []
    for design in args.designs:
        try:
            rep = bound_for(design, model, prop, samples, params, filt)
        except ValidationError as exc:
            print(f"warning: {design}: {exc}", file=sys.stderr)
            reports.append({"design": design, "error": str(exc)})
            rows.append({"design": design})
            continue
        for flag in rep.flags:
            if flag.startswith("degenerate"):
                print(f"warning: {design}: {flag}", file=sys.stderr)
        reports.append(rep)
        rows.append(report_summary(rep))
    comparison = [{"design": r.get("design"), "complexity": r.get("complexity_term"),
                   "kl_upper": r.get("kl_upper"), "final_bound": r.get("final_bound")} for r in rows]
    if args.format == "csv":
        _emit(to_csv(rows, SUMMARY_FIELDS), args.out)
    else:
        _emit(to_json({"graph": graph.summary(), "propagation": prop.kind.value,
                       "widths": list(model.widths), "samples": args.samples, "teacher_seed": tseed,
                       "reports": reports, "comparison": comparison}), args.out)
    return EXIT_OK


def _check_lines(bundle: dict) -> list[str]:
    lines = []
    for group, checks in bundle["groups"].items():
        for c in checks:
            status = "PASS" if c["pass"] else "FAIL"
            tag = "" if c["gating"] else " (informational)"
            lines.append(f"{status}{tag} [{group}] {c['name']}: worst={c['worst']:.3e} limit={c['tolerance']:.3e}")
    return lines


def cmd_verify(args) -> int:
    bundle = verify.run_all(args.seed, trials=args.trials, bound_trials=args.bound_trials,
                            break_dominance=args.break_dominance)
    for line in _check_lines(bundle):
        print(line, file=sys.stderr)
    if args.format == "csv":
        rows = [dict(c, group=g) for g, cs in bundle["groups"].items() for c in cs]
        _emit(to_csv(rows, ("group", "name", "pass", "gating", "instances", "worst", "tolerance")), args.out)
    else:
        _emit(to_json(bundle), args.out)
    return EXIT_OK if bundle["passed"] else EXIT_VERIFY


def cmd_mc_check(args) -> int:
    graph, model, prop, filt = _load_instance(args)
    cfg = McConfig(trials=args.trials, seed=args.seed, perturbation_scale=args.epsilon,
                   tolerance=args.tolerance)
    x = random_features(graph.n, model.widths[0], args.bound, np.random.default_rng([args.seed, 1]))
    design = Design(args.design)
    sset = build_design(design, model, prop, x, args.bound, filt)
    w_norm = float(np.linalg.norm(model.flat_weights()))
    blocks = optimal_posteriors(sset, args.gamma, w_norm)
    spec, _ = layer_norms(model)
    sigma_sq = prior_variance(design, args.gamma, spec, prop, model.widths, args.bound,
                              sset.g_values or None)
    reports = [
        check_perturbation_condition(sset, sigma_sq, blocks, args.gamma, cfg),
        check_perturbation_bound(model, prop, x, sset, sigma_sq, blocks, cfg),
        check_lemma6(model, prop, x, cfg),
    ]
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: p={r.empirical_probability:.4f} "
              f"max_ratio={r.max_ratio:.4g}", file=sys.stderr)
    if args.format == "csv":
        rows = [{"name": r.name, "pass": r.passed, "empirical_probability": r.empirical_probability,
                 "max_ratio": r.max_ratio} for r in reports]
        _emit(to_csv(rows), args.out)
    else:
        _emit(to_json({"design": sset.label, "sigma_sq": sigma_sq, "reports": reports}), args.out)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VERIFY


COMMANDS = {"gen-graph": cmd_gen_graph, "bound": cmd_bound, "verify": cmd_verify, "mc-check": cmd_mc_check}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
