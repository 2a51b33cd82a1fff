"""Command-line entry point: ``hwgibbs width|sample|spectral|ground|experiment``.

Exit codes: 0 on success, 1 on invalid input or unsupported structure,
2 when a resource limit is hit.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .errors import HwGibbsError, InvalidInput, ResourceLimit
from .experiments import EXPERIMENTS, ExperimentConfig, parse_config, run_experiment, to_csv
from .fgio import format_fg, read_fg
from .graph import SEMANTICS, FactorGraph, world_from_labels
from .sampler import running_estimates, tv_bound_from_coupling
from .spectral import bounds_row, verify_lemmas
from .templates import ground, read_dataset, read_template
from .width import hw_at_most_k, width_report


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _header(args, keys) -> list[str]:
    lines = [f"# command = {args.command}"]
    for k in keys:
        v = getattr(args, k)
        lines.append(f"# {k} = {'' if v is None else v}")
    return lines


def _parse_world(graph: FactorGraph, text: str) -> np.ndarray:
    try:
        labels = [int(x) for x in text.split(",")]
    except ValueError:
        raise InvalidInput(f"world must be comma-separated integer labels, got {text!r}") from None
    return world_from_labels(graph, labels)


def cmd_width(args) -> None:
    graph = read_fg(args.file)
    if args.k is not None:
        if args.k < 0:
            raise InvalidInput("--k must be >= 0")
        _emit(f"hw_at_most_k {args.k} {str(hw_at_most_k(graph, args.k)).lower()}\n", args.out)
        return
    report = width_report(graph)
    _emit(report.to_text(graph), args.out)
    if args.certificate:
        with open(args.certificate, "w", encoding="utf-8") as fh:
            fh.write(report.certificate.to_text(graph))


def cmd_sample(args) -> None:
    graph = read_fg(args.file)
    if args.steps < 1 or args.chains < 1:
        raise InvalidInput("--steps and --chains must be >= 1")
    if args.couple:
        start = _parse_world(graph, args.start) if args.start else "uniform"
        other = _parse_world(graph, args.other) if args.other else None
        bound = tv_bound_from_coupling(graph, start, args.steps, args.chains, args.seed, other)
        rows = [{"replicate": r, "coupling_time": "" if t > args.steps else int(t)}
                for r, t in enumerate(bound.times)]
        header = _header(args, ["file", "seed", "steps", "chains", "start", "other"])
        header.append(f"# mode = {bound.mode}")
        _emit(to_csv(header, rows, ["replicate", "coupling_time"]), args.out)
        return
    variables = [graph.variable_named(args.query)] if args.query else list(range(graph.n))
    every = args.every or max(1, args.steps // 10)
    schedule = sorted(set(list(range(every, args.steps + 1, every)) + [args.steps]))
    steps, est = running_estimates(graph, variables, args.chains, schedule, args.seed)
    rows = []
    for c in range(args.chains):
        for j, s in enumerate(steps):
            for i, v in enumerate(variables):
                rows.append({"step": int(s), "chain": c, "variable": graph.variables[v].name,
                             "estimate": float(est[c, j, i])})
    header = _header(args, ["file", "seed", "steps", "chains", "query", "every"])
    header.append("# estimate = running frequency of value 1 (else the last value); uniform start")
    _emit(to_csv(header, rows, ["step", "chain", "variable", "estimate"]), args.out)


def cmd_spectral(args) -> None:
    graph = read_fg(args.file)
    if args.verify_lemmas:
        checks = verify_lemmas(graph, mixing=args.mixing)
        for c in checks:
            status = "PASS" if c.ok else "FAIL"
            detail = f" [{c.detail}]" if c.detail else ""
            print(f"{status} {c.name}{detail}: {c.lhs!r} vs {c.rhs!r}", file=sys.stderr)
        if not all(c.ok for c in checks):
            raise InvalidInput("at least one lemma check failed")
    row = bounds_row(graph, mixing=args.mixing)
    cols = ["n", "s", "e", "M", "hw", "gamma", "pi_min", "t_mix_exact",
            "theorem2_bound", "relaxation_bound"]
    values = {c: getattr(row, c) for c in cols}
    if values["t_mix_exact"] is None:
        values["t_mix_exact"] = ""
    _emit(to_csv(_header(args, ["file", "mixing"]), [values], cols), args.out)


def cmd_ground(args) -> None:
    schema = read_template(args.schema)
    dataset = read_dataset(args.data)
    result = ground(schema, dataset, args.semantics)
    _emit(format_fg(result.graph), args.out)


def cmd_experiment(args, extra: dict) -> None:
    name = args.name or extra.pop("experiment", None)
    if name is None:
        raise InvalidInput(f"name an experiment: {', '.join(EXPERIMENTS)}")
    params = dict(extra)
    for item in args.set or []:
        if "=" not in item:
            raise InvalidInput(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        params.update(parse_config(f"{key} = {value}"))
    cfg = ExperimentConfig.build(name, args.seed, **params)
    rows = run_experiment(cfg)
    _emit(to_csv(cfg.header(), rows), args.out)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat 'key = value' file supplying option defaults")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output path (default: stdout)")

    parser = _Parser(prog="hwgibbs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("width", parents=[common], help="hierarchy width report")
    p.add_argument("file")
    p.add_argument("--k", type=int, help="only decide whether hw <= k")
    p.add_argument("--certificate", help="write the hierarchy decomposition here")

    p = sub.add_parser("sample", parents=[common], help="Gibbs sampling and coupling")
    p.add_argument("file")
    p.add_argument("--steps", type=int, default=10000)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--query", help="variable name to report (default: all)")
    p.add_argument("--every", type=int, help="report interval in steps (default: steps/10)")
    p.add_argument("--couple", action="store_true",
                   help="run coupled chains; --steps is the budget, --chains the replicate count")
    p.add_argument("--start", help="coupling start world as comma-separated labels")
    p.add_argument("--other", help="second fixed start (default: exact stationary draw)")

    p = sub.add_parser("spectral", parents=[common], help="spectral gap and mixing bounds")
    p.add_argument("file")
    p.add_argument("--mixing", action="store_true", help="compute the exact mixing time")
    p.add_argument("--verify-lemmas", action="store_true")

    p = sub.add_parser("ground", parents=[common], help="ground a template on a dataset")
    p.add_argument("schema")
    p.add_argument("data")
    p.add_argument("--semantics", choices=SEMANTICS, default="logical")

    p = sub.add_parser("experiment", parents=[common], help="run a desk-scale experiment")
    p.add_argument("name", nargs="?", choices=EXPERIMENTS)
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one experiment parameter")
    return parser


def _apply_config(parser, argv):
    """Two-pass parse so that values from ``--config`` act as defaults."""
    args = parser.parse_args(argv)
    if not args.config:
        return args, {}
    with open(args.config, encoding="utf-8") as fh:
        config = parse_config(fh.read())
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    defaults, extra = {}, {}
    for key, value in config.items():
        dest = key.replace("-", "_")
        if dest in known and dest not in ("config", "help"):
            defaults[dest] = value
        elif args.command == "experiment":
            extra[key] = value
        else:
            raise InvalidInput(f"config key {key!r} is not an option of {args.command}")
    sub.set_defaults(**defaults)
    return parser.parse_args(argv), extra


def main(argv=None) -> int:
    parser = build_parser()
    try:
        try:
            args, extra = _apply_config(parser, argv)
        except SystemExit as exc:
            return 0 if exc.code is None else int(exc.code)
        if args.command == "experiment":
            cmd_experiment(args, extra)
        else:
            {"width": cmd_width, "sample": cmd_sample, "spectral": cmd_spectral,
             "ground": cmd_ground}[args.command](args)
    except ResourceLimit as exc:
        print(f"hwgibbs: resource limit: {exc}", file=sys.stderr)
        return 2
    except (HwGibbsError, OSError) as exc:
        print(f"hwgibbs: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
