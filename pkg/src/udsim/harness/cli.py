"""Command-line entry point: udsim asm|run|bench|ablate|graph."""

from __future__ import annotations

import argparse
import os
import sys
from typing import List, Optional

from ..asm import AssemblyError, assemble, disassemble, validate
from ..fabric import ConfigError, run as simulate
from ..kernels import build_kernel, matches_oracle, oracle_for, KERNELS
from ..kernels.graph import GraphFormatError, graph_info, save_edge_list
from ..memory import DramImage
from .ablation import AblationConfig, apply_ablation, run_ablation_suite
from .bench import bench_bandwidth_ramp, bench_spawn, bench_stream
from .config import RunSpec, add_node_flags, generate, load_config, node_overrides, spec_from_dict
from .report import emit_report, summary_text, write_dict_rows, write_table

EXIT_OK, EXIT_FAULT, EXIT_CONFIG, EXIT_MISMATCH = 0, 1, 2, 3

_RUN_FLAGS = ("kernel", "graph", "gen", "graph_format", "source", "damping", "iters", "coarse",
              "ablation", "ust_operand_penalty", "eds_dispatch_penalty", "out", "seed")


def _ints(s: str) -> List[int]:
    try:
        return [int(x) for x in s.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _spec(args, default_node=None) -> RunSpec:
    base = RunSpec() if default_node is None else RunSpec(node=default_node)
    if getattr(args, "config", None):
        base = spec_from_dict(load_config(args.config), base)
    over = {k: getattr(args, k) for k in _RUN_FLAGS if getattr(args, k, None) is not None}
    over.update(node_overrides(args))
    return spec_from_dict(over, base)


def _add_run_flags(p: argparse.ArgumentParser, kernel_positional: bool = True) -> None:
    if kernel_positional:
        p.add_argument("kernel", nargs="?", choices=KERNELS, default=None)
    p.add_argument("--config", help="YAML file with run and node settings")
    p.add_argument("--graph", help="edge list or Matrix Market file")
    p.add_argument("--graph_format", "--graph-format", dest="graph_format", choices=("EDGELIST", "MTX"))
    p.add_argument("--gen", help="synthetic graph, e.g. er:1000,5000 or powerlaw:2000,5")
    p.add_argument("--seed", type=int)
    p.add_argument("--source", type=int)
    p.add_argument("--damping", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--coarse", action="store_const", const=True, default=None,
                   help="coarse-grained triangle counting")
    p.add_argument("--ablation", help="ladder point: PE, +SoM, +LWT, +UST or full")
    p.add_argument("--ust_operand_penalty", type=int, help="cycles per operand word without UST")
    p.add_argument("--eds_dispatch_penalty", type=int, help="cycles per dispatch without EDS")
    p.add_argument("--out", help="output directory")
    add_node_flags(p)


# ------------------------------------------------------------------- verbs

def cmd_asm(args) -> int:
    with open(args.file, encoding="utf-8") as f:
        text = f.read()
    try:
        image = assemble(text, check=False)
    except AssemblyError as e:
        print(f"{args.file}:{e}", file=sys.stderr)
        return EXIT_CONFIG
    diags = validate(image)
    for d in diags:
        print(f"{args.file}:{d}", file=sys.stderr)
    if args.disasm:
        sys.stdout.write(disassemble(image))
    if args.json:
        with open(args.json, "wb") as f:
            f.write(image.serialize())
    if not args.disasm:
        print(f"{len(image.handlers)} events, {len(image.code)} instructions")
    return EXIT_MISMATCH if diags else EXIT_OK


def cmd_run(args) -> int:
    spec = _spec(args)
    g = spec.resolve()
    ab = AblationConfig.point(spec.ablation)
    cfg = apply_ablation(ab, spec.node, spec.ust_operand_penalty, spec.eds_dispatch_penalty)
    bundle = build_kernel(spec.kernel, g, cfg, spec.source, spec.damping, spec.iters, spec.coarse)
    dram = DramImage(cfg.dram_bytes)
    bundle.plan.check(g, dram.size)
    bundle.prepare(dram)
    res = simulate(cfg, bundle.program, dram, bundle.boot, bundle.scratch_init)
    results = {"kernel": bundle.name, "ablation": ab.name, "halted": res.halted.value}
    code = EXIT_OK
    if not res.ok:
        print(f"simulation {res.halted.value}: {res.fault}", file=sys.stderr)
        code = EXIT_FAULT
    else:
        value = bundle.collect(dram, res.node.lanes)
        results.update(_result_summary(bundle.name, value))
        if args.check:
            ok = matches_oracle(bundle, value, oracle_for(bundle, g))
            results["oracle_match"] = ok
            if not ok:
                print("result does not match the oracle", file=sys.stderr)
                code = EXIT_MISMATCH
    if spec.out:
        emit_report(res.stats, spec.out, results)
    sys.stdout.write(summary_text(res.stats, results))
    return code


def _result_summary(name: str, value) -> dict:
    if name.startswith("tc"):
        return {"triangles": value}
    if name == "bfs":
        reached = [d for d in value if d >= 0]
        return {"reached": len(reached), "levels": max(reached) + 1 if reached else 0}
    if name == "pr":
        return {"rank_sum": sum(value), "rank_max": max(value)}
    if name == "js":
        n = len(value)
        off = [value[u][v] for u in range(n) for v in range(u + 1, n)]
        return {"pairs": len(off), "js_max": max(off) if off else 0.0}
    return {}


def cmd_bench(args) -> int:
    node = _spec(args, default_node=_default_bench_node()).node
    if args.what == "ramp":
        pts = bench_bandwidth_ramp(node, args.ramp_sizes, args.ramp_threads, args.ramp_lanes,
                                   args.ramp_accelerators, args.ramp_stacks or [None],
                                   args.requests)
        rows = [p.row() for p in pts]
        for r in rows:
            print(f"size={r['transfer_words']} threads={r['threads']} lanes={r['lanes']} "
                  f"accelerators={r['accelerators']} stacks={r['stacks']} "
                  f"bandwidth_gbps={r['bandwidth_gbps']:.2f}")
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            write_dict_rows(os.path.join(args.out, "ramp.csv"), rows)
    elif args.what == "outstanding":
        p = bench_stream(node, 8, args.ramp_threads[0], args.ramp_lanes[0],
                         args.ramp_accelerators[0], args.requests)
        per_lane = p.outstanding_mean / max(p.lanes * p.accelerators, 1)
        print(f"outstanding_mean={p.outstanding_mean:.2f} per_lane={per_lane:.2f} "
              f"bandwidth_gbps={p.bandwidth_gbps:.2f} latency_cycles={p.latency_mean:.1f} "
              f"little_gbps={p.little_gbps:.2f} little_error={p.little_error:.4f}")
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            write_dict_rows(os.path.join(args.out, "outstanding.csv"), [p.row()])
    else:
        s = bench_spawn(node, args.threads)
        print(f"threads={s.threads} issue_cycles_per_thread={s.issue_cycles_per_thread:.3f} "
              f"create_cycles_per_thread={s.create_cycles_per_thread:.3f} "
              f"threads_per_second={s.threads_per_second:.4g}")
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            write_dict_rows(os.path.join(args.out, "spawn.csv"), [vars(s)])
    return EXIT_OK


def _default_bench_node():
    from ..fabric import NodeConfig
    return NodeConfig(accelerators=1, lanes_per_accelerator=64)


def cmd_ablate(args) -> int:
    spec = _spec(args)
    g = spec.resolve()
    bundle = build_kernel(spec.kernel, g, spec.node, spec.source, spec.damping, spec.iters,
                          spec.coarse)
    reports = {}

    def keep(name, res):
        reports[name] = res

    rep = run_ablation_suite(bundle, spec.node, spec.ust_operand_penalty, spec.eds_dispatch_penalty, keep)
    for r in rep.rows:
        print(f"{r.point:5s} cycles={r.cycles} speedup={r.speedup:.3f} ok={r.ok}")
    for m, f in rep.contributions.items():
        print(f"contribution_{m}={f:.4f}")
    if spec.out:
        os.makedirs(spec.out, exist_ok=True)
        write_table(os.path.join(spec.out, "ablation.csv"), ["point", "cycles", "speedup_vs_pe", "ok"],
                    [(r.point, r.cycles, r.speedup, r.ok) for r in rep.rows])
        write_table(os.path.join(spec.out, "contributions.csv"), ["mechanism", "fraction"],
                    rep.contributions.items())
    values = {repr(r.result) for r in rep.rows}
    if any(not r.ok for r in rep.rows):
        return EXIT_FAULT
    return EXIT_OK if len(values) == 1 else EXIT_MISMATCH


def cmd_graph(args) -> int:
    if args.what == "info":
        spec = _spec(args)
        g = spec.resolve()
        for k, v in graph_info(g).items():
            print(f"{k}={v}")
    else:
        g = generate(args.gen, args.seed or 0)
        save_edge_list(g, args.output)
        print(f"wrote {g.n_vertices} vertices, {g.n_edges} edges to {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="udsim", description="Event-driven graph accelerator simulator")
    sub = p.add_subparsers(dest="verb", required=True)

    a = sub.add_parser("asm", help="assemble and validate a program")
    a.add_argument("file")
    a.add_argument("--disasm", action="store_true", help="print the canonical disassembly")
    a.add_argument("--json", help="write the program image as JSON")
    a.set_defaults(fn=cmd_asm)

    r = sub.add_parser("run", help="run one kernel")
    _add_run_flags(r)
    r.add_argument("--check", action="store_true", help="compare against the host oracle")
    r.set_defaults(fn=cmd_run)

    b = sub.add_parser("bench", help="microbenchmarks")
    b.add_argument("what", choices=("ramp", "outstanding", "spawn"))
    b.add_argument("--config")
    b.add_argument("--ramp-sizes", dest="ramp_sizes", type=_ints, default=[8])
    b.add_argument("--ramp-threads", dest="ramp_threads", type=_ints, default=[1])
    b.add_argument("--ramp-lanes", dest="ramp_lanes", type=_ints, default=[1])
    b.add_argument("--ramp-accelerators", dest="ramp_accelerators", type=_ints, default=[1])
    b.add_argument("--ramp-stacks", dest="ramp_stacks", type=_ints, default=None)
    b.add_argument("--requests", type=int, default=1024, help="requests per thread")
    b.add_argument("--threads", type=int, default=1000, help="threads to spawn (spawn)")
    b.add_argument("--out")
    add_node_flags(b)
    b.set_defaults(fn=cmd_bench)

    ab = sub.add_parser("ablate", help="run a kernel at all five mechanism ladder points")
    _add_run_flags(ab)
    ab.set_defaults(fn=cmd_ablate)

    g = sub.add_parser("graph", help="graph utilities")
    g.add_argument("what", choices=("info", "gen"))
    g.add_argument("--graph")
    g.add_argument("--graph_format", "--graph-format", dest="graph_format", choices=("EDGELIST", "MTX"))
    g.add_argument("--gen")
    g.add_argument("--seed", type=int)
    g.add_argument("--config")
    g.add_argument("-o", "--output", help="edge-list file to write (gen)")
    g.set_defaults(fn=cmd_graph)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verb == "graph" and args.what == "gen" and not (args.gen and args.output):
        parser.error("graph gen needs --gen and --output")
    if args.verb in ("run", "ablate") and args.kernel is None and not args.config:
        parser.error("name a kernel (tc, bfs, pr, js) or give --config")
    try:
        return args.fn(args)
    except (ConfigError, GraphFormatError, AssemblyError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
