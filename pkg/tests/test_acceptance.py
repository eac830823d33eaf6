"""Acceptance suite: one group of tests per criterion, summarized PASS/FAIL at the end of the run."""

import functools
import os
import random
import subprocess
import sys

import pytest

from udsim import DramImage, NodeConfig, assemble, disassemble, run
from udsim.harness import bench_bandwidth_ramp, bench_spawn, bench_stream, emit_report, run_ablation_suite
from udsim.isa import CORE_MNEMONICS, SIGNATURES
from udsim.kernels import (
    KERNELS, build_kernel, build_tc, complete_graph, erdos_renyi, matches_oracle, oracle_for,
    oracle_tc, path_graph, power_law, ring_graph, star_graph,
)
from udsim.kernels.bfs import bfs_source
from udsim.kernels.js import js_source
from udsim.kernels.micro import SPAWN_SOURCE, stream_program, stream_source
from udsim.kernels.pr import pr_source
from udsim.kernels.tc import tc_source
from util import run_bundle

crit = pytest.mark.criterion
ONE_ACC = NodeConfig(accelerators=1, lanes_per_accelerator=64)


@functools.lru_cache(maxsize=None)
def stream_1lane():
    return bench_stream(ONE_ACC, transfer_words=8, threads=1, lanes=1, requests=1024)


# ------------------------------------------------------------------ 1
@crit(1, "single-lane streaming bandwidth")
def test_c1_stream_program_shape():
    img = stream_program(8)
    resp = img.handler("stream_resp")
    assert [i.opcode for i in resp.body[:3]] == ["addi", "beq", "yield"]
    start = img.handler("stream_start")
    loop = dict(start.code_labels)["S_issue"]
    assert [i.opcode for i in start.body[loop:loop + 3]] == ["sendm", "addi", "bgt"]
    assert all(i.operands[2].value == 8 for i in img.code if i.opcode == "sendm")


@crit(1, "single-lane streaming bandwidth")
def test_c1_single_lane_bandwidth():
    p = stream_1lane()
    print(f"single-lane bandwidth {p.bandwidth_gbps:.2f} GB/s")
    assert p.bandwidth_gbps == pytest.approx(21.3, rel=0.10)


# ------------------------------------------------------------------ 2
@crit(2, "per-lane memory parallelism and Little's law")
def test_c2_outstanding_requests():
    p = stream_1lane()
    print(f"outstanding {p.outstanding_mean:.2f}, latency {p.latency_mean:.1f} cycles")
    assert p.outstanding_mean == pytest.approx(34, rel=0.15)


@crit(2, "per-lane memory parallelism and Little's law")
def test_c2_littles_law():
    p = stream_1lane()
    print(f"measured {p.bandwidth_gbps:.2f} GB/s, Little {p.little_gbps:.2f} GB/s")
    assert p.little_error < 0.05


# ------------------------------------------------------------------ 3
@crit(3, "bandwidth ramp, port plateau and multi-accelerator aggregate")
def test_c3_ramp_and_plateau():
    lanes = (1, 2, 4, 8, 16, 32, 64)
    pts = bench_bandwidth_ramp(ONE_ACC, lanes=lanes, requests=512)
    bw = [p.bandwidth_gbps for p in pts]
    print("ramp " + " ".join(f"{n}:{b:.1f}" for n, b in zip(lanes, bw)))
    assert all(a <= b for a, b in zip(bw, bw[1:]))
    assert bw[-1] == pytest.approx(458, rel=0.05)


@crit(3, "bandwidth ramp, port plateau and multi-accelerator aggregate")
def test_c3_multi_accelerator_exceeds_one_stack():
    cfg = NodeConfig(accelerators=8, lanes_per_accelerator=64, stacks=8)
    p = bench_stream(cfg, lanes=64, accelerators=8, requests=128)
    print(f"8 accelerators: {p.bandwidth_gbps:.1f} GB/s")
    assert p.bandwidth_gbps > 460


# ------------------------------------------------------------------ 4
@crit(4, "thread-spawn throughput")
def test_c4_spawn_rate():
    s = bench_spawn(ONE_ACC, threads=1000)
    print(f"{s.create_cycles_per_thread:.3f} cycles/thread, {s.threads_per_second:.3g} threads/s")
    assert s.create_cycles_per_thread == pytest.approx(3, abs=1)
    assert s.issue_cycles_per_thread == pytest.approx(3, abs=1)


# ------------------------------------------------------------------ 5
FIXTURES = {
    "K3": complete_graph(3), "K4": complete_graph(4), "path2": path_graph(2),
    "path12": path_graph(12), "star9": star_graph(9), "ring3": ring_graph(3),
    "ring16": ring_graph(16),
}
CONFIGS = (NodeConfig(accelerators=1, lanes_per_accelerator=8),
           NodeConfig(accelerators=2, lanes_per_accelerator=4),
           NodeConfig(accelerators=4, lanes_per_accelerator=16))


def random_graph(seed):
    rng = random.Random(seed)
    n = rng.randint(16, 90)
    if seed % 2:
        return power_law(n, rng.randint(1, 4), seed)
    m = rng.randint(n, min(5 * n, n * (n - 1) // 2))
    return erdos_renyi(n, m, seed)


def _check(kernel, g, cfg, **kw):
    b = build_kernel(kernel, g, cfg, **kw)
    res, got = run_bundle(b, cfg)
    assert res.ok, res.fault
    assert matches_oracle(b, got, oracle_for(b, g))


@crit(5, "kernel results equal the host oracles")
@pytest.mark.parametrize("name", sorted(FIXTURES))
@pytest.mark.parametrize("kernel", KERNELS + ("tc-coarse",))
def test_c5_fixtures(kernel, name):
    g = FIXTURES[name]
    kw = {"coarse": True} if kernel == "tc-coarse" else {}
    _check(kernel.split("-")[0], g, CONFIGS[1], source=g.n_vertices // 2, **kw)


@crit(5, "kernel results equal the host oracles")
@pytest.mark.parametrize("seed", range(24))
def test_c5_random_graphs(seed):
    g = random_graph(seed)
    cfg = CONFIGS[seed % len(CONFIGS)]
    for k in KERNELS:
        _check(k, g, cfg, source=seed % g.n_vertices, damping=0.85, iters=10)
    _check("tc", g, cfg, coarse=True)


@crit(5, "kernel results equal the host oracles")
@pytest.mark.parametrize("kernel", ["tc", "bfs", "pr"])
def test_c5_large_random_graph(kernel):
    g = erdos_renyi(1500, 7500, seed=11)
    _check(kernel, g, NodeConfig(accelerators=2, lanes_per_accelerator=32), source=17)


# ------------------------------------------------------------------ 6
@crit(6, "ablation ladder strictly monotone with at least 5x overall")
def test_c6_ablation_ladder():
    g = erdos_renyi(300, 1500, seed=5)
    node = NodeConfig(accelerators=1, lanes_per_accelerator=16)
    rep = run_ablation_suite(build_tc(g, config=node), node)
    print(" ".join(f"{r.point}:{r.cycles}" for r in rep.rows), f"speedup {rep.total_speedup:.2f}")
    assert all(r.ok and r.result == oracle_tc(g) for r in rep.rows)
    assert rep.strictly_monotone
    assert rep.total_speedup >= 5


# ------------------------------------------------------------------ 7 / 8
SCALE_GRAPH = functools.lru_cache(maxsize=None)(lambda: power_law(2000, 5, seed=3))


@functools.lru_cache(maxsize=None)
def tc_run(accelerators, coarse=False):
    g = SCALE_GRAPH()
    cfg = NodeConfig(accelerators=accelerators, lanes_per_accelerator=64)
    res, got = run_bundle(build_tc(g, config=cfg, coarse=coarse), cfg)
    assert res.ok, res.fault
    assert got == oracle_tc(g)
    return res.final_cycle, res.stats.utilization_spread


@crit(7, "TC runtime scales from 1 to 4 accelerators")
def test_c7_scaling():
    assert 5000 <= SCALE_GRAPH().n_edges <= 10000
    cycles = [tc_run(a)[0] for a in (1, 2, 4)]
    print("cycles at 1/2/4 accelerators:", cycles, f"{cycles[0] / cycles[2]:.2f}x")
    assert cycles[0] >= cycles[1] >= cycles[2]
    assert cycles[0] / cycles[2] >= 1.5


@crit(8, "fine-grained TC beats coarse-grained on skewed graphs")
def test_c8_fine_vs_coarse():
    fine_c, fine_s = tc_run(2)
    coarse_c, coarse_s = tc_run(2, coarse=True)
    print(f"fine {fine_c} cycles spread {fine_s:.3f}; coarse {coarse_c} cycles spread {coarse_s:.3f}")
    assert fine_s < coarse_s
    assert fine_c < coarse_c


# ------------------------------------------------------------------ 9
def _snapshot(kernel, g, cfg, outdir, **kw):
    b = build_kernel(kernel, g, cfg, **kw)
    dram = DramImage(cfg.dram_bytes)
    b.prepare(dram)
    res = run(cfg, b.program, dram, b.boot, b.scratch_init)
    assert res.ok
    files = emit_report(res.stats, outdir, {"kernel": b.name})
    csvs = {}
    for name, path in sorted(files.items()):
        with open(path, "rb") as f:
            csvs[name] = f.read()
    span = 8 * b.plan.result_words
    return csvs, dram.host_read(b.plan.result_base, span), dram.checkpoint_bytes()


@crit(9, "repeated runs are byte-identical")
@pytest.mark.parametrize("kernel", KERNELS + ("tc-coarse",))
def test_c9_determinism(kernel, tmp_path):
    g = power_law(70 if kernel == "js" else 400, 3, seed=9)
    cfg = NodeConfig(accelerators=2, lanes_per_accelerator=8)
    kw = {"coarse": True} if kernel == "tc-coarse" else {"source": 5}
    a = _snapshot(kernel.split("-")[0], g, cfg, str(tmp_path / "a"), **kw)
    b = _snapshot(kernel.split("-")[0], g, cfg, str(tmp_path / "b"), **kw)
    assert a[0] == b[0]
    assert a[1] == b[1]
    assert a[2] == b[2]


@crit(9, "repeated runs are byte-identical")
def test_c9_benchmark_determinism():
    cfg = NodeConfig(accelerators=1, lanes_per_accelerator=8)
    assert bench_stream(cfg, lanes=8, requests=256) == bench_stream(cfg, lanes=8, requests=256)


# ------------------------------------------------------------------ 10
CORPUS = {
    "tc": tc_source(False), "tc-coarse": tc_source(True), "bfs": bfs_source(),
    "pr": pr_source(), "js": js_source(), "stream": stream_source(8),
    "stream-1w": stream_source(1), "spawn": SPAWN_SOURCE,
}


@crit(10, "ISA round trip and per-mnemonic semantic coverage")
@pytest.mark.parametrize("name", sorted(CORPUS))
def test_c10_round_trip(name):
    a = assemble(CORPUS[name])
    b = assemble(disassemble(a))
    assert b == a
    assert disassemble(b) == disassemble(a)
    assert b.serialize() == a.serialize()


@crit(10, "ISA round trip and per-mnemonic semantic coverage")
def test_c10_corpus_uses_core_isa():
    used = set()
    for src in CORPUS.values():
        used |= set(assemble(src).mnemonics())
    assert used <= set(SIGNATURES)
    assert len(CORE_MNEMONICS) == 24


@crit(10, "ISA round trip and per-mnemonic semantic coverage")
def test_c10_semantic_suite():
    import test_isa
    missing = set(SIGNATURES) - test_isa.COVERED
    assert not missing, sorted(missing)
    here = os.path.dirname(os.path.abspath(__file__))
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           os.path.join(here, "test_isa.py")],
                          capture_output=True, text=True, cwd=here)
    assert proc.returncode == 0, proc.stdout[-2000:]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s", *sys.argv[1:]]))
