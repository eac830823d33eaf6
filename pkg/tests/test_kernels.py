import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from udsim import NodeConfig
from udsim.kernels import (
    KERNELS, PR_TOLERANCE, build_bfs, build_js, build_kernel, build_pr, build_tc, complete_graph,
    erdos_renyi, from_edges, matches_oracle, oracle_bfs, oracle_for, oracle_js, oracle_pr,
    oracle_tc, path_graph, power_law, ring_graph, star_graph,
)
from util import run_bundle

FIXTURES = {
    "K3": complete_graph(3), "K4": complete_graph(4), "K7": complete_graph(7),
    "path1": path_graph(1), "path2": path_graph(2), "path9": path_graph(9),
    "star6": star_graph(6), "ring3": ring_graph(3), "ring10": ring_graph(10),
    "isolated": from_edges([(0, 1), (1, 2)], n=6, compact=False),
}
CONFIGS = {
    "1x1": NodeConfig(accelerators=1, lanes_per_accelerator=1),
    "1x4": NodeConfig(accelerators=1, lanes_per_accelerator=4),
    "3x2": NodeConfig(accelerators=3, lanes_per_accelerator=2),
}


def check(bundle, g, cfg):
    res, got = run_bundle(bundle, cfg)
    assert res.ok, res.fault
    want = oracle_for(bundle, g)
    assert matches_oracle(bundle, got, want), (got, want)
    return res, got


@pytest.mark.parametrize("cfg", sorted(CONFIGS))
@pytest.mark.parametrize("name", sorted(FIXTURES))
@pytest.mark.parametrize("kernel", KERNELS)
def test_fixture(kernel, name, cfg):
    g, c = FIXTURES[name], CONFIGS[cfg]
    check(build_kernel(kernel, g, c, source=g.n_vertices - 1), g, c)


@pytest.mark.parametrize("cfg", sorted(CONFIGS))
@pytest.mark.parametrize("name", ["K4", "K7", "star6", "ring3"])
def test_coarse_tc_fixture(name, cfg):
    g, c = FIXTURES[name], CONFIGS[cfg]
    check(build_tc(g, config=c, coarse=True), g, c)


def test_known_values():
    c = CONFIGS["1x4"]
    assert run_bundle(build_tc(complete_graph(3), config=c), c)[1] == 1
    assert run_bundle(build_tc(complete_graph(5), config=c), c)[1] == 10
    assert run_bundle(build_bfs(path_graph(5), 0, config=c), c)[1] == [0, 1, 2, 3, 4]
    assert run_bundle(build_bfs(FIXTURES["isolated"], 0, config=c), c)[1] == [0, 1, 2, -1, -1, -1]
    assert run_bundle(build_pr(path_graph(1), config=c), c)[1] == oracle_pr(path_graph(1))
    js = run_bundle(build_js(star_graph(3), config=c), c)[1]
    assert js[1][2] == 1.0 and js[0][1] == 0.0 and js[0][0] == 1.0


def test_bundle_metadata():
    g = complete_graph(4)
    assert build_tc(g).name == "tc"
    assert build_tc(g, coarse=True).name == "tc-coarse"
    assert build_bfs(g, 2).params["source"] == 2
    p = build_pr(g, 0.5, 3).params
    assert p["damping"] == 0.5 and p["iters"] == 3


@pytest.mark.parametrize("bad", [-1, 4])
def test_bfs_invalid_source(bad):
    with pytest.raises(ValueError, match="invalid source"):
        build_bfs(complete_graph(4), bad)


def test_pr_needs_an_iteration():
    with pytest.raises(ValueError):
        build_pr(complete_graph(4), iters=0)


def test_unknown_kernel():
    with pytest.raises(ValueError, match="unknown kernel"):
        build_kernel("sssp", complete_graph(3))


def test_js_streaming_fallback_is_exercised():
    # a hub's neighbor list is too long for the on-chip cache
    g = star_graph(80)
    c = CONFIGS["1x4"]
    res, _ = check(build_js(g, config=c), g, c)
    assert res.stats.label_counts["js_fstep"] > 0


def test_pr_iterations_and_damping():
    g = power_law(60, 2, seed=2)
    c = CONFIGS["3x2"]
    for damping, iters in ((0.85, 1), (0.5, 4), (0.99, 12)):
        res, got = check(build_pr(g, damping, iters, config=c), g, c)
        assert max(abs(a - b) for a, b in zip(got, oracle_pr(g, damping, iters))) <= PR_TOLERANCE


def test_bfs_every_source():
    g = erdos_renyi(25, 30, seed=7)
    c = CONFIGS["1x4"]
    for s in range(g.n_vertices):
        assert run_bundle(build_bfs(g, s, config=c), c)[1] == oracle_bfs(g, s)


def test_matches_oracle_tolerance():
    b = build_pr(complete_graph(3))
    assert matches_oracle(b, [1.0, 2.0], [1.0, 2.0 + PR_TOLERANCE / 2])
    assert not matches_oracle(b, [1.0, 2.0], [1.0, 2.0 + 2 * PR_TOLERANCE])
    assert not matches_oracle(b, [1.0], [1.0, 2.0])
    t = build_tc(complete_graph(3))
    assert not matches_oracle(t, 1, 2)


small_graphs = st.lists(st.tuples(st.integers(0, 14), st.integers(0, 14)), min_size=1, max_size=40) \
    .map(lambda e: from_edges(e, n=15, compact=False))


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(small_graphs, st.sampled_from(sorted(CONFIGS)))
def test_random_small_graphs_tc_bfs(g, cfg):
    c = CONFIGS[cfg]
    assert run_bundle(build_tc(g, config=c), c)[1] == oracle_tc(g)
    assert run_bundle(build_tc(g, config=c, coarse=True), c)[1] == oracle_tc(g)
    assert run_bundle(build_bfs(g, 0, config=c), c)[1] == oracle_bfs(g, 0)


@settings(max_examples=8, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(small_graphs)
def test_random_small_graphs_js(g):
    c = CONFIGS["1x4"]
    assert run_bundle(build_js(g, config=c), c)[1] == oracle_js(g)
