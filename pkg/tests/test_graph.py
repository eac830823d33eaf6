import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from udsim import DramImage
from udsim.kernels import (
    GraphFormatError, LayoutPlan, complete_graph, erdos_renyi, from_edges, graph_info, jaccard,
    layout_graph, load_graph, oracle_bfs, oracle_js, oracle_pr, oracle_tc, parse_edge_list,
    parse_matrix_market, path_graph, power_law, ring_graph, save_edge_list, star_graph,
)
from udsim.kernels.layout import ATTR_WORDS


def to_nx(g):
    h = nx.Graph()
    h.add_nodes_from(range(g.n_vertices))
    h.add_edges_from(g.edges())
    return h


edge_lists = st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), max_size=120)


# ------------------------------------------------------------------ ingestion
def test_edge_list_normalization():
    g = parse_edge_list("# comment\n1 2\n2 1\n3 3\n\n% also a comment\n2 5 7.5\n")
    # ids 1,2,3,5 compact to 0..3
    assert g.n_vertices == 4
    assert g.edges() == [(0, 1), (1, 3)]
    assert g.dropped_self_loops == 1
    assert g.dropped_duplicates == 1
    assert g.adj(1) == (0, 3)


@pytest.mark.parametrize("text,line", [("1 2\nfoo\n", 2), ("1 x\n", 1), ("1 -2\n", 1), ("", 0)])
def test_edge_list_errors(text, line):
    with pytest.raises(GraphFormatError) as e:
        parse_edge_list(text)
    assert e.value.line == line


MTX = """%%MatrixMarket matrix coordinate pattern symmetric
% comment
5 5 4
2 1
3 2
3 3
1 3
"""


def test_matrix_market_keeps_ids():
    g = parse_matrix_market(MTX)
    assert g.n_vertices == 5
    assert g.edges() == [(0, 1), (0, 2), (1, 2)]
    assert g.dropped_self_loops == 1
    assert g.degrees == [2, 2, 2, 0, 0]


def test_matrix_market_general_with_values():
    g = parse_matrix_market("%%MatrixMarket matrix coordinate real general\n3 3 2\n1 2 0.5\n2 1 0.5\n")
    assert g.edges() == [(0, 1)]
    assert g.dropped_duplicates == 1


@pytest.mark.parametrize("text,fragment", [
    ("1 2\n", "header"),
    ("%%MatrixMarket matrix array real general\n2 2\n", "coordinate"),
    ("%%MatrixMarket matrix coordinate pattern general\n2 2\n", "size line"),
    ("%%MatrixMarket matrix coordinate pattern general\n2 2 1\n3 1\n", "outside the declared size"),
    ("%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 a\n", "non-integer"),
    ("%%MatrixMarket matrix coordinate pattern general\n", "missing size line"),
])
def test_matrix_market_errors(text, fragment):
    with pytest.raises(GraphFormatError, match=fragment):
        parse_matrix_market(text)


def test_load_and_save(tmp_path):
    g = erdos_renyi(40, 90, seed=3)
    p = tmp_path / "g.txt"
    save_edge_list(g, str(p))
    again = load_graph(str(p))
    assert again.edges() == g.edges()
    m = tmp_path / "g.mtx"
    m.write_text(MTX)
    assert load_graph(str(m)).n_vertices == 5
    assert load_graph(str(p), "edgelist").n_edges == g.n_edges
    with pytest.raises(GraphFormatError, match="unknown graph format"):
        load_graph(str(p), "csv")


@settings(max_examples=80, deadline=None)
@given(edge_lists)
def test_csr_invariants(edges):
    g = from_edges(edges, compact=False) if edges else from_edges([], n=0)
    expect = {(min(u, v), max(u, v)) for u, v in edges if u != v}
    assert set(g.edges()) == expect
    assert g.row_offsets[0] == 0 and g.row_offsets[-1] == len(g.neighbors)
    for v in range(g.n_vertices):
        a = g.adj(v)
        assert list(a) == sorted(set(a))
        assert v not in a
        for w in a:
            assert v in g.adj(w)
    assert g.dropped_self_loops == sum(1 for u, v in edges if u == v)


def test_from_edges_range_check():
    with pytest.raises(GraphFormatError):
        from_edges([(0, 5)], n=3, compact=False)
    with pytest.raises(GraphFormatError):
        from_edges([(0, -1)])


# ------------------------------------------------------------------ generators
def test_fixtures():
    assert complete_graph(5).n_edges == 10
    assert path_graph(6).edges() == [(i, i + 1) for i in range(5)]
    assert ring_graph(5).n_edges == 5
    assert star_graph(7).degrees[0] == 7


def test_generators_are_seeded():
    assert erdos_renyi(100, 300, 1) == erdos_renyi(100, 300, 1)
    assert erdos_renyi(100, 300, 1) != erdos_renyi(100, 300, 2)
    assert power_law(200, 3, 5) == power_law(200, 3, 5)
    assert erdos_renyi(100, 300, 1).n_edges == 300


def test_power_law_is_heavy_tailed_and_shuffled():
    g = power_law(2000, 3, seed=1)
    deg = g.degrees
    assert max(deg) > 10 * (2 * g.n_edges / g.n_vertices)
    hub = deg.index(max(deg))
    assert hub >= 10  # hubs are not stuck at the low ids
    plain = power_law(2000, 3, seed=1, shuffle=False)
    assert sorted(plain.degrees) == sorted(deg)


def test_graph_info():
    info = graph_info(star_graph(4))
    assert info == {"vertices": 5, "edges": 4, "max_degree": 4, "avg_degree": 1.6, "isolated": 0,
                    "dropped_self_loops": 0, "dropped_duplicates": 0}


# ------------------------------------------------------------------ oracles vs networkx
@pytest.mark.parametrize("seed", range(5))
def test_oracle_tc_matches_networkx(seed):
    g = erdos_renyi(60, 400, seed)
    assert oracle_tc(g) == sum(nx.triangles(to_nx(g)).values()) // 3


def test_oracle_tc_fixtures():
    assert oracle_tc(complete_graph(3)) == 1
    assert oracle_tc(complete_graph(6)) == 20
    assert oracle_tc(ring_graph(8)) == 0
    assert oracle_tc(star_graph(9)) == 0


@pytest.mark.parametrize("seed", range(5))
def test_oracle_bfs_matches_networkx(seed):
    g = erdos_renyi(80, 100, seed)
    ref = nx.single_source_shortest_path_length(to_nx(g), 0)
    assert oracle_bfs(g, 0) == [ref.get(v, -1) for v in range(g.n_vertices)]
    with pytest.raises(ValueError):
        oracle_bfs(g, 80)


def test_oracle_pr_converges_to_networkx():
    g = power_law(300, 2, seed=4)  # connected, so no dangling vertices
    ours = oracle_pr(g, 0.85, 200)
    ref = nx.pagerank(to_nx(g), alpha=0.85, tol=1e-14, max_iter=1000)
    assert max(abs(ours[v] - ref[v]) for v in range(g.n_vertices)) < 1e-10


def test_oracle_pr_single_step():
    g = path_graph(3)
    r = oracle_pr(g, 0.5, 1)
    assert r == [0.5 / 3 + 0.5 * (1 / 3) / 2, 0.5 / 3 + 0.5 * (2 / 3), 0.5 / 3 + 0.5 * (1 / 3) / 2]


@pytest.mark.parametrize("seed", range(3))
def test_oracle_js_matches_networkx(seed):
    g = erdos_renyi(30, 80, seed)
    h = to_nx(g)
    js = oracle_js(g)
    pairs = [(u, v) for u in range(30) for v in range(u + 1, 30)]
    for u, v, p in nx.jaccard_coefficient(h, pairs):
        assert js[u][v] == js[v][u] == pytest.approx(p, abs=0, rel=1e-15)
    for v in range(30):
        assert js[v][v] == (1.0 if g.degree(v) else 0.0)


def test_jaccard_isolated_pair():
    g = from_edges([(0, 1)], n=4, compact=False)
    assert jaccard(g, 2, 3) == 0.0


# ------------------------------------------------------------------ layout
def test_layout_writes_csr():
    g = complete_graph(4)
    plan = LayoutPlan.for_graph(g, result_words=4, aux={"vis": 4})
    dram = DramImage(1 << 20)
    layout_graph(g, plan, dram)
    for v in range(4):
        deg, vid, ptr, _ = dram.read_words(plan.attr_addr(v), ATTR_WORDS)
        assert (deg, vid) == (3, v)
        assert dram.read_words(ptr, deg) == list(g.adj(v))
    assert plan.aux_base("vis") % 64 == 0
    assert plan.end <= plan.aux_base("vis") + 32


def test_layout_overflow_detected():
    g = complete_graph(10)
    plan = LayoutPlan.for_graph(g, limit=0x10100)
    with pytest.raises(ValueError, match="region overflow"):
        plan.check(g, 1 << 30)
    with pytest.raises(KeyError):
        plan.aux_base("missing")
