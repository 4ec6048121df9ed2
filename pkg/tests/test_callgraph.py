"""Tests for call graph construction, reachability and witness paths."""

import random

import pytest

from src.binder import bind_types
from src.callgraph import (
    UNRESOLVED_CALLEE,
    CallEdge,
    CallGraph,
    CallGraphError,
    Resolution,
    build_call_graph,
    reachable_from,
    shortest_witness_path,
)
from src.source_model import FuncId, Position, parse_tree


def fid(name: str) -> FuncId:
    return FuncId(import_path="example.com/chain/a", name=name, file="a/a.go", offset=0)


def site(line: int) -> Position:
    return Position("a/a.go", line, 1)


def graph_of(names: list[str], edges: list[tuple[str, str]]) -> CallGraph:
    return CallGraph.from_edges(
        {fid(n) for n in names},
        [CallEdge(fid(a), fid(b), site(i + 1), Resolution.DIRECT) for i, (a, b) in enumerate(edges)],
    )


def dfs_oracle(adjacency: dict[int, set[int]], seeds: set[int]) -> set[int]:
    reached, stack = set(), list(seeds)
    while stack:
        node = stack.pop()
        if node in reached:
            continue
        reached.add(node)
        stack.extend(adjacency[node])
    return reached


def build(go_tree, files):
    model = bind_types(parse_tree(go_tree(files)))
    return model, build_call_graph(model)


def by_name(model, name: str, receiver: str = "") -> FuncId:
    return next(f for f in model.functions if f.name == name and f.receiver == receiver)


# =============================================================================
# Construction
# =============================================================================

def test_direct_chain(go_tree):
    model, graph = build(go_tree, {"a/a.go": """
        package a

        func A() { B() }
        func B() { C() }
        func C() {}
    """})

    edges = [(e.caller.name, e.callee.name, e.resolution) for e in graph.edges]
    assert edges == [("A", "B", Resolution.DIRECT), ("B", "C", Resolution.DIRECT)]


def test_no_calls_no_edges(go_tree):
    _, graph = build(go_tree, {"a/a.go": "package a\n\nfunc A() {}\nfunc B() {}\n"})

    assert graph.edges == []
    assert len(graph.nodes) == 2


def test_interface_dispatch_fans_out_from_one_site(go_tree):
    model, graph = build(go_tree, {"a/a.go": """
        package a

        type Hooks interface {
            AfterSend()
        }

        type Staking struct{}

        func (Staking) AfterSend() {}

        type Distr struct{}

        func (Distr) AfterSend() {}

        func Run(h Hooks) {
            h.AfterSend()
        }
    """})

    edges = [e for e in graph.edges if e.caller.name == "Run"]
    assert {e.callee.receiver for e in edges} == {"Staking", "Distr"}
    assert {e.resolution for e in edges} == {Resolution.INTERFACE_DISPATCH}
    assert len({e.site for e in edges}) == 1


def test_cross_package_and_method_calls(go_tree):
    model, graph = build(go_tree, {
        "x/bank/keeper/keeper.go": """
            package keeper

            import "example.com/chain/x/bank/types"

            type Keeper struct{}

            func (k Keeper) Send() {
                k.validate()
                types.Check()
            }

            func (k *Keeper) validate() {}
        """,
        "x/bank/types/types.go": "package types\n\nfunc Check() {}\n",
    })

    send = by_name(model, "Send", "Keeper")
    callees = {e.callee.name for e in graph.edges if e.caller == send}
    assert callees == {"validate", "Check"}


def test_function_values(go_tree):
    model, graph = build(go_tree, {"a/a.go": """
        package a

        func Target() {}

        func Aliased() {
            f := Target
            f()
        }

        func Parameter(callback func()) {
            callback()
        }
    """})

    aliased = [e for e in graph.edges if e.caller.name == "Aliased"]
    assert [(e.callee.name, e.resolution) for e in aliased] == [("Target", Resolution.DIRECT)]
    parameter = [e for e in graph.edges if e.caller.name == "Parameter"]
    assert [(e.callee, e.resolution) for e in parameter] == [(UNRESOLVED_CALLEE, Resolution.UNRESOLVED)]
    assert graph.coverage() == parameter


def test_external_calls_are_leaves(go_tree):
    _, graph = build(go_tree, {"a/a.go": """
        package a

        import "fmt"

        func A() {
            fmt.Println("x")
        }
    """})

    assert graph.edges == []


def test_test_functions_are_never_callees(go_tree):
    model, graph = build(go_tree, {
        "a/a.go": "package a\n\nfunc Prod() { helper() }\n",
        "a/a_test.go": "package a\n\nfunc helper() {}\n\nfunc TestProd() { Prod() }\n",
    })

    assert all(not model.functions[e.callee].is_test for e in graph.edges if e.callee in model.functions)
    assert [e.caller.name for e in graph.edges] == ["TestProd"]


def test_dump_listing(go_tree):
    _, graph = build(go_tree, {"a/a.go": "package a\n\nfunc A() { B() }\n\nfunc B() {}\n"})

    assert [e.listing() for e in graph.edges] == [
        "example.com/chain/a.A\texample.com/chain/a.B\ta/a.go:3\tDirect",
    ]


def test_add_edge_rejects_unknown_endpoints():
    graph = CallGraph({fid("A")})

    with pytest.raises(CallGraphError):
        graph.add_edge(CallEdge(fid("A"), fid("Missing"), site(1), Resolution.DIRECT))
    with pytest.raises(CallGraphError):
        graph.add_edge(CallEdge(fid("Missing"), fid("A"), site(1), Resolution.DIRECT))


def test_multiple_sites_share_one_graph_edge():
    graph = CallGraph({fid("A"), fid("B")})
    graph.add_edge(CallEdge(fid("A"), fid("B"), site(9), Resolution.DIRECT))
    graph.add_edge(CallEdge(fid("A"), fid("B"), site(4), Resolution.DIRECT))

    assert graph.graph.number_of_edges() == 1
    assert graph.graph.edges[fid("A"), fid("B")]["sites"] == [site(4), site(9)]
    assert len(graph.edges) == 2


# =============================================================================
# Reachability
# =============================================================================

def test_reachable_from_examples():
    graph = graph_of(["A", "B", "C", "D"], [("A", "B"), ("B", "C"), ("C", "A")])

    assert reachable_from(graph, set()) == set()
    assert reachable_from(graph, {fid("A")}) == {fid("A"), fid("B"), fid("C")}
    assert reachable_from(graph, {fid("D")}) == {fid("D")}


def test_reachable_from_rejects_unknown_seed():
    graph = graph_of(["A"], [])

    with pytest.raises(CallGraphError):
        reachable_from(graph, {fid("Z")})


def test_unresolved_edges_do_not_extend_reachability():
    graph = graph_of(["A", "B"], [])
    graph.add_edge(CallEdge(fid("A"), UNRESOLVED_CALLEE, site(1), Resolution.UNRESOLVED))

    assert reachable_from(graph, {fid("A")}) == {fid("A")}


@pytest.mark.parametrize("seed", range(100))
def test_reachable_from_matches_dfs_oracle(seed):
    rng = random.Random(seed)
    size = rng.randint(1, 25)
    adjacency = {i: set() for i in range(size)}
    for _ in range(rng.randint(0, size * 3)):
        adjacency[rng.randrange(size)].add(rng.randrange(size))
    seeds = {rng.randrange(size) for _ in range(rng.randint(0, 3))}

    names = [f"F{i:02d}" for i in range(size)]
    graph = graph_of(names, [(names[a], names[b]) for a in adjacency for b in sorted(adjacency[a])])

    expected = {fid(names[i]) for i in dfs_oracle(adjacency, seeds)}
    reached = reachable_from(graph, {fid(names[i]) for i in seeds})
    assert reached == expected
    assert {fid(names[i]) for i in seeds} <= reached

    # adding edges never shrinks the closure
    extra_from, extra_to = rng.randrange(size), rng.randrange(size)
    graph.add_edge(CallEdge(fid(names[extra_from]), fid(names[extra_to]), site(999), Resolution.DIRECT))
    assert reached <= reachable_from(graph, {fid(names[i]) for i in seeds})


# =============================================================================
# Witness paths
# =============================================================================

def test_witness_to_self_is_empty():
    graph = graph_of(["A"], [])

    assert shortest_witness_path(graph, fid("A"), fid("A")) == []


def test_witness_prefers_fewer_edges():
    graph = graph_of(["A", "B", "C"], [("A", "B"), ("B", "C"), ("A", "C")])

    path = shortest_witness_path(graph, fid("A"), fid("C"))

    assert [callee for callee, _ in path] == [fid("C")]


def test_witness_breaks_ties_by_smallest_callee():
    graph = graph_of(["A", "B", "C", "D"], [("A", "C"), ("A", "B"), ("C", "D"), ("B", "D")])

    path = shortest_witness_path(graph, fid("A"), fid("D"))

    assert [callee.name for callee, _ in path] == ["B", "D"]
    assert path[0][1] == site(2)


def test_witness_to_unreachable_target_raises():
    graph = graph_of(["A", "B"], [("B", "A")])

    with pytest.raises(CallGraphError):
        shortest_witness_path(graph, fid("A"), fid("B"))


@pytest.mark.parametrize("seed", range(20))
def test_witness_length_is_shortest_distance(seed):
    rng = random.Random(1000 + seed)
    size = rng.randint(2, 15)
    names = [f"F{i:02d}" for i in range(size)]
    pairs = {(rng.randrange(size), rng.randrange(size)) for _ in range(size * 2)}
    graph = graph_of(names, [(names[a], names[b]) for a, b in sorted(pairs)])

    source = fid(names[0])
    for target in sorted(reachable_from(graph, {source})):
        path = shortest_witness_path(graph, source, target)
        # breadth-first distance as the oracle
        frontier, distance, seen = {0}, 0, {0}
        goal = names.index(target.name)
        while goal not in frontier:
            frontier = {b for a, b in pairs if a in frontier} - seen
            seen |= frontier
            distance += 1
        assert len(path) == distance
        assert (path[-1][0] if path else source) == target
        previous = source
        for callee, position in path:
            assert graph.graph.has_edge(previous, callee)
            assert position in graph.graph.edges[previous, callee]["sites"]
            previous = callee
