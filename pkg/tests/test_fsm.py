import random

import pytest
from hypothesis import given, settings, strategies as st

from agentic_control.fsm import (
    Fsm, InfeasibleGraph, UnknownState, NoReachablePair, encode_as_dict_text, format_path,
    generate_fsm, parse_dict_text, reachable_from, sample_benchmark_task, shortest_path,
    traverse, validate_structure,
)

from conftest import DOC_FSM
from oracles import all_ordered_reachable_pairs, simple_path_lengths


@pytest.fixture
def doc_fsm():
    return Fsm.from_dict(DOC_FSM)


def random_fsm(rng, n_max=8):
    n = rng.randint(2, n_max)
    r = rng.randint(n - 1, n * (n - 1))
    return generate_fsm(n, r, rng.randrange(2 ** 32))


# -- generation ----------------------------------------------------------------

def test_generate_small_cell():
    for seed in range(20):
        fsm = generate_fsm(4, 4, seed)
        assert fsm.n_edges == 4
        assert validate_structure(fsm, 4) == []


def test_two_nodes_one_edge():
    seen = set()
    for seed in range(30):
        adj = generate_fsm(2, 1, seed).to_dict()
        assert adj in ({0: [1], 1: []}, {0: [], 1: [0]})
        seen.add(str(adj))
    assert len(seen) == 2


def test_dense_cell_connectivity_over_many_seeds():
    for seed in range(100):
        fsm = generate_fsm(6, 20, seed)
        incident = {i for e in fsm.edges() for i in e}
        assert incident == set(range(6))
        assert fsm.n_edges == 20


def test_complete_graph_possible():
    fsm = generate_fsm(5, 20, 3)
    assert sorted(fsm.edges()) == [(i, j) for i in range(5) for j in range(5) if i != j]


@pytest.mark.parametrize("n, r", [(1, 1), (3, 7), (5, 2), (0, 0)])
def test_infeasible_arguments(n, r):
    with pytest.raises(InfeasibleGraph):
        generate_fsm(n, r, 0)


def test_generation_deterministic_per_seed():
    assert generate_fsm(10, 45, 99) == generate_fsm(10, 45, 99)
    assert generate_fsm(10, 45, 99) != generate_fsm(10, 45, 100)


def test_sparse_graph_still_connected():
    # fewer edges than nodes: the cursor alone need not cover everything
    for seed in range(50):
        fsm = generate_fsm(6, 5, seed)
        assert validate_structure(fsm, 5) == []


# -- structure -----------------------------------------------------------------

def test_validate_examples(doc_fsm):
    assert validate_structure(doc_fsm) == []
    v = validate_structure(Fsm.from_dict({0: [0]}))
    assert [str(x) for x in v] == ["self-loop at 0"]
    v = validate_structure(Fsm.from_dict({0: [1], 1: [], 2: []}, n_nodes=3))
    assert [str(x) for x in v] == ["node 2 disconnected"]


def test_validate_edge_count(doc_fsm):
    kinds = [v.kind for v in validate_structure(doc_fsm, n_edges=5)]
    assert kinds == ["edge_count"]


# -- traversal and search ------------------------------------------------------

def test_traverse_examples(doc_fsm):
    assert traverse(doc_fsm, [0, 1, 2, 0]).valid
    rep = traverse(doc_fsm, [5])
    assert rep.valid and rep.executed_prefix == (5,)
    rep = traverse(doc_fsm, [0, 2, 1])
    assert not rep.valid
    assert rep.first_invalid_index == 1
    assert rep.invalid_transition == (2, 1)
    assert rep.executed_prefix == (0, 2)


def test_traverse_unknown_state(doc_fsm):
    with pytest.raises(UnknownState):
        traverse(doc_fsm, [0, 7])


def test_shortest_path_examples(doc_fsm):
    assert shortest_path(doc_fsm, 1, 0) == [1, 2, 0]
    assert simple_path_lengths(DOC_FSM, 3, 1, 0) == 2
    assert shortest_path(doc_fsm, 2, 2) == [2]
    dead = Fsm.from_dict({0: [1], 1: [], 2: [1]})
    assert shortest_path(dead, 1, 0) is None


def test_shortest_path_ascending_tie_break():
    fsm = Fsm.from_dict({0: [2, 1], 1: [3], 2: [3], 3: []})
    assert shortest_path(fsm, 0, 3) == [0, 1, 3]


def test_shortest_path_matches_brute_force():
    rng = random.Random(7)
    for _ in range(150):
        fsm = random_fsm(rng, 7)
        adj = fsm.to_dict()
        for s in range(fsm.n_nodes):
            for g in range(fsm.n_nodes):
                path = shortest_path(fsm, s, g)
                best = simple_path_lengths(adj, fsm.n_nodes, s, g)
                if best is None:
                    assert path is None
                else:
                    assert len(path) - 1 == best
                    assert traverse(fsm, path).valid


def test_reachable_from_matches_closure():
    rng = random.Random(3)
    for _ in range(50):
        fsm = random_fsm(rng, 8)
        pairs = all_ordered_reachable_pairs(fsm.to_dict(), fsm.n_nodes)
        for s in range(fsm.n_nodes):
            got = {g for g in reachable_from(fsm, s) if g != s}
            assert got == {g for (a, g) in pairs if a == s}


# -- task sampling -------------------------------------------------------------

def test_sample_task_doc_fsm(doc_fsm):
    pairs = {sample_benchmark_task(doc_fsm, s) for s in range(200)}
    assert pairs == all_ordered_reachable_pairs(DOC_FSM, 3)
    assert len(pairs) == 6


def test_sample_task_two_nodes():
    fsm = Fsm.from_dict({0: [1], 1: []})
    assert {sample_benchmark_task(fsm, s) for s in range(30)} == {(0, 1)}


def test_sample_task_deterministic(doc_fsm):
    assert sample_benchmark_task(doc_fsm, 11) == sample_benchmark_task(doc_fsm, 11)


def test_sample_task_without_pairs():
    with pytest.raises(NoReachablePair):
        sample_benchmark_task(Fsm.from_dict({0: []}), 0)


# -- encoding ------------------------------------------------------------------

def test_encoding_examples(doc_fsm):
    assert encode_as_dict_text(doc_fsm) == "{0: [1, 2], 1: [2], 2: [0]}"
    assert "1: []" in encode_as_dict_text(Fsm.from_dict({0: [1], 1: []}))
    assert format_path([0, 1]) == "[0, 1]"


def test_encode_parse_round_trip():
    rng = random.Random(0)
    for _ in range(100):
        fsm = random_fsm(rng, 12)
        text = encode_as_dict_text(fsm)
        back = parse_dict_text(text)
        assert back == fsm
        assert encode_as_dict_text(back) == text


@pytest.mark.parametrize("bad", ["[1, 2]", "{0: [1, 'a']}", "{0: ", "{'x': [1]}"])
def test_parse_dict_text_rejects(bad):
    with pytest.raises(ValueError):
        parse_dict_text(bad)


def test_json_round_trip(tmp_path, doc_fsm):
    fsm = generate_fsm(12, 66, 5)
    path = tmp_path / "fsm.json"
    fsm.save(path)
    back = Fsm.load(path)
    assert back == fsm and back.seed == 5
    assert Fsm.from_json(doc_fsm.to_json()) == doc_fsm


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 9).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(n - 1, n * (n - 1)), st.integers(0, 2 ** 31))))
def test_generated_graphs_are_sound(args):
    n, r, seed = args
    fsm = generate_fsm(n, r, seed)
    assert validate_structure(fsm, r) == []
