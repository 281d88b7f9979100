import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lesionuot.baselines import distance_bipartite, gated_edges, normdist_bipartite
from lesionuot.core import LesionInstance, LesionSet
from lesionuot.graph import DISAPPEARING, MERGING, NEW, PERSISTENT


def sphere(r):
    return 4 * math.pi * r**3 / 3


def pair(c0, c1, r0=1.0, r1=1.0):
    return (
        LesionSet("baseline", [LesionInstance(0, c0, sphere(r0))]),
        LesionSet("followup", [LesionInstance(0, c1, sphere(r1))]),
    )


def test_distance_examples():
    g = distance_bipartite(*pair((0, 0, 0), (0, 0, 0)), 5.0)
    assert g.baseline_states == (PERSISTENT,)
    g = distance_bipartite(*pair((0, 0, 0), (100, 0, 0)), 5.0)
    assert g.baseline_states == (DISAPPEARING,) and g.followup_states == (NEW,)


def test_distance_merge():
    set0 = LesionSet.from_arrays("baseline", [[-2, 0, 0], [2, 0, 0]], [10.0, 10.0])
    set1 = LesionSet.from_arrays("followup", [[0, 0, 0]], [20.0])
    g = distance_bipartite(set0, set1, 5.0)
    assert g.edges == {(0, 0), (1, 0)} and g.followup_states == (MERGING,)


def test_normdist_examples():
    assert normdist_bipartite(*pair((3, 3, 3), (3, 3, 3)), 1e-9).edges == {(0, 0)}
    # distance 6, radii 2 and 1: normalized cost 2
    assert normdist_bipartite(*pair((0, 0, 0), (6, 0, 0), 2.0, 1.0), 1.5).edges == frozenset()


def test_normalized_gate_helps_large_lesions():
    s0, s1 = pair((0, 0, 0), (15, 0, 0), 10.0, 10.0)
    assert distance_bipartite(s0, s1, 10.0).edges == frozenset()
    assert normdist_bipartite(s0, s1, 1.0).edges == {(0, 0)}


def test_all_pairs_rule():
    D = np.array([[1.0, 2.0], [1.5, 9.0]])
    assert gated_edges(D, 3.0, "all") == {(0, 0), (0, 1), (1, 0)}
    assert gated_edges(D, 3.0, "nearest") == {(0, 0), (1, 0), (0, 1)}
    D = np.array([[1.0, 2.0], [0.5, 1.8]])
    assert gated_edges(D, 3.0, "nearest") == {(0, 0), (1, 0), (1, 1)}
    assert gated_edges(D, 3.0, "all") == {(0, 0), (0, 1), (1, 0), (1, 1)}
    with pytest.raises(ValueError):
        gated_edges(D, 3.0, "mutual")
    with pytest.raises(ValueError):
        gated_edges(D, 0.0)


def random_sets(rng, n0, n1):
    s0 = LesionSet.from_arrays("baseline", rng.uniform(0, 60, (n0, 3)), rng.uniform(5, 500, n0))
    s1 = LesionSet.from_arrays("followup", rng.uniform(0, 60, (n1, 3)), rng.uniform(5, 500, n1))
    return s0, s1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["nearest", "all"]))
def test_permutation_equivariance(seed, rule):
    rng = np.random.default_rng(seed)
    s0, s1 = random_sets(rng, rng.integers(1, 7), rng.integers(1, 7))
    p0 = rng.permutation(len(s0))
    s0p = LesionSet("baseline", [s0[int(k)] for k in p0])
    for fn, t in ((distance_bipartite, 20.0), (normdist_bipartite, 2.0)):
        g, h = fn(s0, s1, t, rule=rule), fn(s0p, s1, t, rule=rule)
        assert {(int(p0[i]), j) for i, j in h.edges} == set(g.edges)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_infinite_gate_gives_every_baseline_an_edge(seed):
    rng = np.random.default_rng(seed)
    s0, s1 = random_sets(rng, rng.integers(1, 7), rng.integers(1, 7))
    out, _ = distance_bipartite(s0, s1, 1e9).degrees()
    assert np.all(out >= 1)
    # nearest-neighbour outgoing edge is always present
    D = np.linalg.norm(s0.centroids[:, None] - s1.centroids[None], axis=-1)
    edges = distance_bipartite(s0, s1, 1e9).edges
    assert all((i, int(np.argmin(D[i]))) in edges for i in range(len(s0)))
