import numpy as np
import pytest

from lesionuot.graph import MERGING, PERSISTENT, label_events
from lesionuot.synth import (
    EventBudget,
    GenerationError,
    SynthSpec,
    generate_case,
    generate_suite,
    inject_channels,
)
from lesionuot.volume import connected_components

BENCH = SynthSpec(radius_range=(2.0, 8.0), shift_mm=4.0)


def test_no_event_case_is_identity():
    spec = SynthSpec(seed=3, event_budget=EventBudget(0, 0, 0, 0), growth_range=(1.0, 1.0))
    case = generate_case(spec)
    ref = case.reference
    assert (ref.n0, ref.n1) == (10, 10)
    assert set(ref.baseline_states) == set(ref.followup_states) == {PERSISTENT}
    assert case.mask0 == case.mask1
    assert ref.edges == {(k, k) for k in range(10)}


def test_single_merge_case():
    case = generate_case(SynthSpec(seed=1, n_initial=2, event_budget=EventBudget(1, 0, 0, 0)))
    ref = case.reference
    assert (ref.n0, ref.n1) == (2, 1)
    assert ref.edges == {(0, 0), (1, 0)}
    assert ref.baseline_states == (MERGING, MERGING) and ref.followup_states == (MERGING,)


def test_same_seed_is_bit_identical():
    a, b = generate_case(BENCH.replace(seed=11)), generate_case(BENCH.replace(seed=11))
    assert a.mask0.data.tobytes() == b.mask0.data.tobytes()
    assert a.mask1.data.tobytes() == b.mask1.data.tobytes()
    assert a.reference == b.reference and a.set0 == b.set0 and a.set1 == b.set1


def test_suite_seeding():
    one = generate_suite(1, 40, BENCH)
    assert len(one) == 1 and one[0].case_id == "case_000"
    a = generate_suite(3, 40, BENCH)
    b = generate_suite(3, 40, BENCH)
    assert [c.reference for c in a] == [c.reference for c in b]
    assert a[0].set0 == one[0].set0
    with pytest.raises(GenerationError):
        generate_suite(0, 40, BENCH)


@pytest.mark.parametrize("spec", [SynthSpec(), BENCH, BENCH.replace(event_budget=EventBudget(2, 1, 1, 1, 2))])
def test_generated_cases_are_consistent(spec):
    for case in generate_suite(8, 100, spec):
        ref = case.reference
        assert len(connected_components(case.mask0)) == ref.n0 == len(case.set0)
        assert len(connected_components(case.mask1)) == ref.n1 == len(case.set1)
        assert ref == label_events(ref.n0, ref.n1, ref.edges)
        b = spec.event_budget
        out, into = ref.degrees()
        assert int((into >= 2).sum()) == b.merge_pairs
        assert int((out >= 2).sum()) == b.split_sources
        assert int((out == 0).sum()) == b.disappear + b.decoy_pairs
        assert int((into == 0).sum()) == b.appear + b.decoy_pairs
        # merge parents are the baseline lesions nearest to the merged lesion
        for j in np.nonzero(into >= 2)[0]:
            parents = sorted(i for i, q in ref.edges if q == j)
            d = np.linalg.norm(case.set0.centroids - case.set1.centroids[j], axis=1)
            assert sorted(np.argsort(d)[: len(parents)].tolist()) == parents
        # synthetic lesions carry neutral channels
        assert all(les.trust is None and les.appearance is None for les in case.set0)


def test_infeasible_budget():
    with pytest.raises(GenerationError):
        SynthSpec(n_initial=3, event_budget=EventBudget(merge_pairs=2))
    with pytest.raises(GenerationError):
        SynthSpec(radius_range=(0.5, 2.0))


def test_crowded_volume_gives_up():
    with pytest.raises(GenerationError):
        generate_case(SynthSpec(n_initial=40, volume_dims=(24, 24, 24), radius_range=(4.0, 6.0)))


def test_channel_injection():
    case = generate_case(BENCH.replace(seed=5, event_budget=EventBudget(1, 1, 1, 1, 2)))
    scored = inject_channels(case, seed=9)
    out, into = case.reference.degrees()
    for les, d in zip(scored.set0, out):
        assert (les.appearance >= 0.75) == (d > 0) and (les.trust >= 0.75) == (d > 0)
    for les, d in zip(scored.set1, into):
        assert (les.appearance >= 0.75) == (d > 0)
    assert np.array_equal(scored.set0.centroids, case.set0.centroids)
    again = inject_channels(case, seed=9)
    assert again.set0 == scored.set0
