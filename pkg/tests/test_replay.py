"""Replay buffer tests: ring semantics, sampling, neighborhood windows."""

import numpy as np
import pytest
from scipy import stats

from lcrl.errors import ConfigError, NotReadyError
from lcrl.replay import ReplayBuffer, Transition

from oracles import window_scan


def make_transition(episode_id: int, step_index: int, tag: float = 0.0) -> Transition:
    obs = np.array([float(episode_id), float(step_index), tag])
    return Transition(
        state=obs,
        action=0,
        reward=-0.01,
        next_state=obs + 1,
        terminated=False,
        episode_id=episode_id,
        step_index=step_index,
    )


def fill_episodes(buf: ReplayBuffer, lengths: list[int]) -> list[Transition]:
    """Push consecutive episodes of the given lengths; returns all pushed."""
    all_t = []
    for ep, n in enumerate(lengths):
        for i in range(n):
            t = make_transition(ep, i)
            buf.push(t)
            all_t.append(t)
    return all_t


# -- push / ring ---------------------------------------------------------------


def test_push_to_empty():
    buf = ReplayBuffer(capacity=10)
    buf.push(make_transition(0, 0))
    assert len(buf) == 1 and buf.pushes == 1


def test_eviction_keeps_most_recent_in_order():
    buf = ReplayBuffer(capacity=3)
    ts = [make_transition(0, i) for i in range(4)]
    for t in ts:
        buf.push(t)
    assert len(buf) == 3
    assert buf.last_window(3) == ts[1:]


def test_stored_metadata_matches_insertion():
    buf = ReplayBuffer(capacity=50)
    fill_episodes(buf, [3, 4])
    stored = buf.last_window(7)
    assert [(t.episode_id, t.step_index) for t in stored] == [
        (0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2), (1, 3),
    ]


def test_wraparound_equals_truncated_append_only_list():
    buf = ReplayBuffer(capacity=16)
    all_t = fill_episodes(buf, [7, 9, 5, 11])
    assert buf.last_window(len(buf)) == all_t[-16:]


def test_invalid_construction():
    with pytest.raises(ConfigError):
        ReplayBuffer(capacity=0)
    with pytest.raises(ConfigError):
        ReplayBuffer(capacity=5, min_size=6)


# -- sampling -------------------------------------------------------------------


def test_sample_single_item_repeats():
    buf = ReplayBuffer(capacity=10, min_size=1)
    t = make_transition(0, 0)
    buf.push(t)
    assert buf.sample_uniform(np.random.default_rng(0), 5) == [t] * 5


def test_sample_below_min_size_raises():
    buf = ReplayBuffer(capacity=10, min_size=3)
    buf.push(make_transition(0, 0))
    assert not buf.ready
    with pytest.raises(NotReadyError):
        buf.sample_uniform(np.random.default_rng(0), 2)


def test_sample_uniform_chi_square():
    buf = ReplayBuffer(capacity=20, min_size=1)
    fill_episodes(buf, [20])
    draws = buf.sample_uniform(np.random.default_rng(42), 100_000)
    counts = np.bincount([t.step_index for t in draws], minlength=20)
    expected = 100_000 / 20
    chi2 = ((counts - expected) ** 2 / expected).sum()
    assert chi2 < stats.chi2.ppf(0.999, 19)


def test_sample_deterministic_given_seed():
    buf = ReplayBuffer(capacity=10, min_size=1)
    fill_episodes(buf, [10])
    a = buf.sample_uniform(np.random.default_rng(7), 6)
    b = buf.sample_uniform(np.random.default_rng(7), 6)
    assert a == b


# -- last_window -----------------------------------------------------------------


def test_last_window_basic():
    buf = ReplayBuffer(capacity=20)
    fill_episodes(buf, [10])
    assert [t.step_index for t in buf.last_window(4)] == [6, 7, 8, 9]


def test_last_window_larger_than_buffer():
    buf = ReplayBuffer(capacity=20)
    all_t = fill_episodes(buf, [5])
    assert buf.last_window(99) == all_t


def test_last_window_across_wraparound_matches_naive_list():
    naive = []
    buf = ReplayBuffer(capacity=8)
    for ep, n in enumerate([5, 6, 7]):
        for i in range(n):
            t = make_transition(ep, i)
            naive.append(t)
            buf.push(t)
    for b in (1, 3, 8, 20):
        assert buf.last_window(b) == naive[-min(b, 8):]


# -- neighbor_window -------------------------------------------------------------


def test_neighbor_window_direct_indexing():
    buf = ReplayBuffer(capacity=50)
    fill_episodes(buf, [12])
    window = buf.neighbor_window(5, 4)  # global index == step_index here
    assert [t.step_index for t in window] == [3, 4, 6, 7]


def test_neighbor_window_boundary_returns_none():
    buf = ReplayBuffer(capacity=50)
    fill_episodes(buf, [12])
    assert buf.neighbor_window(1, 4) is None  # not enough left context
    assert buf.neighbor_window(11, 4) is None  # not enough right context


def test_neighbor_window_odd_k_rejected():
    buf = ReplayBuffer(capacity=50)
    fill_episodes(buf, [12])
    with pytest.raises(ConfigError):
        buf.neighbor_window(5, 3)


def test_neighbor_window_never_crosses_episode_seam():
    buf = ReplayBuffer(capacity=100)
    all_t = fill_episodes(buf, [10, 10])
    for g in range(20):
        window = buf.neighbor_window(g, 4)
        if window is None:
            continue
        assert len({t.episode_id for t in window}) == 1
        assert all(t.episode_id == all_t[g].episode_id for t in window)


def test_neighbor_window_matches_scan_oracle_randomized():
    # 1000 randomized fills covering wraparound and multi-episode seams
    rng = np.random.default_rng(2024)
    for trial in range(1000):
        capacity = int(rng.integers(4, 40))
        k = 2 * int(rng.integers(1, 4))
        lengths = [int(rng.integers(1, 12)) for _ in range(int(rng.integers(1, 6)))]
        buf = ReplayBuffer(capacity=capacity)
        fill_episodes(buf, lengths)
        contents = buf.last_window(len(buf))
        expected = {c: n for c, n in window_scan(contents, k)}
        base = buf.oldest_index()
        for i in range(len(contents)):
            got = buf.neighbor_window(base + i, k)
            if i in expected:
                assert got is not None
                assert got == [contents[j] for j in expected[i]]
            else:
                assert got is None


def test_window_ordering_and_gap_invariants():
    buf = ReplayBuffer(capacity=64)
    fill_episodes(buf, [30])
    for g in range(30):
        window = buf.neighbor_window(g, 6)
        if window is None:
            continue
        steps = [t.step_index for t in window]
        gaps = np.diff(steps)
        assert (gaps >= 1).all()
        assert (gaps == 1).sum() == len(gaps) - 1
        assert (gaps == 2).sum() == 1  # excluded center
