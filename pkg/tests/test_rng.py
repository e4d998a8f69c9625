from collections import Counter
from itertools import combinations

import pytest

from deba.rng import SplitMix64, sample_indices


def test_splitmix64_reference_vector():
    # published reference outputs for seed 1234567
    r = SplitMix64(1234567)
    assert [r.next_u64() for _ in range(5)] == [
        6457827717110365317,
        3203168211198807973,
        9817491932198370423,
        4593380528125082431,
        16408922859458223821,
    ]


def _fisher_yates_oracle(n, m, seed):
    state = seed
    mask = 2**64 - 1

    def nxt():
        nonlocal state
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        return z ^ (z >> 31)

    arr = list(range(n))
    for i in range(m):
        span = n - i
        limit = 2**64 - 2**64 % span
        x = nxt()
        while x >= limit:
            x = nxt()
        j = i + x % span
        arr[i], arr[j] = arr[j], arr[i]
    return sorted(arr[:m])


GOLDEN = [
    ((10, 3, 42), [2, 3, 4]),
    ((100, 10, 0), [0, 1, 21, 35, 38, 39, 55, 72, 79, 95]),
    ((50000, 5, 2024), [8061, 20126, 23461, 24069, 31583]),
]


@pytest.mark.parametrize("args,expected", GOLDEN)
def test_golden_selections(args, expected):
    assert sample_indices(*args).tolist() == expected
    assert _fisher_yates_oracle(*args) == expected


def test_selection_basic():
    assert sample_indices(7, 0, 1).tolist() == []
    assert sample_indices(7, 7, 1).tolist() == list(range(7))
    idx = sample_indices(1000, 100, 9)
    assert len(set(idx.tolist())) == 100
    assert all(a < b for a, b in zip(idx, idx[1:]))
    with pytest.raises(ValueError):
        sample_indices(3, 4, 0)


def test_selection_roughly_uniform():
    counts = Counter(tuple(sample_indices(5, 2, s).tolist()) for s in range(3000))
    assert set(counts) == set(combinations(range(5), 2))
    expected = 3000 / 10
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    # 9 degrees of freedom; 27.9 is the 0.999 quantile
    assert chi2 < 27.9
