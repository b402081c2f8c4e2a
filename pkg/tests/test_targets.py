import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wcfuzz.targets import (
    decode_int_array,
    hash_table_target,
    insertion_sort_target,
    make_subject,
    ordered_pairs_target,
    popcount_target,
    quicksort_target,
    subject_help,
    tree_sort_target,
)


# Independent oracles, deliberately written differently from the targets.

def insertion_ticks_oracle(values):
    """Outer iterations + inversions of the input order."""
    n = len(values)
    outer = max(0, n - 1)
    inversions = sum(
        1 for i in range(n) for j in range(i) if values[j] > values[i]
    )
    return outer + inversions


def ordered_pairs_oracle(values):
    return sum(
        1
        for i, j in itertools.combinations(range(len(values)), 2)
        if values[i] <= values[j]
    )


# ----------------------------------------------------------------- decoding

def test_decode_small_bytes_pass_through():
    assert decode_int_array(bytes([0x00, 0x01]), 2, 0, 4) == [0, 1]


def test_decode_wraps_modulo():
    assert decode_int_array(bytes([0xFF]), 1, 0, 4) == [0]  # 255 mod 5 = 0


def test_decode_degenerate_range():
    assert decode_int_array(bytes([7, 200, 13]), 3, 5, 5) == [5, 5, 5]


def test_decode_length_mismatch():
    with pytest.raises(ValueError):
        decode_int_array(bytes(3), 4, 0, 9)


def test_decode_full_byte_range_identity():
    g = bytes(range(0, 256, 37))
    assert decode_int_array(g, len(g), 0, 255) == list(g)


@given(st.binary(min_size=1, max_size=16), st.integers(-50, 50), st.integers(0, 255))
def test_decode_values_in_range(g, lo, span):
    hi = lo + span
    out = decode_int_array(g, len(g), lo, hi)
    assert all(lo <= v <= hi for v in out)


def test_decode_surjective_onto_range():
    # every value in [lo, hi] is hit by some byte
    lo, hi = 3, 9
    hit = {decode_int_array(bytes([b]), 1, lo, hi)[0] for b in range(256)}
    assert hit == set(range(lo, hi + 1))


# ----------------------------------------------------------- insertion sort

def test_insertion_paper_value_14():
    target = insertion_sort_target(5, 1, 5)
    assert target.evaluate(bytes([4, 3, 2, 1, 0])) == 14.0  # decodes to [5,4,3,2,1]


def test_insertion_sorted_input_outer_only():
    target = insertion_sort_target(5, 1, 5)
    assert target.evaluate(bytes([0, 1, 2, 3, 4])) == 4.0


def test_insertion_trivial_sizes():
    assert insertion_sort_target(0, 0, 0).evaluate(b"") == 0.0
    assert insertion_sort_target(1, 0, 255).evaluate(b"\x7f") == 0.0


@pytest.mark.parametrize("n", [2, 3, 4])
def test_insertion_brute_force_max(n):
    # global max over the [0, n-1] value domain is (n-1) + n(n-1)/2
    target = insertion_sort_target(n, 0, n - 1)
    ticks = [
        target.evaluate(bytes(vals))
        for vals in itertools.product(range(n), repeat=n)
    ]
    assert max(ticks) == (n - 1) + n * (n - 1) // 2


def test_insertion_matches_oracle_exhaustive_n4():
    target = insertion_sort_target(4, 0, 3)
    for vals in itertools.product(range(4), repeat=4):
        assert target.evaluate(bytes(vals)) == insertion_ticks_oracle(list(vals))


def test_insertion_descending_witness_n16():
    target = insertion_sort_target(16, 0, 255)
    witness = bytes(range(255, 255 - 16, -1))
    assert target.evaluate(witness) == 15 + 120  # (n-1) + n(n-1)/2 = 135


# ------------------------------------------------------------ ordered pairs

def test_ordered_pairs_decreasing_is_zero():
    target = ordered_pairs_target(4, 0, 255)
    assert target.evaluate(bytes([9, 7, 5, 3])) == 0.0


def test_ordered_pairs_constant_is_choose_two():
    target = ordered_pairs_target(4, 0, 255)
    assert target.evaluate(bytes([5, 5, 5, 5])) == 6.0


def test_ordered_pairs_hand_enumeration():
    target = ordered_pairs_target(3, 1, 3)
    assert target.evaluate(bytes([0, 2, 1])) == 2.0  # [1,3,2]: (1,3) and (1,2)


def test_ordered_pairs_needs_two_elements():
    with pytest.raises(ValueError):
        ordered_pairs_target(1, 0, 255)


@given(st.binary(min_size=2, max_size=12))
def test_ordered_pairs_matches_oracle(g):
    target = ordered_pairs_target(len(g), 0, 255)
    assert target.evaluate(g) == ordered_pairs_oracle(list(g))


# --------------------------------------------------------------- quicksort

def test_quicksort_sorted_worst_case():
    target = quicksort_target(5, 0, 4)
    assert target.evaluate(bytes([0, 1, 2, 3, 4])) == 10.0  # 4+3+2+1


def test_quicksort_trivial_sizes():
    assert quicksort_target(0, 0, 0).evaluate(b"") == 0.0
    assert quicksort_target(1, 0, 255).evaluate(b"\x01") == 0.0


def test_quicksort_exhaustive_permutations_bounded():
    target = quicksort_target(5, 0, 4)
    ticks = {
        target.evaluate(bytes(perm)) for perm in itertools.permutations(range(5))
    }
    assert max(ticks) == 10.0
    assert all(t <= 10.0 for t in ticks)


def test_quicksort_large_n_no_recursion_limit():
    target = quicksort_target(3000, 0, 255)
    assert target.evaluate(bytes(3000)) == 3000 * 2999 / 2


# ---------------------------------------------------------------- tree sort

def test_tree_sort_single_insert_is_free():
    assert tree_sort_target(1, 0, 255).evaluate(b"\x2a") == 0.0


def test_tree_sort_golden_three_ascending():
    # descent comparisons 0+1+2, then one recolor + one rotation in the
    # fix-up; frozen reference value
    target = tree_sort_target(3, 1, 3)
    assert target.evaluate(bytes([0, 1, 2])) == 5.0


def test_tree_sort_duplicates_tick_no_more_than_distinct():
    dup_max = max(
        tree_sort_target(4, 0, 2).evaluate(bytes(vals))
        for vals in itertools.product(range(3), repeat=4)
    )
    distinct_max = max(
        tree_sort_target(4, 0, 3).evaluate(bytes(perm))
        for perm in itertools.permutations(range(4))
    )
    assert dup_max <= distinct_max


def test_tree_sort_deterministic():
    target = tree_sort_target(8, 0, 255)
    g = bytes([3, 141, 59, 26, 53, 58, 97, 93])
    first = target.evaluate(g)
    assert all(target.evaluate(g) == first for _ in range(1000))


# --------------------------------------------------------------- hash table

def test_hash_three_colliding_keys():
    target = hash_table_target(3, 2)
    # byte sums 1, 1, 17 -> all bucket 1
    assert target.evaluate(bytes([1, 0, 0, 1, 17, 0])) == 3.0


def test_hash_distinct_buckets_zero():
    target = hash_table_target(3, 1)
    assert target.evaluate(bytes([0, 1, 2])) == 0.0


def test_hash_single_key_zero():
    assert hash_table_target(1, 4).evaluate(bytes(4)) == 0.0


def test_hash_identical_keys_max():
    target = hash_table_target(8, 4)
    assert target.evaluate(bytes([7, 7, 7, 7] * 8)) == 28.0  # C(8,2)


def test_hash_genome_length():
    assert hash_table_target(8, 4).genome_length == 32
    with pytest.raises(ValueError):
        hash_table_target(8, 4).evaluate(bytes(31))


# ----------------------------------------------------------------- popcount

def test_popcount_values():
    t = popcount_target(2)
    assert t.evaluate(b"\x00\x00") == 0.0
    assert t.evaluate(b"\xff\x0f") == 12.0


# ------------------------------------------------------------------- purity

@pytest.mark.parametrize(
    "make",
    [
        lambda: insertion_sort_target(8, 0, 255),
        lambda: ordered_pairs_target(8, 0, 255),
        lambda: quicksort_target(8, 0, 255),
        lambda: tree_sort_target(8, 0, 255),
        lambda: hash_table_target(4, 2),
    ],
)
def test_builtin_targets_pure(make):
    import numpy as np

    target = make()
    rng = np.random.default_rng(0)
    g = rng.integers(0, 256, size=target.genome_length, dtype=np.uint8).tobytes()
    first = target.evaluate(g)
    assert all(target.evaluate(g) == first for _ in range(1000))


# ----------------------------------------------------------------- registry

def test_make_subject_defaults():
    t = make_subject("insertion-sort")
    assert t.genome_length == 16


def test_make_subject_with_params():
    t = make_subject("insertion-sort:n=5,lo=0,hi=4")
    assert t.genome_length == 5
    assert t.evaluate(bytes([4, 3, 2, 1, 0])) == 14.0


def test_make_subject_unknown_name():
    with pytest.raises(ValueError):
        make_subject("bogosort")


def test_make_subject_unknown_param():
    with pytest.raises(ValueError):
        make_subject("insertion-sort:m=5")


def test_subject_help_lists_all():
    text = subject_help()
    for name in ("insertion-sort", "ordered-pairs", "quicksort", "tree-sort", "hash-table"):
        assert name in text
