import math
from fractions import Fraction

import pytest

from mpcc.errors import BadArgs, NotPrime
from mpcc.securitybench import (brute_force_counts, format_table, is_prime, secrecy_table,
                                verify_perfect_secrecy)

# c = r * m mod 5, rows r = 1..4, columns m = 1..4
TABLE_P5 = [
    [1, 2, 3, 4],
    [2, 4, 1, 3],
    [3, 1, 4, 2],
    [4, 3, 2, 1],
]


def test_p5_table_entries():
    assert secrecy_table(5) == TABLE_P5
    assert secrecy_table(5)[2 - 1][3 - 1] == 1


def test_perfect_secrecy_distribution():
    rep = verify_perfect_secrecy(7)
    assert rep.perfect
    for m, dist in rep.distribution.items():
        assert set(dist.values()) == {Fraction(1, 6)}


@pytest.mark.parametrize("p", [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31])
def test_every_small_prime(p):
    assert verify_perfect_secrecy(p).perfect


def test_composite_rejected():
    assert [p for p in range(20) if is_prime(p)] == [2, 3, 5, 7, 11, 13, 17, 19]
    with pytest.raises(NotPrime):
        verify_perfect_secrecy(9)


def test_brute_force_counts():
    c = brute_force_counts(256, 30, 16)
    assert c.cloud_count_log2 == 390.0
    assert c.index_count == math.factorial(256) // math.factorial(226)
    assert c.lower_bound == 227**30
    assert c.index_count > c.lower_bound
    small = brute_force_counts(4, 2)
    assert (small.index_count, small.lower_bound) == (12, 9)
    with pytest.raises(BadArgs):
        brute_force_counts(3, 4)


def test_format_table():
    text = format_table(5)
    assert text.splitlines()[2].split() == ["2", "2", "4", "1", "3"]
