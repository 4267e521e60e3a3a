'''Test zero file handling and the independence checks

Copyright primerace developers, 2026'''

from itertools import product
from pathlib import Path
import logging

import numpy as np
import pytest
from pytest import raises

from primerace import zeros
from primerace.errors import CostLimitError, DomainError, InsufficientDataError, ZeroFileError

testsPath = Path(__file__).parent
test_data = testsPath / 'test_data'


def test_load_zeros():
    zs = zeros.load_zeros(test_data / 'zeros_mod4_head.txt')
    assert zs.modulus == 4
    assert zs.height_limit == 30.0
    assert zs.labels == ['4:1']
    assert zs.count() == 10
    assert zs.lowest_ordinate('4:1') == pytest.approx(6.020948904697597)
    assert zs.source.startswith('first zeros')

    gamma, beta, mult = zs.arrays('4:1', T=15)
    assert gamma.size == 3
    assert np.all(beta == 0.5)
    assert np.all(mult == 1)
    assert zs.for_label('4:3') == ()


def test_unsorted_and_duplicates(caplog):
    with caplog.at_level(logging.WARNING):
        zs = zeros.load_zeros(test_data / 'zeros_unsorted.txt')
    assert 'not sorted' in caplog.text
    assert 'Merged duplicate ordinate 9.0' in caplog.text
    assert zs.for_label('5:1') == (zeros.ZeroRecord(4.0, 0.5, 1), zeros.ZeroRecord(9.0, 0.5, 2))
    assert zs.all_ordinates.tolist() == [4.0, 7.5, 9.0]
    assert zs.max_ordinate == 9.0


def test_canonical_round_trip(tmp_path):
    src = test_data / 'zeros_canonical.txt'
    out = tmp_path / 'zeros.txt'
    zeros.save_zeros(zeros.load_zeros(src), out)
    assert out.read_bytes() == src.read_bytes()


def test_real_zeros():
    zs = zeros.load_zeros(test_data / 'zeros_real_zero.txt')
    assert zs.central_multiplicity('4:1') == 1
    assert zs.count('4:1') == 1
    assert not zeros.haselgrove_check(zs, 5.0)

    zs = zeros.load_zeros(test_data / 'zeros_mod4_head.txt')
    assert zs.central_multiplicity('4:1') == 0
    assert zeros.haselgrove_check(zs, 30.0)
    with raises(InsufficientDataError, match='exceeds the completeness bound'):
        zeros.haselgrove_check(zs, 31.0)


def test_empty_zero_set():
    zs = zeros.load_zeros(test_data / 'zeros_empty.txt')
    assert zs.labels == []
    assert zs.all_ordinates.size == 0
    assert zs.max_ordinate == 0.0


def test_zero_file_errors():
    with raises(ZeroFileError, match='line 3: .*ordinate must be >= 0, got -3.0'):
        zeros.load_zeros(test_data / 'zeros_bad_gamma.txt')
    with raises(ZeroFileError, match='missing #tmax'):
        zeros.load_zeros(test_data / 'zeros_no_tmax.txt')
    with raises(ZeroFileError, match='expected 4 fields, got 3'):
        zeros.parse_zero_lines(['4:1 0.5 3.0'])
    with raises(ZeroFileError, match="malformed character label '4-1'"):
        zeros.parse_zero_lines(['4-1 0.5 3.0 1'])
    with raises(ZeroFileError, match=r'real part must lie in \(0, 1\)'):
        zeros.parse_zero_lines(['4:1 1.5 3.0 1'])

    headers, records = zeros.parse_zero_lines(['#modulus 4', '#tmax 1.0', '5:1 0.5 0.5 1'])
    with raises(ZeroFileError, match="'5:1' is not a character modulo 4"):
        zeros.build_zero_set(headers, records)


def test_independence_violation():
    zs = zeros.load_zeros(test_data / 'ordinates_pair.txt')
    verdict = zeros.n_independence(zs, [0, 1], 1)
    assert not verdict.passed
    assert [v.vector for v in verdict.violations] == [(-1, 1)]
    assert verdict.violations[0].nearest == 1.0
    assert verdict.enumerated == 4
    assert verdict.in_range == 2
    assert verdict.to_dict()['violations'][0]['vector'] == [-1, 1]


def test_independence_passes():
    zs = zeros.load_zeros(test_data / 'ordinates_surds.txt')
    verdict = zeros.n_independence(zs, [0, 1, 2], 2)
    assert verdict.passed
    assert verdict.ordinates == pytest.approx((1.0, np.sqrt(2), np.sqrt(3)))

    threaded = zeros.n_independence(zs, [0, 1, 2], 2, thread_count=3)
    assert threaded.enumerated == verdict.enumerated
    assert threaded.in_range == verdict.in_range


def _exhaustive_independence(gammas, N, G, height, tol):
    enumerated = in_range = 0
    found = set()
    for vector in product(range(-N, N + 1), repeat=len(gammas)):
        if sum(abs(c) for c in vector) < 2:
            continue
        enumerated += 1
        total = sum(c * g for c, g in zip(vector, gammas))
        if not 0 <= total <= height:
            continue
        in_range += 1
        if min(abs(g - total) for g in G) <= tol:
            found.add(vector)
    return enumerated, in_range, found


@pytest.mark.parametrize('thread_count', [1, 4])
def test_independence_matches_exhaustive_search(thread_count):
    zs = zeros.load_zeros(test_data / 'ordinates_planted.txt')
    G = zs.all_ordinates.tolist()
    assert G == pytest.approx([1.0, 2.5, 3.5, 4.242640687119285, 6.0])
    tol = 1e-9 * max(G)

    for subset, N in (([0, 1, 2, 3], 2), ([0, 1, 2, 3, 4], 2), ([1, 3, 4], 3)):
        verdict = zeros.n_independence(zs, subset, N, thread_count=thread_count)
        enumerated, in_range, found = _exhaustive_independence([G[i] for i in subset], N, G, 12.0, tol)
        assert verdict.enumerated == enumerated
        assert verdict.in_range == in_range
        assert {v.vector for v in verdict.violations} == found
        assert not verdict.passed

    verdict = zeros.n_independence(zs, [0, 1, 2, 3], 1, thread_count=thread_count)
    assert (1, 1, -1, 0) not in {v.vector for v in verdict.violations}
    assert (-1, 1, 0, 1) not in {v.vector for v in verdict.violations}
    assert (1, 1, 0, 0) in {v.vector for v in verdict.violations}


def test_independence_errors():
    zs = zeros.load_zeros(test_data / 'ordinates_surds.txt')
    with raises(CostLimitError, match='exceeds the limit'):
        zeros.n_independence(zs, [0, 1, 2], 1000)
    with raises(DomainError, match='N must be >= 1'):
        zeros.n_independence(zs, [0], 0)
    with raises(DomainError, match='out of range'):
        zeros.n_independence(zs, [3], 1)
    with raises(DomainError, match='at least one ordinate'):
        zeros.n_independence(zs, [], 1)


def test_zero_density_profile():
    zs = zeros.load_zeros(test_data / 'zeros_mod4_head.txt')
    profile = zeros.zero_density_profile(zs, 30.0)
    assert profile.count == 10
    assert profile.per_character['4:1'][0] == 10
    assert profile.ratio_to_TlogT == pytest.approx(10 / (30 * np.log(30)))
