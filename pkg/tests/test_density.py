'''Test the logarithmic density estimators

Copyright primerace developers, 2026'''

import logging
from itertools import permutations
from math import log, sqrt
from pathlib import Path

import numpy as np
import pytest
from pytest import raises

from primerace import density, race, zeros
from primerace.errors import DomainError, InvalidResidueError, OffLineZeroError

testsPath = Path(__file__).parent
test_data = testsPath / 'test_data'


@pytest.fixture
def synthetic():
    return zeros.load_zeros(test_data / 'zeros_synthetic.txt')


@pytest.fixture
def mod4_head():
    return zeros.load_zeros(test_data / 'zeros_mod4_head.txt')


def test_e_vector():
    state = race.run_race(4, [3, 1], 100)
    e = density.e_vector(state)
    assert e.x == 100
    assert e.components == pytest.approx(log(100) / 10 * np.array([1.0, -3.0]))
    assert e.ordering() == (3, 1)

    e = density.e_vector(state, 10)
    assert e.components == pytest.approx(log(10) / sqrt(10) * np.array([0.0, -2.0]))

    with raises(DomainError, match='needs x >= 2'):
        density.e_vector(state, 1)


def test_tied_e_vector():
    e = density.EVector(x=None, residues=(1, 2), components=np.array([0.5, 0.5]))
    assert e.ordering() is None


def test_bias_vector():
    assert density.bias_vector(4, [3, 1]).tolist() == [1.0, -1.0]
    assert density.bias_vector(5, [1, 2, 3, 4]).tolist() == [-1.0, 1.0, 1.0, -1.0]


def test_empirical_log_density():
    state = race.run_race(4, [3, 1], 100000)
    ahead = density.empirical_log_density(state, (3, 1))
    behind = density.empirical_log_density(state, (1, 3))
    assert ahead.delta_hat + behind.delta_hat + ahead.tie_fraction == pytest.approx(1.0, rel=1e-9)
    assert ahead.delta_hat > 0.5
    assert ahead.lower <= ahead.delta_hat <= ahead.upper
    assert ahead.scale == 100000

    out = ahead.to_dict()
    assert out['method'] == density.EMPIRICAL
    assert out['X'] == 100000
    assert 'convention' not in out

    with raises(InvalidResidueError, match='is not a permutation'):
        density.empirical_log_density(state, (3, 5))
    with raises(DomainError, match='needs X > 2'):
        density.empirical_log_density(race.run_race(4, [3, 1], 2), (3, 1))


def test_sampler_reproducible(synthetic):
    sampler = density.GSHSampler(synthetic, 4, [3, 1], 20.0)
    assert sampler.phase_count == 1
    assert sampler.bias.tolist() == [1.0, -1.0]
    single = sampler.draw(1000, seed=7)
    threaded = sampler.draw(1000, seed=7, thread_count=4)
    assert single.shape == (1000, 2)
    assert np.array_equal(single, threaded)
    assert not np.array_equal(single, sampler.draw(1000, seed=8))


def test_sampler_mean_shift(mod4_head):
    sampler = density.GSHSampler(mod4_head, 4, [3, 1], 30.0)
    draws = sampler.draw(20000, seed=0)
    assert np.mean(draws[:, 0] - draws[:, 1]) == pytest.approx(2.0, abs=0.05)


def test_gsh_density(synthetic, mod4_head):
    estimate = density.gsh_density(synthetic, 4, [3, 1], (3, 1), 20.0, 10000, seed=1)
    assert estimate.delta_hat == 1.0
    assert estimate.stderr == 0.0
    out = estimate.to_dict()
    assert out['T'] == 20.0
    assert out['seed'] == 1
    assert out['method'] == density.MONTE_CARLO
    assert 'convention' in out

    estimate = density.gsh_density(mod4_head, 4, [3, 1], (3, 1), 30.0, 10000, seed=1)
    assert 0.9 < estimate.delta_hat <= 1.0


def test_gsh_all_orderings(mod4_head):
    estimates = density.gsh_all_orderings(mod4_head, 4, [3, 1], 30.0, 10000, seed=3)
    assert set(estimates) == {(3, 1), (1, 3)}
    total = sum(e.delta_hat for e in estimates.values()) + estimates[(3, 1)].tie_fraction
    assert total == pytest.approx(1.0)


@pytest.fixture
def mod5_synthetic():
    return zeros.load_zeros(test_data / 'zeros_mod5_synthetic.txt')


def test_all_orderings_of_three_residues(mod5_synthetic):
    estimates = density.gsh_all_orderings(mod5_synthetic, 5, [1, 2, 3], 20.0, 20000, seed=11)
    assert len(estimates) == 6
    assert set(estimates) == set(permutations((1, 2, 3)))
    ties = estimates[(1, 2, 3)].tie_fraction
    assert sum(e.delta_hat for e in estimates.values()) + ties == pytest.approx(1.0)
    # Squares are behind the non-squares, so 1 finishing last dominates
    assert estimates[(2, 3, 1)].delta_hat + estimates[(3, 2, 1)].delta_hat > 1 / 3


def test_orderings_follow_residue_permutation(mod5_synthetic):
    for ordering in ((1, 2, 3), (2, 3, 1), (3, 1, 2)):
        first = density.gsh_density(mod5_synthetic, 5, [1, 2, 3], ordering, 20.0, 20000, seed=4)
        second = density.gsh_density(mod5_synthetic, 5, [3, 1, 2], ordering, 20.0, 20000, seed=4)
        assert second.residues == (3, 1, 2)
        assert abs(first.delta_hat - second.delta_hat) <= 3 * max(first.stderr, 1 / 20000)


def test_unbiased_pair_mod5(mod5_synthetic):
    assert density.unbiased_predicate(5, [2, 3])
    estimate = density.gsh_density(mod5_synthetic, 5, [2, 3], (2, 3), 20.0, 40000, seed=8)
    assert estimate.tie_fraction == 0.0
    assert abs(estimate.delta_hat - 0.5) <= 3 * estimate.stderr


def test_sampler_errors(synthetic):
    with raises(DomainError, match='n_samples must be >= 10000'):
        density.gsh_density(synthetic, 4, [3, 1], (3, 1), 20.0, 100, seed=0)
    with raises(InvalidResidueError, match='is not a permutation'):
        density.gsh_density(synthetic, 4, [3, 1], (1, 5), 20.0, 10000, seed=0)

    off = zeros.ZeroSet(height_limit=20.0, zeros={'4:1': (zeros.ZeroRecord(10.0, 0.75, 1),)}, modulus=4)
    with raises(OffLineZeroError, match='off the critical line'):
        density.GSHSampler(off, 4, [3, 1], 20.0)


def test_missing_character_warns(caplog):
    zs = zeros.load_zeros(test_data / 'zeros_unsorted.txt')
    with caplog.at_level(logging.WARNING):
        density.GSHSampler(zs, 5, [1, 2, 3, 4], 12.0)
    assert 'No zeros listed for 5:3' in caplog.text


def test_gsh_sample(synthetic):
    e = density.gsh_sample(synthetic, 4, [3, 1], 20.0, seed=5)
    assert e.x is None
    assert e.components.shape == (2,)
    assert e.ordering() == (3, 1)


def test_unbiased_predicate():
    assert not density.unbiased_predicate(4, [3, 1])
    assert density.unbiased_predicate(5, [2, 3])
    assert density.unbiased_predicate(7, [1, 2, 4])
    assert density.unbiased_predicate(7, [3, 6, 5])
    assert not density.unbiased_predicate(5, [1, 2, 3])
    assert not density.unbiased_predicate(5, [1, 2, 3, 4])


def test_tail_probe(mod4_head):
    probe = density.tail_probe(mod4_head, 4, [3, 1], [3.0, 0.0, 1.0], 5000, seed=2)
    assert [R for R, _ in probe] == [0.0, 1.0, 3.0]
    fractions = [f for _, f in probe]
    assert fractions[0] == 1.0
    assert fractions == sorted(fractions, reverse=True)


def test_density_spread_report(mod4_head):
    report = density.density_spread_report({4: mod4_head}, 30.0, 2000, seed=0)
    assert len(report) == 1
    assert report[0]['k'] == 4
    assert report[0]['pairs'] == 1
    assert report[0]['spread'] == 0.0


def test_write_samples(tmp_path):
    out = tmp_path / 'samples.csv'
    density.write_samples(out, (3, 1), np.array([[1.5, -0.5]]))
    assert out.read_text().splitlines() == ['E_3,E_1', '1.5,-0.5']
