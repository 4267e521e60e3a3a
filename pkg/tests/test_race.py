'''Test prime races, event detection and checkpoints

Copyright primerace developers, 2026'''

from math import fsum, isqrt, log

import numpy as np
import pytest
from pytest import raises

from primerace import race, residues, sieve
from primerace.errors import (
    CheckpointError,
    DomainError,
    InvalidPartitionError,
    TailNotNegligibleError,
    UntrackedResidueError)


def test_delta_small_x():
    state = race.run_race(4, [3, 1], 100)
    assert state.x_current == 100
    assert state.prime_count == 25
    assert race.delta(state, 3, 1) == 2
    assert state.counters(1).pi == 11
    assert state.counters(3).pi == 13

    state = race.run_race(3, [2, 1], 10)
    assert race.delta(state, 2, 1) == 1


def test_values_at():
    state = race.run_race(4, [3, 1], 100)
    pi_total, pi, psi = state.values_at(10)
    assert pi_total == 4
    assert pi.tolist() == [2, 1]
    assert psi[0] == pytest.approx(log(21))
    assert psi[1] == pytest.approx(log(15))

    with raises(DomainError, match='outside the sieved range'):
        state.values_at(101)


def test_first_negative_mod4():
    state = race.run_race(4, [3, 1], 26860)
    assert state.first_negative == {}

    state = race.run_race(4, [3, 1], 30000)
    assert state.first_negative[(3, 1)] == 26861
    assert (1, 3) in state.orderings_seen
    assert state.first_lead[1] == 26861
    negatives = state.events.of_kind('first_negative')
    assert len(negatives) == 1
    assert negatives[0].delta_value == -1


def test_event_csv(tmp_path):
    out = tmp_path / 'events.csv'
    race.run_race(4, [3, 1], 30000, event_csv=out)
    lines = out.read_text().splitlines()
    assert lines[0] == 'x,kind,l1,l2,delta'
    assert '26861,first_negative,3,1,-1' in lines
    assert '26861,sign_change,3,1,-1' in lines
    xs = [int(line.split(',')[0]) for line in lines[1:]]
    assert xs == sorted(xs)


def test_union_races_mod5():
    state = race.run_race(5, [1, 2, 3, 4], 100)
    assert [state.counters(l).pi for l in (1, 2, 3, 4)] == [5, 7, 7, 5]
    assert race.nonresidue_union_delta(state) == 4
    assert race.union_delta(state, [2], [1, 4]) == pytest.approx(2)

    with raises(InvalidPartitionError, match='overlap'):
        race.union_delta(state, [1, 2], [2, 3])
    with raises(InvalidPartitionError, match='nonempty'):
        race.union_delta(state, [], [2, 3])


def test_h_value_and_preponderance_at_two():
    state = race.run_race(4, [3, 1], 2)
    assert race.h_value(state, 3, 1) == pytest.approx(2.0)
    assert race.preponderance_density(state, 3, 1) == 1.0


def test_preponderance_counts():
    state = race.run_race(4, [3, 1], 1000)
    n = 0
    p3 = p1 = 0
    primes = set(sieve.primes_up_to(1000).tolist())
    for x in range(1, 1001):
        if x in primes:
            p3 += x % 4 == 3
            p1 += x % 4 == 1
        n += p3 - p1 <= 0
    assert state.preponderance_count(3, 1) == n
    assert state.preponderance[(3, 1)] == n

    with raises(UntrackedResidueError, match='Residue 5 is not tracked'):
        state.preponderance_count(3, 5)


def test_log_measure_accounts_for_range():
    state = race.run_race(4, [3, 1], 100000)
    total = state.log_measure((3, 1)) + state.log_measure((1, 3)) + state.tie_measure
    assert total == pytest.approx(log(100000 / 2), rel=1e-9)
    assert state.log_measure((3, 1)) > state.log_measure((1, 3)) > 0


def test_shanks_check():
    assert race.shanks_check(10 ** 6)
    assert race.shanks_first_violation(10 ** 5) is None


@pytest.mark.parametrize('k', [3, 4, 5, 8, 12])
def test_prime_power_relation(k):
    relation = race.prime_power_relation(k, 10 ** 6)
    assert relation.holds
    assert relation.checked >= 1


def test_chebyshev_weighted_sum():
    p = sieve.primes_up_to(100)
    p = p[p % 2 == 1]
    direct = np.sum(np.where(p % 4 == 1, 1.0, -1.0) * np.exp(-p / 1.0))
    assert race.chebyshev_weighted_sum(1.0, 100) == pytest.approx(direct, rel=1e-12)
    assert race.chebyshev_weighted_sum(1.0, 100) < 0

    with raises(TailNotNegligibleError):
        race.chebyshev_weighted_sum(10.0, 100)
    with raises(DomainError, match='x must be positive'):
        race.chebyshev_weighted_sum(0, 100)


def test_snapshot():
    state = race.run_race(4, [3, 1], 100)
    snap = race.snapshot(state)
    assert snap['x'] == 100
    assert snap['prime_count'] == 25
    assert snap['counters']['1']['pi'] == 11
    assert snap['counters']['3']['pi'] == 13


def test_checkpoint_resume(tmp_path):
    ckpt = tmp_path / 'race.ckpt'
    race.run_race(4, [3, 1], 50000, checkpoint=ckpt)
    resumed = race.run_race(4, [3, 1], 100000, resume=race.load_checkpoint(ckpt))
    direct = race.run_race(4, [3, 1], 100000)

    assert resumed.x_current == direct.x_current
    assert np.array_equal(resumed.pi, direct.pi)
    assert np.allclose(resumed.psi, direct.psi, rtol=1e-12)
    assert resumed.preponderance == direct.preponderance
    assert resumed.first_negative == direct.first_negative
    assert resumed.log_measure((3, 1)) == pytest.approx(direct.log_measure((3, 1)), rel=1e-12)


def test_checkpoint_errors(tmp_path):
    bad = tmp_path / 'bad.ckpt'
    bad.write_bytes(b'not a checkpoint')
    with raises(CheckpointError, match='is not a race checkpoint'):
        race.load_checkpoint(bad)

    ckpt = tmp_path / 'race.ckpt'
    race.run_race(4, [3, 1], 1000, checkpoint=ckpt)
    with raises(CheckpointError, match='Checkpoint is for k=4'):
        race.run_race(5, [1, 2], 2000, resume=race.load_checkpoint(ckpt))


def test_race_errors():
    with raises(DomainError, match='Race limit must be >= 2, got 1.'):
        race.RaceState(4, [3, 1], 1)


def _plain_primes(n):
    flags = bytearray([1]) * (n + 1)
    flags[0:2] = b'\x00\x00'
    for p in range(2, isqrt(n) + 1):
        if flags[p]:
            flags[p * p::p] = bytearray(len(range(p * p, n + 1, p)))
    return [p for p in range(n + 1) if flags[p]]


@pytest.mark.parametrize('k,limit', [(3, 100), (8, 1000), (12, 99991), (30, 100000)])
def test_partition_identity(k, limit):
    m = residues.build_modulus(k)
    state = race.run_race(k, list(m.residues), limit)
    primes = _plain_primes(limit)
    assert state.prime_count == len(primes)
    assert state.divisor_prime_count == sum(1 for p in primes if k % p == 0)
    assert sum(state.counters(l).pi for l in m.residues) + state.divisor_prime_count == len(primes)
    for l in m.residues:
        assert state.counters(l).pi == sum(1 for p in primes if p % k == l)


def test_sign_changes_mod4_match_scan():
    limit = 10 ** 6
    state = race.run_race(4, [3, 1], limit)
    changes = []
    d = last = 0
    for p in _plain_primes(limit):
        if p % 4 == 3:
            d += 1
        elif p % 4 == 1:
            d -= 1
        else:
            continue
        if d != 0:
            sign = 1 if d > 0 else -1
            if last != 0 and sign != last:
                changes.append(p)
            last = sign
    assert changes
    assert state.events.counts[race.RaceEventKind.sign_change] == len(changes)
    assert [e.x for e in state.events.of_kind('sign_change')] == changes


def test_event_log_independent_of_threads(tmp_path):
    single, threaded = tmp_path / 'single.csv', tmp_path / 'threaded.csv'
    for out, threads in ((single, 1), (threaded, 4)):
        cfg = sieve.SieveConfig(limit=2, segment_size=2 ** 14, thread_count=threads)
        race.run_race(8, [1, 3, 5, 7], 300000, cfg=cfg, event_csv=out)
    assert len(single.read_text().splitlines()) > 10
    assert single.read_bytes() == threaded.read_bytes()


def test_chebyshev_functions_match_exact_sums():
    limit = 10 ** 6
    state = race.run_race(4, [3, 1], limit)
    theta = {1: [], 3: []}
    psi = {1: [], 3: []}
    for p in _plain_primes(limit):
        if p == 2:
            continue
        theta[p % 4].append(log(p))
        q = p
        while q <= limit:
            psi[q % 4].append(log(p))
            q *= p
    for l in (1, 3):
        assert state.counters(l).theta == pytest.approx(fsum(theta[l]), rel=1e-12)
        assert state.counters(l).psi == pytest.approx(fsum(psi[l]), rel=1e-12)


def test_resume_drops_events_after_checkpoint(tmp_path):
    direct = tmp_path / 'direct.csv'
    race.run_race(4, [3, 1], 30000, event_csv=direct)

    events = tmp_path / 'events.csv'
    ckpt = tmp_path / 'race.ckpt'
    race.run_race(4, [3, 1], 20000, event_csv=events, checkpoint=ckpt)
    # Rows written past the checkpoint before the run stopped
    events.write_bytes(direct.read_bytes())

    resumed = race.load_checkpoint(ckpt, event_csv=events)
    assert len(events.read_text().splitlines()) == resumed.events.total + 1
    race.run_race(4, [3, 1], 30000, resume=resumed)
    assert events.read_bytes() == direct.read_bytes()


@pytest.mark.slow
def test_mod8_five_one_first_negative():
    cfg = sieve.SieveConfig(limit=2, thread_count=4)
    state = race.run_race(8, [5, 1], 588067888, cfg=cfg, trace_limit=0, event_buffer=10)
    assert (5, 1) not in state.first_negative

    state = race.run_race(8, [5, 1], 588067889, cfg=cfg, resume=state)
    assert state.first_negative[(5, 1)] == 588067889


@pytest.mark.slow
def test_shanks_holds_to_two_hundred_million():
    cfg = sieve.SieveConfig(limit=2, thread_count=4)
    assert race.shanks_check(2 * 10 ** 8, cfg=cfg)


@pytest.mark.slow
def test_long_race_counts():
    state = race.run_race(4, [3, 1], 10 ** 8, trace_limit=0, event_buffer=10)
    assert state.prime_count == 5761455
    assert state.first_negative[(3, 1)] == 26861


@pytest.mark.slow
def test_prime_power_relation_to_hundred_million():
    relation = race.prime_power_relation(4, 10 ** 8, cfg=sieve.SieveConfig(limit=2, thread_count=4))
    assert relation.holds
    assert relation.checked > 100
