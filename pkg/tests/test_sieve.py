'''Test the segmented sieve

Copyright primerace developers, 2026'''

import numpy as np
import pytest
from pytest import raises

from primerace import sieve
from primerace.errors import DomainError, SieveAbortedError


def _collect(cfg):
    n, is_prime, weight = [], [], []
    for batch in sieve.iter_batches(cfg):
        n.append(batch.n)
        is_prime.append(batch.is_prime)
        weight.append(batch.weight)
    return np.concatenate(n), np.concatenate(is_prime), np.concatenate(weight)


def _prime_powers(limit):
    out = []
    for p in sieve.primes_up_to(int(limit ** 0.5) + 1).tolist():
        q = p * p
        while q <= limit:
            out.append((q, p))
            q *= p
    return sorted(out)


def test_primes_up_to():
    assert sieve.primes_up_to(30).tolist() == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
    assert sieve.primes_up_to(1).size == 0
    assert sieve.primes_up_to(2).tolist() == [2]


@pytest.mark.parametrize('wheel', ['none', 'mod30', 'mod210'])
def test_segments_match_simple_sieve(wheel):
    limit = 200003
    cfg = sieve.SieveConfig(limit=limit, segment_size=16384, wheel=wheel)
    n, is_prime, weight = _collect(cfg)

    assert np.all(np.diff(n) > 0)
    assert np.array_equal(n[is_prime], sieve.primes_up_to(limit))

    powers = _prime_powers(limit)
    assert n[~is_prime].tolist() == [q for q, _ in powers]
    assert np.allclose(weight[~is_prime], np.log([p for _, p in powers]))
    assert np.allclose(weight[is_prime], np.log(n[is_prime]))


def test_batches_tile_the_range():
    cfg = sieve.SieveConfig(limit=100000, segment_size=16384)
    batches = list(sieve.iter_batches(cfg))
    assert batches[0].lo == 2
    assert batches[-1].hi == 100001
    for a, b in zip(batches, batches[1:]):
        assert a.hi == b.lo


def test_threads_give_identical_output():
    single = _collect(sieve.SieveConfig(limit=300000, segment_size=16384))
    threaded = _collect(sieve.SieveConfig(limit=300000, segment_size=16384, thread_count=4))
    for a, b in zip(single, threaded):
        assert np.array_equal(a, b)


def test_pi_of():
    assert sieve.pi_of(0) == 0
    assert sieve.pi_of(1) == 0
    assert sieve.pi_of(2) == 1
    assert sieve.pi_of(100) == 25
    assert sieve.pi_of(10 ** 6) == 78498


def test_pi_of_large_prime_path():
    template = sieve.SieveConfig(limit=2, segment_size=2 ** 14)
    assert sieve.pi_of(10 ** 7, template) == 664579


def test_start_after():
    cfg = sieve.SieveConfig(limit=1000, segment_size=16384, start_after=500)
    n, is_prime, _ = _collect(cfg)
    assert n.min() > 500
    primes = sieve.primes_up_to(1000)
    assert np.array_equal(n[is_prime], primes[primes > 500])
    assert next(sieve.iter_batches(cfg)).lo == 501


def test_stream_events_summary():
    summary = sieve.stream_events(sieve.SieveConfig(limit=100), lambda batch: None)
    assert summary.prime_count == 25
    assert summary.max_n == 97
    assert summary.boundary == 101


def test_sink_failure():
    def sink(batch):
        if batch.lo > 2:
            raise RuntimeError('disk full')

    cfg = sieve.SieveConfig(limit=100000, segment_size=16384)
    with raises(SieveAbortedError, match='disk full') as exc_info:
        sieve.stream_events(cfg, sink)
    assert exc_info.value.boundary == 2 * 16384


def test_iter_events():
    events = list(sieve.iter_events(sieve.SieveConfig(limit=10), k=4))
    assert [e.n for e in events] == [2, 3, 4, 5, 7, 8, 9]
    assert [e.kind for e in events][:3] == [sieve.EventKind.prime, sieve.EventKind.prime,
                                            sieve.EventKind.prime_power]
    assert events[2].lambda_weight == pytest.approx(np.log(2))
    assert [e.residue for e in events] == [2, 3, 0, 1, 3, 0, 1]


def test_config_errors():
    with raises(DomainError, match='Sieve limit must be >= 2, got 1.'):
        sieve.SieveConfig(limit=1)
    with raises(DomainError, match='segment_size must be >= 16384'):
        sieve.SieveConfig(limit=100, segment_size=100)
    with raises(DomainError, match='thread_count must be positive'):
        sieve.SieveConfig(limit=100, thread_count=0)
