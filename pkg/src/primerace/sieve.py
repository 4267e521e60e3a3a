"""Segmented sieve of Eratosthenes streaming primes and prime powers.

Segments cover 2 * segment_size consecutive integers starting at an even
number and hold one flag per odd number. Segments may be sieved in a thread
pool but are always delivered in ascending order.

Copyright primerace developers, 2026
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from math import isqrt
from typing import NamedTuple

import numpy as np

from primerace.definitions import sieve_defaults
from primerace.errors import DomainError, SieveAbortedError

logger = logging.getLogger(__name__)


class Wheel(Enum):
    none = 'none'
    mod30 = 'mod30'
    mod210 = 'mod210'

    @property
    def primes(self):
        return {'none': (), 'mod30': (3, 5), 'mod210': (3, 5, 7)}[self.value]


class EventKind(Enum):
    prime = 'prime'
    prime_power = 'prime_power'


@dataclass(frozen=True)
class SieveConfig:
    """Sieve run parameters.

    :param limit: largest integer X to sieve
    :param segment_size: odd slots (bytes of bitmap) per segment
    :param wheel: presieve pattern
    :param thread_count: worker threads sieving segments
    :param start_after: deliver only events n > start_after (resumed runs)
    """
    limit: int
    segment_size: int = sieve_defaults.segment_size
    wheel: Wheel = Wheel(sieve_defaults.wheel)
    thread_count: int = 1
    start_after: int = 1

    def __post_init__(self):
        if self.limit < 2:
            raise DomainError(f'Sieve limit must be >= 2, got {self.limit}.')
        if self.segment_size < sieve_defaults.min_segment_size:
            raise DomainError(
                f'segment_size must be >= {sieve_defaults.min_segment_size}, got {self.segment_size}.')
        if self.thread_count < 1:
            raise DomainError(f'thread_count must be positive, got {self.thread_count}.')
        if self.start_after < 1:
            raise DomainError(f'start_after must be >= 1, got {self.start_after}.')
        if not isinstance(self.wheel, Wheel):
            object.__setattr__(self, 'wheel', Wheel(self.wheel))


@dataclass(frozen=True)
class PrimeEvent:
    n: int
    kind: EventKind
    lambda_weight: float
    residue: int = None


class EventBatch(NamedTuple):
    """All events of one segment.

    Covers the integers lo <= n < hi; n, is_prime and weight are aligned
    arrays in ascending n.
    """
    lo: int
    hi: int
    n: np.ndarray
    is_prime: np.ndarray
    weight: np.ndarray


@dataclass(frozen=True)
class SieveSummary:
    prime_count: int
    max_n: int
    segments: int
    boundary: int


def primes_up_to(n):
    """All primes <= n from a plain (unsegmented) sieve."""
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    flags = np.ones(n + 1, dtype=bool)
    flags[:2] = False
    flags[4::2] = False
    for p in range(3, isqrt(n) + 1, 2):
        if flags[p]:
            flags[p * p::2 * p] = False
    return np.flatnonzero(flags).astype(np.int64)


def _prime_powers(limit, base):
    """p^m <= limit with m >= 2 and the matching p, ascending in p^m."""
    values, roots = [], []
    for p in base.tolist():
        q = p * p
        while q <= limit:
            values.append(q)
            roots.append(p)
            q *= p
    values = np.array(values, dtype=np.int64)
    roots = np.array(roots, dtype=np.int64)
    order = np.argsort(values, kind='stable')
    return values[order], roots[order]


def _wheel_pattern(wheel):
    """Odd-slot flags over one period, slot j standing for 2j + 1."""
    period = int(np.prod(wheel.primes)) if wheel.primes else 1
    n = 2 * np.arange(period) + 1
    pattern = np.ones(period, dtype=bool)
    for p in wheel.primes:
        pattern[n % p == 0] = False
    return pattern


class _SegmentSieve:
    """Sieves single segments; shared read-only between worker threads."""

    def __init__(self, cfg):
        self.limit = cfg.limit
        self.size = cfg.segment_size
        self.wheel = cfg.wheel
        self.start_after = cfg.start_after
        self.pattern = _wheel_pattern(cfg.wheel)

        base = primes_up_to(isqrt(cfg.limit))
        self.power_n, self.power_p = _prime_powers(cfg.limit, base)
        odd = base[base > 2]
        odd = odd[~np.isin(odd, self.wheel.primes)]
        # Primes hitting a segment fewer than ~16 times are crossed off through index arrays
        self.threshold = max(self.size // 16, 1)
        self.small = odd[odd < self.threshold]
        self.large = odd[odd >= self.threshold]
        self.large_hits = np.arange(-(-self.size // self.threshold) + 1, dtype=np.int64)

    def _first_index(self, primes, lo):
        first = -(-(lo + 1) // primes) * primes
        first += primes * (first % 2 == 0)
        first = np.maximum(first, primes * primes)
        return (first - lo - 1) // 2

    def segment(self, lo):
        hi = lo + 2 * self.size
        period = self.pattern.size
        flags = np.resize(np.roll(self.pattern, -((lo // 2) % period)), self.size)
        for p in self.wheel.primes:
            if lo < p < hi:
                flags[(p - lo - 1) // 2] = True
        if lo == 0:
            flags[0] = False

        if self.small.size:
            for p, i in zip(self.small.tolist(), self._first_index(self.small, lo).tolist()):
                if i < self.size:
                    flags[i::p] = False
        if self.large.size:
            starts = self._first_index(self.large, lo)
            hits = starts[:, None] + self.large[:, None] * self.large_hits[None, :]
            flags[hits[hits < self.size]] = False

        primes = lo + 2 * np.flatnonzero(flags).astype(np.int64) + 1
        if lo <= 2 < hi:
            primes = np.concatenate(([2], primes))

        first = max(lo, self.start_after + 1)
        last = min(hi, self.limit + 1)
        primes = primes[(primes >= first) & (primes < last)]

        a, b = np.searchsorted(self.power_n, [first, last])
        n = np.concatenate((primes, self.power_n[a:b]))
        weight = np.concatenate((np.log(primes.astype(float)), np.log(self.power_p[a:b].astype(float))))
        is_prime = np.concatenate((np.ones(primes.size, dtype=bool), np.zeros(b - a, dtype=bool)))
        order = np.argsort(n, kind='stable')
        return EventBatch(lo=first, hi=last, n=n[order], is_prime=is_prime[order], weight=weight[order])


def _segment_starts(cfg):
    lo = cfg.start_after - cfg.start_after % 2
    return list(range(lo, cfg.limit + 1, 2 * cfg.segment_size))


def iter_batches(cfg):
    """Yield one EventBatch per segment, in ascending order.

    :param cfg: Sieve configuration
    :type cfg: SieveConfig
    """
    sieve = _SegmentSieve(cfg)
    starts = _segment_starts(cfg)
    logger.info(f'Sieving to {cfg.limit} in {len(starts)} segments with {cfg.thread_count} thread(s).')
    if cfg.thread_count == 1:
        for count, lo in enumerate(starts, 1):
            yield sieve.segment(lo)
            if count % sieve_defaults.progress_every == 0:
                logger.info(f'Segment {count}/{len(starts)} done.')
        return

    window = 4 * cfg.thread_count
    with ThreadPoolExecutor(max_workers=cfg.thread_count) as pool:
        for offset in range(0, len(starts), window):
            yield from pool.map(sieve.segment, starts[offset:offset + window])
            if (offset // window) % max(sieve_defaults.progress_every // window, 1) == 0:
                logger.info(f'Segment {min(offset + window, len(starts))}/{len(starts)} done.')


def stream_events(cfg, sink):
    """Deliver every prime and prime power <= cfg.limit to sink, in ascending order.

    :param cfg: Sieve configuration
    :type cfg: SieveConfig
    :param sink: called once per segment with an EventBatch
    :type sink: callable
    :return: SieveSummary
    """
    prime_count = 0
    max_n = 0
    boundary = cfg.start_after + 1
    segments = 0
    for batch in iter_batches(cfg):
        try:
            sink(batch)
        except Exception as exc:
            raise SieveAbortedError(
                f'Event consumer failed after delivering all n < {boundary}: {exc}',
                boundary) from exc
        prime_count += int(batch.is_prime.sum())
        if batch.n.size:
            max_n = int(batch.n[-1])
        boundary = batch.hi
        segments += 1
    return SieveSummary(prime_count=prime_count, max_n=max_n, segments=segments, boundary=boundary)


def iter_events(cfg, k=None):
    """Yield PrimeEvent records one at a time, optionally tagged with n mod k."""
    for batch in iter_batches(cfg):
        for n, is_prime, weight in zip(batch.n.tolist(), batch.is_prime.tolist(), batch.weight.tolist()):
            yield PrimeEvent(
                n=n,
                kind=EventKind.prime if is_prime else EventKind.prime_power,
                lambda_weight=weight,
                residue=None if k is None else n % k)


def pi_of(x, cfg=None):
    """Number of primes <= x via the streaming sieve.

    :param x: bound
    :type x: int
    :param cfg: optional template configuration (limit is replaced by x)
    :type cfg: SieveConfig
    :return: int
    """
    if x < 0:
        raise DomainError(f'pi_of needs x >= 0, got {x}.')
    if x < 2:
        return 0
    if cfg is None:
        cfg = SieveConfig(limit=int(x))
    else:
        cfg = SieveConfig(limit=int(x), segment_size=cfg.segment_size, wheel=cfg.wheel,
                          thread_count=cfg.thread_count)
    return stream_events(cfg, lambda batch: None).prime_count
