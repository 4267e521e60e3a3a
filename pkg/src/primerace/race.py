"""Prime races modulo k driven by the segmented sieve.

A RaceState consumes sieve batches in order and keeps, for every reduced
residue l, the counters pi(x,k,l), theta(x,k,l), psi(x,k,l) and Pi(x,k,l).
For the tracked residues it also detects sign changes and first negative
values of every pair difference, lead changes, orderings seen for the first
time, the preponderance counts of each pair and the logarithmic
measure spent in each ordering.

All x values are integers; counts are step functions jumping at primes.
"""

import csv
import json
import logging
from collections import deque
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from math import isqrt, log, sqrt
from pathlib import Path
from typing import NamedTuple

import numpy as np

from primerace.definitions import race_defaults
from primerace.errors import (
    CheckpointError,
    DomainError,
    InvalidPartitionError,
    InvalidResidueError,
    InsufficientDataError,
    TailNotNegligibleError,
    UntrackedResidueError)
from primerace.residues import Modulus, build_modulus, square_root_counts
from primerace.sieve import SieveConfig, iter_batches, primes_up_to, stream_events

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b'PRSV1'
EVENT_COLUMNS = ('x', 'kind', 'l1', 'l2', 'delta')


class RaceEventKind(Enum):
    sign_change = 'sign_change'
    lead_change = 'lead_change'
    new_ordering = 'new_ordering'
    first_negative = 'first_negative'


_KIND_RANK = {kind: rank for rank, kind in enumerate(RaceEventKind)}


@dataclass(frozen=True)
class RaceEvent:
    """A detector firing at integer x.

    payload is the pair (l1, l2) for sign_change and first_negative, the pair
    (new leader, old leader) for lead_change and the full permutation for
    new_ordering. delta_value is pi(x,k,l1) - pi(x,k,l2) for the first two
    residues of the payload.
    """
    x: int
    kind: RaceEventKind
    payload: tuple
    delta_value: int

    def row(self):
        l2 = self.payload[1] if len(self.payload) > 1 else ''
        return [self.x, self.kind.value, self.payload[0], l2, self.delta_value]


class ResidueCounters(NamedTuple):
    pi: int
    theta: float
    psi: float
    Pi: float


class EventLog:
    """Bounded in-memory event buffer with an optional full CSV spill."""

    def __init__(self, maxlen=None, spill=None):
        self.buffer = deque(maxlen=maxlen or race_defaults.event_buffer)
        self.spill = Path(spill) if spill is not None else None
        self.total = 0
        self.counts = dict.fromkeys(RaceEventKind, 0)
        self._handle = None
        self._writer = None

    def _open(self):
        new_file = not self.spill.exists() or self.spill.stat().st_size == 0
        self._handle = open(self.spill, 'a', newline='', encoding='utf-8')
        self._writer = csv.writer(self._handle)
        if new_file:
            self._writer.writerow(EVENT_COLUMNS)

    def extend(self, events):
        for event in events:
            self.buffer.append(event)
            self.total += 1
            self.counts[event.kind] += 1
        if events and self.spill is not None:
            if self._handle is None:
                self._open()
            self._writer.writerows(event.row() for event in events)

    def truncate_spill(self):
        """Cut the spill file back to its header and the first ``total`` events.

        A run that stops after its last checkpoint leaves rows the resumed run
        would write again.
        """
        if self.spill is None or not self.spill.exists():
            return 0
        keep = self.total + 1
        tmp = self.spill.with_name(self.spill.name + '.tmp')
        dropped = 0
        with open(self.spill, newline='', encoding='utf-8') as src, \
                open(tmp, 'w', newline='', encoding='utf-8') as dst:
            for i, line in enumerate(src):
                if i < keep:
                    dst.write(line)
                else:
                    dropped += 1
        tmp.replace(self.spill)
        if dropped:
            logger.info(f'Dropped {dropped} events written after the checkpoint from {self.spill}.')
        return dropped

    def flush(self):
        if self._handle is not None:
            self._handle.flush()

    def close(self):
        if self._handle is not None:
            self._handle.close()
            self._handle = None
            self._writer = None

    def of_kind(self, kind):
        return [event for event in self.buffer if event.kind is RaceEventKind(kind)]

    def __iter__(self):
        return iter(self.buffer)

    def __len__(self):
        return len(self.buffer)


class _Compensated:
    """Kahan-compensated running sums, one per slot.

    Compensation runs across batches. Each added value is a plain float64
    bincount total over one batch (at most one segment of prime powers), whose
    rounding stays near sqrt(n) ulps.
    """

    def __init__(self, size):
        self.total = np.zeros(size)
        self.comp = np.zeros(size)

    def add(self, values):
        y = values - self.comp
        t = self.total + y
        self.comp = (t - self.total) - y
        self.total = t


class ChebyshevTrace:
    """pi(n), pi(n,k,l) and psi(n,k,l) for tracked l after every event n <= limit."""

    def __init__(self, limit, width):
        self.limit = limit
        self.width = width
        self.covered = 1
        self._chunks = []
        self._arrays = None

    def append(self, n, pi_total, pi, psi, covered):
        if n.size:
            self._chunks.append((n, pi_total, pi, psi))
            self._arrays = None
        self.covered = covered

    def _stack(self):
        if self._arrays is None:
            if self._chunks:
                self._arrays = tuple(np.concatenate(parts) for parts in zip(*self._chunks))
                self._chunks = [self._arrays]
            else:
                self._arrays = (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
                                np.zeros((0, self.width), dtype=np.int64), np.zeros((0, self.width)))
        return self._arrays

    def at(self, x):
        """(pi(x), pi(x,k,l), psi(x,k,l)) for integer x <= covered."""
        if x > self.covered:
            raise InsufficientDataError(f'Trace only covers x <= {self.covered}, asked for {x}.')
        n, pi_total, pi, psi = self._stack()
        i = int(np.searchsorted(n, x, side='right')) - 1
        if i < 0:
            return 0, np.zeros(self.width, dtype=np.int64), np.zeros(self.width)
        return int(pi_total[i]), pi[i].copy(), psi[i].copy()


class RaceState:
    """Comparative counters and event detectors for one modulus.

    :param modulus: modulus k (or a prebuilt Modulus)
    :param residues: tracked residues; pairs are (residues[i], residues[j]) with i < j
    :param limit: last x of the run
    :param event_buffer: size of the in-memory event ring buffer
    :param event_csv: optional path receiving every event
    :param trace_limit: keep a full trace of tracked pi/psi for x <= trace_limit (0 disables)
    """

    def __init__(self, modulus, residues, limit, event_buffer=None, event_csv=None, trace_limit=None):
        self.modulus = modulus if isinstance(modulus, Modulus) else build_modulus(modulus)
        self.residues = self.modulus.validate_residues(residues)
        if not self.residues:
            raise InvalidResidueError('At least one residue must be tracked.')
        if limit < 2:
            raise DomainError(f'Race limit must be >= 2, got {limit}.')
        self.limit = int(limit)
        self.x_current = 1

        phi = self.modulus.phi
        r = len(self.residues)
        self.square_roots = square_root_counts(self.modulus)
        self._pi = np.zeros(phi, dtype=np.int64)
        self._theta = _Compensated(phi)
        self._psi = _Compensated(phi)
        self._Pi = _Compensated(phi)
        self.prime_count = 0
        self.divisor_prime_count = 0

        self._tracked_pos = np.array([self.modulus.position(l) for l in self.residues], dtype=np.int64)
        self._track = np.full(self.modulus.k, -1, dtype=np.int64)
        self._track[np.array(self.residues)] = np.arange(r)
        self.pairs = list(combinations(range(r), 2))
        self._pair_i = np.array([i for i, _ in self.pairs], dtype=np.int64)
        self._pair_j = np.array([j for _, j in self.pairs], dtype=np.int64)

        self._sign = np.zeros(len(self.pairs), dtype=np.int64)
        self.first_negative = {}
        # n = 1 has every difference equal to zero
        self._le = np.ones(len(self.pairs), dtype=np.int64)
        self._ge = np.ones(len(self.pairs), dtype=np.int64)
        self._leader = -1
        self.first_lead = {}
        self.orderings_seen = {self.residues} if r == 1 else set()

        self._measure = {}
        self.tie_measure = 0.0
        self._t_mark = 2.0
        self._history = []
        self._history_t = 2.0

        self.events = EventLog(event_buffer, event_csv)
        if trace_limit is None:
            trace_limit = race_defaults.trace_limit
        self.trace_limit = min(int(trace_limit), self.limit)
        self.trace = ChebyshevTrace(self.trace_limit, r) if self.trace_limit > 0 else None

    # Counters
    @property
    def pi(self):
        return self._pi.copy()

    @property
    def theta(self):
        return self._theta.total.copy()

    @property
    def psi(self):
        return self._psi.total.copy()

    @property
    def Pi(self):
        return self._Pi.total.copy()

    def counters(self, l):
        """Counters of the reduced residue l at x_current."""
        i = self.modulus.position(l)
        return ResidueCounters(int(self._pi[i]), float(self._theta.total[i]),
                               float(self._psi.total[i]), float(self._Pi.total[i]))

    def tracked_index(self, l):
        if l not in self.residues:
            raise UntrackedResidueError(f'Residue {l} is not tracked (tracked: {self.residues}).')
        return self.residues.index(l)

    @property
    def preponderance(self):
        """Map from tracked pair to #{n <= x : Delta(n) <= 0}."""
        return {(self.residues[i], self.residues[j]): int(self._le[p])
                for p, (i, j) in enumerate(self.pairs)}

    def preponderance_count(self, l1, l2):
        """#{n <= x_current : pi(n,k,l1) - pi(n,k,l2) <= 0} for tracked l1, l2."""
        i, j = self.tracked_index(l1), self.tracked_index(l2)
        if i == j:
            return self.x_current
        if i < j:
            return int(self._le[self.pairs.index((i, j))])
        return int(self._ge[self.pairs.index((j, i))])

    def values_at(self, x):
        """(pi(x), tracked pi(x,k,l), tracked psi(x,k,l)) at integer x <= x_current."""
        x = int(x)
        if x < 1 or x > self.x_current:
            raise DomainError(f'x={x} is outside the sieved range [1, {self.x_current}].')
        if x == self.x_current:
            return self.prime_count, self._pi[self._tracked_pos].copy(), self._psi.total[self._tracked_pos].copy()
        if self.trace is None:
            raise InsufficientDataError(f'No trace kept; only x = {self.x_current} is available.')
        return self.trace.at(x)

    # Logarithmic measure
    def log_measure(self, ordering):
        """Integral of dt/t over t in [2, x_current] where the strict ordering holds."""
        return self._measure.get(tuple(ordering), 0.0)

    def measure_history(self, ordering):
        """(t, measure up to t) at thinned segment boundaries."""
        ordering = tuple(ordering)
        return [(t, measures.get(ordering, 0.0)) for t, measures in self._history]

    # Update
    def update(self, batch):
        """Consume one sieve batch covering [x_current + 1, batch.hi)."""
        x_prev = self.x_current
        if batch.lo != x_prev + 1:
            raise DomainError(f'Batch starts at {batch.lo}, expected {x_prev + 1}.')
        x_end = min(batch.hi - 1, self.limit)
        n = batch.n
        residue = n % self.modulus.k
        pos = self.modulus.slot[residue]
        coprime = pos >= 0
        tracked = self._track[residue]
        r = len(self.residues)

        before = self._pi[self._tracked_pos].copy()
        jump = batch.is_prime & (tracked >= 0)
        xs = n[jump]
        if xs.size:
            steps = np.zeros((xs.size, r), dtype=np.int64)
            steps[np.arange(xs.size), tracked[jump]] = 1
            counts = before + np.cumsum(steps, axis=0)
        else:
            counts = np.zeros((0, r), dtype=np.int64)

        events = self._detect_pairs(xs, counts)
        events += self._detect_leaders(xs, counts)
        events += self._detect_orderings(xs, counts)
        self._count_preponderance(x_prev, x_end, xs, counts, before)
        self._accumulate_measure(x_end, xs, counts, before)
        if self.trace is not None and x_prev < self.trace_limit:
            self._record_trace(batch, tracked, before, x_end)

        prime = batch.is_prime & coprime
        phi = self.modulus.phi
        self._pi += np.bincount(pos[prime], minlength=phi)
        self._theta.add(np.bincount(pos[prime], weights=batch.weight[prime], minlength=phi))
        self._psi.add(np.bincount(pos[coprime], weights=batch.weight[coprime], minlength=phi))
        self._Pi.add(np.bincount(pos[coprime], weights=batch.weight[coprime] / np.log(n[coprime]), minlength=phi))
        self.prime_count += int(batch.is_prime.sum())
        self.divisor_prime_count += int((batch.is_prime & ~coprime).sum())
        self.x_current = x_end

        events.sort(key=lambda e: (e.x, _KIND_RANK[e.kind], self._payload_rank(e.payload)))
        self.events.extend(events)

    def _payload_rank(self, payload):
        return tuple(self.residues.index(l) for l in payload)

    def _detect_pairs(self, xs, counts):
        events = []
        if not xs.size:
            return events
        for p, (i, j) in enumerate(self.pairs):
            pair = (self.residues[i], self.residues[j])
            d = counts[:, i] - counts[:, j]
            nonzero = np.flatnonzero(d)
            if nonzero.size:
                signs = np.sign(d[nonzero])
                previous = np.concatenate(([self._sign[p]], signs[:-1]))
                for idx in nonzero[(signs != previous) & (previous != 0)]:
                    events.append(RaceEvent(int(xs[idx]), RaceEventKind.sign_change, pair, int(d[idx])))
                self._sign[p] = signs[-1]
            if pair not in self.first_negative:
                negative = np.flatnonzero(d < 0)
                if negative.size:
                    idx = negative[0]
                    self.first_negative[pair] = int(xs[idx])
                    events.append(RaceEvent(int(xs[idx]), RaceEventKind.first_negative, pair, int(d[idx])))
        return events

    def _detect_leaders(self, xs, counts):
        events = []
        r = len(self.residues)
        if r < 2 or not xs.size:
            return events
        top = counts.max(axis=1)
        unique = (counts == top[:, None]).sum(axis=1) == 1
        leader = np.where(unique, counts.argmax(axis=1), -1)

        for t, l in enumerate(self.residues):
            if l not in self.first_lead:
                hit = np.flatnonzero(leader == t)
                if hit.size:
                    self.first_lead[l] = int(xs[hit[0]])

        # Ties keep the previous strict leader
        last = np.where(leader >= 0, np.arange(leader.size), -1)
        np.maximum.accumulate(last, out=last)
        filled = np.where(last >= 0, leader[np.maximum(last, 0)], self._leader)
        previous = np.concatenate(([self._leader], filled[:-1]))
        for c in np.flatnonzero((filled != previous) & (previous >= 0) & (filled >= 0)):
            new, old = filled[c], previous[c]
            events.append(RaceEvent(int(xs[c]), RaceEventKind.lead_change,
                                    (self.residues[new], self.residues[old]),
                                    int(counts[c, new] - counts[c, old])))
        self._leader = int(filled[-1])
        return events

    def _strict_orders(self, rows):
        order = np.argsort(-rows, axis=1, kind='stable')
        ranked = np.take_along_axis(rows, order, axis=1)
        strict = np.all(np.diff(ranked, axis=1) < 0, axis=1)
        return order, strict

    def _detect_orderings(self, xs, counts):
        events = []
        if len(self.residues) < 2 or not xs.size:
            return events
        order, strict = self._strict_orders(counts)
        where = np.flatnonzero(strict)
        if not where.size:
            return events
        rows, first = np.unique(order[where], axis=0, return_index=True)
        for row, f in sorted(zip(rows.tolist(), first.tolist()), key=lambda item: item[1]):
            ordering = tuple(self.residues[t] for t in row)
            if ordering in self.orderings_seen:
                continue
            self.orderings_seen.add(ordering)
            c = where[f]
            events.append(RaceEvent(int(xs[c]), RaceEventKind.new_ordering, ordering,
                                    int(counts[c, row[0]] - counts[c, row[1]])))
        return events

    def _count_preponderance(self, x_prev, x_end, xs, counts, before):
        if not self.pairs:
            return
        lengths = np.diff(np.concatenate(([x_prev + 1], xs, [x_end + 1])))
        rows = np.vstack((before[None, :], counts))
        d = rows[:, self._pair_i] - rows[:, self._pair_j]
        self._le += (lengths[:, None] * (d <= 0)).sum(axis=0)
        self._ge += (lengths[:, None] * (d >= 0)).sum(axis=0)

    def _accumulate_measure(self, x_end, xs, counts, before):
        bounds = np.maximum(np.concatenate(([self._t_mark], xs.astype(float), [float(x_end)])), self._t_mark)
        widths = np.log1p(np.diff(bounds) / bounds[:-1])
        rows = np.vstack((before[None, :], counts))
        order, strict = self._strict_orders(rows)
        if strict.any():
            keys, inverse = np.unique(order[strict], axis=0, return_inverse=True)
            sums = np.bincount(inverse.ravel(), weights=widths[strict], minlength=len(keys))
            for row, width in zip(keys.tolist(), sums.tolist()):
                ordering = tuple(self.residues[t] for t in row)
                self._measure[ordering] = self._measure.get(ordering, 0.0) + width
        self.tie_measure += float(widths[~strict].sum())
        self._t_mark = max(self._t_mark, float(x_end))

        if self._t_mark >= self._history_t * race_defaults.history_ratio:
            self._history.append((self._t_mark, dict(self._measure)))
            self._history_t = self._t_mark

    def _record_trace(self, batch, tracked, before, x_end):
        keep = batch.n <= self.trace_limit
        n = batch.n[keep]
        prime = batch.is_prime[keep]
        tr = tracked[keep]
        weight = batch.weight[keep]
        r = len(self.residues)
        on = tr >= 0
        pi_steps = np.zeros((n.size, r), dtype=np.int64)
        hit = np.flatnonzero(on & prime)
        pi_steps[hit, tr[hit]] = 1
        psi_steps = np.zeros((n.size, r))
        hit = np.flatnonzero(on)
        psi_steps[hit, tr[hit]] = weight[hit]
        self.trace.append(
            n,
            self.prime_count + np.cumsum(prime),
            before + np.cumsum(pi_steps, axis=0),
            self._psi.total[self._tracked_pos] + np.cumsum(psi_steps, axis=0),
            min(x_end, self.trace_limit))

    # Checkpoint state
    def _detector_state(self):
        return {
            'residues': list(self.residues),
            'x_current': self.x_current,
            'prime_count': self.prime_count,
            'divisor_prime_count': self.divisor_prime_count,
            'sign': self._sign.tolist(),
            'first_negative': [[l1, l2, x] for (l1, l2), x in self.first_negative.items()],
            'le': self._le.tolist(),
            'ge': self._ge.tolist(),
            'leader': self._leader,
            'first_lead': [[l, x] for l, x in self.first_lead.items()],
            'orderings_seen': sorted(list(o) for o in self.orderings_seen),
            'measure': [[list(o), v] for o, v in self._measure.items()],
            'tie_measure': self.tie_measure,
            't_mark': self._t_mark,
            'history': [[t, [[list(o), v] for o, v in m.items()]] for t, m in self._history],
            'history_t': self._history_t,
            'event_buffer': self.events.buffer.maxlen,
            'event_total': self.events.total,
            'event_counts': {kind.value: c for kind, c in self.events.counts.items()},
            'events': [[e.x, e.kind.value, list(e.payload), e.delta_value] for e in self.events.buffer],
        }

    def _restore_detectors(self, data):
        self.x_current = data['x_current']
        self.prime_count = data['prime_count']
        self.divisor_prime_count = data['divisor_prime_count']
        self._sign = np.array(data['sign'], dtype=np.int64)
        self.first_negative = {(l1, l2): x for l1, l2, x in data['first_negative']}
        self._le = np.array(data['le'], dtype=np.int64)
        self._ge = np.array(data['ge'], dtype=np.int64)
        self._leader = data['leader']
        self.first_lead = {l: x for l, x in data['first_lead']}
        self.orderings_seen = {tuple(o) for o in data['orderings_seen']}
        self._measure = {tuple(o): v for o, v in data['measure']}
        self.tie_measure = data['tie_measure']
        self._t_mark = data['t_mark']
        self._history = [(t, {tuple(o): v for o, v in m}) for t, m in data['history']]
        self._history_t = data['history_t']
        self.events.total = data['event_total']
        self.events.counts = {RaceEventKind(kind): c for kind, c in data['event_counts'].items()}
        for x, kind, payload, delta in data['events']:
            self.events.buffer.append(RaceEvent(x, RaceEventKind(kind), tuple(payload), delta))


def run_race(k, residues, limit, cfg=None, event_csv=None, event_buffer=None, trace_limit=None,
             checkpoint=None, checkpoint_every=None, resume=None):
    """Race the tracked residues modulo k up to limit.

    :param k: modulus
    :type k: int
    :param residues: tracked residues, in the order defining the pairs
    :type residues: list
    :param limit: last x
    :type limit: int
    :param cfg: sieve parameters (limit and start are overridden)
    :type cfg: SieveConfig
    :param event_csv: path receiving every event
    :param checkpoint: path of a binary checkpoint rewritten every checkpoint_every segments
    :param resume: RaceState from load_checkpoint to continue
    :return: RaceState at x = limit
    """
    if resume is not None:
        state = resume
        if state.modulus.k != k or state.residues != tuple(residues):
            raise CheckpointError(
                f'Checkpoint is for k={state.modulus.k}, residues {state.residues};'
                f' asked for k={k}, residues {tuple(residues)}.')
        if limit < state.x_current:
            raise DomainError(f'Limit {limit} is below the checkpoint position {state.x_current}.')
        state.limit = int(limit)
    else:
        state = RaceState(k, residues, limit, event_buffer=event_buffer, event_csv=event_csv,
                          trace_limit=trace_limit)

    if state.x_current >= state.limit:
        return state

    base = cfg if cfg is not None else SieveConfig(limit=state.limit)
    sieve_cfg = SieveConfig(limit=state.limit, segment_size=base.segment_size, wheel=base.wheel,
                            thread_count=base.thread_count, start_after=state.x_current)
    every = checkpoint_every or race_defaults.checkpoint_every
    done = 0

    def sink(batch):
        nonlocal done
        state.update(batch)
        done += 1
        if checkpoint is not None and done % every == 0:
            save_checkpoint(state, checkpoint)

    try:
        summary = stream_events(sieve_cfg, sink)
    finally:
        state.events.close()
    if checkpoint is not None:
        save_checkpoint(state, checkpoint)
    logger.info(f'Race mod {state.modulus.k} reached x={state.x_current} after {summary.segments} segments,'
                f' {state.events.total} events.')
    return state


def delta(state, l1, l2):
    """Delta(x,k,l1,l2) = pi(x,k,l1) - pi(x,k,l2) at x_current."""
    state.tracked_index(l1)
    state.tracked_index(l2)
    return state.counters(l1).pi - state.counters(l2).pi


def h_value(state, l1, l2):
    """phi(k) x^(-1/2) (psi(x,k,l1) - psi(x,k,l2)) - N_k(l1) + N_k(l2) at x_current."""
    state.tracked_index(l1)
    state.tracked_index(l2)
    if state.x_current < 2:
        raise DomainError('h is only defined for x >= 2.')
    n = state.square_roots
    difference = state.counters(l1).psi - state.counters(l2).psi
    return state.modulus.phi * difference / sqrt(state.x_current) - n[l1] + n[l2]


def union_delta(state, A, B):
    """Union race: primes in A minus |A|/|B| times primes in B, at x_current."""
    A, B = set(A), set(B)
    if not A or not B:
        raise InvalidPartitionError('Both residue sets must be nonempty.')
    if A & B:
        raise InvalidPartitionError(f'Residue sets overlap in {sorted(A & B)}.')
    count_a = sum(state.counters(l).pi for l in sorted(A))
    count_b = sum(state.counters(l).pi for l in sorted(B))
    return count_a - len(A) / len(B) * count_b


def nonresidue_union_delta(state):
    """union_delta with A the quadratic nonresidues and B the quadratic residues."""
    counts = state.square_roots.counts
    residues = [l for l in state.modulus.residues if counts[l] > 0]
    nonresidues = [l for l in state.modulus.residues if counts[l] == 0]
    return union_delta(state, nonresidues, residues)


def preponderance_density(state, l1, l2):
    """N(x)/x with N(x) = #{n <= x : Delta(n,k,l1,l2) <= 0}, ties included."""
    if state.x_current < 1:
        raise DomainError('No integers have been raced yet.')
    return state.preponderance_count(l1, l2) / state.x_current


def chebyshev_weighted_sum(x, limit, cfg=None):
    """Sum over odd primes p <= limit of (-1)^((p-1)/2) exp(-p/x).

    :param x: scale, > 0
    :param limit: sieve bound; must be >= 41 x so the tail is below 1e-17
    :return: float
    """
    if x <= 0:
        raise DomainError(f'x must be positive, got {x}.')
    if limit < 41 * x:
        raise TailNotNegligibleError(
            f'limit={limit} < 41*x={41 * x}; the dropped tail exceeds e^-41.')
    total = _Compensated(1)

    def sink(batch):
        p = batch.n[batch.is_prime & (batch.n % 2 == 1)]
        sign = np.where(p % 4 == 1, 1.0, -1.0)
        total.add(np.array([np.sum(sign * np.exp(-p / x))]))

    base = cfg if cfg is not None else SieveConfig(limit=int(limit))
    stream_events(SieveConfig(limit=int(limit), segment_size=base.segment_size, wheel=base.wheel,
                              thread_count=base.thread_count), sink)
    return float(total.total[0])


def shanks_first_violation(limit, cfg=None):
    """First x <= limit with pi(x,8,1) > max over a in {3,5,7} of pi(x,8,a), or None."""
    state = run_race(8, [1, 3, 5, 7], limit, cfg=cfg, event_buffer=1, trace_limit=0)
    return state.first_lead.get(1)


def shanks_check(limit, cfg=None):
    """True iff pi(x,8,1) <= max over a in {3,5,7} of pi(x,8,a) for every x <= limit."""
    violation = shanks_first_violation(limit, cfg=cfg)
    if violation is not None:
        logger.warning(f'Shanks inequality fails first at x={violation}.')
    return violation is None


class PrimePowerRelation(NamedTuple):
    """Worst |Pi - pi - sum pi(sqrt x,k,u)/2| / (x^(1/3) log x) over segment boundaries."""
    k: int
    limit: int
    constant: float
    max_ratio: float
    worst_x: int
    worst_residue: int
    checked: int

    @property
    def holds(self):
        return self.max_ratio <= self.constant


def prime_power_relation(k, limit, cfg=None, constant=None):
    """Check the relation between Pi(x,k,l) and pi(x,k,l) at every segment boundary.

    The remainder only collects p^m with m >= 3, so it stays below
    constant * x^(1/3) log x with the frozen constant from defaults.json.

    :return: PrimePowerRelation
    """
    m = build_modulus(k)
    if constant is None:
        constant = race_defaults.prime_power_constant
    base = cfg if cfg is not None else SieveConfig(limit=int(limit))
    sieve_cfg = SieveConfig(limit=int(limit), segment_size=base.segment_size, wheel=base.wheel,
                            thread_count=base.thread_count)

    small = primes_up_to(isqrt(int(limit)))
    small_pos = m.slot[small % k]
    roots = np.zeros((m.phi, m.phi))
    for u in m.residues:
        roots[m.position((u * u) % k), m.position(u)] = 1.0

    pi = np.zeros(m.phi, dtype=np.int64)
    Pi = _Compensated(m.phi)
    worst = (0.0, 0, 0)
    checked = 0
    for batch in iter_batches(sieve_cfg):
        pos = m.slot[batch.n % k]
        ok = pos >= 0
        prime = batch.is_prime & ok
        pi += np.bincount(pos[prime], minlength=m.phi)
        Pi.add(np.bincount(pos[ok], weights=batch.weight[ok] / np.log(batch.n[ok]), minlength=m.phi))

        x = batch.hi - 1
        c = int(np.searchsorted(small, isqrt(x), side='right'))
        below = small_pos[:c]
        pi_root = np.bincount(below[below >= 0], minlength=m.phi)
        remainder = np.abs(Pi.total - pi - roots @ pi_root / 2)
        ratio = remainder / (x ** (1 / 3) * log(x))
        i = int(np.argmax(ratio))
        if ratio[i] > worst[0]:
            worst = (float(ratio[i]), x, m.residues[i])
        checked += 1

    return PrimePowerRelation(k=k, limit=int(limit), constant=constant, max_ratio=worst[0],
                              worst_x=worst[1], worst_residue=worst[2], checked=checked)


def _sig15(value):
    return float(f'{value:.15g}')


def snapshot(state):
    """Counters at x_current as a JSON-ready dict."""
    return {
        'modulus': state.modulus.k,
        'x': state.x_current,
        'residues': list(state.residues),
        'prime_count': state.prime_count,
        'counters': {
            str(l): {'pi': int(state._pi[i]),
                     'theta': _sig15(state._theta.total[i]),
                     'psi': _sig15(state._psi.total[i]),
                     'Pi': _sig15(state._Pi.total[i])}
            for i, l in enumerate(state.modulus.residues)},
    }


def write_snapshot(state, path):
    with open(path, 'w', encoding='utf-8') as fh:
        json.dump(snapshot(state), fh, indent=2)


def write_events(events, path):
    """Write events as CSV with columns x,kind,l1,l2,delta."""
    with open(path, 'w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh)
        writer.writerow(EVENT_COLUMNS)
        writer.writerows(event.row() for event in events)


def save_checkpoint(state, path):
    """Write a little-endian binary checkpoint, replacing path atomically."""
    state.events.flush()
    path = Path(path)
    blob = json.dumps(state._detector_state()).encode('utf-8')
    header = np.array([state.limit, state.x_current, state.modulus.k, state.modulus.phi,
                       state.trace_limit], dtype='<i8')
    tmp = path.with_name(path.name + '.tmp')
    with open(tmp, 'wb') as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(header.tobytes())
        fh.write(state._pi.astype('<i8').tobytes())
        for acc in (state._theta, state._psi, state._Pi):
            fh.write(acc.total.astype('<f8').tobytes())
            fh.write(acc.comp.astype('<f8').tobytes())
        fh.write(np.array([len(blob)], dtype='<i8').tobytes())
        fh.write(blob)
    tmp.replace(path)


def load_checkpoint(path, event_csv=None):
    """Rebuild a RaceState from save_checkpoint output.

    The trace is not stored; the resumed state keeps no trace. An existing
    event_csv is truncated to the events recorded at the checkpoint.
    """
    raw = Path(path).read_bytes()
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f'{path} is not a race checkpoint.')
    offset = len(CHECKPOINT_MAGIC)

    def take(count, dtype):
        nonlocal offset
        size = count * np.dtype(dtype).itemsize
        if offset + size > len(raw):
            raise CheckpointError(f'{path} is truncated.')
        values = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
        offset += size
        return values

    limit, x_current, k, phi, _ = (int(v) for v in take(5, '<i8'))
    pi = take(phi, '<i8').astype(np.int64)
    sums = [(take(phi, '<f8').copy(), take(phi, '<f8').copy()) for _ in range(3)]
    length = int(take(1, '<i8')[0])
    try:
        data = json.loads(raw[offset:offset + length].decode('utf-8'))
    except ValueError as exc:
        raise CheckpointError(f'{path} has a damaged detector block.') from exc

    state = RaceState(k, data['residues'], limit, event_buffer=data['event_buffer'],
                      event_csv=event_csv, trace_limit=0)
    if state.modulus.phi != phi or data['x_current'] != x_current:
        raise CheckpointError(f'{path} is inconsistent with modulus {k}.')
    state._pi = pi
    for acc, (total, comp) in zip((state._theta, state._psi, state._Pi), sums):
        acc.total, acc.comp = total, comp
    state._restore_detectors(data)
    state.events.truncate_spill()
    return state
