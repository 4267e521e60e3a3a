"""Tables of nontrivial zeros of Dirichlet L-functions.

Zero file format (UTF-8 text)::

    #modulus 4
    #tmax 100.0
    #source some provenance text
    4:1 0.5 6.020948904697597 1

Data lines are ``<character label> <beta> <gamma> <multiplicity>``. Lines
with gamma = 0 declare zeros on the real segment; with beta = 1/2 they give
the central multiplicity m(1/2, chi). Other lines starting with '#' are
comments. Zeros of imprimitive characters are those of the inducing
primitive L-function.
"""

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import chain
from typing import NamedTuple

import numpy as np

from primerace.definitions import zero_defaults
from primerace.errors import CostLimitError, DomainError, InsufficientDataError, ZeroFileError

logger = logging.getLogger(__name__)

LABEL_PATTERN = re.compile(r'^(\d+):(\d+(?:\.\d+)*)$')


class ZeroRecord(NamedTuple):
    gamma: float
    beta: float = 0.5
    multiplicity: int = 1


def label_key(label):
    """Sort key ordering labels by modulus then index vector."""
    k, index = LABEL_PATTERN.match(label).groups()
    return (int(k), tuple(int(a) for a in index.split('.')))


def is_principal_label(label):
    return all(a == 0 for a in label_key(label)[1])


@dataclass(frozen=True)
class ZeroSet:
    """Zeros per character label.

    ``zeros`` holds the zeros with gamma > 0 in increasing order,
    ``real_zeros`` the gamma = 0 declarations. All zeros with
    0 < gamma <= height_limit are present.
    """
    height_limit: float
    zeros: dict = field(default_factory=dict)
    real_zeros: dict = field(default_factory=dict)
    modulus: int = None
    source: str = ''

    @property
    def labels(self):
        return sorted(set(self.zeros) | set(self.real_zeros), key=label_key)

    def for_label(self, label, T=None):
        """Records of one character with gamma <= T."""
        records = self.zeros.get(label, ())
        if T is None:
            return tuple(records)
        return tuple(z for z in records if z.gamma <= T)

    def arrays(self, label, T=None):
        """(gamma, beta, multiplicity) arrays of one character with gamma <= T."""
        records = self.for_label(label, T)
        return (np.array([z.gamma for z in records], dtype=float),
                np.array([z.beta for z in records], dtype=float),
                np.array([z.multiplicity for z in records], dtype=float))

    def central_multiplicity(self, label):
        """m(1/2, chi): multiplicity of the zero at s = 1/2, 0 when undeclared."""
        return sum(z.multiplicity for z in self.real_zeros.get(label, ()) if z.beta == 0.5)

    def lowest_ordinate(self, label):
        records = self.zeros.get(label, ())
        return records[0].gamma if records else None

    @property
    def all_ordinates(self):
        """The sorted set G of distinct positive ordinates over all characters."""
        values = [z.gamma for z in chain.from_iterable(self.zeros.values())]
        return np.unique(np.array(values, dtype=float))

    @property
    def max_ordinate(self):
        g = self.all_ordinates
        return float(g[-1]) if g.size else 0.0

    def check_height(self, T):
        if T > self.height_limit:
            raise InsufficientDataError(
                f'Height {T} exceeds the completeness bound T_max={self.height_limit}.')

    def count(self, label=None):
        if label is None:
            return sum(z.multiplicity for z in chain.from_iterable(self.zeros.values()))
        return sum(z.multiplicity for z in self.zeros.get(label, ()))


def _merge_sorted(label, records):
    if any(b.gamma < a.gamma for a, b in zip(records, records[1:])):
        logger.warning(f'Zeros for {label} are not sorted; sorting.')
        records = sorted(records)
    merged = []
    for z in records:
        if merged and merged[-1].gamma == z.gamma and merged[-1].beta == z.beta:
            merged[-1] = merged[-1]._replace(multiplicity=merged[-1].multiplicity + z.multiplicity)
            logger.warning(f'Merged duplicate ordinate {z.gamma} for {label}.')
        else:
            merged.append(z)
    return tuple(merged)


def parse_zero_lines(lines, name='<zeros>'):
    """Parse zero-file lines into (headers, records).

    :return: dict of '#key' header values and a list of (label, ZeroRecord, line number)
    """
    headers = {}
    records = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith('#'):
            key, _, value = line[1:].partition(' ')
            headers[key.strip()] = value.strip()
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ZeroFileError(f'{name}: expected 4 fields, got {len(parts)}', lineno)
        label, beta, gamma, mult = parts
        if not LABEL_PATTERN.match(label):
            raise ZeroFileError(f"{name}: malformed character label '{label}'", lineno)
        try:
            beta, gamma = float(beta), float(gamma)
            mult = int(mult)
        except ValueError as exc:
            raise ZeroFileError(f'{name}: {exc}', lineno) from exc
        if not np.isfinite(gamma) or gamma < 0:
            raise ZeroFileError(f'{name}: ordinate must be >= 0, got {gamma}', lineno)
        if not 0 < beta < 1:
            raise ZeroFileError(f'{name}: real part must lie in (0, 1), got {beta}', lineno)
        if mult < 1:
            raise ZeroFileError(f'{name}: multiplicity must be >= 1, got {mult}', lineno)
        records.append((label, ZeroRecord(gamma, beta, mult), lineno))
    return headers, records


def build_zero_set(headers, records, name='<zeros>'):
    if 'tmax' not in headers:
        raise ZeroFileError(f'{name}: missing #tmax completeness declaration')
    try:
        height_limit = float(headers['tmax'])
        modulus = int(headers['modulus']) if 'modulus' in headers else None
    except ValueError as exc:
        raise ZeroFileError(f'{name}: bad header value: {exc}') from exc
    if height_limit < 0:
        raise ZeroFileError(f'{name}: #tmax must be >= 0, got {height_limit}')

    upper, real = {}, {}
    for label, record, lineno in records:
        if modulus is not None and label_key(label)[0] != modulus:
            raise ZeroFileError(f"{name}: label '{label}' is not a character modulo {modulus}", lineno)
        (real if record.gamma == 0 else upper).setdefault(label, []).append(record)
    return ZeroSet(
        height_limit=height_limit,
        zeros={label: _merge_sorted(label, rec) for label, rec in upper.items()},
        real_zeros={label: _merge_sorted(label, rec) for label, rec in real.items()},
        modulus=modulus,
        source=headers.get('source', ''))


def load_zeros(path):
    """Load and validate a zero file.

    :param path: zero file
    :type path: str or pathlib.Path
    :return: ZeroSet
    """
    with open(path, encoding='utf-8') as fh:
        headers, records = parse_zero_lines(fh, name=str(path))
    return build_zero_set(headers, records, name=str(path))


def format_zero_lines(zs):
    lines = []
    if zs.modulus is not None:
        lines.append(f'#modulus {zs.modulus}')
    lines.append(f'#tmax {float(zs.height_limit)!r}')
    if zs.source:
        lines.append(f'#source {zs.source}')
    for label in zs.labels:
        for z in zs.real_zeros.get(label, ()) + zs.zeros.get(label, ()):
            lines.append(f'{label} {float(z.beta)!r} {float(z.gamma)!r} {z.multiplicity}')
    return lines


def save_zeros(zs, path):
    """Write the canonical form of a ZeroSet."""
    with open(path, 'w', encoding='utf-8') as fh:
        fh.write('\n'.join(format_zero_lines(zs)) + '\n')


def haselgrove_check(zs, A):
    """True iff the data shows no zero of a nonprincipal L(s, chi) on the real segment (0, 1).

    :param A: height up to which the data must be complete
    :return: bool
    """
    zs.check_height(A)
    return not any(records for label, records in zs.real_zeros.items() if not is_principal_label(label))


class Violation(NamedTuple):
    vector: tuple
    total: float
    nearest: float
    distance: float


@dataclass
class IndependenceVerdict:
    subset: tuple
    ordinates: tuple
    N: int
    tolerance: float
    enumerated: int
    in_range: int
    violations: list

    @property
    def passed(self):
        return not self.violations

    def to_dict(self):
        return {
            'subset': list(self.subset),
            'ordinates': list(self.ordinates),
            'N': self.N,
            'tolerance': self.tolerance,
            'enumerated': self.enumerated,
            'in_range': self.in_range,
            'passed': self.passed,
            'violations': [
                {'vector': list(v.vector), 'sum': v.total, 'nearest': v.nearest, 'distance': v.distance}
                for v in self.violations],
        }


def _independence_block(start, stop, gammas, N, G, height, tol):
    m = gammas.size
    base = 2 * N + 1
    index = np.arange(start, stop, dtype=np.int64)
    # Most significant digit first, so index order is lexicographic
    powers = base ** np.arange(m - 1, -1, -1, dtype=np.int64)
    vectors = (index[:, None] // powers[None, :]) % base - N
    keep = np.abs(vectors).sum(axis=1) >= 2
    vectors = vectors[keep]
    sums = vectors @ gammas
    in_range = (sums >= 0) & (sums <= height)
    vectors, sums = vectors[in_range], sums[in_range]

    found = []
    if sums.size and G.size:
        right = np.clip(np.searchsorted(G, sums), 0, G.size - 1)
        left = np.clip(right - 1, 0, G.size - 1)
        nearest = np.where(np.abs(G[left] - sums) <= np.abs(G[right] - sums), G[left], G[right])
        distance = np.abs(nearest - sums)
        for i in np.flatnonzero(distance <= tol):
            found.append(Violation(tuple(int(c) for c in vectors[i]), float(sums[i]),
                                   float(nearest[i]), float(distance[i])))
    return int(keep.sum()), int(in_range.sum()), found


def n_independence(zs, subset, N, tol=None, thread_count=1):
    """Check N-independence of the ordinates G[subset] against the set G.

    Every integer vector n with |n_r| <= N and sum |n_r| >= 2 whose
    combination sum n_r gamma_r lies in [0, T_max] is compared to the
    nearest element of G.

    :param subset: indices into ``zs.all_ordinates`` (0-based)
    :param N: coefficient bound
    :param tol: match tolerance, default 1e-9 * max ordinate
    :return: IndependenceVerdict
    """
    G = zs.all_ordinates
    subset = tuple(int(i) for i in subset)
    if not subset:
        raise DomainError('The subset must hold at least one ordinate.')
    if N < 1:
        raise DomainError(f'N must be >= 1, got {N}.')
    for i in subset:
        if not 0 <= i < G.size:
            raise DomainError(f'Ordinate index {i} is out of range (G has {G.size} ordinates).')
    if tol is None:
        tol = zero_defaults.tolerance_factor * zs.max_ordinate
    if tol <= 0:
        raise DomainError(f'Tolerance must be positive, got {tol}.')

    m = len(subset)
    total = (2 * N + 1) ** m
    if total > zero_defaults.max_enumeration:
        raise CostLimitError(
            f'Enumeration of (2N+1)^m = {total} vectors exceeds the limit {zero_defaults.max_enumeration}.')

    gammas = G[list(subset)]
    block = zero_defaults.block_size
    bounds = [(start, min(start + block, total)) for start in range(0, total, block)]

    def work(bound):
        return _independence_block(bound[0], bound[1], gammas, N, G, zs.height_limit, tol)

    if thread_count > 1:
        with ThreadPoolExecutor(max_workers=thread_count) as pool:
            results = list(pool.map(work, bounds))
    else:
        results = [work(bound) for bound in bounds]

    violations = sorted(chain.from_iterable(found for _, _, found in results), key=lambda v: v.vector)
    return IndependenceVerdict(
        subset=subset,
        ordinates=tuple(float(g) for g in gammas),
        N=N,
        tolerance=float(tol),
        enumerated=sum(count for count, _, _ in results),
        in_range=sum(count for _, count, _ in results),
        violations=violations)


class ZeroDensityProfile(NamedTuple):
    height: float
    per_character: dict
    count: int
    ratio_to_TlogT: float


def zero_density_profile(zs, T):
    """Zero counts up to height T per character, and against T log T.

    :return: ZeroDensityProfile; per_character maps label to (count, ratio)
    """
    zs.check_height(T)
    scale = T * np.log(T) if T > 1 else np.nan
    per_character = {}
    for label in zs.labels:
        count = sum(z.multiplicity for z in zs.for_label(label, T))
        per_character[label] = (count, count / scale)
    total = sum(count for count, _ in per_character.values())
    return ZeroDensityProfile(height=T, per_character=per_character, count=total, ratio_to_TlogT=total / scale)
