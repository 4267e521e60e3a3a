"""Barriers: finite systems of hypothetical zeros off the critical line.

For x large, a zero rho = sigma + i t of L(s, chi) contributes

    f(rho) = -i x^sigma/(t log x) x^(i t) + O(x^sigma/(t^2 log x))

to the explicit formula, so a few zeros right of the critical line dominate
every difference pi(x,k,l1) - pi(x,k,l2). All evaluation happens in
log x, normalised by x^sigma*/(t* log x) where sigma* + i t* is the zero
of largest real part (smallest t among ties), so x up to 1e30 and beyond
never overflows.

Verdicts hold under the model: main terms plus an error envelope with
the constants C and C'. They are not unconditional statements about
prime counts.

Barrier file format::

    #barrier
    #modulus 5
    #residues 1,2,3,4
    #beta1 0.5
    #beta2 0.75
    #beta3 0.75
    5:1 0.75 1000000.0 1
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from math import exp, log, pi, sqrt
from typing import NamedTuple

import numpy as np
from scipy import optimize

from primerace.definitions import barrier_defaults
from primerace.errors import BarrierSpecError, DomainError, InvalidResidueError
from primerace.residues import build_modulus, character_by_label
from primerace.zeros import parse_zero_lines

logger = logging.getLogger(__name__)

PHASE_BOUND = -sqrt(0.1)


@dataclass(frozen=True)
class BarrierSpec:
    """Hypothetical zeros per nonprincipal character.

    ``zeros`` maps a character label to a tuple of (rho, multiplicity).
    Construction checks 1/2 <= beta1 < beta2 <= Re rho <= beta3 <= 1 and Im rho > 0.
    """
    modulus: object
    residues: tuple
    zeros: dict = field(default_factory=dict)
    beta1: float = 0.5
    beta2: float = 0.75
    beta3: float = 0.75
    source: str = ''

    def __post_init__(self):
        m = self.modulus if hasattr(self.modulus, 'phi') else build_modulus(self.modulus)
        object.__setattr__(self, 'modulus', m)
        try:
            object.__setattr__(self, 'residues', m.validate_residues(self.residues))
        except InvalidResidueError as exc:
            raise BarrierSpecError(str(exc)) from exc
        if len(self.residues) < 2:
            raise BarrierSpecError('A barrier needs at least two residues.')
        if not 0.5 <= self.beta1 < self.beta2 <= self.beta3 <= 1:
            raise BarrierSpecError(
                f'Need 1/2 <= beta1 < beta2 <= beta3 <= 1, got {self.beta1}, {self.beta2}, {self.beta3}.')
        for label, entries in self.zeros.items():
            try:
                chi = character_by_label(m, label)
            except InvalidResidueError as exc:
                raise BarrierSpecError(str(exc)) from exc
            if chi.is_principal:
                raise BarrierSpecError(f'{label} is the principal character.')
            for rho, mult in entries:
                rho = complex(rho)
                if rho.imag <= 0:
                    raise BarrierSpecError(f'{label}: Im rho must be positive, got {rho}.')
                if not self.beta2 <= rho.real <= self.beta3:
                    raise BarrierSpecError(
                        f'{label}: Re rho = {rho.real} outside [beta2, beta3] = [{self.beta2}, {self.beta3}].')
                if int(mult) != mult or mult < 1:
                    raise BarrierSpecError(f'{label}: multiplicity must be a positive integer, got {mult}.')

    @property
    def size(self):
        """|B|, the number of zeros counted with multiplicity."""
        return sum(int(mult) for entries in self.zeros.values() for _, mult in entries)

    def flat(self):
        """(weights per residue, rho, multiplicity) arrays over every listed zero.

        weights[z, j] = conj chi_z(l_j) for the character of zero z.
        """
        weights, rhos, mults = [], [], []
        for label in sorted(self.zeros):
            chi = character_by_label(self.modulus, label)
            row = np.conj([chi(l) for l in self.residues])
            for rho, mult in self.zeros[label]:
                weights.append(row)
                rhos.append(complex(rho))
                mults.append(float(mult))
        r = len(self.residues)
        return (np.array(weights, dtype=complex).reshape(len(rhos), r),
                np.array(rhos, dtype=complex), np.array(mults, dtype=float))

    @property
    def dominant(self):
        """(sigma*, t*) of the zero with the largest real part, smallest ordinate among ties."""
        _, rhos, _ = self.flat()
        if not rhos.size:
            return None
        best = min(rhos.tolist(), key=lambda r: (-r.real, r.imag))
        return best.real, best.imag


def builtin_k5():
    """One zero 3/4 + 10^6 i of L(s, chi_1) mod 5 with chi_1(2) = i."""
    return BarrierSpec(modulus=5, residues=(1, 2, 3, 4), zeros={'5:1': ((complex(0.75, 1e6), 1),)},
                       beta1=0.5, beta2=0.75, beta3=0.75, source='builtin k5')


BUILTIN = {'k5': builtin_k5}


def load_barrier(path):
    """Read a barrier file: '#barrier' header, #modulus, #residues, #beta1-3 and zero lines."""
    with open(path, encoding='utf-8') as fh:
        lines = fh.readlines()
    if not lines or lines[0].strip() != '#barrier':
        raise BarrierSpecError(f"{path}: first line must be '#barrier'.")
    headers, records = parse_zero_lines(lines[1:], name=str(path))
    try:
        k = int(headers['modulus'])
        residues = tuple(int(v) for v in headers['residues'].split(','))
        betas = [float(headers[f'beta{i}']) for i in (1, 2, 3)]
    except KeyError as exc:
        raise BarrierSpecError(f'{path}: missing header #{exc.args[0]}.') from exc
    except ValueError as exc:
        raise BarrierSpecError(f'{path}: bad header value: {exc}') from exc
    zeros = {}
    for label, record, _ in records:
        zeros.setdefault(label, []).append((complex(record.beta, record.gamma), record.multiplicity))
    return BarrierSpec(modulus=k, residues=residues, zeros={label: tuple(v) for label, v in zeros.items()},
                       beta1=betas[0], beta2=betas[1], beta3=betas[2], source=headers.get('source', ''))


def save_barrier(spec, path):
    lines = ['#barrier', f'#modulus {spec.modulus.k}',
             '#residues ' + ','.join(str(l) for l in spec.residues),
             f'#beta1 {spec.beta1!r}', f'#beta2 {spec.beta2!r}', f'#beta3 {spec.beta3!r}']
    if spec.source:
        lines.append(f'#source {spec.source}')
    for label in sorted(spec.zeros):
        for rho, mult in spec.zeros[label]:
            rho = complex(rho)
            lines.append(f'{label} {rho.real!r} {rho.imag!r} {int(mult)}')
    with open(path, 'w', encoding='utf-8') as fh:
        fh.write('\n'.join(lines) + '\n')


class _Model:
    """Normalised main terms and envelope of one spec as functions of L = log x."""

    def __init__(self, spec, C=None, C_prime=None):
        self.spec = spec
        self.C = barrier_defaults.C if C is None else C
        self.C_prime = barrier_defaults.C_prime if C_prime is None else C_prime
        self.weights, self.rhos, self.mults = spec.flat()
        self.dominant = spec.dominant
        self.phi = spec.modulus.phi

    @property
    def empty(self):
        return self.dominant is None

    def residue_terms(self, L):
        """Normalised main term per residue, shape (len(L), r)."""
        L = np.atleast_1d(np.asarray(L, dtype=float))
        if self.empty:
            return np.zeros((L.size, len(self.spec.residues)))
        sigma_s, t_s = self.dominant
        sigma, t = self.rhos.real, self.rhos.imag
        f = -1j * np.exp(np.outer(L, sigma - sigma_s)) * (t_s / t) * np.exp(1j * np.outer(L, t))
        return -2.0 * ((f * self.mults) @ self.weights).real / self.phi

    def envelope(self, L):
        """Normalised error bound C sum n x^(sigma-sigma*) t*/t^2 + C' t* L^3 x^(beta1-sigma*)."""
        L = np.asarray(L, dtype=float)
        sigma_s, t_s = self.dominant
        sigma, t = self.rhos.real, self.rhos.imag
        first = self.C * (np.exp(np.multiply.outer(L, sigma - sigma_s)) * self.mults * t_s / t ** 2).sum(axis=-1)
        second = self.C_prime * t_s * L ** 3 * np.exp((self.spec.beta1 - sigma_s) * L)
        return first + second

    def envelope_floor(self):
        """Limit of the envelope as x grows."""
        sigma_s, t_s = self.dominant
        top = self.rhos.real == sigma_s
        return float(self.C * (self.mults[top] * t_s / self.rhos.imag[top] ** 2).sum())

    def scale(self, L):
        sigma_s, t_s = self.dominant
        return np.exp(sigma_s * L) / (t_s * L)


class DominantDelta(NamedTuple):
    main: float
    error: float
    normalised_main: float
    normalised_error: float


def dominant_deltas(x, spec, C=None, C_prime=None):
    """Main term -2 Re[sum_chi c_chi sum_rho n f(rho)]/phi(k) and error bound for each tracked pair.

    :return: dict mapping (l1, l2) to DominantDelta
    """
    if x < 10:
        raise DomainError(f'dominant_deltas needs x >= 10, got {x}.')
    model = _Model(spec, C, C_prime)
    L = log(x)
    if model.empty:
        return {pair: DominantDelta(0.0, 0.0, 0.0, 0.0) for pair in combinations(spec.residues, 2)}
    terms = model.residue_terms(L)[0]
    error = float(model.envelope(L))
    scale = float(model.scale(L))
    out = {}
    for i, j in combinations(range(len(spec.residues)), 2):
        value = float(terms[i] - terms[j])
        out[(spec.residues[i], spec.residues[j])] = DominantDelta(value * scale, error * scale, value, error)
    return out


class PhaseCheck(NamedTuple):
    grid_max: float
    worst_theta: float
    slack: float
    bound: float

    @property
    def certified(self):
        return self.grid_max <= self.bound + self.slack


def _phase_minimum(theta):
    return np.minimum(np.minimum(-np.sin(theta), 0.5 * np.sin(theta) - 0.5 * np.cos(theta)), np.cos(theta))


def k5_phase_inequality(theta_grid_step=None):
    """max over theta of min(-sin, sin/2 - cos/2, cos) on a grid, with its Lipschitz slack.

    The true maximum is -sqrt(0.1).
    """
    step = barrier_defaults.phase_step if theta_grid_step is None else theta_grid_step
    if not 0 < step <= 1e-3:
        raise DomainError(f'Grid step must lie in (0, 1e-3], got {step}.')
    theta = np.arange(0.0, 2 * pi, step)
    values = _phase_minimum(theta)
    i = int(np.argmax(values))
    return PhaseCheck(grid_max=float(values[i]), worst_theta=float(theta[i]),
                      slack=sqrt(2) * step / 2, bound=PHASE_BOUND)


class VerdictStatus(Enum):
    passed = 'passed'
    failed = 'failed'
    inconclusive = 'inconclusive'


@dataclass
class ExclusionVerdict:
    ordering: tuple
    x_min: float
    x_max: float
    n_samples: int
    status: VerdictStatus
    margin: float
    x_threshold: float
    certified_fraction: float
    C: float
    C_prime: float
    decile_margins: list = field(default_factory=list)
    reason: str = ''

    @property
    def passed(self):
        return self.status is VerdictStatus.passed

    def to_dict(self):
        return {
            'excluded_ordering': list(self.ordering),
            'x_range_tested': {'x_min': self.x_min, 'x_max': self.x_max, 'samples': self.n_samples},
            'status': self.status.value,
            'passed': self.passed,
            'margin': self.margin,
            'x_threshold': self.x_threshold,
            'certified_fraction': self.certified_fraction,
            'envelope': {'C': self.C, 'C_prime': self.C_prime},
            'decile_margins': self.decile_margins,
            'reason': self.reason,
            'note': 'exclusion holds under the main-term model with the stated envelope constants',
        }


def _sample_logs(x_samples):
    if x_samples is None:
        return np.linspace(log(barrier_defaults.x_min), log(barrier_defaults.x_max), barrier_defaults.n_samples)
    x = np.asarray(x_samples, dtype=float)
    if np.any(x < 10):
        raise DomainError('Barrier samples need x >= 10.')
    return np.log(x)


def _threshold(model, margin, L_low):
    """Smallest L0 >= L_low with envelope(L) < margin for every L >= L0 (inf if none)."""
    if model.envelope_floor() >= margin:
        return float('inf')
    sigma_s = model.dominant[0]
    peak = max(3.0 / (sigma_s - model.spec.beta1), L_low)

    def gap(L):
        return float(model.envelope(L)) - margin

    if gap(peak) > 0:
        hi = 2 * peak
        while gap(hi) > 0:
            hi *= 2
            if hi > 1e6:
                return float('inf')
        return float(optimize.brentq(gap, peak, hi))
    grid = np.linspace(L_low, peak, 512)
    above = np.flatnonzero(np.asarray(model.envelope(grid)) >= margin)
    if not above.size:
        return float(L_low)
    a = grid[above[-1]]
    b = grid[min(above[-1] + 1, grid.size - 1)]
    return float(optimize.brentq(gap, a, b)) if gap(b) < 0 else float(b)


def _violation(model, ordering, L):
    terms = model.residue_terms(L)
    index = [model.spec.residues.index(l) for l in ordering]
    needed = np.stack([terms[:, a] - terms[:, b] for a, b in zip(index, index[1:])], axis=1)
    return (-needed).max(axis=1)


def exclusion_profile(spec, ordering, x_samples=None, C=None, C_prime=None):
    """(log x, violation, envelope) arrays behind verify_exclusion, normalised."""
    L = _sample_logs(x_samples)
    model = _Model(spec, C, C_prime)
    if model.empty:
        return L, np.zeros(L.size), np.zeros(L.size)
    return L, _violation(model, tuple(ordering), L), np.asarray(model.envelope(L))


def verify_exclusion(spec, ordering, x_samples=None, C=None, C_prime=None):
    """Check that ordering (pi(x,k,o_1) > pi(x,k,o_2) > ...) never occurs under the model.

    At each sampled x the violation is the largest amount by which a
    difference the ordering needs positive is negative, in units of
    x^sigma*/(t* log x); margin is its minimum over the samples. The verdict
    passes when margin > 0 and the envelope falls below margin for good
    beyond the finite threshold x_threshold.

    :return: ExclusionVerdict
    """
    ordering = tuple(int(l) for l in ordering)
    if sorted(ordering) != sorted(spec.residues):
        raise InvalidResidueError(f'Ordering {ordering} is not a permutation of {spec.residues}.')
    L = _sample_logs(x_samples)
    if x_samples is not None and L.size < 1000:
        raise DomainError(f'verify_exclusion needs at least 1000 samples, got {L.size}.')
    model = _Model(spec, C, C_prime)
    common = dict(ordering=ordering, x_min=float(np.exp(L.min())), x_max=float(np.exp(L.max())),
                  n_samples=int(L.size), C=model.C, C_prime=model.C_prime)

    if model.empty:
        return ExclusionVerdict(status=VerdictStatus.inconclusive, margin=0.0, x_threshold=float('inf'),
                                certified_fraction=0.0, reason='no main term: the barrier lists no zeros',
                                **common)

    violation = _violation(model, ordering, L)
    margin = float(violation.min())
    deciles = [float(chunk.min()) for chunk in np.array_split(violation, 10) if chunk.size]

    if margin <= 0:
        return ExclusionVerdict(status=VerdictStatus.failed, margin=margin, x_threshold=float('inf'),
                                certified_fraction=0.0, decile_margins=deciles,
                                reason='the main terms realise the ordering at a sampled x', **common)

    L_threshold = _threshold(model, margin, log(10))
    certified = float(np.mean((L >= L_threshold) & (violation > model.envelope(L))))
    if not np.isfinite(L_threshold):
        logger.warning('The envelope never falls below the exclusion margin; verdict is inconclusive.')
        return ExclusionVerdict(status=VerdictStatus.inconclusive, margin=margin, x_threshold=float('inf'),
                                certified_fraction=certified, decile_margins=deciles,
                                reason='envelope dominates: t too small or sigma - beta1 too small', **common)
    x_threshold = exp(L_threshold) if L_threshold < 700 else float('inf')
    return ExclusionVerdict(status=VerdictStatus.passed, margin=margin, x_threshold=x_threshold,
                            certified_fraction=certified, decile_margins=deciles,
                            reason=f'excluded for log x >= {L_threshold:.6g}', **common)


@dataclass
class Census:
    counts: dict
    ties: int
    samples: int


def orderings_census(spec, x_samples=None):
    """Tally the orderings of the per-residue main terms across the sampled x.

    Ties are broken by residue order and counted in ``ties``.
    """
    L = _sample_logs(x_samples)
    model = _Model(spec)
    terms = model.residue_terms(L)
    order = np.argsort(-terms, axis=1, kind='stable')
    ranked = np.take_along_axis(terms, order, axis=1)
    tol = barrier_defaults.tie_tolerance * max(1.0, float(np.abs(terms).max()))
    ties = int(np.any(np.diff(ranked, axis=1) >= -tol, axis=1).sum())
    rows, tally = np.unique(order, axis=0, return_counts=True)
    counts = {tuple(spec.residues[i] for i in row): int(c) for row, c in zip(rows.tolist(), tally.tolist())}
    return Census(counts=counts, ties=ties, samples=int(L.size))
