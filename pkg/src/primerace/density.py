"""Logarithmic densities of race orderings.

Two estimators: the exact log measure accumulated by a race run, and a
Monte Carlo draw from the limiting distribution obtained by giving every
zero ordinate an independent uniform phase.

Sampler convention: for the tracked residue l_j

    E_j = -(N_k(l_j) - 1)
          - sum_{chi != chi_0} sum_{0 < gamma <= T} 2 Re[conj chi(l_j) n w e^(i theta) / (1/2 + i gamma)]
          - sum_{chi != chi_0} 2 Re[conj chi(l_j) m(1/2, chi)]

with w = 1 - gamma/T when Fejer weights are on. The constant shift is
calibrated so that E(3) - E(1) has mean 2 for k = 4.
"""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations, permutations
from math import isfinite, log, sqrt

import numpy as np

from primerace.definitions import density_defaults, race_defaults
from primerace.errors import DomainError, InvalidResidueError, OffLineZeroError
from primerace.residues import Modulus, build_modulus, characters, square_root_counts

logger = logging.getLogger(__name__)

EMPIRICAL = 'empirical_logmeasure'
MONTE_CARLO = 'gsh_monte_carlo'


@dataclass(frozen=True)
class EVector:
    """E_j = (log x / sqrt x)(phi(k) pi(x,k,l_j) - pi(x)); x is None for sampler draws."""
    x: float
    residues: tuple
    components: np.ndarray

    def ordering(self):
        """Residues sorted by decreasing component, or None on a tie."""
        order = np.argsort(-self.components, kind='stable')
        ranked = self.components[order]
        if np.any(np.diff(ranked) >= 0):
            return None
        return tuple(self.residues[i] for i in order)


def e_vector(state, x=None):
    """E-vector of a race at integer x (default: its current position).

    :param state: RaceState
    :return: EVector
    """
    x = state.x_current if x is None else int(x)
    if x < 2:
        raise DomainError(f'The E-vector needs x >= 2, got {x}.')
    pi_total, pi, _ = state.values_at(x)
    components = log(x) / sqrt(x) * (state.modulus.phi * pi.astype(float) - pi_total)
    return EVector(x=x, residues=state.residues, components=components)


def bias_vector(k, residues):
    """Constant shifts -(N_k(l) - 1) of the sampler, one per residue."""
    m = k if isinstance(k, Modulus) else build_modulus(k)
    residues = m.validate_residues(residues)
    n = square_root_counts(m)
    return np.array([1.0 - n[l] for l in residues])


@dataclass
class DensityEstimate:
    k: int
    residues: tuple
    ordering: tuple
    delta_hat: float
    method: str
    samples: int
    stderr: float
    scale: float
    lower: float = None
    upper: float = None
    seed: int = None
    tie_fraction: float = 0.0

    def to_dict(self):
        out = {
            'k': self.k,
            'residues': list(self.residues),
            'ordering': list(self.ordering),
            'method': self.method,
            'X' if self.method == EMPIRICAL else 'T': self.scale,
            'n_samples': self.samples,
            'seed': self.seed,
            'delta_hat': self.delta_hat,
            'stderr': self.stderr,
            'tie_fraction': self.tie_fraction,
        }
        if self.method == EMPIRICAL:
            out['lower'] = self.lower
            out['upper'] = self.upper
        else:
            out['convention'] = density_defaults.convention
        return out


def _check_ordering(residues, ordering):
    ordering = tuple(int(l) for l in ordering)
    if sorted(ordering) != sorted(residues):
        raise InvalidResidueError(f'Ordering {ordering} is not a permutation of the residues {tuple(residues)}.')
    return ordering


def empirical_log_density(state, ordering):
    """(1/log(X/2)) times the log measure of t in [2, X] where pi(t,k,l) follows ordering.

    X is the race position. The ordering and its reverse plus the tie
    measure add up to exactly 1. lower and upper are the smallest and
    largest running values over the trailing window [X^w, X].

    :param state: RaceState, ordering: permutation of the tracked residues
    :return: DensityEstimate
    """
    ordering = _check_ordering(state.residues, ordering)
    X = state.x_current
    if X <= 2:
        raise DomainError(f'The log density needs X > 2, got {X}.')
    value = state.log_measure(ordering) / log(X / 2)

    window = X ** race_defaults.trailing_window
    running = [measure / log(t / 2) for t, measure in state.measure_history(ordering) if window <= t < X and t > 2]
    running.append(value)
    return DensityEstimate(k=state.modulus.k, residues=state.residues, ordering=ordering, delta_hat=value,
                           method=EMPIRICAL, samples=len(running), stderr=0.0, scale=X,
                           lower=min(running), upper=max(running),
                           tie_fraction=state.tie_measure / log(X / 2))


class GSHSampler:
    """Draws E-vectors from the limiting distribution, one uniform phase per zero.

    :param zs: ZeroSet with every zero on the critical line
    :param k: modulus
    :param residues: residues whose E components are drawn
    :param T: truncation height, at most zs.height_limit
    :param fejer: apply the weights 1 - gamma/T
    """

    def __init__(self, zs, k, residues, T, fejer=None):
        self.modulus = k if isinstance(k, Modulus) else build_modulus(k)
        self.residues = self.modulus.validate_residues(residues)
        if len(self.residues) < 1:
            raise InvalidResidueError('At least one residue is needed.')
        zs.check_height(T)
        self.T = T
        self.fejer = density_defaults.fejer if fejer is None else fejer

        rows = []
        shift = bias_vector(self.modulus, self.residues).astype(complex)
        for chi in characters(self.modulus):
            if chi.is_principal:
                continue
            gamma, beta, mult = zs.arrays(chi.label, T)
            if np.any(beta != 0.5) or any(z.beta != 0.5 for z in zs.real_zeros.get(chi.label, ())):
                raise OffLineZeroError(f'{chi.label} has zeros off the critical line.')
            if chi.label not in zs.zeros and chi.label not in zs.real_zeros:
                logger.warning(f'No zeros listed for {chi.label}; it contributes nothing.')
            weights = np.conj(np.array([chi(l) for l in self.residues]))
            shift -= 2 * weights * zs.central_multiplicity(chi.label)
            if gamma.size:
                scale = mult * ((1 - gamma / T) if self.fejer else 1.0) / (0.5 + 1j * gamma)
                rows.append(np.outer(scale, weights))
        self.bias = shift.real
        self.coefficients = np.vstack(rows) if rows else np.zeros((0, len(self.residues)), dtype=complex)
        logger.info(f'GSH sampler mod {self.modulus.k}: {self.coefficients.shape[0]} phases, T={T}.')

    @property
    def phase_count(self):
        return self.coefficients.shape[0]

    def _block(self, size, seed_seq):
        rng = np.random.Generator(np.random.Philox(seed_seq))
        theta = rng.uniform(0.0, 2 * np.pi, size=(size, self.phase_count))
        oscillation = np.cos(theta) @ self.coefficients.real - np.sin(theta) @ self.coefficients.imag
        return self.bias - 2.0 * oscillation

    def draw(self, n_samples, seed, thread_count=1):
        """n_samples x r array of E-vectors.

        Blocks of density_defaults.block_size draws each get a child seed of
        ``seed``, so the output does not depend on thread_count.
        """
        block = density_defaults.block_size
        sizes = [min(block, n_samples - start) for start in range(0, n_samples, block)]
        seeds = np.random.SeedSequence(seed).spawn(len(sizes))
        if thread_count == 1:
            parts = [self._block(size, s) for size, s in zip(sizes, seeds)]
        else:
            with ThreadPoolExecutor(max_workers=thread_count) as pool:
                parts = list(pool.map(self._block, sizes, seeds))
        if not parts:
            return np.zeros((0, len(self.residues)))
        return np.vstack(parts)

    def ordering_counts(self, n_samples, seed, thread_count=1):
        """Counts of every strict ordering seen in n_samples draws, plus the tie count."""
        samples = self.draw(n_samples, seed, thread_count)
        order = np.argsort(-samples, axis=1, kind='stable')
        ranked = np.take_along_axis(samples, order, axis=1)
        strict = np.all(np.diff(ranked, axis=1) < 0, axis=1)
        counts = {}
        if strict.any():
            rows, tally = np.unique(order[strict], axis=0, return_counts=True)
            for row, c in zip(rows.tolist(), tally.tolist()):
                counts[tuple(self.residues[i] for i in row)] = int(c)
        return counts, int((~strict).sum())


def gsh_sample(zs, k, residues, T, seed, fejer=None):
    """One draw of the limiting E-vector.

    :return: EVector with x None
    """
    sampler = GSHSampler(zs, k, residues, T, fejer)
    return EVector(x=None, residues=sampler.residues, components=sampler.draw(1, seed)[0])


def _estimate(sampler, ordering, count, n_samples, seed, ties):
    p = count / n_samples
    return DensityEstimate(k=sampler.modulus.k, residues=sampler.residues, ordering=ordering, delta_hat=p,
                           method=MONTE_CARLO, samples=n_samples, stderr=sqrt(p * (1 - p) / n_samples),
                           scale=sampler.T, seed=seed, tie_fraction=ties / n_samples)


def _check_samples(n_samples):
    if n_samples < density_defaults.min_samples:
        raise DomainError(f'n_samples must be >= {density_defaults.min_samples}, got {n_samples}.')


def gsh_density(zs, k, residues, ordering, T, n_samples, seed, thread_count=1, fejer=None):
    """Fraction of sampler draws in which ordering holds strictly.

    :return: DensityEstimate with stderr sqrt(p(1-p)/n)
    """
    _check_samples(n_samples)
    sampler = GSHSampler(zs, k, residues, T, fejer)
    ordering = _check_ordering(sampler.residues, ordering)
    counts, ties = sampler.ordering_counts(n_samples, seed, thread_count)
    return _estimate(sampler, ordering, counts.get(ordering, 0), n_samples, seed, ties)


def gsh_all_orderings(zs, k, residues, T, n_samples, seed, thread_count=1, fejer=None):
    """Estimates for all r! orderings from one set of draws, keyed by ordering."""
    _check_samples(n_samples)
    sampler = GSHSampler(zs, k, residues, T, fejer)
    counts, ties = sampler.ordering_counts(n_samples, seed, thread_count)
    return {ordering: _estimate(sampler, ordering, counts.get(ordering, 0), n_samples, seed, ties)
            for ordering in permutations(sampler.residues)}


def unbiased_predicate(k, residues):
    """True iff (r = 2 and N_k(l1) = N_k(l2)) or (r = 3 and l2 = l1 g, l3 = l1 g^2 with g^3 = 1 mod k)."""
    m = k if isinstance(k, Modulus) else build_modulus(k)
    residues = m.validate_residues(residues)
    if len(residues) == 2:
        n = square_root_counts(m)
        return n[residues[0]] == n[residues[1]]
    if len(residues) == 3:
        l1, l2, l3 = residues
        return any(pow(g, 3, m.k) == 1 and (l1 * g) % m.k == l2 and (l1 * g * g) % m.k == l3
                   for g in m.residues)
    return False


def tail_probe(zs, k, residues, R_grid, n_samples, seed, T=None, thread_count=1):
    """Fraction of draws with Euclidean norm |E| > R, for each R in ascending order.

    :return: list of (R, fraction)
    """
    T = zs.height_limit if T is None else T
    sampler = GSHSampler(zs, k, residues, T)
    norms = np.linalg.norm(sampler.draw(n_samples, seed, thread_count), axis=1)
    norms.sort()
    return [(float(R), float(1.0 - np.searchsorted(norms, R, side='right') / n_samples))
            for R in sorted(R_grid)]


def density_spread_report(zero_sets, T, n_samples, seed, thread_count=1):
    """Spread of the pair densities delta(l1 ahead of l2) across all pairs, per modulus.

    :param zero_sets: map from modulus k to its ZeroSet
    :return: list of dicts with k, min, max and spread, ascending in k
    """
    report = []
    for k in sorted(zero_sets):
        m = build_modulus(k)
        sampler = GSHSampler(zero_sets[k], m, m.residues, T)
        draws = sampler.draw(n_samples, seed, thread_count)
        values = [float(np.mean(draws[:, i] > draws[:, j])) for i, j in combinations(range(m.phi), 2)]
        low, high = min(values), max(values)
        report.append({'k': k, 'pairs': len(values), 'min': low, 'max': high, 'spread': high - low})
        logger.info(f'k={k}: pair densities in [{low:.4f}, {high:.4f}].')
    return report


def write_samples(path, residues, samples):
    """CSV with one column per residue, one row per E-vector draw."""
    with open(path, 'w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh)
        writer.writerow([f'E_{l}' for l in residues])
        for row in samples:
            writer.writerow([repr(float(v)) if isfinite(v) else 'nan' for v in row])
