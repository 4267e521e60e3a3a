"""Truncated explicit formulas over zeros of Dirichlet L-functions.

Zero sums use the zeros listed with 0 < gamma <= T. For a race between l1
and l2 the character weights are c_chi = conj chi(l1) - conj chi(l2); the
lower half-plane zeros of chi are the conjugates of the upper zeros of
conj chi, so sums over both halves collapse to -2 Re of a sum over the
upper zeros.
"""

import csv
import logging
from dataclasses import dataclass, field
from math import exp, floor, log, pi, sqrt
from typing import NamedTuple

import numpy as np
from scipy import integrate, special

from primerace.definitions import explicit_defaults
from primerace.errors import DomainError, OffLineZeroError, UnsupportedCharacterError
from primerace.race import run_race
from primerace.residues import Modulus, build_modulus, characters, conjugate, square_root_counts
from primerace.sieve import SieveConfig, iter_batches, primes_up_to

logger = logging.getLogger(__name__)

F_MODES = ('expi', 'quad', 'asymptotic')


@dataclass(frozen=True)
class ResidueWeights:
    """Character weights for the race between l1 and l2.

    ``coefficients`` maps each nonprincipal character label to c_chi and
    ``characters`` maps every label (principal included) to its Character.
    """
    modulus: Modulus
    l1: int
    l2: int
    coefficients: dict = field(repr=False)
    characters: dict = field(repr=False)
    bias_term: int = 0


def residue_weights(k, l1, l2):
    """c_chi = conj chi(l1) - conj chi(l2) for every nonprincipal chi, and N_k(l1) - N_k(l2).

    :param k: modulus (or Modulus)
    :return: ResidueWeights
    """
    m = k if isinstance(k, Modulus) else build_modulus(k)
    m.validate_residues((l1, l2) if l1 != l2 else (l1,))
    chars = {chi.label: chi for chi in characters(m)}
    coefficients = {label: complex(np.conj(chi(l1)) - np.conj(chi(l2)))
                    for label, chi in chars.items() if not chi.is_principal}
    n = square_root_counts(m)
    return ResidueWeights(modulus=m, l1=l1, l2=l2, coefficients=coefficients, characters=chars,
                          bias_term=n[l1] - n[l2])


def _f_quad(rho, x):
    beta, gamma = rho.real, rho.imag
    a, b = log(2), log(x)
    opts = {'epsrel': explicit_defaults.quad_rtol, 'limit': explicit_defaults.quad_limit}

    def envelope(v):
        return exp(beta * v) / v ** 2

    if gamma == 0:
        integral = integrate.quad(envelope, a, b, **opts)[0]
    else:
        real = integrate.quad(envelope, a, b, weight='cos', wvar=gamma, **opts)[0]
        imag = integrate.quad(envelope, a, b, weight='sin', wvar=gamma, **opts)[0]
        integral = real + 1j * imag
    return np.exp(rho * b) / (rho * b) + integral / rho


def f_rho(rho, x, mode=None):
    """f(rho) = x^rho/(rho log x) + (1/rho) int_2^x t^(rho-1)/log^2 t dt.

    mode 'expi' uses the closed form Ei(rho log x) - Ei(rho log 2) + 2^rho/(rho log 2),
    'quad' integrates numerically and 'asymptotic' keeps x^rho/(rho log x) only.

    :param rho: zero(s), Im rho >= 0 or real
    :param x: x > 2
    :return: complex array shaped like rho
    """
    mode = mode or explicit_defaults.f_mode
    rho = np.asarray(rho, dtype=complex)
    L, L2 = log(x), log(2)
    if mode == 'asymptotic':
        return np.exp(rho * L) / (rho * L)
    if mode == 'quad':
        return np.array([_f_quad(r, x) for r in rho.ravel()], dtype=complex).reshape(rho.shape)
    if mode != 'expi':
        raise DomainError(f"Unknown f mode '{mode}', expected one of {F_MODES}.")

    out = np.empty(rho.shape, dtype=complex)
    real = rho.imag == 0
    # Real arguments go through the real Ei to stay off the branch cut
    r = rho[real].real
    out[real] = special.expi(r * L) - special.expi(r * L2) + np.exp(r * L2) / (r * L2)
    c = rho[~real]
    out[~real] = special.expi(c * L) - special.expi(c * L2) + np.exp(c * L2) / (c * L2)
    return out


def _upper_zeros(zs, label, T):
    gamma, beta, mult = zs.arrays(label, T)
    return beta + 1j * gamma, mult


def psi_chi_truncated(x, chi, zs, T):
    """-sum over zeros of L(s, chi) with |gamma| <= T of x^rho/rho.

    Lower zeros come from the upper zeros of conj chi; for real chi the
    result is exactly real.

    :return: complex
    """
    if chi.is_principal:
        raise UnsupportedCharacterError('psi_chi_truncated needs a nonprincipal character.')
    if x < 2:
        raise DomainError(f'x must be >= 2, got {x}.')
    zs.check_height(T)
    L = log(x)
    rho, mult = _upper_zeros(zs, chi.label, T)
    terms = mult * np.exp(rho * L) / rho
    real_terms = sum(z.multiplicity * x ** z.beta / z.beta for z in zs.real_zeros.get(chi.label, ()))

    if chi.is_real:
        return complex(-2.0 * terms.real.sum() - real_terms, 0.0)

    label = conjugate(chi).label
    if label not in zs.zeros and rho.size:
        logger.warning(f'No zeros listed for {label}; lower half-plane zeros of {chi.label} are missing.')
    rho_c, mult_c = _upper_zeros(zs, label, T)
    lower = mult_c * np.exp(np.conj(rho_c) * L) / np.conj(rho_c)
    return complex(-(terms.sum() + lower.sum()) - real_terms)


def psi_chi_sieved(xs, chi, cfg=None):
    """Psi(x; chi) = sum over n <= x of Lambda(n) chi(n), from the sieve.

    :param xs: sample points
    :return: complex array aligned with xs
    """
    xs = np.asarray(xs, dtype=float)
    out = np.zeros(xs.shape, dtype=complex)
    n_query = np.floor(xs).astype(np.int64)
    limit = int(n_query.max()) if n_query.size else 0
    if limit < 2:
        return out
    base = cfg if cfg is not None else SieveConfig(limit=limit)
    sieve_cfg = SieveConfig(limit=limit, segment_size=base.segment_size, wheel=base.wheel,
                            thread_count=base.thread_count)
    running = 0j
    for batch in iter_batches(sieve_cfg):
        cumulative = running + np.cumsum(chi.lookup[batch.n % chi.modulus.k] * batch.weight)
        hit = (n_query >= batch.lo) & (n_query < batch.hi)
        if hit.any():
            idx = np.searchsorted(batch.n, n_query[hit], side='right') - 1
            out[hit] = np.where(idx >= 0, cumulative[np.maximum(idx, 0)] if cumulative.size else running, running)
        if cumulative.size:
            running = cumulative[-1]
    return out


def delta_reconstruct(x, w, zs, T, mode=None):
    """Approximate phi(k) Delta(x, k, l1, l2) from zeros up to height T.

    -2 Re sum_chi c_chi sum_{0 < gamma <= T} f(rho) - bias_term sqrt(x)/log x. Zeros
    declared on the real segment enter with half weight, their conjugate
    being themselves.

    :return: float
    """
    if x < 10:
        raise DomainError(f'delta_reconstruct needs x >= 10, got {x}.')
    zs.check_height(T)
    total = 0j
    for label, c in w.coefficients.items():
        if c == 0:
            continue
        rho, mult = _upper_zeros(zs, label, T)
        if rho.size:
            total += c * np.sum(mult * f_rho(rho, x, mode))
        for z in zs.real_zeros.get(label, ()):
            total += c * 0.5 * z.multiplicity * f_rho(z.beta, x, mode)
    return float(-2.0 * total.real - w.bias_term * sqrt(x) / log(x))


def reconstruct_curve(xs, w, zs, T, mode=None):
    return np.array([delta_reconstruct(x, w, zs, T, mode) for x in xs])


class OscillationTerm(NamedTuple):
    gamma: float
    a: complex


def _check_on_line(zs, labels):
    for label in labels:
        _, beta, _ = zs.arrays(label)
        if np.any(beta != 0.5) or any(z.beta != 0.5 for z in zs.real_zeros.get(label, ())):
            raise OffLineZeroError(
                f'{label} has zeros off the critical line; evaluate them with primerace.barrier.')


def residue_magnitudes(w, zs, T=None):
    """Residues a_j = -sum_chi c_chi n(rho, chi)/rho at each ordinate gamma_j > 0.

    Ordinates of different characters closer than the merge tolerance are
    combined into one term. Terms with a_j = 0 are dropped.

    :return: list of OscillationTerm sorted by gamma
    """
    labels = [label for label, c in w.coefficients.items() if c != 0]
    _check_on_line(zs, labels)
    gammas, residues = [], []
    for label in labels:
        rho, mult = _upper_zeros(zs, label, T)
        gammas.append(rho.imag)
        residues.append(-w.coefficients[label] * mult / rho)
    if not gammas:
        return []
    gammas = np.concatenate(gammas)
    residues = np.concatenate(residues)
    order = np.argsort(gammas, kind='stable')
    gammas, residues = gammas[order], residues[order]

    terms = []
    tol = explicit_defaults.merge_tolerance
    start = 0
    for i in range(1, gammas.size + 1):
        if i == gammas.size or gammas[i] - gammas[start] > tol:
            a = complex(residues[start:i].sum())
            if abs(a) > 0:
                terms.append(OscillationTerm(float(gammas[start]), a))
            start = i
    return terms


def residue_at_half(w, zs):
    """a_0: contribution of zeros at s = 1/2, zero when none are declared."""
    _check_on_line(zs, [label for label, c in w.coefficients.items() if c != 0])
    return float(sum((-2.0 * c * zs.central_multiplicity(label)).real for label, c in w.coefficients.items()))


def magnitude_trend(terms):
    """Slope of log|a_j| against log gamma_j (about -1 for typical data)."""
    if len(terms) < 2:
        return float('nan')
    gamma = np.array([t.gamma for t in terms])
    magnitude = np.abs(np.array([t.a for t in terms]))
    return float(np.polyfit(np.log(gamma), np.log(magnitude), 1)[0])


def a_star(u, terms, T, a0=0.0):
    """Fejer mean A*_T(u) = a0 + 2 Re sum_{0 < gamma_j < T} (1 - gamma_j/T) a_j e^(i gamma_j u).

    :param u: scalar or array
    :return: float or array shaped like u
    """
    if T <= 0:
        raise DomainError(f'T must be positive, got {T}.')
    u_arr = np.asarray(u, dtype=float)
    kept = [t for t in terms if 0 < t.gamma < T]
    if not kept:
        values = np.full(u_arr.shape, float(a0))
    else:
        gamma = np.array([t.gamma for t in kept])
        a = np.array([t.a for t in kept]) * (1 - gamma / T)
        phases = np.exp(1j * np.multiply.outer(u_arr, gamma))
        values = a0 + 2.0 * (phases @ a).real
    return float(values) if np.ndim(u) == 0 else values


def a_empirical(u, state, l1, l2):
    """A(u) = phi(k) e^(-u/2) (psi(e^u,k,l1) - psi(e^u,k,l2)) from a race.

    :param state: RaceState covering e^u (through its trace or its current x)
    """
    x = exp(u)
    n = int(floor(x * (1 + 1e-12)))
    if n < 1 or n > state.x_current:
        raise DomainError(f'e^u = {x} is outside the sieved range [1, {state.x_current}].')
    i, j = state.tracked_index(l1), state.tracked_index(l2)
    _, _, psi = state.values_at(n)
    return state.modulus.phi * exp(-u / 2) * (psi[i] - psi[j])


def diamond_bounds(terms, N, m=1, a0=0.0):
    """a0 -/+ (2N/(N+1)) sum of the m largest |a_j|.

    :return: (lower, upper)
    """
    if N < 1:
        raise DomainError(f'N must be >= 1, got {N}.')
    if m < 1 or m > len(terms):
        raise DomainError(f'm must lie in [1, {len(terms)}], got {m}.')
    largest = sorted((abs(t.a) for t in terms), reverse=True)[:m]
    width = 2 * N / (N + 1) * sum(largest)
    return a0 - width, a0 + width


@dataclass
class OscillationReport:
    a0: float
    terms: list
    diamond_bounds: tuple
    samples: list
    trend: float
    T: float

    def to_dict(self):
        return {
            'a0': self.a0,
            'T': self.T,
            'trend': self.trend,
            'diamond_bounds': {'lower': self.diamond_bounds[0], 'upper': self.diamond_bounds[1]},
            'terms': [{'gamma': t.gamma, 'a_real': t.a.real, 'a_imag': t.a.imag, 'abs_a': abs(t.a)}
                      for t in self.terms],
            'samples': [{'u': u, 'a_star': v} for u, v in self.samples],
        }


def oscillation_report(w, zs, T, N=1, m=1, u_samples=()):
    """Assemble a0, the residues a_j, Diamond bounds and A*_T samples."""
    zs.check_height(T)
    terms = residue_magnitudes(w, zs, T)
    a0 = residue_at_half(w, zs)
    bounds = diamond_bounds(terms, N, min(m, len(terms)), a0) if terms else (a0, a0)
    u_samples = np.asarray(u_samples, dtype=float)
    values = a_star(u_samples, terms, T, a0) if u_samples.size else []
    return OscillationReport(a0=a0, terms=terms, diamond_bounds=bounds,
                             samples=[(float(u), float(v)) for u, v in zip(u_samples, values)],
                             trend=magnitude_trend(terms), T=T)


class InghamCheck(NamedTuple):
    min_empirical: float
    max_empirical: float
    min_star: float
    max_star: float
    slack: float

    @property
    def lower_ok(self):
        return self.min_empirical <= self.min_star + self.slack

    @property
    def upper_ok(self):
        return self.max_star <= self.max_empirical + self.slack

    @property
    def passed(self):
        return self.lower_ok and self.upper_ok


def ingham_sandwich(state, l1, l2, terms, T, a0=0.0, u_samples=None, slack=None):
    """Finite-range check of min A(u) <= min A*_T(u) and max A*_T(u) <= max A(u).

    Failures are logged, not raised.

    :return: InghamCheck
    """
    if slack is None:
        slack = explicit_defaults.ingham_slack
    if u_samples is None:
        top = state.trace.covered if state.trace is not None else state.x_current
        u_samples = np.linspace(log(10), log(top), 500)
    empirical = np.array([a_empirical(u, state, l1, l2) for u in u_samples])
    star = np.asarray(a_star(np.asarray(u_samples, dtype=float), terms, T, a0))
    check = InghamCheck(float(empirical.min()), float(empirical.max()),
                        float(star.min()), float(star.max()), slack)
    if not check.passed:
        logger.warning(f'Ingham sandwich fails on the sampled range: {check}.')
    return check


@dataclass
class KFunctionValue:
    z: complex
    truncation_height: float
    tail_estimate: float
    k_val: complex = None
    K_val: complex = None
    F_val: complex = None
    P_val: float = None


def _tail(z, T, q):
    density = log(max(q * T / (2 * pi), np.e)) / (2 * pi)
    return density * exp(0.5 * z.real - T * z.imag) / z.imag


def k_functions(z, chi, zs, T):
    """k(z, chi) = sum n e^(rho z) and K(z, chi) = sum n e^(rho z)/rho over 0 < gamma <= T.

    :param z: complex with Im z > 0
    :return: KFunctionValue
    """
    z = complex(z)
    if z.imag <= 0:
        raise DomainError(f'k and K need Im z > 0, got z={z}.')
    zs.check_height(T)
    rho, mult = _upper_zeros(zs, chi.label, T)
    terms = mult * np.exp(rho * z)
    return KFunctionValue(z=z, truncation_height=T, tail_estimate=_tail(z, T, chi.modulus.k),
                          k_val=complex(terms.sum()), K_val=complex((terms / rho).sum()))


def f_function(z, k, l, zs, T):
    """F(z,k,l) = -2 e^(-z/2)/phi(k) sum_chi conj chi(l) K(z, chi) - 2/phi(k) sum_chi conj chi(l) m(1/2, chi).

    The sum runs over every character mod k; the principal one uses the
    zeros listed under label 'k:0'.
    """
    z = complex(z)
    m = k if isinstance(k, Modulus) else build_modulus(k)
    m.position(l)
    total_K = 0j
    total_m = 0j
    tail = 0.0
    for chi in characters(m):
        weight = np.conj(chi(l))
        value = k_functions(z, chi, zs, T)
        total_K += weight * value.K_val
        total_m += weight * zs.central_multiplicity(chi.label)
        tail += value.tail_estimate / max(T, 1.0)
    F = -2.0 * np.exp(-z / 2) / m.phi * total_K - 2.0 / m.phi * total_m
    return KFunctionValue(z=z, truncation_height=T, tail_estimate=2.0 * tail / m.phi,
                          F_val=complex(F))


class PBoundary(NamedTuple):
    x: float
    value: float
    residual: float
    spread: float
    divergent: bool
    samples: tuple


def _near_prime_power(x, window):
    """True if |x| lies within window of log p^m for a prime power p^m (checked up to 1e7)."""
    top = exp(abs(x) + window)
    if top > 1e7:
        return False
    logs = []
    for p in primes_up_to(int(top)).tolist():
        q = p
        while q <= top:
            logs.append(log(q))
            q *= p
    return bool(logs) and min(abs(abs(x) - v) for v in logs) < window


def p_boundary(x, k, l, zs, T, y_sequence=None):
    """P(x,k,l) = lim_{y -> 0+} Re F(x + iy, k, l), by linear extrapolation in y.

    :param y_sequence: decreasing positive y values, default 2^-n for n = 4..12
    :return: PBoundary with intercept, fit residual, spread and a divergence flag
    """
    if y_sequence is None:
        low, high = explicit_defaults.extrapolation_exponents
        y_sequence = [2.0 ** -n for n in range(low, high + 1)]
    y = np.asarray(y_sequence, dtype=float)
    if y.size < 2 or np.any(y <= 0):
        raise DomainError('y_sequence needs at least two positive values.')
    values = np.array([f_function(complex(x, yi), k, l, zs, T).F_val.real for yi in y])
    slope, intercept = np.polyfit(y, values, 1)
    residual = float(np.max(np.abs(values - (slope * y + intercept))))
    spread = float(abs(intercept - values[np.argmin(y)]))
    divergent = residual > explicit_defaults.extrapolation_residual * max(1.0, abs(intercept)) \
        or _near_prime_power(x, float(y.max()))
    if divergent:
        logger.warning(f'P({x}) extrapolation is unreliable (residual {residual:.3g}).')
    return PBoundary(x=float(x), value=float(intercept), residual=residual, spread=spread,
                     divergent=bool(divergent), samples=tuple(zip(y.tolist(), values.tolist())))


def p_sieve_target(x, k, l, cfg=None):
    """e^(-x/2) (psi(e^x,k,l) - e^x/phi(k)) from the sieve."""
    limit = int(floor(exp(x)))
    state = run_race(k, [l], limit, cfg=cfg, trace_limit=0, event_buffer=1)
    return exp(-x / 2) * (state.counters(l).psi - exp(x) / state.modulus.phi)


def write_curve(path, xs, values, T, sieved=None, column='x'):
    """Write a sample curve as CSV: x (or u), value, truncation T and optionally the sieved value."""
    with open(path, 'w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh)
        header = [column, 'value', 'T'] + (['sieved'] if sieved is not None else [])
        writer.writerow(header)
        for i, (x, v) in enumerate(zip(xs, values)):
            row = [repr(float(x)), repr(float(v)), repr(float(T))]
            if sieved is not None:
                row.append(repr(float(sieved[i])))
            writer.writerow(row)
