"""Multiplicative group modulo k and its Dirichlet characters.

Character values are held as exact fractions of a full turn. A character
with index vector (a_1, ..., a_r) sends the residue g_1^e_1 ... g_r^e_r to
the turn sum(a_i * e_i / n_i) mod 1, where g_i generates the cyclic factor
of order n_i.

Copyright primerace developers, 2026
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product
from math import gcd, lcm

import numpy as np

from primerace.errors import InvalidModulusError, InvalidResidueError

# Quarter turns are converted exactly so real characters stay real.
_QUARTER_TURNS = np.array([1, 1j, -1, -1j], dtype=complex)


def factorise(k):
    """Prime factorisation of k by trial division.

    :return: list of (p, a) pairs with ascending p
    """
    factors = []
    p = 2
    while p * p <= k:
        if k % p == 0:
            a = 0
            while k % p == 0:
                k //= p
                a += 1
            factors.append((p, a))
        p += 1
    if k > 1:
        factors.append((k, 1))
    return factors


def _multiplicative_order(g, q):
    order, value = 1, g % q
    while value != 1:
        value = (value * g) % q
        order += 1
    return order


def _primitive_root(p, a):
    """Smallest primitive root modulo the odd prime power p**a."""
    q = p ** a
    phi = q - q // p
    prime_divisors = [r for r, _ in factorise(phi)]
    for g in range(2, q):
        if g % p == 0:
            continue
        if all(pow(g, phi // r, q) != 1 for r in prime_divisors):
            return g
    raise InvalidModulusError(f'No primitive root modulo {q}.')


def _local_generators(p, a):
    """Generators of (Z/p^a)* as (residue mod p^a, order) pairs."""
    q = p ** a
    if p != 2:
        return [(_primitive_root(p, a), q - q // p)]
    if a == 1:
        return []
    if a == 2:
        return [(3, 2)]
    return [(q - 1, 2), (3, 2 ** (a - 2))]


@dataclass(frozen=True)
class Modulus:
    """Reduced residue group modulo k with a canonical cyclic decomposition.

    ``residues`` lists the reduced residues in ascending order and
    ``exponents`` holds, row by row, the exponent vector of each residue with
    respect to ``generators``.
    """
    k: int
    phi: int
    generators: tuple
    residues: tuple = field(repr=False)
    exponents: np.ndarray = field(repr=False, compare=False, hash=False)

    @cached_property
    def slot(self):
        """Array of length k mapping a residue to its position in ``residues`` (-1 if not reduced)."""
        slot = np.full(self.k, -1, dtype=np.int64)
        slot[np.array(self.residues)] = np.arange(self.phi)
        return slot

    @property
    def orders(self):
        return tuple(order for _, order in self.generators)

    @property
    def exponent(self):
        """Exponent of the group, the common denominator of all character turns."""
        return lcm(*self.orders) if self.generators else 1

    def is_reduced(self, l):
        return 0 < l < self.k and gcd(l, self.k) == 1

    def position(self, l):
        """Position of the reduced residue l in ``residues``."""
        if not self.is_reduced(l):
            raise InvalidResidueError(f'{l} is not a reduced residue modulo {self.k}.')
        return int(self.slot[l])

    def log(self, l):
        """Exponent vector of the reduced residue l."""
        return tuple(int(e) for e in self.exponents[self.position(l)])

    def validate_residues(self, residues):
        """Check residues are reduced and pairwise distinct, returning them as a tuple of ints."""
        residues = tuple(int(l) for l in residues)
        for l in residues:
            if not self.is_reduced(l):
                raise InvalidResidueError(f'{l} is not a reduced residue modulo {self.k}.')
        if len(set(residues)) != len(residues):
            raise InvalidResidueError(f'Residues {residues} are not pairwise distinct.')
        return residues


def build_modulus(k):
    """Decompose (Z/k)* into cyclic factors via CRT over prime powers.

    Odd prime powers use their smallest primitive root, 4 uses 3 and 2^a
    (a >= 3) uses the pair (2^a - 1, 3). Factors are ordered by ascending
    prime power and each generator is lifted to be 1 modulo the other prime
    powers.

    :param k: Modulus, at least 3
    :type k: int
    :return: Modulus
    """
    if int(k) != k or k < 3:
        raise InvalidModulusError(f'Modulus must be an integer >= 3, got {k}.')
    k = int(k)

    generators = []
    for p, a in sorted(factorise(k), key=lambda pa: pa[0] ** pa[1]):
        q = p ** a
        rest = k // q
        # Lift g mod q to g mod k with g = 1 mod k/q
        inv = pow(rest, -1, q) if q > 1 else 0
        for g, order in _local_generators(p, a):
            lifted = (1 + (g - 1) * rest * inv) % k
            generators.append((lifted, order))

    orders = [order for _, order in generators]
    phi = int(np.prod(orders)) if orders else 1

    by_residue = {}
    for vector in product(*(range(n) for n in orders)):
        l = 1
        for (g, _), e in zip(generators, vector):
            l = (l * pow(g, e, k)) % k
        by_residue[l] = vector

    residues = tuple(sorted(by_residue))
    if len(residues) != phi or any(gcd(l, k) != 1 for l in residues):
        raise InvalidModulusError(f'Generator decomposition failed for k={k}.')
    exponents = np.array([by_residue[l] for l in residues], dtype=np.int64).reshape(phi, len(generators))

    return Modulus(k=k, phi=phi, generators=tuple(generators), residues=residues, exponents=exponents)


def turns_to_complex(numerators, denominator):
    """Convert turns numerators/denominator to complex roots of unity.

    Multiples of a quarter turn are returned exactly.
    """
    numerators = np.asarray(numerators, dtype=np.int64) % denominator
    values = np.exp(2j * np.pi * numerators / denominator)
    quarter = (4 * numerators) % denominator == 0
    values[quarter] = _QUARTER_TURNS[((4 * numerators[quarter]) // denominator) % 4]
    return values


@dataclass(frozen=True)
class Character:
    """A Dirichlet character modulo k.

    ``numerators`` holds, for each residue of ``modulus.residues``, the
    numerator of its value as a turn over the common ``denominator``.
    """
    modulus: Modulus
    index: tuple
    numerators: np.ndarray = field(repr=False, compare=False, hash=False)
    is_principal: bool = False
    is_real: bool = False

    @property
    def denominator(self):
        return self.modulus.exponent

    @property
    def label(self):
        return f'{self.modulus.k}:' + '.'.join(str(a) for a in self.index)

    @property
    def values(self):
        """Map from reduced residue to its value as an exact turn."""
        return {l: Fraction(int(num), self.denominator)
                for l, num in zip(self.modulus.residues, self.numerators)}

    def turn(self, l):
        """Exact value at the reduced residue l as a fraction of a full turn in [0, 1)."""
        return Fraction(int(self.numerators[self.modulus.position(l)]), self.denominator)

    def __call__(self, n):
        """Complex value at the integer n (zero when gcd(n, k) > 1)."""
        pos = self.modulus.slot[n % self.modulus.k]
        if pos < 0:
            return 0j
        return complex(turns_to_complex([self.numerators[pos]], self.denominator)[0])

    @cached_property
    def value_array(self):
        """Complex values aligned with ``modulus.residues``."""
        return turns_to_complex(self.numerators, self.denominator)

    @cached_property
    def lookup(self):
        """Complex values for every n mod k, zero at non-reduced residues."""
        table = np.zeros(self.modulus.k, dtype=complex)
        table[np.array(self.modulus.residues)] = self.value_array
        return table

    @cached_property
    def conductor(self):
        """Smallest d dividing k such that the character is trivial on residues = 1 mod d."""
        k = self.modulus.k
        for d in range(1, k + 1):
            if k % d:
                continue
            if all(num == 0 for l, num in zip(self.modulus.residues, self.numerators) if l % d == 1 % d):
                return d
        return k

    @property
    def is_primitive(self):
        return self.conductor == self.modulus.k


def _character(m, index):
    scale = np.array([m.exponent // n for n in m.orders], dtype=np.int64)
    numerators = (m.exponents @ (np.array(index, dtype=np.int64) * scale)) % m.exponent
    is_principal = not numerators.any()
    is_real = bool(np.all((2 * numerators) % m.exponent == 0))
    return Character(
        modulus=m,
        index=tuple(int(a) for a in index),
        numerators=numerators,
        is_principal=is_principal,
        is_real=is_real)


def characters(m):
    """All phi(k) characters, principal first, ordered lexicographically by index vector.

    :param m: Modulus
    :type m: Modulus
    :return: list of Character
    """
    return [_character(m, index) for index in product(*(range(n) for n in m.orders))]


def conjugate(chi):
    """The complex conjugate character (negated index vector)."""
    m = chi.modulus
    return _character(m, tuple((-a) % n for a, n in zip(chi.index, m.orders)))


def character_by_label(m, label):
    """Look up the character with a label such as '5:1' or '8:1.0'."""
    try:
        k_text, index_text = label.split(':')
        index = tuple(int(a) for a in index_text.split('.'))
    except ValueError as exc:
        raise InvalidResidueError(f"Malformed character label '{label}'.") from exc
    if int(k_text) != m.k or len(index) != len(m.orders) \
            or any(not 0 <= a < n for a, n in zip(index, m.orders)):
        raise InvalidResidueError(f"Label '{label}' does not name a character modulo {m.k}.")
    return _character(m, index)


def character_table(m):
    """Complex matrix of character values, one row per character of ``characters(m)``."""
    return np.array([chi.value_array for chi in characters(m)])


@dataclass(frozen=True)
class SquareRootCount:
    """N_k(l), the number of reduced u modulo k with u^2 = l."""
    modulus: Modulus
    counts: dict

    def __getitem__(self, l):
        return self.counts[l]


def square_root_counts(m):
    """Count square roots of every reduced residue.

    :param m: Modulus
    :type m: Modulus
    :return: SquareRootCount
    """
    counts = dict.fromkeys(m.residues, 0)
    for u in m.residues:
        counts[(u * u) % m.k] += 1
    return SquareRootCount(modulus=m, counts=counts)


def quadratic_residues(m):
    """Reduced residues with N_k(l) > 0, ascending."""
    counts = square_root_counts(m).counts
    return tuple(l for l in m.residues if counts[l] > 0)


def character_orthogonality_defect(m):
    """Largest deviation of the character Gram matrix from phi(k) times the identity."""
    table = character_table(m)
    gram = table @ table.conj().T
    return float(np.max(np.abs(gram - m.phi * np.eye(m.phi))))
