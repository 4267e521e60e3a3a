'''Test barrier specifications and exclusion verdicts

Copyright primerace developers, 2026'''

from math import cos, log, sin, sqrt
from pathlib import Path

import numpy as np
import pytest
from pytest import raises

from primerace import barrier
from primerace.errors import BarrierSpecError, DomainError, InvalidResidueError

testsPath = Path(__file__).parent
test_data = testsPath / 'test_data'

EXCLUDED = (1, 4, 2, 3)


def test_builtin_k5():
    spec = barrier.builtin_k5()
    assert spec.modulus.k == 5
    assert spec.size == 1
    assert spec.dominant == (0.75, 1e6)
    weights, rhos, mults = spec.flat()
    assert weights.shape == (1, 4)
    assert np.allclose(weights[0], [1, -1j, 1j, -1])
    assert rhos.tolist() == [complex(0.75, 1e6)]
    assert mults.tolist() == [1.0]


def test_load_and_save_barrier(tmp_path):
    src = test_data / 'barrier_k5.txt'
    spec = barrier.load_barrier(src)
    assert spec == barrier.builtin_k5()

    out = tmp_path / 'barrier.txt'
    barrier.save_barrier(spec, out)
    assert out.read_text() == src.read_text()


def test_barrier_file_errors(tmp_path):
    with raises(BarrierSpecError, match='Need 1/2 <= beta1 < beta2'):
        barrier.load_barrier(test_data / 'barrier_bad_order.txt')

    no_magic = tmp_path / 'no_magic.txt'
    no_magic.write_text('#modulus 5\n')
    with raises(BarrierSpecError, match="first line must be '#barrier'"):
        barrier.load_barrier(no_magic)

    no_modulus = tmp_path / 'no_modulus.txt'
    no_modulus.write_text('#barrier\n#residues 1,2\n#beta1 0.5\n#beta2 0.75\n#beta3 0.75\n')
    with raises(BarrierSpecError, match='missing header #modulus'):
        barrier.load_barrier(no_modulus)


def test_barrier_spec_validation():
    zero = ((complex(0.75, 10.0), 1),)
    with raises(BarrierSpecError, match='principal character'):
        barrier.BarrierSpec(5, (1, 2), zeros={'5:0': zero})
    with raises(BarrierSpecError, match='Im rho must be positive'):
        barrier.BarrierSpec(5, (1, 2), zeros={'5:1': ((complex(0.75, -1.0), 1),)})
    with raises(BarrierSpecError, match=r'outside \[beta2, beta3\]'):
        barrier.BarrierSpec(5, (1, 2), zeros={'5:1': ((complex(0.6, 10.0), 1),)})
    with raises(BarrierSpecError, match='multiplicity must be a positive integer'):
        barrier.BarrierSpec(5, (1, 2), zeros={'5:1': ((complex(0.75, 10.0), 0),)})
    with raises(BarrierSpecError, match='at least two residues'):
        barrier.BarrierSpec(5, (1,), zeros={'5:1': zero})
    with raises(BarrierSpecError, match='5 is not a reduced residue'):
        barrier.BarrierSpec(5, (1, 5), zeros={'5:1': zero})
    with raises(BarrierSpecError, match='does not name a character'):
        barrier.BarrierSpec(5, (1, 2), zeros={'5:7': zero})


def test_dominant_deltas():
    spec = barrier.builtin_k5()
    x = 1e20
    deltas = barrier.dominant_deltas(x, spec)
    assert set(deltas) == {(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)}
    theta = log(x) * 1e6
    assert deltas[(1, 4)].normalised_main == pytest.approx(-sin(theta), abs=1e-9)
    assert deltas[(2, 3)].normalised_main == pytest.approx(cos(theta), abs=1e-9)
    assert deltas[(2, 4)].normalised_main == pytest.approx(0.5 * cos(theta) - 0.5 * sin(theta), abs=1e-9)
    assert deltas[(1, 4)].normalised_error > 0
    scale = x ** 0.75 / (1e6 * log(x))
    assert deltas[(1, 4)].main == pytest.approx(deltas[(1, 4)].normalised_main * scale)

    empty = barrier.dominant_deltas(x, barrier.BarrierSpec(5, (1, 2, 3, 4)))
    assert all(d == (0.0, 0.0, 0.0, 0.0) for d in empty.values())

    with raises(DomainError, match='needs x >= 10'):
        barrier.dominant_deltas(5.0, spec)


def test_k5_phase_inequality():
    check = barrier.k5_phase_inequality()
    assert check.certified
    assert check.bound == -sqrt(0.1)
    assert check.grid_max <= check.bound + 1e-12
    assert check.grid_max >= check.bound - check.slack

    coarse = barrier.k5_phase_inequality(1e-3)
    assert coarse.certified

    with raises(DomainError, match='Grid step must lie in'):
        barrier.k5_phase_inequality(0.01)


def test_verify_exclusion_passes():
    verdict = barrier.verify_exclusion(barrier.builtin_k5(), EXCLUDED)
    assert verdict.passed
    assert verdict.status is barrier.VerdictStatus.passed
    assert verdict.margin >= sqrt(0.1) - 1e-9
    assert np.isfinite(verdict.x_threshold)
    assert verdict.x_threshold > 1e30
    assert len(verdict.decile_margins) == 10

    out = verdict.to_dict()
    assert out['excluded_ordering'] == list(EXCLUDED)
    assert out['status'] == 'passed'
    assert out['x_range_tested']['samples'] == 1000
    assert out['envelope'] == {'C': 10.0, 'C_prime': 10.0}


def test_verify_exclusion_fails_for_realisable_ordering():
    verdict = barrier.verify_exclusion(barrier.builtin_k5(), (1, 2, 3, 4))
    assert not verdict.passed
    assert verdict.status is barrier.VerdictStatus.failed
    assert verdict.margin <= 0


def test_verify_exclusion_edge_cases():
    empty = barrier.BarrierSpec(5, (1, 2, 3, 4))
    verdict = barrier.verify_exclusion(empty, EXCLUDED)
    assert verdict.status is barrier.VerdictStatus.inconclusive
    assert 'lists no zeros' in verdict.reason

    huge = barrier.verify_exclusion(barrier.builtin_k5(), EXCLUDED, C=1e6)
    assert huge.status is barrier.VerdictStatus.inconclusive

    with raises(InvalidResidueError, match='is not a permutation'):
        barrier.verify_exclusion(barrier.builtin_k5(), (1, 2, 3))
    with raises(DomainError, match='at least 1000 samples'):
        barrier.verify_exclusion(barrier.builtin_k5(), EXCLUDED, x_samples=np.logspace(10, 20, 50))


def test_exclusion_profile():
    L, violation, envelope = barrier.exclusion_profile(barrier.builtin_k5(), EXCLUDED)
    assert L.size == violation.size == envelope.size == 1000
    assert violation.min() >= sqrt(0.1) - 1e-9
    assert np.all(envelope > 0)


def test_orderings_census():
    census = barrier.orderings_census(barrier.builtin_k5())
    assert census.samples == 1000
    assert sum(census.counts.values()) == 1000
    assert EXCLUDED not in census.counts
    assert (1, 2, 3, 4) in census.counts
