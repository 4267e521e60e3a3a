'''Translate the JSON package defaults to python usable records.

Every numerical default used by the library lives in standard/defaults.json.
Each section is exposed here as a read-only NamedTuple.

Copyright primerace developers, 2026
'''

import sys
import json
from typing import NamedTuple

if sys.version_info.minor >= 10:
    from importlib.resources import files
else:
    # See https://setuptools.pypa.io/en/latest/userguide/datafiles.html#accessing-data-files-at-runtime
    from importlib_resources import files

data_text = files('primerace.standard').joinpath('defaults.json').read_text(encoding='utf-8')
json_def = json.loads(data_text)


class SieveDefaults(NamedTuple):
    segment_size: int
    min_segment_size: int
    wheel: str
    progress_every: int


class RaceDefaults(NamedTuple):
    event_buffer: int
    trace_limit: int
    trailing_window: float
    history_ratio: float
    prime_power_constant: float
    checkpoint_every: int


class ZeroDefaults(NamedTuple):
    tolerance_factor: float
    max_enumeration: int
    block_size: int


class ExplicitDefaults(NamedTuple):
    f_mode: str
    quad_rtol: float
    quad_limit: int
    merge_tolerance: float
    extrapolation_exponents: tuple
    extrapolation_residual: float
    ingham_slack: float


class DensityDefaults(NamedTuple):
    min_samples: int
    block_size: int
    fejer: bool
    convention: str


class BarrierDefaults(NamedTuple):
    C: float
    C_prime: float
    x_min: float
    x_max: float
    n_samples: int
    phase_step: float
    tie_tolerance: float


def translate_section(record, obj, name):
    """Build a typed record from one JSON section, checking the keys match exactly."""
    missing = set(record._fields) - set(obj)
    unknown = set(obj) - set(record._fields)
    if missing or unknown:
        raise ValueError(
            f"Section '{name}' of defaults.json does not match {record.__name__}:"
            f" missing {sorted(missing)}, unknown {sorted(unknown)}.")
    values = {}
    for field in record._fields:
        value = obj[field]
        values[field] = tuple(value) if isinstance(value, list) else value
    return record(**values)


sieve_defaults = translate_section(SieveDefaults, json_def['sieve'], 'sieve')
race_defaults = translate_section(RaceDefaults, json_def['race'], 'race')
zero_defaults = translate_section(ZeroDefaults, json_def['zeros'], 'zeros')
explicit_defaults = translate_section(ExplicitDefaults, json_def['explicit'], 'explicit')
density_defaults = translate_section(DensityDefaults, json_def['density'], 'density')
barrier_defaults = translate_section(BarrierDefaults, json_def['barrier'], 'barrier')
