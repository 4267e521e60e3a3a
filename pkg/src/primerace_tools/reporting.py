"""Output bookkeeping for primerace commands: run manifests and partial-output cleanup."""

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from primerace import __version__
from primerace_tools.constants import UNHASHED_ARGS

logger = logging.getLogger(__name__)


def file_digest(path):
    """sha256 hex digest of a file."""
    sha = hashlib.sha256()
    with open(path, 'rb') as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b''):
            sha.update(chunk)
    return sha.hexdigest()


def config_hash(args):
    """sha256 of the arguments that determine a command's results."""
    values = {key: str(value) for key, value in sorted(vars(args).items()) if key not in UNHASHED_ARGS}
    return hashlib.sha256(json.dumps(values, sort_keys=True).encode('utf-8')).hexdigest()


def _now():
    return datetime.now(timezone.utc).isoformat(timespec='seconds')


@dataclass
class RunManifest:
    command: str
    argv: list
    config_hash: str
    version: str = __version__
    started: str = field(default_factory=_now)
    finished: str = None
    inputs: dict = field(default_factory=dict)
    seed: int = None
    outputs: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


class OutputSet:
    """Files written by one command.

    Every path handed out by ``path`` is removed again by ``discard`` so a
    failed run leaves no partial results behind.
    """

    def __init__(self, directory, command, argv, args):
        self.directory = Path(directory)
        self.manifest = RunManifest(command=command, argv=list(argv), config_hash=config_hash(args),
                                    seed=getattr(args, 'seed', None))
        self._paths = []

    def path(self, name):
        self.directory.mkdir(parents=True, exist_ok=True)
        p = self.directory / name
        self._paths.append(p)
        self.manifest.outputs.append(name)
        return p

    def add_input(self, path):
        self.manifest.inputs[str(path)] = file_digest(path)

    def write_json(self, name, obj):
        p = self.path(name)
        with open(p, 'w', encoding='utf-8') as fh:
            json.dump(obj, fh, indent=2)
            fh.write('\n')
        return p

    def finish(self):
        """Write <command>_manifest.json next to the outputs."""
        self.manifest.finished = _now()
        name = f'{self.manifest.command}_manifest.json'
        self.write_json(name, self.manifest.to_dict())

    def discard(self):
        for p in self._paths:
            for candidate in (p, p.with_name(p.name + '.tmp')):
                if candidate.exists():
                    logger.info(f'Removing partial output {candidate}.')
                    candidate.unlink()
        self._paths = []
