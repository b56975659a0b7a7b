"""
Run manifests for CarpetLab
A manifest plus the pinned generator fully determines a run's artifacts
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

from .config import TOOL_VERSION, Config
from .rng import RNG_ALGORITHM

# Standard approximation notes attached by the pipelines that incur them
NOTE_RESTRICTION = (
    'inner CLE reuses soup loops lying inside the domain loop (restriction property) '
    'instead of an independent CLE sampled in D'
)
NOTE_PRIME_ENDS = 'boundary net uses traced-contour cells; multiply-visited prime ends are not distinguished'
NOTE_FINITE_VOLUME = 'normalizer is the finite-volume median, not the half-plane median'
NOTE_BOX_METRIC = 'd_eps is computed as minimal eps-box count times eps^2 (two-sided constant comparability)'
NOTE_INTENSITY_OVERRIDE = 'soup intensity overridden; differs from (3k-8)(6-k)/(2k)'


def config_hash(config):
    """SHA-256 of the canonical JSON form of a RunConfig"""
    return hashlib.sha256(config.canonical_json().encode('utf-8')).hexdigest()


def _timestamp():
    if Config.SOURCE_DATE_EPOCH:
        moment = datetime.fromtimestamp(int(Config.SOURCE_DATE_EPOCH), tz=timezone.utc)
    else:
        moment = datetime.now(tz=timezone.utc)
    return moment.isoformat()


@dataclass
class RunManifest:
    tool_version: str
    master_seed: int
    config_hash: str
    subcommand: str
    timestamp: str
    approximation_notes: list = field(default_factory=list)
    rng_algorithm: str = RNG_ALGORITHM

    @classmethod
    def build(cls, config, subcommand, notes=None):
        """
        Create the manifest for one run

        Args:
            config (RunConfig): Validated configuration
            subcommand (str): Pipeline name
            notes (list): Approximation notes

        Returns:
            RunManifest: New manifest
        """
        notes = list(notes or [])
        if config.soup.intensity_overridden and NOTE_INTENSITY_OVERRIDE not in notes:
            notes.append(NOTE_INTENSITY_OVERRIDE)
        return cls(
            tool_version=TOOL_VERSION,
            master_seed=int(config.run.seed),
            config_hash=config_hash(config),
            subcommand=subcommand,
            timestamp=_timestamp(),
            approximation_notes=notes,
        )

    def add_note(self, note):
        if note not in self.approximation_notes:
            self.approximation_notes.append(note)

    @property
    def hash(self):
        """Identity of the run: everything except the wall-clock timestamp"""
        body = asdict(self)
        body.pop('timestamp')
        text = json.dumps(body, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(text.encode('utf-8')).hexdigest()[:16]

    def to_dict(self):
        body = asdict(self)
        body['manifest_hash'] = self.hash
        return body

    def save(self, out_dir):
        """Write manifest.json into out_dir and return its path"""
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, 'manifest.json')
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write('\n')
        return path

    @classmethod
    def load(cls, path):
        with open(path, 'r', encoding='utf-8') as f:
            body = json.load(f)
        body.pop('manifest_hash', None)
        return cls(**body)
