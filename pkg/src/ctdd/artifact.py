import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Optional, Sequence

import numpy as np

FLOAT_FORMAT = '%.16e'


def _format(value) -> str:
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % value
    return str(value)


def dump_json(payload) -> str:
    """Stable JSON text: sorted keys, numpy values converted, trailing newline."""
    def default(value):
        if isinstance(value, np.ndarray):
            return value.tolist()
        if isinstance(value, np.generic):
            return value.item()
        raise TypeError(f'{type(value).__name__} is not JSON serializable')

    return json.dumps(payload, sort_keys=True, indent=2, default=default) + '\n'


class Artifact:
    """
    Handle of a file written by the workbench.

    Args:
        file_path (str): Location of the file.
        kind (str): ``csv`` or ``json``.
        name (str, optional): Display name, the base name by default.
    """

    CSV = 'csv'
    JSON = 'json'

    def __init__(self, file_path: str, kind: str = CSV, name: Optional[str] = None):
        self.path = file_path
        self.kind = kind
        self.name = name or os.path.basename(file_path)
        self.size = os.path.getsize(self.path)
        with open(self.path, 'rb') as handle:
            self.sha256 = hashlib.sha256(handle.read()).hexdigest()

    def as_dict(self):
        return {
            'name': self.name,
            'kind': self.kind,
            'size': self.size,
            'sha256': self.sha256,
        }


def write_csv(file_path: str, header: Sequence[str], rows: Iterable[Sequence]) -> Artifact:
    """
    Write a comma separated table with a header row, LF line endings and floats as ``%.16e``.
    """
    with open(file_path, 'w', encoding='utf-8', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(value) for value in row])
    return Artifact(file_path, Artifact.CSV)


def write_json(file_path: str, payload) -> Artifact:
    with open(file_path, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(dump_json(payload))
    return Artifact(file_path, Artifact.JSON)


def read_csv(file_path: str) -> tuple:
    """
    Read a numeric table written by :func:`write_csv`.

    Returns:
        tuple: Header list and an array of shape ``(rows, columns)``.
    """
    with open(file_path, encoding='utf-8', newline='') as handle:
        reader = csv.reader(handle)
        header = next(reader)
        rows = [[float(value) for value in row] for row in reader if row]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


@dataclass
class ReportBundle:
    """
    Outputs of one workbench run.

    Args:
        config_hash (str): Digest of the configuration the run used.
        seed (int): Seed of the randomized suites, recorded for reruns.
        timestamp (str): UTC start time, only ever written to ``metadata.json``.
        tables (dict): Named result tables (gap sweep, certificates, identification).
        artifacts (list): Files written so far.
    """
    config_hash: str
    seed: int = 0
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec='seconds'))
    tables: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)

    def add(self, artifact: Artifact) -> Artifact:
        self.artifacts = [a for a in self.artifacts if a.name != artifact.name] + [artifact]
        return artifact

    def metadata(self) -> dict:
        return {
            'timestamp': self.timestamp,
            'config_hash': self.config_hash,
            'seed': self.seed,
            'artifacts': [artifact.as_dict() for artifact in self.artifacts],
            'tables': sorted(self.tables),
        }

    def write_metadata(self, out_dir: str) -> Artifact:
        return write_json(os.path.join(out_dir, 'metadata.json'), self.metadata())
