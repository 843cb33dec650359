import hashlib
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import *

__all__ = [
    'RunManifest',
    'file_sha256',
    'write_manifest',
    'read_manifest',
]

ARTIFACT_VERSION = '0.1.0'


@dataclass
class RunManifest:
    """Inputs and output checksums of one run; contains no wall-clock values"""
    command: str
    config_hash: str
    seed: int
    version: str = ARTIFACT_VERSION
    inputs: Dict[str, str] = field(default_factory=dict)
    files: Dict[str, str] = field(default_factory=dict)


def file_sha256(path: Union[str, Path], chunk_size: int = 1 << 20) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as fp:
        for chunk in iter(lambda: fp.read(chunk_size), b''):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(output_dir: Union[str, Path], manifest: RunManifest, files: Iterable[Union[str, Path]] = ()) -> Path:
    """Checksum `files` (relative to `output_dir`) into the manifest and write manifest.json.

    Returns:
        Path: the manifest path
    """
    output_dir = Path(output_dir)
    for name in files:
        path = output_dir / name
        manifest.files[Path(name).as_posix()] = file_sha256(path)
    target = output_dir / 'manifest.json'
    with open(target, 'w', encoding='utf-8', newline='\n') as fp:
        json.dump(asdict(manifest), fp, sort_keys=True, indent=2)
        fp.write('\n')
    return target


def read_manifest(path: Union[str, Path]) -> RunManifest:
    with open(path, 'r', encoding='utf-8') as fp:
        return RunManifest(**json.load(fp))
