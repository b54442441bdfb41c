"""comma separated artifact files with a reproducibility header

Every file starts with `#` lines naming the version, command, config hash and
seed. No timestamps, so identical inputs give byte identical files.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from superabsorber import constants

from .quantum.core import DensityMatrix
from .quantum.wigner import WignerGrid

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '.17g'


def _canonical(value: Any) -> Any:
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f'{value!r} is not serialisable')


def config_hash(settings: Mapping[str, Any]) -> str:
    """sha256 of the canonical json of the resolved settings"""
    canonical = json.dumps(settings, sort_keys=True, separators=(',', ':'), default=_canonical)
    return hashlib.sha256(canonical.encode()).hexdigest()


def format_value(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), FLOAT_FORMAT)
    return str(value)


def format_row(values: Iterable[Any]) -> str:
    return ','.join(format_value(v) for v in values)


@dataclass
class OutputWriter:
    out_dir: Path
    command: str
    settings: Mapping[str, Any]
    seed: Optional[int] = None
    written: List[Path] = field(default_factory=list)

    @property
    def hash(self) -> str:
        return config_hash(self.settings)

    def header(self, columns: Sequence[str] = (), **extra: Any) -> List[str]:
        lines = [
            f'# superabsorber {constants.SUPERABSORBER_VERSION.value}',
            f'# command = {self.command}',
            f'# config_sha256 = {self.hash}',
            f'# seed = {format_value(self.seed)}',
        ]
        lines += [f'# {k} = {format_value(v)}' for k, v in extra.items()]
        if columns:
            lines.append(f'# columns = {",".join(columns)}')
        return lines

    def _write(self, name: str, lines: Sequence[str]) -> Path:
        path = self.out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text('\n'.join(lines) + '\n')
        self.written.append(path)
        logger.info(f'wrote {path}')
        return path

    def write_table(
        self, name: str, columns: Sequence[str], rows: Iterable[Sequence[Any]], **extra: Any
    ) -> Path:
        lines = self.header(columns, **extra)
        lines.append(','.join(columns))
        lines += [format_row(row) for row in rows]
        return self._write(name, lines)

    def write_columns(self, name: str, columns: Mapping[str, Sequence[Any]], **extra: Any) -> Path:
        """equal length columns written side by side"""
        names = list(columns)
        return self.write_table(name, names, zip(*(columns[n] for n in names)), **extra)

    def write_density_matrix(self, name: str, rho: DensityMatrix, **extra: Any) -> Path:
        lines = self.header(**extra)
        lines.append(f'# dim = {rho.dim}')
        lines.append('real')
        lines += [format_row(row) for row in np.real(rho.elements)]
        lines.append('imag')
        lines += [format_row(row) for row in np.imag(rho.elements)]
        return self._write(name, lines)

    def write_wigner(self, name: str, grid: WignerGrid, **extra: Any) -> Path:
        """x axis, p axis, then W with rows indexed by x"""
        lines = self.header(**extra)
        lines.append('x,' + format_row(grid.x_axis))
        lines.append('p,' + format_row(grid.p_axis))
        lines += [format_row(row) for row in grid.values]
        return self._write(name, lines)


def read_density_matrix(path: Path) -> DensityMatrix:
    """parse a file written by `OutputWriter.write_density_matrix`"""
    lines = [l for l in Path(path).read_text().splitlines() if l and not l.startswith('#')]
    i_imag = lines.index('imag')
    real = np.array([[float(v) for v in l.split(',')] for l in lines[1:i_imag]])
    imag = np.array([[float(v) for v in l.split(',')] for l in lines[i_imag + 1 :]])
    return DensityMatrix(real + 1j * imag)


def read_table(path: Path) -> Dict[str, List[str]]:
    """columns of a file written by `OutputWriter.write_table`, as strings"""
    lines = [l for l in Path(path).read_text().splitlines() if l and not l.startswith('#')]
    names = lines[0].split(',')
    rows = [l.split(',') for l in lines[1:]]
    return {n: [r[i] for r in rows] for i, n in enumerate(names)}
