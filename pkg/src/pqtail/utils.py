"""
Shared utils: log levels and report writers.
"""


from __future__ import annotations

import csv
import sys
import logging
import json
import os

from typing import TYPE_CHECKING
from enum import Enum
from pathlib import Path


if TYPE_CHECKING:
    from typing import Iterable, Sequence


log = logging.getLogger(__name__)


class LogLevel(Enum):
    info = logging.INFO
    error = logging.ERROR
    warn = logging.WARNING
    debug = logging.DEBUG

    def __str__(self):
        return self.name

    @classmethod
    def from_string(cls, s: str) -> LogLevel:
        """
        Convert a string to the enum value.

        Args:
            s (str): key to convert to the enum value.

        Returns:
            LogLevel: Log level object.
        """
        try:
            return cls[s.lower()]
        except KeyError:
            log.error('Must specify an accepted log level')
            sys.exit(1)


def ensure_dir(path: str | Path) -> Path:
    """
    Expand environment variables in a directory path and create it if it does not exist.

    Args:
        path (str | Path): the directory.

    Returns:
        Path: the expanded directory path.
    """
    _path = Path(os.path.expandvars(str(path)))
    _path.mkdir(parents=True, exist_ok=True)

    return _path


def write_json(data: dict, path: str | Path) -> None:
    """
    Write a dictionary to a JSON file. Keys keep insertion order so equal inputs produce equal bytes.

    Args:
        data (dict): the dictionary to write.
        path (str | Path): the path to write the file to.
    """
    path_e = os.path.expandvars(str(path))

    with open(path_e, 'w', encoding='utf-8') as f:
        log.debug(f'Writing JSON to file: {path_e}')
        json.dump(data, f, indent=2)
        f.write('\n')


def read_json(path: str | Path) -> dict | None:
    """
    Read a JSON file and return the data as a dictionary.

    Args:
        path (str | Path): the path to the JSON file.

    Returns:
        dict | None: the data from the JSON file, or None if the file does not exist.
    """
    try:
        if Path(path).exists():
            with open(path, 'r', encoding='utf-8') as f:
                return json.load(f)
        return None
    except (FileNotFoundError, PermissionError) as msg:
        log.error(f'Failed to read JSON file, received: {msg}')
        return None


def write_csv(header: Sequence[str], rows: Iterable[Sequence], path: str | Path) -> int:
    """
    Write rows to a CSV file with a header line. Floats are written with repr() so values round-trip exactly.

    Args:
        header (Sequence[str]): column names.
        rows (Iterable[Sequence]): rows to write.
        path (str | Path): the path to write the file to.

    Returns:
        int: the number of data rows written.
    """
    path_e = os.path.expandvars(str(path))
    count = 0

    with open(path_e, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)

        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
            count += 1

    log.debug(f'Wrote {count} rows to {path_e}')

    return count
