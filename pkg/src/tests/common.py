"""
Helpers shared by the test suites: run the CLI as a subprocess and load or write configuration fixtures.
"""

from __future__ import annotations

from typing import Dict, List
from importlib import resources
from pathlib import Path
from subprocess import Popen, PIPE
from dataclasses import dataclass

import os
import sys
import yaml
import logging


log = logging.getLogger(__name__)


SRC = Path(__file__).resolve().parents[1]


@dataclass
class CommandOutput:
    """
    Dataclass to store the output, error, and return code of a command.
    """
    stdout: str
    stderr: str
    returnCode: int


def run(command: List[str], timeout: float = 600, env: Dict[str, str] | None = None) -> CommandOutput:
    """
    Run a command and return the output, error, and return code.

    Args:
        command (List[str]): the command and its arguments.
        timeout (float): timeout in seconds. Defaults to 600.
        env (Dict[str, str] | None): the environment of the command. Defaults to the current one.

    Returns:
        CommandOutput: output, error, and return code.
    """
    with Popen(command, stdin=PIPE, stdout=PIPE, stderr=PIPE, text=True, encoding='utf-8', env=env) as p:
        stdout, stderr = p.communicate(timeout=timeout) # blocking
        ret = CommandOutput(stdout.rstrip(), stderr.rstrip(), p.returncode)

    if ret.returnCode != 0:
        log.error(f'Command failed with return code {ret.returnCode}. {ret.stderr}')

    return ret


def pqtail(*args: str, timeout: float = 600) -> CommandOutput:
    """
    Run the pqtail CLI with the current interpreter, importing pqtail from this source tree.
    """
    environment = dict(os.environ)
    environment['PYTHONPATH'] = os.pathsep.join(filter(None, [str(SRC), environment.get('PYTHONPATH')]))

    return run([sys.executable, '-m', 'pqtail', *args], timeout=timeout, env=environment)


def fixture_path(file: str, dtype: str = 'config') -> Path:
    """
    Path of a packaged YAML fixture.

    Args:
        file (str): the fixture name without extension.
        dtype (str): the fixture directory under tests/data. Defaults to 'config'.

    Returns:
        Path: the fixture's path on disk.
    """
    return Path(str(resources.files(f'tests.data.{dtype}') / f'{file}.yaml'))


def load_data(file: str, dtype: str = 'config') -> dict:
    """
    Load a YAML fixture into a dictionary.

    Args:
        file (str): the fixture name without extension.
        dtype (str): the fixture directory under tests/data. Defaults to 'config'.

    Returns:
        dict: The dictionary representation of the YAML file.
    """
    return yaml.safe_load(fixture_path(file, dtype).read_text(encoding='utf-8'))


def write_config(directory: Path, data: dict, name: str = 'pqtail.yaml') -> Path:
    """
    Write a config dictionary as YAML and return its path.
    """
    path = directory / name
    path.write_text(yaml.safe_dump(data, sort_keys=False), encoding='utf-8')

    return path
