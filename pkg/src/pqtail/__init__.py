"""
Make the environment variables' values that we care about, portable.
"""


from __future__ import annotations

from typing import TYPE_CHECKING
from importlib import metadata as meta

import os
import logging


if TYPE_CHECKING:
    from typing import Dict


log = logging.getLogger(__name__)


env: Dict[str, str] = {
    # Environment variables with default values to configure pqtail.
    'PQTAIL_CONFIG_PATH': os.getenv('PQTAIL_CONFIG_PATH', 'pqtail.yaml'),
    'PQTAIL_OUT_DIR': os.getenv('PQTAIL_OUT_DIR', 'pqtail-out'),
    'PQTAIL_THREADS': os.getenv('PQTAIL_THREADS', '1'),
    'PQTAIL_LOG_LEVEL': os.getenv('PQTAIL_LOG_LEVEL', 'info'),
    'PQTAIL_LOG_FILE': os.getenv('PQTAIL_LOG_FILE', 'pqtail.log'),
}

try:
    version: str = meta.version('pqtail')
except meta.PackageNotFoundError:
    # Running from a source checkout without an install.
    version = '0.0.0'
