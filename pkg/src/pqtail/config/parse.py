"""
Parse an experiment configuration file, or create a default one.
"""


from __future__ import annotations

import yaml
import logging
import json

from pathlib import Path
from importlib import resources
from yamale import make_schema, make_data, validate as yamale_validate
from pqtail.config import build_config_from_version
from pqtail.errors import ConfigError


log = logging.getLogger(__name__)


__all__ = [
    'configParse',
    'makeDefaultConfig',
    'validateConfig'
]


def configParse(configPath: str | Path):
    """
    Parse a config file and return it as a Config-object. If the file does not exist, create a default one.

    Args:
        configPath (str | Path): path to the config file.

    Returns:
        Config: The parsed config file.

    Raises:
        ConfigError: If the file does not parse, does not validate against its schema, or describes an invalid
            experiment.
    """

    # Drop a default config for parsing if one was not provided by the user.
    if not Path(configPath).exists():
        makeDefaultConfig(configPath)

    with open(configPath, 'r', encoding='utf-8') as f:
        try:
            _loaded_config = yaml.safe_load(
                f.read().rstrip()
            )
        except yaml.YAMLError as e:
            raise ConfigError(f'Error parsing config file: {e}') from e

    if not isinstance(_loaded_config, dict) or 'version' not in _loaded_config:
        raise ConfigError('Config file is missing a version field')

    validateConfig(configPath, version=_loaded_config['version'])

    try:
        config_class = build_config_from_version(_loaded_config['version'])
    except ValueError as e:
        raise ConfigError(str(e)) from e

    # Parse the config into a Config object, now.
    _config = config_class.from_dict(_loaded_config)

    log.debug(f'Successfully parsed config version {_config.version}: {json.dumps(_loaded_config)}')

    return _config


def validateConfig(configPath: str | Path, version: str = 'v1alpha1', strict: bool = True) -> bool:
    """
    Validate users' config files against our schema.

    Args:
        configPath (str | Path): path to a config file path/name to validate against the schema.
        version (str): the version of the config file to validate. (default: 'v1alpha1')
        strict (bool): whether or not to use strict mode on yamale. (default: True)

    Returns:
        bool: True if the config file is valid.

    Raises:
        ConfigError: If the schema for the version or the config file cannot be found, or the file is invalid.
    """

    if not Path(configPath).exists():
        makeDefaultConfig(configPath)
    else:
        log.debug(f'Found config file at {configPath}')

    try:
        with resources.as_file(resources.files('pqtail.config.schemas') / f'schema.{version}.yaml') as schema_path:
            schema = make_schema(path=str(schema_path))
            data = make_data(path=str(configPath))

        yamale_validate(
            schema,
            data,
            strict=strict
        )

        log.info(f'Config file at {configPath} is valid')
    except FileNotFoundError as e:
        raise ConfigError(f'Could not find file: {e}') from e
    except ValueError as e:
        raise ConfigError(f'Error validating config file: {e}') from e

    return True


def makeDefaultConfig(path: str | Path, default_config: str = 'default.yaml') -> None:
    """
    Make a default config file if one does not exist.

    Args:
        path (str | Path): The location to create an experiment configuration file, if it doesn't exist.
        default_config (str): The packaged config file to copy. (default: 'default.yaml')

    Raises:
        ConfigError: If the file cannot be created.
    """
    try:
        if not Path(path).parent.exists():
            Path(path).parent.mkdir(parents=True)

        if not Path(path).exists():
            log.debug(f'Config file at {path} does not exist. Creating default config file')

            default_text = (resources.files('pqtail.config') / default_config).read_text(encoding='utf-8')

            with open(str(path), 'x', encoding='utf-8') as f:
                f.write(default_text.strip() + '\n')

            log.info(f'Created default config file at \'{str(path)}\'')
    except PermissionError as e:
        raise ConfigError(f'pqtail does not have permission to write to {str(Path(path).parent)}') from e
