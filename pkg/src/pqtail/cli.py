"""
Joint stationary tail H(x, y) = P(Q1 > x, Q2 > y) of two parallel queues fed by one batch arrival stream.

subcommands:
  exact      solve the truncated balance equations
  simulate   run the Monte Carlo estimators, checked against the exact solver when it is configured
  cramer     solve the Cramér system and fit the light-tail decay rate along the configured direction
  heavy      evaluate the single-big-jump series against bounded-horizon simulation
  compare    everything the config asks for (default)

exit codes:
  0 all verdicts passed, 1 some verdict failed, 2 config error, 3 no convergence,
  4 no Lundberg or Cramér root, 5 failed precondition, 6 mgf domain error, 7 degenerate fit, 8 walk overflow
"""


from __future__ import annotations

import sys
import logging

from pathlib import Path
from argparse import ArgumentParser, RawDescriptionHelpFormatter
from pqtail.config.parse import validateConfig, configParse
from pqtail.errors import PqtailError
from pqtail.experiment import SUBCOMMANDS, run
from pqtail.utils import LogLevel
from pqtail import env, version


log = logging.getLogger(__name__)


def main(argv: list[str] | None = None) -> None:
    """
    Set up the CLI for pqtail.
    """
    parser = ArgumentParser(
        prog='pqtail',
        formatter_class=RawDescriptionHelpFormatter,
        description=__doc__
    )

    parser.add_argument(
        'command', nargs='?', default='compare', choices=SUBCOMMANDS,
        help='What to run. (default: compare)'
    )

    parser.add_argument(
        '-c', '--config', type=str, default=env['PQTAIL_CONFIG_PATH'],
        help='Configuration file path to use; a default one is written there if it does not exist. Also available as the environment variable \'PQTAIL_CONFIG_PATH\'. (default: pqtail.yaml)'
    )

    parser.add_argument(
        '--out', type=str, default=None,
        help='Report directory. Overrides experiment.outDir. Also available as the environment variable \'PQTAIL_OUT_DIR\'. (default: pqtail-out)'
    )

    parser.add_argument(
        '--seed', type=int, default=None,
        help='Seed of every Monte Carlo estimator. Overrides simulation.seed.'
    )

    parser.add_argument(
        '--threads', type=int, default=int(env['PQTAIL_THREADS']),
        help='Monte Carlo worker processes; results do not depend on it. Also available as the environment variable \'PQTAIL_THREADS\'. (default: 1)'
    )

    parser.add_argument(
        '--validate', action='store_true',
        help='Validate the provided configuration file and exit. (default: false)'
    )

    parser.add_argument(
        '--version', action='store_true',
        help='Display pqtail version.'
    )

    parser.add_argument(
        '--log-level', default=env['PQTAIL_LOG_LEVEL'], choices=list(LogLevel), type=LogLevel.from_string,
        help='Set the logging level. Also available as the environment variable \'PQTAIL_LOG_LEVEL\'. (default: info)'
    )

    log_group = parser.add_mutually_exclusive_group()

    log_group.add_argument(
        '--log-file', type=str, default=env['PQTAIL_LOG_FILE'],
        help='Specify the file pqtail logs to if --log-stdout is not set. Also available as the environment variable \'PQTAIL_LOG_FILE\'. (default: pqtail.log)'
    )

    log_group.add_argument(
        '--log-stdout', action='store_true',
        help='Log to stdout. (default: false)'
    )

    args = parser.parse_args(argv)

    if args.version:
        print(f'pqtail v{version}')
        sys.exit(0)

    # Configure logger
    if args.log_stdout:
        logging.basicConfig(
            stream=sys.stdout,
            format='%(asctime)s | %(levelname)s | %(name)s | %(message)s',
            level=args.log_level.value
        )
    else:
        try:
            # Instantiate log path (when logging locally).
            if not Path(args.log_file).exists():
                Path(args.log_file).parent.mkdir(parents=True, exist_ok=True)

            logging.basicConfig(
                filename=args.log_file,
                format='%(asctime)s | %(levelname)s | %(name)s | %(message)s',
                level=args.log_level.value,
                filemode='a'
            )
        except (FileNotFoundError, PermissionError) as msg:
            log.error(f'Failed to configure logging, received: {msg}')
            sys.exit(1)

    if args.seed is not None and args.seed < 0:
        parser.error(f'--seed must be nonnegative, received {args.seed}')

    if args.threads < 1:
        parser.error(f'--threads must be at least 1, received {args.threads}')

    try:
        if args.validate:
            validateConfig(args.config)
            configParse(args.config)
            sys.exit(0)

        log.info(f'Starting pqtail v{version}')

        config = configParse(args.config)

        if args.seed is not None:
            config.simulation.seed = args.seed

        out_dir = args.out or config.experiment.outDir or env['PQTAIL_OUT_DIR']

        sys.exit(
            run(
                config=config,
                command=args.command,
                out_dir=out_dir,
                threads=args.threads
            )
        )
    except PqtailError as e:
        log.error(str(e))
        print(f'pqtail: {e}', file=sys.stderr)
        sys.exit(e.exit_code)
