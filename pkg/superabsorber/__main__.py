import logging
import sys
from argparse import ArgumentParser, Namespace
from logging import getLogger
from os import environ
from pathlib import Path
from typing import List, Optional, Sequence

logger = getLogger(__name__)

try:
    from rich import pretty, traceback

    traceback.install(show_locals=True)
    pretty.install()

    logger.info('using rich output')
except ImportError:
    logger.info('rich not available')

# fix the import path
superabsorber_root = Path(__file__).parent
sys.path.insert(0, str(superabsorber_root.parent))

# finish local imports
from superabsorber import __version__, constants
from superabsorber.lib.config import configure_logging
from superabsorber.lib.errors import NumericalError, ValidationError
from superabsorber.lib.runner import Runner

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def parse_apps_env_var() -> List[str]:
    apps_str = environ.get(
        constants.SUPERABSORBER_APPS_ENVVAR.value, constants.SUPERABSORBER_APPS_DEFAULT.value
    )
    apps_str = ','.join(apps_str.split())
    return [app.strip() for app in apps_str.split(',') if app.strip()]


def common_parser() -> ArgumentParser:
    parser = ArgumentParser(add_help=False)
    parser.add_argument('--config', type=Path, default=None, help='json run config')
    parser.add_argument('--out', type=Path, default=Path('out'), help='output directory')
    parser.add_argument('--seed', type=int, default=None, help='unsigned 64-bit seed')
    parser.add_argument('--tol', type=float, default=None, help='integrator tolerance')
    parser.add_argument('--quiet', action='store_true', help='only warnings and errors')
    parser.add_argument('--verbose', action='store_true', help='debug logging')
    parser.add_argument('--app', dest='apps', nargs='*', action='extend', default=[])
    return parser


def parse_args(runner: Runner, argv: Optional[Sequence[str]] = None) -> Namespace:
    pre, _ = common_parser().parse_known_args(argv)
    runner.discover_experiments(*parse_apps_env_var(), *pre.apps)

    # flags live on the subcommands, a top level default would be overwritten by theirs
    parser = ArgumentParser(prog='superabsorber')
    parser.add_argument('--version', action='version', version=__version__)
    parser.add_argument('--app', dest='apps', nargs='*', action='extend', default=[])
    commands = parser.add_subparsers(dest='command', required=True)
    for command, experiment in sorted(runner.experiments.items()):
        commands.add_parser(
            command, parents=[common_parser()], help=(experiment.__doc__ or '').strip()
        )
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    runner = Runner()
    try:
        args = parse_args(runner, argv)
        configure_logging(
            logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO
        )

        runner.config_path = args.config
        runner.overrides = {'seed': args.seed, 'tol': args.tol}

        logger.info(f'starting {args.command}')
        paths = runner.run(args.command, args.out)
        logger.info(f'{args.command} wrote {len(paths)} files to {args.out}')
        return EXIT_OK
    except ValidationError as e:
        logger.error(f'invalid input: {e}')
        logger.debug('validation failure', exc_info=e)
        return EXIT_VALIDATION
    except NumericalError as e:
        logger.error(f'numerical failure: {e}')
        logger.debug('numerical failure', exc_info=e)
        return EXIT_NUMERICAL
    except MemoryError as e:
        logger.error(f'out of memory: {e}')
        logger.debug('memory failure', exc_info=e)
        return EXIT_NUMERICAL
    finally:
        logger.debug('ending run')


if __name__ == '__main__':
    sys.exit(main())
