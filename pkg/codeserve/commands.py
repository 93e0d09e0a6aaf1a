import sys
import logging
from functools import partial

from django.core.management.base import BaseCommand, CommandError

from codeserve.config import ConfigError, EngineConfig

logger = logging.getLogger(__name__)

EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3


def _usage_error(parser, message):
    if parser.called_from_command_line:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"{parser.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)
    raise CommandError(f"Error: {message}", returncode=EXIT_USAGE)


class EngineCommand(BaseCommand):
    """Base for the engine commands. Usage errors exit with 1, errors listed
    in `input_errors` with 2 and anything unexpected with 3."""

    input_errors = (ConfigError, OSError, UnicodeDecodeError)

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.error = partial(_usage_error, parser)
        return parser

    def add_config_argument(self, parser):
        parser.add_argument(
            "--config",
            help="key/value config file overriding the engine settings",
        )

    def load_config(self, options):
        return EngineConfig.load(options.get("config"))

    def execute(self, *args, **options):
        try:
            return super().execute(*args, **options)
        except CommandError:
            raise
        except self.input_errors as e:
            raise CommandError(str(e), returncode=EXIT_INPUT)
        except Exception as e:
            logger.exception(e)
            raise CommandError(f"internal error: {e}", returncode=EXIT_INTERNAL)
