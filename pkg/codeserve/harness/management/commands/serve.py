import asyncio
import logging

from codeserve.commands import EngineCommand
from codeserve.harness.service import BindError, EngineService

logger = logging.getLogger(__name__)


class Command(EngineCommand):
    help = "serve the engine to editor clients over line-delimited JSON."

    input_errors = EngineCommand.input_errors + (BindError,)

    def add_arguments(self, parser):
        self.add_config_argument(parser)
        target = parser.add_mutually_exclusive_group()
        target.add_argument(
            "--listen",
            help="host:port to listen on (default: SERVE_LISTEN)",
        )
        target.add_argument(
            "--stdio",
            action="store_true",
            help="serve a single session over stdin/stdout",
        )

    def handle(self, *args, **options):

        config = self.load_config(options)
        service = EngineService(config)

        try:
            if options['stdio']:
                asyncio.run(service.stdio())
            else:
                asyncio.run(service.listen(options['listen'] or config.serve_listen))
        except KeyboardInterrupt:
            logger.info("service stopped")
