import hashlib
import logging
from dataclasses import asdict
from pathlib import Path

from codeserve.commands import EngineCommand
from codeserve.harness.replay import InvalidTrace, replay, replay_wall_clock
from codeserve.harness.trace import TraceParseError, parse_trace
from codeserve.metrics.models import ReplayRun

logger = logging.getLogger(__name__)


class Command(EngineCommand):
    help = "replay a keystroke trace through the engine and print the metrics report."

    input_errors = EngineCommand.input_errors + (TraceParseError, InvalidTrace)

    def add_arguments(self, parser):
        parser.add_argument(
            "trace",
            help="path to a JSON-lines trace file",
        )
        self.add_config_argument(parser)
        parser.add_argument(
            "--report",
            choices=["json", "table"],
            default="json",
            help="json: one line with sorted keys, table: plain text",
        )
        parser.add_argument(
            "--save",
            action="store_true",
            help="store the report as a ReplayRun",
        )
        parser.add_argument(
            "--wall-clock",
            action="store_true",
            help="sleep in real time instead of using virtual time (not deterministic)",
        )

    def handle(self, *args, **options):

        config = self.load_config(options)
        path = Path(options['trace'])
        raw = path.read_bytes()
        events = parse_trace(raw.decode("utf-8").splitlines(), name=path.name)

        run = replay_wall_clock if options['wall_clock'] else replay
        report = run(events, config, name=path.name).report()

        if options['save']:
            ReplayRun.record(path.name, hashlib.sha256(raw).hexdigest(), asdict(config), report)

        if options['report'] == "table":
            self.stdout.write(report.to_table())
        else:
            self.stdout.write(report.to_json())
