import logging
from pathlib import Path

from codeserve.commands import EngineCommand
from codeserve.edits.script import EditScriptError, apply_edit, parse_edit_script

logger = logging.getLogger(__name__)


class Command(EngineCommand):
    help = "apply an anchored edit script to a file."

    input_errors = EngineCommand.input_errors + (EditScriptError,)

    def add_arguments(self, parser):
        parser.add_argument(
            "script",
            help="path to the edit script",
        )
        parser.add_argument(
            "file",
            help="path to the file to patch",
        )
        parser.add_argument(
            "--in-place",
            action="store_true",
            help="overwrite the file instead of printing the result",
        )

    def handle(self, *args, **options):

        script = parse_edit_script(Path(options['script']).read_text())
        target = Path(options['file'])
        result = apply_edit(script, target.read_text())

        if options['in_place']:
            target.write_text(result)
            logger.info(f"{target} | patched with {len(script)} hunk(s)")
        else:
            self.stdout.write(result, ending="")
