import json
from pathlib import Path

from codeserve.commands import EngineCommand
from codeserve.edits.diff import render_diff
from codeserve.edits.script import EditScriptError, serialize_edit_script


class Command(EngineCommand):
    help = "render the diff between two files, with moved lines and word highlights."

    input_errors = EngineCommand.input_errors + (EditScriptError,)

    def add_arguments(self, parser):
        parser.add_argument(
            "before",
            help="path to the original file",
        )
        parser.add_argument(
            "after",
            help="path to the changed file",
        )
        parser.add_argument(
            "--format",
            choices=["text", "json", "script"],
            default="text",
            help="text: decorated lines, json: tagged lines and spans, "
                "script: the anchored edit script turning before into after",
        )
        parser.add_argument(
            "--stats",
            action="store_true",
            help="print decorated line and highlighted word counts after a text diff",
        )

    def handle(self, *args, **options):

        before = Path(options['before']).read_text()
        after = Path(options['after']).read_text()

        if options['format'] == "script":
            self.stdout.write(serialize_edit_script(before, after).to_text(), ending="")
            return

        rendered = render_diff(before, after)
        if options['format'] == "json":
            self.stdout.write(json.dumps(rendered.to_dict(), sort_keys=True))
            return

        if rendered.decorated_lines:
            self.stdout.write(rendered.to_text())
        if options['stats']:
            self.stdout.write(
                f"decorated lines: {rendered.decorated_count}, "
                f"highlighted words: {rendered.highlighted_words}"
            )
