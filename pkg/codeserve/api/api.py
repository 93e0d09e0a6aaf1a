import logging
from typing import List

from django.conf import settings

from ninja import NinjaAPI
from ninja.errors import HttpError
from ninja.pagination import paginate
from ninja.security import APIKeyHeader

from codeserve.api.models import Key
from codeserve.api.schemas import (
    DiffIn,
    DiffOut,
    MetricsIn,
    MetricsOut,
    PatchIn,
    PatchOut,
    ReplayRunSchema,
)
from codeserve.edits.diff import render_diff
from codeserve.edits.script import (
    EditScriptError,
    NoChange,
    apply_edit,
    parse_edit_script,
    serialize_edit_script,
)
from codeserve.metrics.events import MetricEvent, MetricsError, SessionEventLog
from codeserve.metrics.models import ReplayRun
from codeserve.metrics.report import MetricsReport

logger = logging.getLogger(__name__)

class ApiKey(APIKeyHeader):
    param_name = "X-API-Key"

    def authenticate(self, request, key):
        # no configured key means the api is open, e.g. on a dev machine
        if not settings.CODESERVE_API_KEY:
            return "anonymous"
        if key == settings.CODESERVE_API_KEY:
            return key
        elif key and Key.objects.filter(value=key, active=True).exists():
            Key.objects.get(value=key).increment_count()
            return key

api = NinjaAPI(
    auth=ApiKey(),
    title="codeserve API",
    version="v1",
    description="Diff rendering, edit script application and completion "\
        "metrics over HTTP."
)


@api.exception_handler(EditScriptError)
def edit_script_error(request, exc):
    return api.create_response(request, {"detail": f"{exc.__class__.__name__}: {exc}"}, status=400)

@api.exception_handler(MetricsError)
def metrics_error(request, exc):
    return api.create_response(request, {"detail": f"{exc.__class__.__name__}: {exc}"}, status=400)


@api.post('diff/', response=DiffOut, url_name="diff")
def diff(request, payload: DiffIn):
    rendered = render_diff(payload.before, payload.after)
    result = rendered.to_dict()
    try:
        result["script"] = serialize_edit_script(payload.before, payload.after).to_text()
    except NoChange:
        result["script"] = None
    return result

@api.post('patch/', response=PatchOut, url_name="patch")
def patch(request, payload: PatchIn):
    script = parse_edit_script(payload.script)
    content = apply_edit(script, payload.content)
    return {"content": content, "hunks": len(script)}

@api.post('metrics/', response=MetricsOut, url_name="metrics")
def metrics(request, payload: MetricsIn):
    """Compute the metrics report for one session's event log."""
    try:
        events = [MetricEvent(**e.dict()) for e in payload.events]
    except ValueError as e:
        raise HttpError(400, str(e))
    log = SessionEventLog(events)
    logger.debug(f"metrics requested for {len(log)} event(s)")
    return MetricsReport.from_log(log).to_dict()

@api.get('runs/', response=List[ReplayRunSchema], url_name="run_list")
@paginate
def list_runs(request, trace_name: str = None):
    queryset = ReplayRun.objects.all()
    if trace_name:
        queryset = queryset.filter(trace_name=trace_name)
    return list(queryset)
