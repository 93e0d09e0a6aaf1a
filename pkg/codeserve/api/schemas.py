from datetime import datetime
from typing import Dict, List, Optional

from ninja import Schema


class DiffIn(Schema):
    before: str
    after: str


class DiffLineSchema(Schema):
    text: str
    tag: str
    before_line: Optional[int]
    after_line: Optional[int]
    old_text: Optional[str] = None
    removed_spans: Optional[List[List[int]]] = None
    added_spans: Optional[List[List[int]]] = None


class DiffOut(Schema):
    lines: List[DiffLineSchema]
    decorated_count: int
    highlighted_words: int
    counts: Dict[str, int]
    script: Optional[str] = None


class PatchIn(Schema):
    script: str
    content: str


class PatchOut(Schema):
    content: str
    hunks: int


class MetricEventSchema(Schema):
    kind: str
    ts: int = 0
    chars: int = 0
    full_file: bool = False
    suggestion_id: Optional[str] = None
    ms: int = 0
    served_from: Optional[str] = None


class MetricsIn(Schema):
    events: List[MetricEventSchema]


class MetricsOut(Schema):
    fcml: float
    fcml_no_paste: float
    acceptance_rate: float
    avg_chars_per_accept: float
    latency_p50_ms: int
    latency_p90_ms: int
    cache_hit_rate: float
    transform_acceptance_rate: float
    transform_acceptance_rate_large_diff: float
    avg_transform_prompt_chars: float
    counts: Dict[str, int]
    zero_denominators: List[str]


class ReplayRunSchema(Schema):
    id: int
    trace_name: str
    trace_sha256: str
    fcml: float
    acceptance_rate: float
    cache_hit_rate: float
    created: datetime
    report: dict
