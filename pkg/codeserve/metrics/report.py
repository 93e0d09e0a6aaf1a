import json
import math
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, Tuple

from codeserve.metrics.events import EmptyLog

logger = logging.getLogger(__name__)

# pastes this long, or of a whole file, do not count as user-written code
PASTE_LIMIT_CHARS = 1000
# rejects shown for less time than this are not counted
MIN_VISIBLE_MS = 750
# proposed edits changing more characters than this are "large"
LARGE_DIFF_CHARS = 133

FUNNEL_STAGES = (
    "requests",
    "served_from_cache",
    "served_from_model",
    "failed",
    "cancelled",
    "shown",
    "accepted",
    "rejected",
    "rejected_visible",
    "transforms",
    "transforms_failed",
    "transforms_shown",
    "transforms_accepted",
    "transforms_rejected",
)


def _ratio(numerator, denominator):
    return numerator / denominator if denominator else 0.0

def accepted_chars(log):
    return sum(log.shown[e.suggestion_id].chars for e in log.of_kind("suggestion_accepted"))

def typed_chars(log):
    return sum(e.chars for e in log.of_kind("typed"))

def qualifying_paste_chars(log):
    return sum(
        e.chars for e in log.of_kind("pasted")
        if e.chars < PASTE_LIMIT_CHARS and not e.full_file
    )

def visible_rejects(log):
    return [
        e for e in log.of_kind("suggestion_rejected")
        if e.ts - log.shown[e.suggestion_id].ts >= MIN_VISIBLE_MS
    ]


def fcml(log):
    """Share of the code written by accepting suggestions: accepted characters
    over typed, qualifying pasted and accepted characters."""
    accepted = accepted_chars(log)
    return _ratio(accepted, typed_chars(log) + qualifying_paste_chars(log) + accepted)

def fcml_no_paste(log):
    accepted = accepted_chars(log)
    return _ratio(accepted, typed_chars(log) + accepted)

def acceptance_rate(log):
    accepted = len(log.of_kind("suggestion_accepted"))
    return _ratio(accepted, accepted + len(visible_rejects(log)))

def avg_chars_per_accept(log):
    return _ratio(accepted_chars(log), len(log.of_kind("suggestion_accepted")))

def cache_hit_rate(log):
    answered = log.of_kind("request_latency")
    return _ratio(sum(1 for e in answered if e.served_from == "cache"), len(answered))


def transform_resolutions(log, min_diff_chars=0):
    """(accepted, accepted + rejected) over proposed edits changing more than
    min_diff_chars characters."""
    shown = {k: e for k, e in log.transforms.items() if e.chars > min_diff_chars}
    accepted = sum(1 for e in log.of_kind("transform_accepted") if e.suggestion_id in shown)
    rejected = sum(1 for e in log.of_kind("transform_rejected") if e.suggestion_id in shown)
    return accepted, accepted + rejected

def transform_acceptance_rate(log, min_diff_chars=0):
    return _ratio(*transform_resolutions(log, min_diff_chars))

def avg_transform_prompt_chars(log):
    requested = log.of_kind("transform_requested")
    return _ratio(sum(e.chars for e in requested), len(requested))


def nearest_rank(ordered, percentile):
    rank = max(1, math.ceil(percentile / 100 * len(ordered)))
    return ordered[rank - 1]

def latency_percentiles(log, percentiles=(50, 90)):
    values = sorted(e.ms for e in log.of_kind("request_latency"))
    if not values:
        raise EmptyLog("no request latencies in the log")
    return tuple(nearest_rank(values, p) for p in percentiles)


def funnel_counts(log):
    answered = log.of_kind("request_latency")
    return {
        "requests": len(log.of_kind("request_issued")),
        "served_from_cache": sum(1 for e in answered if e.served_from == "cache"),
        "served_from_model": sum(1 for e in answered if e.served_from == "model"),
        "failed": len(log.of_kind("request_failed")),
        "cancelled": len(log.of_kind("request_cancelled")),
        "shown": len(log.of_kind("suggestion_shown")),
        "accepted": len(log.of_kind("suggestion_accepted")),
        "rejected": len(log.of_kind("suggestion_rejected")),
        "rejected_visible": len(visible_rejects(log)),
        "transforms": len(log.of_kind("transform_requested")),
        "transforms_failed": len(log.of_kind("transform_failed")),
        "transforms_shown": len(log.of_kind("transform_shown")),
        "transforms_accepted": len(log.of_kind("transform_accepted")),
        "transforms_rejected": len(log.of_kind("transform_rejected")),
    }


@dataclass(frozen=True)
class MetricsReport:
    fcml: float = 0.0
    fcml_no_paste: float = 0.0
    acceptance_rate: float = 0.0
    avg_chars_per_accept: float = 0.0
    latency_p50_ms: int = 0
    latency_p90_ms: int = 0
    cache_hit_rate: float = 0.0
    transform_acceptance_rate: float = 0.0
    transform_acceptance_rate_large_diff: float = 0.0
    avg_transform_prompt_chars: float = 0.0
    counts: Dict[str, int] = field(default_factory=lambda: {k: 0 for k in FUNNEL_STAGES})
    zero_denominators: Tuple[str, ...] = ()

    @classmethod
    def from_log(cls, log):
        counts = funnel_counts(log)
        accepted = accepted_chars(log)
        typed = typed_chars(log)
        pasted = qualifying_paste_chars(log)

        zero = []
        if typed + pasted + accepted == 0:
            zero.append("fcml")
        if typed + accepted == 0:
            zero.append("fcml_no_paste")
        if counts["accepted"] + counts["rejected_visible"] == 0:
            zero.append("acceptance_rate")
        if counts["accepted"] == 0:
            zero.append("avg_chars_per_accept")
        try:
            p50, p90 = latency_percentiles(log)
        except EmptyLog:
            p50, p90 = 0, 0
            zero.append("latency")
        if counts["served_from_cache"] + counts["served_from_model"] == 0:
            zero.append("cache_hit_rate")
        accepted_edits, resolved_edits = transform_resolutions(log)
        if resolved_edits == 0:
            zero.append("transform_acceptance_rate")
        accepted_large, resolved_large = transform_resolutions(log, LARGE_DIFF_CHARS)
        if resolved_large == 0:
            zero.append("transform_acceptance_rate_large_diff")
        if counts["transforms"] == 0:
            zero.append("avg_transform_prompt_chars")

        return cls(
            fcml=fcml(log),
            fcml_no_paste=fcml_no_paste(log),
            acceptance_rate=acceptance_rate(log),
            avg_chars_per_accept=avg_chars_per_accept(log),
            latency_p50_ms=p50,
            latency_p90_ms=p90,
            cache_hit_rate=cache_hit_rate(log),
            transform_acceptance_rate=_ratio(accepted_edits, resolved_edits),
            transform_acceptance_rate_large_diff=_ratio(accepted_large, resolved_large),
            avg_transform_prompt_chars=avg_transform_prompt_chars(log),
            counts=counts,
            zero_denominators=tuple(zero),
        )

    def to_dict(self):
        data = asdict(self)
        data["zero_denominators"] = list(self.zero_denominators)
        return data

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_table(self):
        rows = [
            ("FCML", f"{self.fcml:.1%}"),
            ("FCML without pastes", f"{self.fcml_no_paste:.1%}"),
            ("Acceptance rate", f"{self.acceptance_rate:.1%}"),
            ("Avg chars per accept", f"{self.avg_chars_per_accept:.1f}"),
            ("Latency p50 (ms)", str(self.latency_p50_ms)),
            ("Latency p90 (ms)", str(self.latency_p90_ms)),
            ("Cache hit rate", f"{self.cache_hit_rate:.1%}"),
            ("Transform acceptance rate", f"{self.transform_acceptance_rate:.1%}"),
            (f"  diff over {LARGE_DIFF_CHARS} chars", f"{self.transform_acceptance_rate_large_diff:.1%}"),
            ("Avg transform prompt chars", f"{self.avg_transform_prompt_chars:.1f}"),
        ]
        rows += [(stage.replace("_", " ").capitalize(), str(self.counts.get(stage, 0))) for stage in FUNNEL_STAGES]
        width = max(len(name) for name, _ in rows) + 2
        lines = [f"{'Metric':<{width}}Value", "-" * (width + 10)]
        lines += [f"{name:<{width}}{value}" for name, value in rows]
        if self.zero_denominators:
            lines.append(f"(no data for: {', '.join(self.zero_denominators)})")
        return "\n".join(lines)
