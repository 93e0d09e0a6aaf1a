import logging

from django.db import models

logger = logging.getLogger(__name__)


class ReplayRun(models.Model):
    """The report of one `replay --save` run."""

    trace_name = models.CharField(
        max_length=255,
    )
    trace_sha256 = models.CharField(
        max_length=64,
        help_text="checksum of the replayed trace file",
    )
    config = models.JSONField(
        default=dict,
        blank=True,
    )
    report = models.JSONField(
        default=dict,
        blank=True,
    )
    fcml = models.FloatField(
        default=0,
    )
    acceptance_rate = models.FloatField(
        default=0,
    )
    cache_hit_rate = models.FloatField(
        default=0,
    )
    created = models.DateTimeField(
        auto_now_add=True,
    )

    class Meta:
        ordering = ("-created", "-id")

    def __str__(self):
        return f"{self.trace_name} ({self.trace_sha256[:8]})"

    @classmethod
    def record(cls, trace_name, trace_sha256, config, report):
        run = cls.objects.create(
            trace_name=trace_name,
            trace_sha256=trace_sha256,
            config=config,
            report=report.to_dict(),
            fcml=report.fcml,
            acceptance_rate=report.acceptance_rate,
            cache_hit_rate=report.cache_hit_rate,
        )
        logger.info(f"{run} | replay run saved as {run.pk}")
        return run
