import secrets
from django.db import models

def generate_key():
    return secrets.token_urlsafe(16)

class Key(models.Model):

    value = models.CharField(
        primary_key=True,
        default=generate_key,
        max_length=22,
        editable=False,
    )
    label = models.CharField(
        max_length=100,
        help_text="who or what uses this key, e.g. an editor plugin build",
    )
    active = models.BooleanField(
        default=True,
    )
    request_count = models.IntegerField(
        default=0,
        editable=False
    )

    def __str__(self):
        return self.label

    def increment_count(self):
        self.request_count += 1
        self.save(update_fields=['request_count'])
