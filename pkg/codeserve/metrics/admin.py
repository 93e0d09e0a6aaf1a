from django.contrib import admin

from codeserve.metrics.models import ReplayRun

class ReplayRunAdmin(admin.ModelAdmin):
    readonly_fields = ('created', 'trace_sha256')
    list_display = ['__str__', 'fcml', 'acceptance_rate', 'cache_hit_rate', 'created']
    search_fields = ('trace_name', )

admin.site.register(ReplayRun, ReplayRunAdmin)
