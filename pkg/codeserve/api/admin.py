from django.contrib import admin

from codeserve.api.models import Key

class KeyAdmin(admin.ModelAdmin):
    list_display = ('label', 'value', 'active', 'request_count')
    readonly_fields = ('value', 'request_count')

admin.site.register(Key, KeyAdmin)
