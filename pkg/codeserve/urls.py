from django.conf import settings
from django.contrib import admin
from django.urls import path

from codeserve.api.api import api

urlpatterns = [
    path('admin/', admin.site.urls, name="admin"),
    path('api/v1/', api.urls),
]

if settings.DEBUG:
    from django.contrib.staticfiles.urls import staticfiles_urlpatterns
    urlpatterns += staticfiles_urlpatterns()
