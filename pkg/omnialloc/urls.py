"""
URL configuration for the omnialloc run browser.
"""
from django.contrib import admin
from django.urls import include, path
from django.views.generic import RedirectView
from drf_spectacular.utils import extend_schema
from drf_spectacular.views import SpectacularAPIView
from rest_framework import serializers
from rest_framework.decorators import api_view, permission_classes
from rest_framework.permissions import AllowAny
from rest_framework.response import Response
from rest_framework.reverse import reverse

from .views import health_check


class APIRootSerializer(serializers.Serializer):
    runs = serializers.URLField()
    health = serializers.URLField()
    schema = serializers.URLField()


@extend_schema(responses=APIRootSerializer)
@api_view(['GET'])
@permission_classes([AllowAny])
def api_root(request, format=None):
    return Response({
        'runs': reverse('harness_api:run-list', request=request, format=format),
        'health': reverse('health-check', request=request, format=format),
        'schema': reverse('schema', request=request, format=format),
    })


urlpatterns = [
    path('api/', api_root, name='api-root'),
    path('api/runs/', include('apps.harness.urls')),
    path('api/health/', health_check, name='health-check'),
    path('api/schema/', SpectacularAPIView.as_view(), name='schema'),
    path('admin/', admin.site.urls),
    path('', RedirectView.as_view(url='/api/', permanent=False), name='home'),
]
