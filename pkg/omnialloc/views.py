"""
Project-level endpoints: service health for the run browser.
"""

from django.conf import settings
from drf_spectacular.utils import extend_schema
from rest_framework import serializers
from rest_framework.decorators import api_view, permission_classes
from rest_framework.permissions import AllowAny
from rest_framework.response import Response

from apps.harness.models import ExperimentRun


class HealthSerializer(serializers.Serializer):
    status = serializers.CharField()
    debug = serializers.BooleanField()
    store_runs = serializers.BooleanField(help_text="Whether the commands record runs in the database")
    recorded_runs = serializers.IntegerField()


@extend_schema(
    summary="Health Check",
    responses={200: HealthSerializer},
    tags=["System"]
)
@api_view(['GET'])
@permission_classes([AllowAny])
def health_check(request):
    return Response({
        'status': 'ok',
        'debug': settings.DEBUG,
        'store_runs': settings.OMNIALLOC_STORE_RUNS,
        'recorded_runs': ExperimentRun.objects.count(),
    })
