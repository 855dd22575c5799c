from drf_spectacular.utils import extend_schema
from rest_framework import generics

from .models import ExperimentRun
from .serializers import ExperimentRunSerializer


@extend_schema(
    summary="List Experiment Runs",
    description="Recorded runs, newest first. Filter by allocator, status, config name, seed or comparison group.",
    tags=['Runs']
)
class ExperimentRunListAPIView(generics.ListAPIView):
    queryset = ExperimentRun.objects.all()
    serializer_class = ExperimentRunSerializer
    filterset_fields = ['allocator', 'status', 'config_name', 'seed', 'comparison_group']
    ordering_fields = ['started_at', 'finished_at', 'allocator', 'seed']


@extend_schema(summary="Retrieve an Experiment Run", tags=['Runs'])
class ExperimentRunRetrieveAPIView(generics.RetrieveAPIView):
    queryset = ExperimentRun.objects.all()
    serializer_class = ExperimentRunSerializer
