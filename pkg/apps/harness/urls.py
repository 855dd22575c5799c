from django.urls import path

from .views import ExperimentRunListAPIView, ExperimentRunRetrieveAPIView

app_name = 'harness_api'

urlpatterns = [
    path('', ExperimentRunListAPIView.as_view(), name='run-list'),
    path('<int:pk>/', ExperimentRunRetrieveAPIView.as_view(), name='run-detail'),
]
