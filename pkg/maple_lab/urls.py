"""
URL configuration for the maple_lab project.

Only the admin is routed: it is the browser for the run registry
(TrainingRun and EvaluationRecord rows written by the train and transfer
commands).
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
