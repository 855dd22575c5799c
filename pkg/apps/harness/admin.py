from django.contrib import admin

from .models import ExperimentRun


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ['config_name', 'allocator', 'seed', 'status', 'fallback_cycles', 'clamped_steps', 'started_at']
    list_filter = ['allocator', 'status', 'started_at']
    search_fields = ['config_name', 'comparison_group']
    ordering = ['-started_at']
    readonly_fields = ['started_at', 'finished_at', 'metrics', 'config']

    fieldsets = (
        (None, {
            'fields': ('config_name', 'allocator', 'seed', 'status', 'comparison_group')
        }),
        ('Results', {
            'fields': ('steps', 'fallback_cycles', 'clamped_steps', 'metrics', 'output_dir', 'error_message')
        }),
        ('Configuration', {
            'fields': ('config', 'started_at', 'finished_at'),
            'classes': ('collapse',)
        })
    )

    def has_add_permission(self, request):
        """Runs are only created by the management commands"""
        return False
