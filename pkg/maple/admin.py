from django.contrib import admin

from .models import EvaluationRecord, TrainingRun


class EvaluationRecordInline(admin.TabularInline):
    model = EvaluationRecord
    extra = 0
    can_delete = False
    readonly_fields = ['env_steps', 'return_norm', 'success_rate', 'alpha_tsk', 'alpha_p', 'usage']


@admin.register(TrainingRun)
class TrainingRunAdmin(admin.ModelAdmin):
    list_display = [
        'id', 'task', 'method', 'seed', 'status', 'created_at', 'success_display'
    ]
    list_filter = ['status', 'task', 'method', 'created_at']
    search_fields = ['id', 'task', 'method', 'out_dir']
    readonly_fields = [
        'id', 'task', 'method', 'seed', 'out_dir', 'final_success_rate',
        'created_at', 'updated_at', 'started_at'
    ]
    inlines = [EvaluationRecordInline]

    fieldsets = (
        (None, {
            'fields': ('id', 'status', 'error_message')
        }),
        ('Experiment', {
            'fields': ('task', 'method', 'seed', 'out_dir', 'final_success_rate')
        }),
        ('Timestamps', {
            'fields': ('created_at', 'updated_at', 'started_at'),
            'classes': ('collapse',)
        }),
    )

    def success_display(self, obj):
        if obj.final_success_rate is None:
            return "N/A"
        return f"{100 * obj.final_success_rate:.0f}%"
    success_display.short_description = "Final Success"

    def has_add_permission(self, request):
        # Runs are created by the train and transfer commands
        return False


@admin.register(EvaluationRecord)
class EvaluationRecordAdmin(admin.ModelAdmin):
    list_display = ['run', 'env_steps', 'return_norm', 'success_rate', 'alpha_tsk', 'alpha_p']
    list_filter = ['run__task', 'run__method']
    readonly_fields = ['run', 'env_steps', 'return_norm', 'success_rate', 'alpha_tsk', 'alpha_p', 'usage', 'created_at']

    def has_add_permission(self, request):
        return False
