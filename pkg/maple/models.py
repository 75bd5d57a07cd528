import uuid

from django.db import models


class TrainingRun(models.Model):
    """One train or transfer invocation"""

    STATUS_CHOICES = [
        ('pending', 'Pending'),
        ('running', 'Running'),
        ('completed', 'Completed'),
        ('failed', 'Failed'),
    ]

    id = models.UUIDField(primary_key=True, default=uuid.uuid4, editable=False)
    task = models.CharField(max_length=32)
    method = models.CharField(max_length=32)
    seed = models.PositiveIntegerField(default=0)
    out_dir = models.CharField(max_length=500)
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='pending')
    error_message = models.TextField(blank=True, null=True)
    final_success_rate = models.FloatField(blank=True, null=True)

    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)
    started_at = models.DateTimeField(blank=True, null=True)

    class Meta:
        ordering = ['-created_at']
        verbose_name = 'Training Run'
        verbose_name_plural = 'Training Runs'

    def __str__(self):
        return f"{self.method} on {self.task} (seed {self.seed}) - {self.status}"

    @property
    def latest_evaluation(self):
        return self.evaluations.order_by('-env_steps').first()


class EvaluationRecord(models.Model):
    """Metric record produced by one evaluation of a run"""

    run = models.ForeignKey(TrainingRun, on_delete=models.CASCADE, related_name='evaluations')
    env_steps = models.PositiveIntegerField()
    return_norm = models.FloatField()
    success_rate = models.FloatField()
    alpha_tsk = models.FloatField()
    alpha_p = models.FloatField()
    usage = models.JSONField(default=dict, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['run', 'env_steps']
        verbose_name = 'Evaluation Record'
        verbose_name_plural = 'Evaluation Records'

    def __str__(self):
        return f"{self.run_id} @ {self.env_steps}: success {self.success_rate:.2f}"
