from django.db import models


class ExperimentRun(models.Model):
    """One closed-loop simulation, recorded by the ``run`` and ``compare`` commands."""

    STATUS_CHOICES = [
        ('running', 'Running'),
        ('completed', 'Completed'),
        ('failed', 'Failed'),
    ]

    ALLOCATOR_CHOICES = [
        ('mbno', 'MBNO'),
        ('receding_horizon', 'Receding Horizon'),
        ('pseudoinverse_only', 'Pseudoinverse Only'),
    ]

    config_name = models.CharField(max_length=200, db_index=True)
    allocator = models.CharField(max_length=32, choices=ALLOCATOR_CHOICES, db_index=True)
    seed = models.IntegerField(default=0)
    status = models.CharField(max_length=16, choices=STATUS_CHOICES, default='running', db_index=True)
    steps = models.PositiveIntegerField(default=0)
    fallback_cycles = models.PositiveIntegerField(default=0)
    clamped_steps = models.PositiveIntegerField(default=0)
    metrics = models.JSONField(default=dict, blank=True)
    config = models.JSONField(default=dict, blank=True)
    output_dir = models.CharField(max_length=500, blank=True)
    error_message = models.TextField(blank=True)
    comparison_group = models.CharField(
        max_length=64, blank=True, db_index=True, help_text='Shared by the two runs of one compare invocation'
    )
    started_at = models.DateTimeField(auto_now_add=True, db_index=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        verbose_name = 'Experiment Run'
        verbose_name_plural = 'Experiment Runs'
        ordering = ['-started_at']
        indexes = [
            models.Index(fields=['allocator', 'status'], name='run_allocator_status_idx'),
        ]

    def __str__(self):
        return f'{self.config_name} [{self.allocator}] #{self.pk}'

    @property
    def wall_time(self):
        if self.finished_at is None:
            return None
        return (self.finished_at - self.started_at).total_seconds()

    def mark_completed(self, metrics, output_dir, finished_at):
        self.status = 'completed'
        self.metrics = metrics
        self.steps = metrics.get('steps', 0)
        self.fallback_cycles = metrics.get('fallback_cycles', 0)
        self.clamped_steps = metrics.get('clamped_steps', 0)
        self.output_dir = str(output_dir)
        self.finished_at = finished_at
        self.save()

    def mark_failed(self, error, finished_at):
        self.status = 'failed'
        self.error_message = str(error)
        self.finished_at = finished_at
        self.save()
