import logging

from django.db import DatabaseError, models, transaction

logger = logging.getLogger(__name__)


class Run(models.Model):
    """One completed management-command invocation"""
    COMMAND_CHOICES = [
        ('preprocess', 'Preprocess'),
        ('train', 'Train'),
        ('evaluate', 'Evaluate'),
        ('crossval', 'Cross-validate'),
        ('gridsearch', 'Grid search'),
        ('report', 'Report'),
    ]

    command = models.CharField(max_length=20, choices=COMMAND_CHOICES)
    arch = models.CharField(max_length=30, blank=True)
    dataset = models.CharField(max_length=200, blank=True)
    seed = models.BigIntegerField(null=True, blank=True)
    config = models.JSONField(default=dict)
    metrics = models.JSONField(default=dict)
    output_dir = models.CharField(max_length=500, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    def __str__(self):
        label = f" {self.arch}" if self.arch else ""
        return f"{self.command}{label} on {self.dataset or '-'} (seed {self.seed})"

    @property
    def accuracy(self):
        return self.metrics.get('accuracy')

    class Meta:
        ordering = ['-created_at', '-id']
        indexes = [
            models.Index(fields=['command', 'created_at'], name='sentiment_run_cmd_created_idx'),
        ]


def record_run(command, *, arch='', dataset='', seed=None, config=None, metrics=None, output_dir=''):
    """Store a ledger row; a database without the table only costs a warning."""
    try:
        with transaction.atomic():
            return Run.objects.create(
                command=command,
                arch=arch or '',
                dataset=dataset or '',
                seed=seed,
                config=config or {},
                metrics=metrics or {},
                output_dir=str(output_dir or ''),
            )
    except DatabaseError as exc:
        logger.warning('run not recorded in the ledger (%s); run "manage.py migrate" to enable it', exc)
        return None


def latest_runs(commands=('train', 'crossval')):
    """Most recent run per (command, arch, dataset)."""
    seen = {}
    for run in Run.objects.filter(command__in=commands):
        seen.setdefault((run.command, run.arch, run.dataset), run)
    return sorted(seen.values(), key=lambda r: (r.dataset, r.arch, r.command))
