from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('config_name', models.CharField(db_index=True, max_length=200)),
                ('allocator', models.CharField(choices=[('mbno', 'MBNO'), ('receding_horizon', 'Receding Horizon'), ('pseudoinverse_only', 'Pseudoinverse Only')], db_index=True, max_length=32)),
                ('seed', models.IntegerField(default=0)),
                ('status', models.CharField(choices=[('running', 'Running'), ('completed', 'Completed'), ('failed', 'Failed')], db_index=True, default='running', max_length=16)),
                ('steps', models.PositiveIntegerField(default=0)),
                ('fallback_cycles', models.PositiveIntegerField(default=0)),
                ('clamped_steps', models.PositiveIntegerField(default=0)),
                ('metrics', models.JSONField(blank=True, default=dict)),
                ('config', models.JSONField(blank=True, default=dict)),
                ('output_dir', models.CharField(blank=True, max_length=500)),
                ('error_message', models.TextField(blank=True)),
                ('comparison_group', models.CharField(blank=True, db_index=True, help_text='Shared by the two runs of one compare invocation', max_length=64)),
                ('started_at', models.DateTimeField(auto_now_add=True, db_index=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'verbose_name': 'Experiment Run',
                'verbose_name_plural': 'Experiment Runs',
                'ordering': ['-started_at'],
                'indexes': [models.Index(fields=['allocator', 'status'], name='run_allocator_status_idx')],
            },
        ),
    ]
