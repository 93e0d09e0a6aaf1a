# Generated by Django 3.2.18 on 2026-10-19 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ReplayRun',
            fields=[
                ('id', models.AutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('trace_name', models.CharField(max_length=255)),
                ('trace_sha256', models.CharField(help_text='checksum of the replayed trace file', max_length=64)),
                ('config', models.JSONField(blank=True, default=dict)),
                ('report', models.JSONField(blank=True, default=dict)),
                ('fcml', models.FloatField(default=0)),
                ('acceptance_rate', models.FloatField(default=0)),
                ('cache_hit_rate', models.FloatField(default=0)),
                ('created', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ('-created', '-id'),
            },
        ),
    ]
