# Generated by Django 3.2.18 on 2026-10-19 09:14

import codeserve.api.models
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='Key',
            fields=[
                ('value', models.CharField(default=codeserve.api.models.generate_key, editable=False, max_length=22, primary_key=True, serialize=False)),
                ('label', models.CharField(help_text='who or what uses this key, e.g. an editor plugin build', max_length=100)),
                ('active', models.BooleanField(default=True)),
                ('request_count', models.IntegerField(default=0, editable=False)),
            ],
        ),
    ]
