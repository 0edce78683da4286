# Generated by Django 5.2.8 on 2026-10-18 10:12

from django.db import migrations, models


class Migration(migrations.Migration):
    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="Run",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                (
                    "command",
                    models.CharField(
                        choices=[
                            ("preprocess", "Preprocess"),
                            ("train", "Train"),
                            ("evaluate", "Evaluate"),
                            ("crossval", "Cross-validate"),
                            ("gridsearch", "Grid search"),
                            ("report", "Report"),
                        ],
                        max_length=20,
                    ),
                ),
                ("arch", models.CharField(blank=True, max_length=30)),
                ("dataset", models.CharField(blank=True, max_length=200)),
                ("seed", models.BigIntegerField(blank=True, null=True)),
                ("config", models.JSONField(default=dict)),
                ("metrics", models.JSONField(default=dict)),
                ("output_dir", models.CharField(blank=True, max_length=500)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
            ],
            options={
                "ordering": ["-created_at", "-id"],
                "indexes": [
                    models.Index(
                        fields=["command", "created_at"],
                        name="sentiment_run_cmd_created_idx",
                    )
                ],
            },
        ),
    ]
