"""Pytest wiring: configure Django the same way tox.ini does."""

import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "testauth.settings_aa4.local")
django.setup()
