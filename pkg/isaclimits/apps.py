from django.apps import AppConfig

from . import __version__


class IsacLimitsConfig(AppConfig):
    name = "isaclimits"
    label = "isaclimits"
    verbose_name = f"ISAC Limits v{__version__}"
