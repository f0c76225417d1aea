"""Django app for computing the communication and sensing performance limits of ISAC systems."""

# pylint: disable = invalid-name
default_app_config = "isaclimits.apps.IsacLimitsConfig"

__version__ = "0.1.0"
__title__ = "ISAC Limits"
