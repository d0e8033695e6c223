"""osfuse - optical-SAR fusion primitives, oriented-box evaluation and dataset tooling."""

from .version import __version__, __version_info__, APP_NAME

__all__ = ['__version__', '__version_info__', 'APP_NAME']
