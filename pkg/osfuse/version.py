"""osfuse version information."""

__version__ = "0.4.0"
__version_info__ = tuple(int(x) for x in __version__.split("."))

APP_NAME = "osfuse"
DESCRIPTION = "Optical-SAR fusion primitives, oriented-box evaluation and dataset tooling"
LICENSE = "Apache-2.0"
