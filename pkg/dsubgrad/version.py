"""version lookup for the installed dsubgrad distribution"""

from importlib.metadata import PackageNotFoundError, distribution

try:
    __version__ = distribution("dsubgrad").version
except PackageNotFoundError:
    # running from a source checkout that was never installed
    __version__ = "0.0.0"
