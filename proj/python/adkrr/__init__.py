"""Adaptive distributed kernel ridge regression with Lepskii stopping."""

try:
    from ._adkrr import *  # noqa: F401,F403
    from ._adkrr import __version__  # noqa: F401
except ImportError:  # in-tree build: the module lives on PYTHONPATH, not in the package
    from _adkrr import *  # noqa: F401,F403
    from _adkrr import __version__  # noqa: F401
