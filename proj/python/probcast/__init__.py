"""Probabilistic air-pollutant forecasting: python surface over the C++ core."""

try:
    from probcast._core import *  # noqa: F401,F403  (installed package layout)
    from probcast import _core as _impl
except ImportError:  # in-tree builds expose the extension on PYTHONPATH
    from _core import *  # noqa: F401,F403
    import _core as _impl

__all__ = [name for name in dir(_impl) if not name.startswith("_")]
