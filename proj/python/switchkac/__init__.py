"""Regime-switching jump diffusions: Feynman-Kac Monte Carlo estimators,
coupled-PIDE cross-checks, arcsine laws, and the two-time-scale averaging
limit. Thin wrapper over the C++ core."""

try:
    from ._switchkac import *  # noqa: F401,F403
    from ._switchkac import __version__  # noqa: F401
except ImportError:  # development builds put the extension on PYTHONPATH
    from _switchkac import *  # noqa: F401,F403
    from _switchkac import __version__  # noqa: F401
