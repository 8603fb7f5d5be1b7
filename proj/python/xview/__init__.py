try:
    from ._xview import *  # noqa: F401,F403
    from ._xview import __doc__  # noqa: F401
except ImportError:  # running against a bare build tree
    from _xview import *  # noqa: F401,F403
