"""Random-ferns keypoint recognition: Python bindings of the C++ core."""

from ._ferns import *  # noqa: F401,F403
from ._ferns import __doc__  # noqa: F401
