"""AdaProj anomalous sound detection: geometry, loss heads, features, scoring and metrics."""

from ._core import *  # noqa: F401,F403
from ._core import AdaprojError, __doc__  # noqa: F401
