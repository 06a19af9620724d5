from ._ergolab import *  # noqa: F401,F403
from ._ergolab import __version__  # noqa: F401
