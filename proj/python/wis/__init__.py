from ._wis import *  # noqa: F401,F403
