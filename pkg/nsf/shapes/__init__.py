from .disk import Disk
from .halfspace import HalfSpace

BUILTIN = (Disk, HalfSpace)
