from .pulsating import PulsatingDisk
from .rest import Rest
from .rotation import Rotation
from .translation import Translation

#: Built-in velocity fields, in registration order.
BUILTIN = (Rest, Translation, Rotation, PulsatingDisk)
