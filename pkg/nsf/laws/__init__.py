from .power_law import PowerLaw
from .tabulated import Tabulated

BUILTIN = (PowerLaw, Tabulated)
