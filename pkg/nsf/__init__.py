from . import fields, laws, shapes, util
from .config import CaseConfig, Registry, emit_config, load_config, parse_config
from .constitutive import ConstitutiveSet, validate_hypotheses
from .field import VelocityField
from .geometry import MovingDomain, PenaltyParams
from .grid import Grid
from .law import Law
from .setup import Setup
from .shape import ReferenceShape
from .solver import FieldState, InitialData, Solver, SolverConfig
