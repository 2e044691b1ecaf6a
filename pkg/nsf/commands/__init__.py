from .report import ReportCommand
from .run import RunCommand
from .sweep import SweepCommand
from .validate import ValidateCommand
