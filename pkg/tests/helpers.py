import os

import nsf
from nsf.config import CaseConfig, load_config
from nsf.fields import PulsatingDisk, Rest, Rotation, Translation
from nsf.geometry import MovingDomain
from nsf.shapes import Disk, HalfSpace

CASES = os.path.join(os.path.dirname(nsf.__file__), "cases")

FIELDS = {"rest": Rest, "rotation": Rotation, "translation": Translation, "pulsating-disk": PulsatingDisk}


def case_path(name: str) -> str:
    return os.path.join(CASES, f"{name}.nsf")


def shipped_case(name: str) -> CaseConfig:
    return load_config(case_path(name))


def disk_domain(
    field: str = "rest", radius: float = 0.5, dim: int = 2, R: float = 1.0, **params: tuple[float, ...]
) -> MovingDomain:
    return MovingDomain(FIELDS[field](R, dim, **params), Disk(dim, radius=(radius,)))


def fluid_box(dim: int = 2, R: float = 1.0) -> MovingDomain:
    """A domain at rest whose fluid fills the whole box."""
    return MovingDomain(Rest(R, dim), HalfSpace(dim, offset=(100.0,)))
