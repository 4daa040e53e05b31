"""Linear-optical network between the four cavities and the four detectors.

Leaked photons pass a quarter-wave plate (L -> V, R -> H), then a polarizing
beam splitter that merges Alice's and Bob's light onto two paths:

    path a: Alice-V and Bob-H
    path b: Alice-H and Bob-V

Each path ends at a splitter rotated by theta with outputs F (transmitted)
and S (reflected):

    |V> -> cos(theta)|F> + sin(theta)|S>
    |H> -> sin(theta)|F> - cos(theta)|S>

The two cavities of one party are not distinguished by the network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import PreconditionError


class Detector(str, Enum):
    Da_F = "Da_F"
    Da_S = "Da_S"
    Db_F = "Db_F"
    Db_S = "Db_S"

    @property
    def path(self) -> str:
        return self.value[1]

    @property
    def port(self) -> str:
        return self.value[-1]

    @classmethod
    def parse(cls, name: str | Detector) -> Detector:
        if isinstance(name, Detector):
            return name
        try:
            return cls(name)
        except ValueError:
            raise PreconditionError(
                f"unknown detector {name!r}; expected one of {[d.value for d in cls]}"
            ) from None


DETECTORS = tuple(Detector)


@dataclass(frozen=True)
class PhotonSource:
    party: str  # "A" or "B"
    cavity_index: int  # 1 or 2
    polarization: str  # "V" or "H"

    def __post_init__(self) -> None:
        if self.party not in ("A", "B"):
            raise PreconditionError(f"party must be 'A' or 'B', got {self.party!r}")
        if self.cavity_index not in (1, 2):
            raise PreconditionError(f"cavity_index must be 1 or 2, got {self.cavity_index!r}")
        if self.polarization not in ("V", "H"):
            raise PreconditionError(f"polarization must be 'V' or 'H', got {self.polarization!r}")


@dataclass(frozen=True)
class SplitterAngle:
    theta: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.theta < math.pi / 2):
            raise PreconditionError(f"theta must lie in [0, pi/2), got {self.theta}")

    @classmethod
    def canonical(cls) -> SplitterAngle:
        """First-quadrant solution of tan^2(2 theta) = 2."""
        return cls(canonical_theta())

    @classmethod
    def from_tan2(cls, tan2_2theta: float) -> SplitterAngle:
        """Angle with tan^2(2 theta) = value and 2 theta in [0, pi/2)."""
        return cls(0.5 * math.atan(math.sqrt(tan2_2theta)))


def canonical_theta() -> float:
    return 0.5 * math.atan(math.sqrt(2.0))


_QWP = {"L": "V", "R": "H"}
_QWP_INV = {v: k for k, v in _QWP.items()}


def qwp_map(circular: str) -> str:
    try:
        return _QWP[circular]
    except KeyError:
        raise PreconditionError(f"circular polarization must be 'L' or 'R', got {circular!r}") from None


def qwp_inverse(linear: str) -> str:
    try:
        return _QWP_INV[linear]
    except KeyError:
        raise PreconditionError(f"linear polarization must be 'V' or 'H', got {linear!r}") from None


_ROUTE = {("A", "V"): "a", ("A", "H"): "b", ("B", "V"): "b", ("B", "H"): "a"}


def route(party: str, polarization: str) -> str:
    """Output path of the merging PBS for a party's V or H photon."""
    try:
        return _ROUTE[(party, polarization)]
    except KeyError:
        raise PreconditionError(f"no route for ({party!r}, {polarization!r})") from None


def fs_pbs_amplitudes(polarization: str, angle: SplitterAngle) -> dict[str, float]:
    c, s = math.cos(angle.theta), math.sin(angle.theta)
    if polarization == "V":
        return {"F": c, "S": s}
    if polarization == "H":
        return {"F": s, "S": -c}
    raise PreconditionError(f"polarization must be 'V' or 'H', got {polarization!r}")


def detector_amplitude(src: PhotonSource, det: Detector | str, angle: SplitterAngle) -> float:
    det = Detector.parse(det)
    if route(src.party, src.polarization) != det.path:
        return 0.0
    return fs_pbs_amplitudes(src.polarization, angle)[det.port]


SOURCE_MODES = (("A", "V"), ("A", "H"), ("B", "V"), ("B", "H"))


def transfer_matrix(angle: SplitterAngle) -> np.ndarray:
    """Rows: source modes (A-V, A-H, B-V, B-H); columns: detectors in DETECTORS order."""
    return np.array(
        [
            [detector_amplitude(PhotonSource(party, 1, pol), d, angle) for d in DETECTORS]
            for party, pol in SOURCE_MODES
        ]
    )
