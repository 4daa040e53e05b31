"""Heralded preparation of a maximally entangled qutrit pair.

Four atom-cavity systems A1, A2 (Alice) and B1, B2 (Bob) each hold the
photon-conditioned state (lambda_L|gl,V> + lambda_R|gr,H>)/Omega. A detector
click removes one photon coherently from every system whose photon can reach
that detector; after four clicks the atoms are left in

    sin^2(2t) lL^4 |00> + 2 cos^2(2t) lL^2 lR^2 |11> + sin^2(2t) lR^4 |22>

(up to 1/Omega^4) in the qutrit encoding |0> = |gl gl>, |1> = sym(|gl gr>),
|2> = |gr gr>.

Probabilities follow the usual heralding convention: the weight of a click
record is the squared norm of the collapsed state divided by prod(n_d!) over
repeated detectors, i.e. the overlap with the detector Fock state. For four
distinct detectors this is just the squared norm.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .atom_cavity import SystemParams, emission_state, photon_probability, survival_probability
from .errors import DomainError, EncodingLeakError, PreconditionError
from .optics import DETECTORS, Detector, PhotonSource, SplitterAngle, detector_amplitude
from .statespace import ZERO_NORM_THRESHOLD, Ket, Subsystem, fidelity, normalize, tensor_all

SYSTEMS = ("A1", "A2", "B1", "B2")
PARTIES = {"A": ("A1", "A2"), "B": ("B1", "B2")}
QUTRIT_LEVELS = ("0", "1", "2")
LEAK_TOL = 1e-10

GOLDEN_SEQUENCE = (Detector.Da_F, Detector.Db_F, Detector.Da_S, Detector.Db_S)


@dataclass(frozen=True)
class ClickSequence:
    clicks: tuple[Detector, ...]
    times: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "clicks", tuple(Detector.parse(c) for c in self.clicks))
        if self.times is not None:
            times = tuple(float(t) for t in self.times)
            if len(times) != len(self.clicks):
                raise PreconditionError("times and clicks must have equal length")
            if any(b < a for a, b in zip(times, times[1:])):
                raise PreconditionError("click times must be non-decreasing")
            object.__setattr__(self, "times", times)

    @classmethod
    def golden(cls) -> ClickSequence:
        return cls(GOLDEN_SEQUENCE)

    @classmethod
    def parse(cls, spec: str | Sequence[str]) -> ClickSequence:
        names = spec.split(",") if isinstance(spec, str) else list(spec)
        return cls(tuple(n.strip() for n in names))

    def multiplicity_factor(self) -> int:
        """prod(n_d!) over the detector counts of this record."""
        return math.prod(math.factorial(n) for n in Counter(self.clicks).values())


@dataclass(frozen=True)
class QutritPairState:
    """Two-qutrit amplitudes, ``amplitudes[a, b]`` for |a>_A |b>_B."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.amplitudes, dtype=complex)
        if arr.shape != (3, 3):
            raise PreconditionError("qutrit pair needs a 3x3 amplitude array")
        arr.setflags(write=False)
        object.__setattr__(self, "amplitudes", arr)

    def ket(self) -> Ket:
        space = (Subsystem("A", QUTRIT_LEVELS), Subsystem("B", QUTRIT_LEVELS))
        amps = {(str(a), str(b)): self.amplitudes[a, b] for a in range(3) for b in range(3)}
        return Ket(space, amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def fidelity(self, other: QutritPairState) -> float:
        return fidelity(self.ket(), other.ket())

    def reduced_populations(self, party: str = "A") -> np.ndarray:
        probs = np.abs(self.amplitudes) ** 2
        return probs.sum(axis=1) if party == "A" else probs.sum(axis=0)

    def to_json(self) -> dict[str, Any]:
        return {
            "re": self.amplitudes.real.tolist(),
            "im": self.amplitudes.imag.tolist(),
        }


@dataclass(frozen=True)
class CascadeResult:
    raw: Ket
    probability: float
    decoded: QutritPairState | None
    intermediate_states: tuple[Ket, ...]
    click_factors: tuple[float, ...]
    sequence: ClickSequence = field(default_factory=ClickSequence.golden)

    def fidelity_to_target(self) -> float | None:
        if self.decoded is None:
            return None
        return self.decoded.fidelity(target_state())

    def to_json(self) -> dict[str, Any]:
        return {
            "sequence": [d.value for d in self.sequence.clicks],
            "times": list(self.sequence.times) if self.sequence.times else None,
            "probability": self.probability,
            "click_factors": list(self.click_factors),
            "fidelity_to_target": self.fidelity_to_target(),
            "raw": self.raw.to_json(),
            "decoded": self.decoded.to_json() if self.decoded is not None else None,
            "intermediate_states": [k.to_json() for k in self.intermediate_states],
        }


def _params_for(p: SystemParams | Mapping[str, SystemParams]) -> dict[str, SystemParams]:
    if isinstance(p, SystemParams):
        return {name: p for name in SYSTEMS}
    missing = set(SYSTEMS) - set(p)
    if missing:
        raise PreconditionError(f"missing per-cavity parameters for {sorted(missing)}")
    return {name: p[name] for name in SYSTEMS}


def joint_emission_state(p: SystemParams | Mapping[str, SystemParams]) -> Ket:
    """Product of the four photon-conditioned emission states.

    A mapping ``{"A1": params, ...}`` allows non-identical systems.
    """
    per = _params_for(p)
    return tensor_all([emission_state(per[name], name) for name in SYSTEMS])


def _as_taus(taus) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(taus, dtype=float), (len(SYSTEMS),))
    if np.any(arr < 0):
        raise PreconditionError("evolution times must be >= 0")
    return arr


def emission_probability_P2(p: SystemParams, taus) -> float:
    """Probability that every system holds exactly one cavity photon."""
    return float(np.prod([photon_probability(p, t) for t in _as_taus(taus)]))


def survival_probability_P1(p: SystemParams, taus) -> float:
    return float(np.prod([survival_probability(p, t) for t in _as_taus(taus)]))


def _photon_slots(state: Ket) -> list[tuple[int, tuple[str, int]]]:
    slots = []
    for sub in state.space:
        system, _, kind = sub.name.partition(":")
        if kind == "photon":
            slots.append((state.position(sub.name), (system[0], int(system[1:]))))
    return slots


def apply_click(state: Ket, det: Detector | str, angle: SplitterAngle) -> Ket:
    """Unnormalized state after one click on ``det``.

    Sums coherently over every undetected photon that can reach the detector;
    the detected photon's mode is relabelled ``consumed``.
    """
    det = Detector.parse(det)
    if state.is_zero():
        # an earlier click was impossible; the record stays impossible
        return state
    slots = _photon_slots(state)
    out: dict[tuple[str, ...], complex] = {}
    any_photon = False
    for label, amp in state.items():
        for pos, (party, idx) in slots:
            pol = label[pos]
            if pol not in ("V", "H"):
                continue
            any_photon = True
            coef = detector_amplitude(PhotonSource(party, idx, pol), det, angle)
            if coef == 0.0:
                continue
            new = label[:pos] + ("consumed",) + label[pos + 1 :]
            out[new] = out.get(new, 0j) + amp * coef
    if not any_photon:
        raise PreconditionError("no undetected photon left to click on")
    return Ket(state.space, out, _validated=True)


def run_cascade(
    p: SystemParams | Mapping[str, SystemParams],
    angle: SplitterAngle,
    seq: ClickSequence | None = None,
) -> CascadeResult:
    seq = seq or ClickSequence.golden()
    if len(seq.clicks) != len(SYSTEMS):
        raise PreconditionError(f"cascade needs {len(SYSTEMS)} clicks, got {len(seq.clicks)}")
    state = joint_emission_state(p)
    prev_norm2 = state.norm() ** 2
    seen: Counter[Detector] = Counter()
    intermediates = []
    factors = []
    for det in seq.clicks:
        state = apply_click(state, det, angle)
        seen[det] += 1
        norm2 = state.norm() ** 2
        # k-th click on the same detector carries 1/k (Fock-state overlap)
        factors.append(norm2 / prev_norm2 / seen[det] if prev_norm2 > 0 else 0.0)
        prev_norm2 = norm2
        intermediates.append(state)
    raw = state
    if raw.norm() <= ZERO_NORM_THRESHOLD:
        return CascadeResult(raw, 0.0, None, tuple(intermediates), tuple(factors), seq)
    probability = raw.norm() ** 2 / seq.multiplicity_factor()
    return CascadeResult(raw, probability, encode_qutrits(raw), tuple(intermediates), tuple(factors), seq)


_PAIR_INDEX = {("gl", "gl"): 0, ("gl", "gr"): 1, ("gr", "gl"): 2, ("gr", "gr"): 3}
_INV_SQRT2 = 1.0 / math.sqrt(2.0)
# rows: qutrit 0, 1, 2, antisymmetric leak; columns: gl gl, gl gr, gr gl, gr gr
_PAIR_TO_QUTRIT = np.array(
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, _INV_SQRT2, _INV_SQRT2, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, _INV_SQRT2, -_INV_SQRT2, 0.0],
    ]
)


def encode_qutrits(atomic: Ket, *, leak_tol: float = LEAK_TOL) -> QutritPairState:
    """Decode a four-atom ground-state ket into a normalized qutrit pair."""
    pos = {name: atomic.position(f"{name}:atom") for name in SYSTEMS}
    photon_pos = [i for i, s in enumerate(atomic.space) if s.name.endswith(":photon")]
    pairs = np.zeros((4, 4), dtype=complex)
    for label, amp in atomic.items():
        if any(label[i] not in ("consumed", "vac") for i in photon_pos):
            raise DomainError("atomic state still carries an undetected photon")
        try:
            ia = _PAIR_INDEX[(label[pos["A1"]], label[pos["A2"]])]
            ib = _PAIR_INDEX[(label[pos["B1"]], label[pos["B2"]])]
        except KeyError:
            raise DomainError("atomic state has excited-state amplitude") from None
        pairs[ia, ib] += amp
    normed = pairs / np.linalg.norm(pairs) if np.linalg.norm(pairs) > 0 else pairs
    if not np.any(normed):
        raise DomainError("cannot decode a zero state")
    q = _PAIR_TO_QUTRIT @ normed @ _PAIR_TO_QUTRIT.T
    leak = float(np.sum(np.abs(q[3, :]) ** 2) + np.sum(np.abs(q[:3, 3]) ** 2))
    if leak > leak_tol:
        raise EncodingLeakError(f"antisymmetric weight {leak:.3e} exceeds {leak_tol:g}")
    amps = q[:3, :3]
    return QutritPairState(amps / np.linalg.norm(amps))


def target_state() -> QutritPairState:
    return QutritPairState(np.eye(3) / math.sqrt(3.0))


def total_probability(
    p: SystemParams,
    angle: SplitterAngle,
    taus,
    seq: ClickSequence | None = None,
) -> float:
    """Emission probability times the herald weight of the click record."""
    return run_cascade(p, angle, seq).probability * emission_probability_P2(p, taus)


@dataclass(frozen=True)
class Outcome:
    pattern: tuple[int, int, int, int]  # counts on DETECTORS (Da_F, Da_S, Db_F, Db_S)
    weight: float
    probability: float
    atomic: Ket
    decoded: QutritPairState | None

    def sequence(self) -> ClickSequence:
        """A click order realising this pattern (detectors in DETECTORS order)."""
        return ClickSequence(tuple(d for d, n in zip(DETECTORS, self.pattern) for _ in range(n)))


def enumerate_outcomes(p: SystemParams, angle: SplitterAngle) -> list[Outcome]:
    """Brute-force detector occupation distribution of the four emitted photons.

    Every assignment of the four photons to the four detectors is expanded
    explicitly; assignments with the same occupation pattern add coherently.
    ``weight`` uses the same convention as :func:`run_cascade`;
    ``probability`` is the weight normalized over all patterns.
    """
    omega = math.hypot(p.lambda_L, p.lambda_R)
    branch = {"gl": ("V", p.lambda_L / omega), "gr": ("H", p.lambda_R / omega)}
    photon_space = [s for s in joint_emission_state(p).space]
    n_det = len(DETECTORS)

    amps: dict[tuple[int, ...], dict[tuple[str, ...], complex]] = {}
    for atoms in itertools.product(("gl", "gr"), repeat=len(SYSTEMS)):
        coef = math.prod(branch[a][1] for a in atoms)
        if coef == 0.0:
            continue
        sources = [
            PhotonSource(name[0], int(name[1:]), branch[a][0]) for name, a in zip(SYSTEMS, atoms)
        ]
        rows = [[detector_amplitude(s, d, angle) for d in DETECTORS] for s in sources]
        levels = {}
        for name, a in zip(SYSTEMS, atoms):
            levels[f"{name}:atom"] = a
            levels[f"{name}:photon"] = "consumed"
        label = tuple(levels[s.name] for s in photon_space)
        for assign in itertools.product(range(n_det), repeat=len(SYSTEMS)):
            term = math.prod(rows[j][d] for j, d in enumerate(assign))
            if term == 0.0:
                continue
            pattern = tuple(assign.count(d) for d in range(n_det))
            bucket = amps.setdefault(pattern, {})
            bucket[label] = bucket.get(label, 0j) + coef * term

    patterns = sorted(
        (pat for pat in itertools.product(range(len(SYSTEMS) + 1), repeat=n_det) if sum(pat) == len(SYSTEMS)),
        reverse=True,
    )
    raw: list[tuple[tuple[int, ...], Ket, float]] = []
    for pat in patterns:
        scale = math.sqrt(math.prod(math.factorial(n) for n in pat))
        ket = Ket(photon_space, {k: scale * v for k, v in amps.get(pat, {}).items()})
        raw.append((pat, ket, ket.norm() ** 2))
    total = sum(w for _, _, w in raw)
    outcomes = []
    for pat, ket, w in raw:
        decoded = encode_qutrits(ket) if ket.norm() > ZERO_NORM_THRESHOLD else None
        outcomes.append(Outcome(pat, w, w / total, ket, decoded))
    return outcomes


def normalized_intermediates(result: CascadeResult) -> list[Ket]:
    return [normalize(k)[0] for k in result.intermediate_states]


def p3_closed_form(theta: float) -> float:
    """Herald weight of four distinct clicks at lambda_L = lambda_R."""
    s2, c2 = math.sin(2 * theta) ** 2, math.cos(2 * theta) ** 2
    return 2.0 * (s2**2 + 2.0 * c2**2) / 16.0

