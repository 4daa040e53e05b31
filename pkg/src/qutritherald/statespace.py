"""Sparse kets over labelled tensor-product bases.

A :class:`Ket` stores complex amplitudes keyed by basis labels. A label is a
tuple of level names, one per subsystem, aligned with the ket's ``space``
(subsystems sorted by name). Most of the protocol's joint space is empty, so
a dict of nonzero amplitudes keeps every operation exact and inspectable.

Kets are immutable; every operation returns a new ket.
"""

from __future__ import annotations

import cmath
import json
import math
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from types import MappingProxyType
from typing import Any, Callable

from .errors import CompositionError, DegenerateStateError, PreconditionError

PRUNE_THRESHOLD = 1e-15
ZERO_NORM_THRESHOLD = 1e-14
NORMALIZED_TOL = 1e-10

Label = tuple[str, ...]


@dataclass(frozen=True, order=True)
class Subsystem:
    """A named subsystem with a finite alphabet of level names."""

    name: str
    levels: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.levels)) != len(self.levels):
            raise PreconditionError(f"duplicate levels in subsystem {self.name!r}")


Space = tuple[Subsystem, ...]


def make_space(subsystems: Iterable[Subsystem]) -> Space:
    """Canonical (name-sorted) space; rejects duplicate subsystem names."""
    space = tuple(sorted(subsystems, key=lambda s: s.name))
    names = [s.name for s in space]
    if len(set(names)) != len(names):
        raise CompositionError(f"duplicate subsystem ids in {names}")
    return space


class Ket:
    """Immutable sparse state vector.

    ``amps`` maps labels to complex amplitudes. Entries with magnitude below
    ``prune`` are dropped on construction.
    """

    __slots__ = ("_space", "_amps", "_index")

    def __init__(
        self,
        space: Iterable[Subsystem],
        amps: Mapping[Label, complex] | None = None,
        *,
        prune: float = PRUNE_THRESHOLD,
        _validated: bool = False,
    ) -> None:
        sp = make_space(space)
        index = {s.name: i for i, s in enumerate(sp)}
        clean: dict[Label, complex] = {}
        for label, amp in (amps or {}).items():
            if not _validated:
                _check_label(sp, label)
            a = complex(amp)
            if abs(a) >= prune:
                clean[label] = a
        self._space = sp
        self._amps = MappingProxyType(clean)
        self._index = index

    # -- construction helpers -------------------------------------------------

    @classmethod
    def basis(cls, space: Iterable[Subsystem], levels: Mapping[str, str]) -> Ket:
        """Unit ket on the basis state given as ``{subsystem name: level}``."""
        sp = make_space(space)
        return cls(sp, {label_from_mapping(sp, levels): 1.0})

    @classmethod
    def from_terms(
        cls, space: Iterable[Subsystem], terms: Iterable[tuple[Mapping[str, str], complex]]
    ) -> Ket:
        sp = make_space(space)
        amps: dict[Label, complex] = {}
        for levels, amp in terms:
            label = label_from_mapping(sp, levels)
            amps[label] = amps.get(label, 0.0) + complex(amp)
        return cls(sp, amps)

    @classmethod
    def zero(cls, space: Iterable[Subsystem]) -> Ket:
        return cls(space, {})

    # -- accessors ------------------------------------------------------------

    @property
    def space(self) -> Space:
        return self._space

    @property
    def amps(self) -> Mapping[Label, complex]:
        return self._amps

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self._space)

    def position(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise CompositionError(f"no subsystem {name!r} in {self.names}") from None

    def items(self) -> Iterator[tuple[Label, complex]]:
        return iter(self._amps.items())

    def __len__(self) -> int:
        return len(self._amps)

    def __getitem__(self, levels: Mapping[str, str] | Label) -> complex:
        if isinstance(levels, Mapping):
            levels = label_from_mapping(self._space, levels)
        return self._amps.get(tuple(levels), 0j)

    def label_dict(self, label: Label) -> dict[str, str]:
        return dict(zip(self.names, label))

    def is_zero(self) -> bool:
        return not self._amps

    # -- arithmetic -----------------------------------------------------------

    def _same_space(self, other: Ket) -> None:
        if self._space != other._space:
            raise CompositionError(
                f"space mismatch: {self.names} vs {other.names}"
            )

    def __add__(self, other: Ket) -> Ket:
        self._same_space(other)
        amps = dict(self._amps)
        for label, a in other._amps.items():
            amps[label] = amps.get(label, 0j) + a
        return Ket(self._space, amps, _validated=True)

    def __sub__(self, other: Ket) -> Ket:
        return self + (-1.0) * other

    def __mul__(self, scalar: complex) -> Ket:
        s = complex(scalar)
        return Ket(self._space, {k: s * v for k, v in self._amps.items()}, _validated=True)

    __rmul__ = __mul__

    def __truediv__(self, scalar: complex) -> Ket:
        return self * (1.0 / complex(scalar))

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self._amps.values()))

    def map_labels(self, fn: Callable[[dict[str, str]], tuple[Mapping[str, str], complex] | None]) -> Ket:
        """Apply a label-wise linear map.

        ``fn`` receives the label as a dict and returns ``(new_levels, factor)``
        or ``None`` to drop the term. Coinciding images add coherently.
        """
        out: dict[Label, complex] = {}
        for label, a in self._amps.items():
            res = fn(self.label_dict(label))
            if res is None:
                continue
            levels, factor = res
            new = label_from_mapping(self._space, levels)
            out[new] = out.get(new, 0j) + a * factor
        return Ket(self._space, out, _validated=True)

    def allclose(self, other: Ket, atol: float = 1e-12) -> bool:
        self._same_space(other)
        keys = set(self._amps) | set(other._amps)
        return all(abs(self[k] - other[k]) <= atol for k in keys)

    def __repr__(self) -> str:
        terms = ", ".join(
            f"{a:.6g}|{','.join(k)}>" for k, a in sorted(self._amps.items())[:6]
        )
        more = "" if len(self) <= 6 else f", ... ({len(self)} terms)"
        return f"Ket[{','.join(self.names)}]({terms}{more})"

    # -- serialization --------------------------------------------------------

    def to_json(self) -> dict[str, Any]:
        return {
            "space": [{"id": s.name, "levels": list(s.levels)} for s in self._space],
            "amps": [
                {"label": self.label_dict(k), "re": a.real, "im": a.imag}
                for k, a in sorted(self._amps.items())
            ],
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any] | str) -> Ket:
        if isinstance(obj, str):
            obj = json.loads(obj)
        space = make_space(Subsystem(s["id"], tuple(s["levels"])) for s in obj["space"])
        terms = [(e["label"], complex(e["re"], e["im"])) for e in obj["amps"]]
        return cls.from_terms(space, terms)


def _check_label(space: Space, label: Label) -> None:
    if len(label) != len(space):
        raise CompositionError(f"label {label} does not match space of size {len(space)}")
    for sub, level in zip(space, label):
        if level not in sub.levels:
            raise PreconditionError(f"level {level!r} not in alphabet of {sub.name!r}")


def label_from_mapping(space: Space, levels: Mapping[str, str]) -> Label:
    names = {s.name for s in space}
    extra = set(levels) - names
    if extra:
        raise CompositionError(f"unknown subsystems {sorted(extra)}")
    try:
        label = tuple(levels[s.name] for s in space)
    except KeyError as exc:
        raise CompositionError(f"missing level for subsystem {exc.args[0]!r}") from None
    _check_label(space, label)
    return label


def tensor_product(a: Ket, b: Ket) -> Ket:
    """Product state on the union of two disjoint spaces."""
    overlap = set(a.names) & set(b.names)
    if overlap:
        raise CompositionError(f"overlapping subsystem ids {sorted(overlap)}")
    space = make_space(a.space + b.space)
    # positions of each factor's subsystems in the merged order
    src = [("a", a.position(s.name)) if s.name in a.names else ("b", b.position(s.name)) for s in space]
    amps: dict[Label, complex] = {}
    for la, xa in a.items():
        for lb, xb in b.items():
            label = tuple(la[i] if which == "a" else lb[i] for which, i in src)
            amps[label] = xa * xb
    return Ket(space, amps, _validated=True)


def tensor_all(kets: Sequence[Ket]) -> Ket:
    if not kets:
        raise PreconditionError("need at least one ket")
    out = kets[0]
    for k in kets[1:]:
        out = tensor_product(out, k)
    return out


def inner_product(a: Ket, b: Ket) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    a._same_space(b)
    small, large, conj_small = (a, b, True) if len(a) <= len(b) else (b, a, False)
    total = 0j
    for label, x in small.items():
        y = large.amps.get(label)
        if y is not None:
            total += x.conjugate() * y if conj_small else y.conjugate() * x
    return total


def normalize(k: Ket, *, zero_threshold: float = ZERO_NORM_THRESHOLD) -> tuple[Ket, float]:
    n = k.norm()
    if n <= zero_threshold:
        raise DegenerateStateError(f"cannot normalize ket with norm {n:.3e}")
    return k / n, n


def fidelity(a: Ket, b: Ket, *, tol: float = NORMALIZED_TOL) -> float:
    """|<a|b>|^2 for normalized kets."""
    a._same_space(b)
    for k in (a, b):
        if abs(k.norm() - 1.0) > tol:
            raise PreconditionError(f"fidelity needs normalized kets (norm={k.norm():.12g})")
    f = abs(inner_product(a, b)) ** 2
    return min(1.0, f)


def global_phase_distance(a: Ket, b: Ket) -> float:
    """max |a - e^{i phi} b| over labels, with phi chosen to align the kets."""
    a._same_space(b)
    ov = inner_product(b, a)
    phase = cmath.exp(1j * cmath.phase(ov)) if abs(ov) > 0 else 1.0
    keys = set(a.amps) | set(b.amps)
    return max((abs(a[k] - phase * b[k]) for k in keys), default=0.0)
