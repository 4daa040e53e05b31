"""One Lambda atom in a two-mode leaky cavity, conditioned on no emission.

Units: hbar = 1 and rates are quoted in units of the cavity field decay rate
``kappa`` (so times are kappa*t). The coherent dynamics starting from
``|e,0>`` stay in the single-excitation span ``{|e,0>, |gl,V>, |gr,H>}``;
the circular cavity modes are already relabelled V/H (post quarter-wave
plate).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateStateError, PreconditionError
from .statespace import Ket, Subsystem

ATOM_LEVELS = ("e", "gl", "gr")
PHOTON_LEVELS = ("vac", "V", "H", "consumed")

# coherent basis order used by the matrix routines below
COHERENT_BASIS = ("e0", "glV", "grH")


@dataclass(frozen=True)
class SystemParams:
    lambda_L: float
    lambda_R: float
    kappa: float = 1.0
    gamma_l: float = 0.0
    gamma_r: float = 0.0

    def __post_init__(self) -> None:
        for name in ("lambda_L", "lambda_R", "kappa", "gamma_l", "gamma_r"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise PreconditionError(f"{name} must be finite and >= 0, got {v}")
        if self.kappa <= 0:
            raise PreconditionError("kappa must be > 0")
        if self.lambda_L**2 + self.lambda_R**2 <= 0:
            raise PreconditionError("lambda_L^2 + lambda_R^2 must be > 0")

    @classmethod
    def symmetric(cls, lam: float, gamma: float = 0.0, kappa: float = 1.0) -> SystemParams:
        """lambda_L = lambda_R = lam and gamma_l = gamma_r = gamma."""
        return cls(lam, lam, kappa, gamma, gamma)

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class DerivedRates:
    Omega: float
    Gamma: float
    Delta: float
    Omega_k: complex  # real >= 0 when underdamped, positive imaginary when overdamped

    @property
    def underdamped(self) -> bool:
        return self.Omega_k.imag == 0.0 and self.Omega_k.real > 0.0


@dataclass(frozen=True)
class NoJumpAmplitudes:
    x: complex
    y: complex
    z: complex
    t: float

    def norm_squared(self) -> float:
        return abs(self.x) ** 2 + abs(self.y) ** 2 + abs(self.z) ** 2

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=complex)


def derive_rates(p: SystemParams) -> DerivedRates:
    omega2 = p.lambda_L**2 + p.lambda_R**2
    gamma_sum = p.gamma_l + p.gamma_r
    delta = p.kappa - gamma_sum
    disc = omega2 - delta**2 / 4.0
    omega_k = complex(math.sqrt(disc), 0.0) if disc >= 0 else complex(0.0, math.sqrt(-disc))
    return DerivedRates(
        Omega=math.sqrt(omega2),
        Gamma=gamma_sum + p.kappa,
        Delta=delta,
        Omega_k=omega_k,
    )


def _check_time(t) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise PreconditionError("time must be finite and >= 0")
    return arr


def _cos_and_sinc(omega_k: complex, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """cos(Omega_k t) and sin(Omega_k t)/Omega_k, both real on either branch.

    sin(w t)/w is written as t*sinc so the critical point w=0 is the limit t,
    and the imaginary branch becomes sinh(|w| t)/|w| automatically.
    """
    wt = np.asarray(omega_k * t, dtype=complex)
    c = np.cos(wt)
    # np.sinc overflows for subnormal complex arguments; use the series there
    small = np.abs(wt) < 1e-4
    safe = np.where(small, 1.0, wt)
    ratio = np.where(small, 1 - wt**2 / 6 + wt**4 / 120, np.sin(safe) / safe)
    s = t * ratio
    return c.real, s.real


def no_jump_amplitudes(p: SystemParams, t: float) -> NoJumpAmplitudes:
    """Closed-form unnormalized amplitudes of |e,0>, |gl,V>, |gr,H> at time t."""
    x, y, z = no_jump_amplitudes_array(p, t)
    return NoJumpAmplitudes(complex(x), complex(y), complex(z), float(t))


def no_jump_amplitudes_array(p: SystemParams, t) -> np.ndarray:
    """Vectorized :func:`no_jump_amplitudes`; returns shape (3, *t.shape)."""
    tt = _check_time(t)
    r = derive_rates(p)
    c, s = _cos_and_sinc(r.Omega_k, tt)
    damp = np.exp(-0.5 * r.Gamma * tt)
    x = damp * (c + 0.5 * r.Delta * s)
    y = -1j * damp * s * p.lambda_L
    z = -1j * damp * s * p.lambda_R
    return np.stack([x + 0j, y, z])


def survival_probability(p: SystemParams, t):
    """Probability that no photon leaks and no spontaneous decay occurs by t.

    Evaluated from its own closed form, not as |x|^2+|y|^2+|z|^2, so the two
    can be checked against each other.
    """
    tt = _check_time(t)
    r = derive_rates(p)
    c, s = _cos_and_sinc(r.Omega_k, tt)
    val = np.exp(-r.Gamma * tt) * ((c + 0.5 * r.Delta * s) ** 2 + s**2 * r.Omega**2)
    return float(val) if np.ndim(val) == 0 else val


def photon_probability(p: SystemParams, t):
    """|y|^2 + |z|^2: weight of the branch holding one cavity photon."""
    tt = _check_time(t)
    r = derive_rates(p)
    _, s = _cos_and_sinc(r.Omega_k, tt)
    val = np.exp(-r.Gamma * tt) * s**2 * r.Omega**2
    return float(val) if np.ndim(val) == 0 else val


def effective_hamiltonian(p: SystemParams) -> np.ndarray:
    """Non-Hermitian H_eff on (|e,0>, |gl,V>, |gr,H>)."""
    g = p.gamma_l + p.gamma_r
    return np.array(
        [
            [-1j * g, p.lambda_L, p.lambda_R],
            [p.lambda_L, -1j * p.kappa, 0.0],
            [p.lambda_R, 0.0, -1j * p.kappa],
        ],
        dtype=complex,
    )


def rk4_step_matrix(generator: np.ndarray, h: float) -> np.ndarray:
    """One classical RK4 step for dy/dt = generator @ y, as a matrix.

    The four stages are applied to every column of the identity, which gives
    the exact RK4 update map for a linear autonomous system.
    """
    eye = np.eye(generator.shape[0], dtype=complex)

    def f(y):
        return generator @ y

    k1 = f(eye)
    k2 = f(eye + 0.5 * h * k1)
    k3 = f(eye + 0.5 * h * k2)
    k4 = f(eye + h * k3)
    return eye + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def propagate_numeric(p: SystemParams, t: float, dt: float = 1e-4) -> NoJumpAmplitudes:
    """Integrate i d|psi>/dt = H_eff |psi> with fixed-step RK4 from |e,0>.

    The step is shrunk so an integer number of steps lands on ``t``.
    """
    return propagate_numeric_grid(p, [t], dt)[0]


def propagate_numeric_grid(p: SystemParams, times, dt: float = 1e-4) -> list[NoJumpAmplitudes]:
    """RK4 amplitudes at each time of a non-decreasing grid, sharing one pass.

    Each interval between outputs is split into ceil(interval/dt) equal steps.
    """
    ts = _check_time(times)
    if dt <= 0:
        raise PreconditionError("dt must be > 0")
    if np.any(np.diff(ts) < 0):
        raise PreconditionError("times must be non-decreasing")
    gen = -1j * effective_hamiltonian(p)
    psi = np.array([1.0, 0.0, 0.0], dtype=complex)
    now = 0.0
    cache: dict[float, np.ndarray] = {}
    out = []
    for target in ts:
        span = float(target) - now
        if span > 0:
            n = max(1, math.ceil(span / dt - 1e-9))
            h = span / n
            step = cache.get(h)
            if step is None:
                step = cache.setdefault(h, rk4_step_matrix(gen, h))
            for _ in range(n):
                psi = step @ psi
            now = float(target)
        out.append(NoJumpAmplitudes(complex(psi[0]), complex(psi[1]), complex(psi[2]), float(target)))
    return out


def emission_state(p: SystemParams, name: str = "S") -> Ket:
    """(lambda_L |gl,V> + lambda_R |gr,H>)/Omega for system ``name``.

    This is the single-system state conditioned on a cavity photon being
    present; the |e,0> branch never reaches a detector.
    """
    omega = math.hypot(p.lambda_L, p.lambda_R)
    if omega == 0:
        raise DegenerateStateError("emission state undefined when both couplings vanish")
    atom, photon = system_subsystems(name)
    return Ket.from_terms(
        (atom, photon),
        [
            ({atom.name: "gl", photon.name: "V"}, p.lambda_L / omega),
            ({atom.name: "gr", photon.name: "H"}, p.lambda_R / omega),
        ],
    )


def system_subsystems(name: str) -> tuple[Subsystem, Subsystem]:
    return Subsystem(f"{name}:atom", ATOM_LEVELS), Subsystem(f"{name}:photon", PHOTON_LEVELS)
