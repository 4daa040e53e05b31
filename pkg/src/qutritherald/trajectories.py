"""Quantum-jump trajectories and the master equation for one atom-cavity system.

Five-state basis: |e,0>, |gl,V>, |gr,H>, |gl,0>, |gr,0>. Jump channels are
cavity leakage (rate 2 kappa per mode) and spontaneous emission (rate
2 gamma_l, 2 gamma_r). Every channel lands on |gl,0> or |gr,0>, which are
dark (H_eff and every jump operator annihilate them), so a trajectory has at
most one jump.

Randomness: trajectory ``i`` of an ensemble seeded with ``master_seed`` draws
from its own Philox stream keyed by ``(master_seed, i)``. Ensembles are
therefore identical however the index range is split.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate, linalg

from .atom_cavity import SystemParams, no_jump_amplitudes_array, rk4_step_matrix
from .errors import AccuracyError, PreconditionError

BASIS = ("e0", "glV", "grH", "gl0", "gr0")
E0, GLV, GRH, GL0, GR0 = range(5)

BISECTION_TOL = 1e-10
COARSE_STEPS = 4096


class Channel(str, Enum):
    CavityLeakL = "CavityLeakL"
    CavityLeakR = "CavityLeakR"
    SpontEmitL = "SpontEmitL"
    SpontEmitR = "SpontEmitR"

    @property
    def detectable(self) -> bool:
        """Only cavity leakage reaches the optical network."""
        return self in (Channel.CavityLeakL, Channel.CavityLeakR)


CHANNELS = tuple(Channel)
LEAKED_POLARIZATION = {Channel.CavityLeakL: "V", Channel.CavityLeakR: "H"}


@dataclass(frozen=True)
class JumpChannel:
    id: Channel
    rate_factor: float
    operator: np.ndarray  # sqrt(rate) * |to><from|

    @property
    def enabled(self) -> bool:
        return self.rate_factor > 0


def _ketbra(to: int, frm: int) -> np.ndarray:
    m = np.zeros((5, 5), dtype=complex)
    m[to, frm] = 1.0
    return m


def jump_channels(p: SystemParams) -> list[JumpChannel]:
    spec = [
        (Channel.CavityLeakL, 2 * p.kappa, GL0, GLV),
        (Channel.CavityLeakR, 2 * p.kappa, GR0, GRH),
        (Channel.SpontEmitL, 2 * p.gamma_l, GL0, E0),
        (Channel.SpontEmitR, 2 * p.gamma_r, GR0, E0),
    ]
    return [JumpChannel(cid, rate, math.sqrt(rate) * _ketbra(to, frm)) for cid, rate, to, frm in spec]


def effective_hamiltonian5(p: SystemParams) -> np.ndarray:
    """H_eff = H - (i/2) sum C^dag C on the five-state basis."""
    h = np.zeros((5, 5), dtype=complex)
    h[E0, GLV] = h[GLV, E0] = p.lambda_L
    h[E0, GRH] = h[GRH, E0] = p.lambda_R
    for ch in jump_channels(p):
        h -= 0.5j * ch.operator.conj().T @ ch.operator
    return h


def lindblad_generator(p: SystemParams) -> np.ndarray:
    """Superoperator on row-major vec(rho): -i(H rho - rho H^dag) + sum C rho C^dag."""
    h = effective_hamiltonian5(p)
    eye = np.eye(5)
    gen = -1j * (np.kron(h, eye) - np.kron(eye, h.conj()))
    for ch in jump_channels(p):
        gen += np.kron(ch.operator, ch.operator.conj())
    return gen


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray
    t: float

    def population(self, level: str) -> float:
        i = BASIS.index(level)
        return float(self.matrix[i, i].real)

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))))


def initial_density() -> np.ndarray:
    rho = np.zeros((5, 5), dtype=complex)
    rho[E0, E0] = 1.0
    return rho


def _rk4_stable(gen: np.ndarray, h: float) -> bool:
    z = np.linalg.eigvals(gen) * h
    growth = np.abs(1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24)
    return bool(np.all(growth <= 1 + 1e-12))


def integrate_master_equation(p: SystemParams, t: float, dt: float = 1e-4) -> DensityMatrix:
    """Fixed-step RK4 solution of the master equation from |e,0><e,0|."""
    if t < 0:
        raise PreconditionError("t must be >= 0")
    if dt <= 0:
        raise PreconditionError("dt must be > 0")
    rho = initial_density()
    if t == 0:
        return DensityMatrix(rho, 0.0)
    n = max(1, math.ceil(t / dt - 1e-9))
    h = t / n
    gen = lindblad_generator(p)
    if not _rk4_stable(gen, h):
        raise AccuracyError(f"RK4 step {h:.3g} is outside the stability region for these rates")
    step = rk4_step_matrix(gen, h)
    vec = rho.reshape(-1)
    for _ in range(n):
        vec = step @ vec
    out = vec.reshape(5, 5)
    drift = abs(np.trace(out).real - 1.0)
    if drift > 1e-6 or not np.all(np.isfinite(out)):
        raise AccuracyError(f"trace drift {drift:.3e} with step {h:.3g}")
    return DensityMatrix(out, float(t))


class NoJumpPropagator:
    """Unnormalized no-jump state exp(-i H_eff t)|e,0>, evaluated by eigendecomposition.

    Falls back to a matrix exponential per time when H_eff is (close to)
    defective, i.e. at the critical-damping point.
    """

    def __init__(self, p: SystemParams) -> None:
        self.h = effective_hamiltonian5(p)
        psi0 = np.zeros(5, dtype=complex)
        psi0[E0] = 1.0
        self.psi0 = psi0
        w, v = np.linalg.eig(self.h)
        self._use_eig = np.linalg.cond(v) < 1e8
        if self._use_eig:
            self._w = w
            self._v = v
            self._c = np.linalg.solve(v, psi0)

    def states(self, t) -> np.ndarray:
        """Shape (len(t), 5). Computed column by column so results do not depend on batch size."""
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        if not self._use_eig:
            return np.array([linalg.expm(-1j * self.h * s) @ self.psi0 for s in tt])
        out = np.zeros((tt.size, 5), dtype=complex)
        for m in range(5):
            coeff = self._c[m] * np.exp(-1j * self._w[m] * tt)
            for k in range(5):
                out[:, k] += self._v[k, m] * coeff
        return out

    def norm2(self, t) -> np.ndarray:
        s = self.states(t)
        return np.sum(s.real**2 + s.imag**2, axis=1)


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def _draw_uniforms(master_seed: int, indices: np.ndarray) -> np.ndarray:
    return np.array([trajectory_rng(master_seed, i).random(2) for i in indices]).reshape(-1, 2)


@dataclass(frozen=True)
class TrajectoryRecord:
    seed: int
    index: int
    t_max: float
    events: tuple[tuple[float, Channel], ...]
    final_state: np.ndarray
    final_label: str | None
    survived_no_jump_until: float | None
    leaked_photon: str | None

    @property
    def failed(self) -> bool:
        """Spontaneous emission into free space can never herald."""
        return any(not ch.detectable for _, ch in self.events)


class TrajectoryEnsemble:
    """Outcome arrays for trajectories ``start .. start+n-1`` of one master seed.

    ``jump_time`` is NaN for trajectories without a jump up to ``t_max``;
    ``channel`` holds indices into :data:`CHANNELS` (-1 for none).
    """

    def __init__(
        self,
        p: SystemParams,
        t_max: float,
        master_seed: int,
        indices: np.ndarray,
        jump_time: np.ndarray,
        channel: np.ndarray,
    ) -> None:
        self.params = p
        self.t_max = float(t_max)
        self.master_seed = int(master_seed)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.jump_time = np.asarray(jump_time, dtype=float)
        self.channel = np.asarray(channel, dtype=np.int64)
        self._prop = NoJumpPropagator(p)

    def __len__(self) -> int:
        return self.indices.size

    @classmethod
    def merge(cls, parts: list[TrajectoryEnsemble]) -> TrajectoryEnsemble:
        first = parts[0]
        for q in parts[1:]:
            if (q.params, q.t_max, q.master_seed) != (first.params, first.t_max, first.master_seed):
                raise PreconditionError("cannot merge ensembles with different settings")
        order = np.argsort(np.concatenate([q.indices for q in parts]), kind="stable")
        return cls(
            first.params,
            first.t_max,
            first.master_seed,
            np.concatenate([q.indices for q in parts])[order],
            np.concatenate([q.jump_time for q in parts])[order],
            np.concatenate([q.channel for q in parts])[order],
        )

    def _check_t(self, t: float) -> None:
        if t < 0 or t > self.t_max + 1e-15:
            raise PreconditionError(f"t={t} outside simulated window [0, {self.t_max}]")

    def jumped_by(self, t: float) -> np.ndarray:
        self._check_t(t)
        return np.nan_to_num(self.jump_time, nan=np.inf) <= t

    def no_jump_fraction(self, t: float) -> tuple[float, float]:
        """Fraction without a jump up to t and its binomial standard error."""
        f = 1.0 - float(np.mean(self.jumped_by(t)))
        return f, math.sqrt(max(f * (1 - f), 0.0) / len(self))

    def channel_counts(self, t: float) -> dict[Channel, int]:
        jumped = self.jumped_by(t)
        return {ch: int(np.sum(jumped & (self.channel == i))) for i, ch in enumerate(CHANNELS)}

    def density_matrix(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Ensemble-averaged rho(t) and its entrywise standard error.

        The standard error is complex: real part for Re(rho), imaginary part
        for Im(rho).
        """
        n = len(self)
        groups: list[tuple[float, np.ndarray]] = []
        psi = self._prop.states([t])[0]
        psi = psi / np.linalg.norm(psi)
        groups.append((self.no_jump_fraction(t)[0], np.outer(psi, psi.conj())))
        posts = post_jump_states(self.params)
        for ch, count in self.channel_counts(t).items():
            groups.append((count / n, np.outer(posts[ch], posts[ch].conj())))
        mean = sum(f * v for f, v in groups)
        var_re = sum(f * (v.real - mean.real) ** 2 for f, v in groups)
        var_im = sum(f * (v.imag - mean.imag) ** 2 for f, v in groups)
        se = np.sqrt(var_re / n) + 1j * np.sqrt(var_im / n)
        return mean, se

    def record(self, k: int) -> TrajectoryRecord:
        """Full record of the k-th trajectory held by this ensemble."""
        tj = self.jump_time[k]
        if np.isnan(tj):
            psi = self._prop.states([self.t_max])[0]
            psi = psi / np.linalg.norm(psi)
            return TrajectoryRecord(
                self.master_seed, int(self.indices[k]), self.t_max, (), psi, None, self.t_max, None
            )
        ch = CHANNELS[self.channel[k]]
        post = post_jump_states(self.params)[ch]
        label = BASIS[int(np.argmax(np.abs(post)))]
        return TrajectoryRecord(
            self.master_seed,
            int(self.indices[k]),
            self.t_max,
            ((float(tj), ch),),
            post,
            label,
            None,
            LEAKED_POLARIZATION.get(ch),
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "first_jump_time", "channel", "survived"])
        for i, tj, c in zip(self.indices, self.jump_time, self.channel):
            if np.isnan(tj):
                w.writerow([int(i), "", "", 1])
            else:
                w.writerow([int(i), repr(float(tj)), CHANNELS[c].value, 0])
        return buf.getvalue()


def post_jump_states(p: SystemParams) -> dict[Channel, np.ndarray]:
    out = {}
    for ch in jump_channels(p):
        col = ch.operator[:, np.argmax(np.abs(ch.operator).sum(axis=0))]
        out[ch.id] = col / np.linalg.norm(col) if np.any(col) else col
    return out


def _check_dark(p: SystemParams) -> None:
    h = effective_hamiltonian5(p)
    ops = [ch.operator for ch in jump_channels(p)]
    for idx in (GL0, GR0):
        if np.any(h[:, idx]) or any(np.any(op[:, idx]) for op in ops):
            raise AssertionError("post-jump states must be dark")


def _simulate(p: SystemParams, t_max: float, uniforms: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First-jump times and channels for rows of (r_norm, r_channel) uniforms."""
    _check_dark(p)
    prop = NoJumpPropagator(p)
    grid = np.linspace(0.0, t_max, COARSE_STEPS + 1)
    n2 = prop.norm2(grid)
    n2 = np.minimum.accumulate(n2)  # guard against round-off wiggles
    r = uniforms[:, 0]
    jumps = r > n2[-1]
    jump_time = np.full(r.size, np.nan)
    channel = np.full(r.size, -1, dtype=np.int64)
    if not np.any(jumps):
        return jump_time, channel

    rj = r[jumps]
    k = np.searchsorted(-n2, -rj, side="right")
    lo, hi = grid[k - 1], grid[k]
    iters = max(1, math.ceil(math.log2((t_max / COARSE_STEPS) / BISECTION_TOL)))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = prop.norm2(mid) < rj
        hi = np.where(below, mid, hi)
        lo = np.where(below, lo, mid)
    tj = hi
    psi = prop.states(tj)
    chans = jump_channels(p)
    weights = np.stack(
        [np.sum(np.abs(psi @ ch.operator.T) ** 2, axis=1) for ch in chans], axis=1
    )
    cum = np.cumsum(weights, axis=1)
    pick = np.sum(cum < (uniforms[jumps, 1] * cum[:, -1])[:, None], axis=1)
    jump_time[jumps] = tj
    channel[jumps] = np.minimum(pick, len(chans) - 1)
    return jump_time, channel


def simulate_ensemble(
    p: SystemParams, t_max: float, n: int, master_seed: int, start: int = 0
) -> TrajectoryEnsemble:
    if t_max <= 0:
        raise PreconditionError("t_max must be > 0")
    if n < 1:
        raise PreconditionError("need at least one trajectory")
    indices = np.arange(start, start + n, dtype=np.int64)
    jt, ch = _simulate(p, t_max, _draw_uniforms(master_seed, indices))
    return TrajectoryEnsemble(p, t_max, master_seed, indices, jt, ch)


def simulate_trajectory(p: SystemParams, t_max: float, seed: int, index: int = 0) -> TrajectoryRecord:
    """Single trajectory; identical to entry ``index`` of an ensemble with master seed ``seed``."""
    return simulate_ensemble(p, t_max, 1, seed, start=index).record(0)


@dataclass(frozen=True)
class NoJumpEstimate:
    fraction: float
    stderr: float
    n: int


def no_jump_fraction(p: SystemParams, t: float, n: int, master_seed: int) -> NoJumpEstimate:
    if n < 1000:
        raise PreconditionError("no_jump_fraction needs n >= 1000")
    if t == 0:
        return NoJumpEstimate(1.0, 0.0, n)
    ens = simulate_ensemble(p, t, n, master_seed)
    f, se = ens.no_jump_fraction(t)
    return NoJumpEstimate(f, se, n)


def channel_probabilities(p: SystemParams, t: float) -> dict[Channel, float]:
    """Probability that the first jump by time t went through each channel.

    Integrates each channel's rate along the unnormalized no-jump amplitudes.
    """
    def rate(idx: int, factor: float):
        return lambda s: factor * abs(no_jump_amplitudes_array(p, s)[idx]) ** 2

    spec = {
        Channel.CavityLeakL: (1, 2 * p.kappa),
        Channel.CavityLeakR: (2, 2 * p.kappa),
        Channel.SpontEmitL: (0, 2 * p.gamma_l),
        Channel.SpontEmitR: (0, 2 * p.gamma_r),
    }
    out = {}
    for ch, (idx, factor) in spec.items():
        if factor == 0 or t == 0:
            out[ch] = 0.0
            continue
        val, _ = integrate.quad(rate(idx, factor), 0.0, t, limit=200, epsabs=1e-13, epsrel=1e-11)
        out[ch] = float(val)
    return out
