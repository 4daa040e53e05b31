import csv
import io
import math

import numpy as np
import pytest

from qutritherald.atom_cavity import SystemParams, no_jump_amplitudes, survival_probability
from qutritherald.errors import AccuracyError, PreconditionError
from qutritherald.trajectories import (
    BASIS,
    CHANNELS,
    Channel,
    TrajectoryEnsemble,
    channel_probabilities,
    integrate_master_equation,
    jump_channels,
    no_jump_fraction,
    simulate_ensemble,
    simulate_trajectory,
)

BENCH = SystemParams.symmetric(10, 0.1)


@pytest.fixture(scope="module")
def big_ensemble():
    return simulate_ensemble(BENCH, 0.5, 100_000, master_seed=2024)


def test_jump_channels_rates():
    p = SystemParams(1.0, 2.0, 0.5, 0.1, 0.2)
    rates = {c.id: c.rate_factor for c in jump_channels(p)}
    assert rates == {
        Channel.CavityLeakL: 1.0,
        Channel.CavityLeakR: 1.0,
        Channel.SpontEmitL: pytest.approx(0.2),
        Channel.SpontEmitR: pytest.approx(0.4),
    }


def test_deterministic_records():
    a = simulate_trajectory(BENCH, 1.0, seed=5, index=3)
    b = simulate_trajectory(BENCH, 1.0, seed=5, index=3)
    assert a.events == b.events
    assert np.array_equal(a.final_state, b.final_state)


def test_trajectory_matches_ensemble_entry():
    ens = simulate_ensemble(BENCH, 1.0, 50, master_seed=9)
    for k in (0, 17, 49):
        rec = simulate_trajectory(BENCH, 1.0, seed=9, index=k)
        assert rec.events == ens.record(k).events


def test_partition_independence():
    whole = simulate_ensemble(BENCH, 0.5, 3000, master_seed=77)
    parts = [simulate_ensemble(BENCH, 0.5, n, master_seed=77, start=s) for s, n in ((0, 1000), (1000, 1500), (2500, 500))]
    merged = TrajectoryEnsemble.merge(parts)
    assert np.array_equal(merged.indices, whole.indices)
    assert np.array_equal(merged.channel, whole.channel)
    assert np.array_equal(merged.jump_time, whole.jump_time, equal_nan=True)


def test_no_spontaneous_channels_when_disabled():
    ens = simulate_ensemble(SystemParams.symmetric(2.0, 0.0), 5.0, 5000, master_seed=1)
    counts = ens.channel_counts(5.0)
    assert counts[Channel.SpontEmitL] == counts[Channel.SpontEmitR] == 0
    assert sum(counts.values()) > 0


def test_spontaneous_emission_flags_failure():
    ens = simulate_ensemble(SystemParams.symmetric(0.5, 2.0), 5.0, 2000, master_seed=3)
    failed = [ens.record(k) for k in range(len(ens)) if ens.channel[k] in (2, 3)]
    assert failed and all(r.failed and r.leaked_photon is None for r in failed)


def test_survivors_report_t_max():
    rec = simulate_trajectory(SystemParams.symmetric(0.1, 0.0, kappa=0.01), 0.01, seed=0)
    assert rec.events == ()
    assert rec.survived_no_jump_until == 0.01


def test_jump_times_within_horizon(big_ensemble):
    jt = big_ensemble.jump_time[~np.isnan(big_ensemble.jump_time)]
    assert np.all((jt > 0) & (jt <= 0.5))


def test_leaked_polarizations_balanced(big_ensemble):
    counts = big_ensemble.channel_counts(0.5)
    v, h = counts[Channel.CavityLeakL], counts[Channel.CavityLeakR]
    n = v + h
    assert abs(v - n / 2) <= 3 * math.sqrt(n / 4)


def test_leaked_polarizations_follow_coupling_ratio():
    p = SystemParams(10.0, 5.0, 1.0, 0.1, 0.1)
    counts = simulate_ensemble(p, 2.0, 20_000, master_seed=4).channel_counts(2.0)
    v, h = counts[Channel.CavityLeakL], counts[Channel.CavityLeakR]
    q = 100 / 125
    assert abs(v - (v + h) * q) <= 3 * math.sqrt((v + h) * q * (1 - q))


def test_no_jump_fraction_examples():
    assert no_jump_fraction(BENCH, 0.0, 1000, 0).fraction == 1.0
    assert no_jump_fraction(BENCH, 40 / 1.2, 10_000, 0).fraction == 0.0
    with pytest.raises(PreconditionError):
        no_jump_fraction(BENCH, 0.1, 999, 0)


def test_no_jump_fraction_matches_survival(big_ensemble):
    for t in (0.05, 0.1081, 0.3):
        f, se = big_ensemble.no_jump_fraction(t)
        assert abs(f - survival_probability(BENCH, t)) <= 3 * se


def test_channel_counts_match_rate_integrals(big_ensemble):
    n = len(big_ensemble)
    probs = channel_probabilities(BENCH, 0.5)
    counts = big_ensemble.channel_counts(0.5)
    for ch in CHANNELS:
        q = probs[ch]
        assert abs(counts[ch] - n * q) <= 4 * math.sqrt(n * q * (1 - q)) + 1


def test_channel_probabilities_account_for_all_decay():
    for p in (BENCH, SystemParams(2.0, 0.7, 1.0, 0.4, 0.1)):
        for t in (0.1, 1.0):
            total = sum(channel_probabilities(p, t).values())
            assert total == pytest.approx(1 - survival_probability(p, t), abs=1e-10)
            rho = integrate_master_equation(p, t)
            dark = rho.population("gl0") + rho.population("gr0")
            assert total == pytest.approx(dark, abs=1e-8)


def test_master_equation_initial_state():
    rho = integrate_master_equation(BENCH, 0.0)
    assert rho.matrix[0, 0] == 1 and np.count_nonzero(rho.matrix) == 1


@pytest.mark.parametrize("t", [0.05, 0.1081, 0.5, 2.0])
def test_master_equation_excited_population(t):
    rho = integrate_master_equation(BENCH, t)
    x = no_jump_amplitudes(BENCH, t).x
    assert rho.population("e0") == pytest.approx(abs(x) ** 2, abs=1e-8)
    assert rho.trace() == pytest.approx(1.0, abs=1e-8)
    assert rho.hermiticity_error() < 1e-12
    assert rho.min_eigenvalue() > -1e-10


def test_master_equation_step_too_large():
    with pytest.raises(AccuracyError):
        integrate_master_equation(BENCH, 1.0, dt=0.5)
    with pytest.raises(PreconditionError):
        integrate_master_equation(BENCH, 1.0, dt=0.0)


def _max_z(ens, t):
    mean, se = ens.density_matrix(t)
    rho = integrate_master_equation(BENCH, t).matrix
    diff = mean - rho
    z = []
    for part, err in ((diff.real, se.real), (diff.imag, se.imag)):
        mask = err > 1e-12  # below this the entry is deterministic (rounding noise only)
        z.extend(np.abs(part[mask]) / err[mask])
        assert np.all(np.abs(part[~mask]) < 1e-10)
    return max(z), float(np.max(np.abs(diff)))


def test_unraveling_equivalence(big_ensemble):
    small = simulate_ensemble(BENCH, 0.5, 10_000, master_seed=11)
    z_small, dev_small = _max_z(small, 0.1)
    z_big, dev_big = _max_z(big_ensemble, 0.1)
    assert z_small <= 5 and z_big <= 5
    assert dev_big < dev_small


def test_csv_export():
    ens = simulate_ensemble(BENCH, 0.2, 200, master_seed=8)
    rows = list(csv.DictReader(io.StringIO(ens.to_csv())))
    assert len(rows) == 200
    assert list(rows[0]) == ["index", "first_jump_time", "channel", "survived"]
    for row, tj in zip(rows, ens.jump_time):
        if np.isnan(tj):
            assert row["survived"] == "1" and row["channel"] == ""
        else:
            assert float(row["first_jump_time"]) == tj
            assert row["channel"] in {c.value for c in CHANNELS}


def test_final_labels_are_dark_states():
    ens = simulate_ensemble(BENCH, 1.0, 500, master_seed=12)
    labels = {ens.record(k).final_label for k in range(len(ens)) if not np.isnan(ens.jump_time[k])}
    assert labels <= {"gl0", "gr0"}
    assert set(BASIS) >= labels
