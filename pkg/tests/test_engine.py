import numpy as np
import pytest

from zrp import engine
from zrp.engine import (DisplacementSampler, Simulator, StallError,
                        equilibrium_start, load_checkpoint, save_checkpoint)
from zrp.equilibrium import fugacity_of_density
from zrp.model import ModelSpec, RateFamily


def _sim(kind="linear", d=1, L=32, alpha=1.5, seed=2, replica=0, **kw):
    b = 0.5 if kind == "affine" else 0.0
    spec = ModelSpec(d=d, alpha=alpha, L=L,
                     rate_family=RateFamily(kind, 1.0, b), gamma=1.0)
    prof = fugacity_of_density(1.0, spec.rate_family)
    occ, state = equilibrium_start(spec, prof, seed, replica)
    return spec, Simulator(spec, occ, state, **kw)


def test_alias_table_measures_exact_weights():
    spec, _ = _sim(L=16)
    s = DisplacementSampler(spec)
    mass = np.zeros(s.n)
    for i in range(s.n):
        mass[i] += s.prob[i]
        if s.alias[i] != i:
            mass[s.alias[i]] += 1.0 - s.prob[i]
    from zrp.model import torus_kernel_weights
    w = torus_kernel_weights(spec)
    np.testing.assert_allclose(mass / s.n, w / w.sum(), rtol=1e-12)


def test_sample_index_covers_unit_interval():
    spec, _ = _sim(L=8)
    s = DisplacementSampler(spec)
    for u in (0.0, 0.9999999999999999):
        j = s.sample_index(u)
        assert 0 <= j < s.n


@pytest.mark.parametrize("kind", ["linear", "affine"])
def test_particle_conservation_and_positivity(kind):
    spec, sim = _sim(kind)
    n0 = sim.total
    fired = sim.advance(5.0)
    assert fired > 0
    occ = sim.occupancy
    assert occ.sum() == n0
    assert (occ >= 0).all()
    assert sim.sim_time == 5.0


def test_rate_audit_stays_clean():
    spec, sim = _sim("affine")
    sim.advance(10.0)
    assert sim.audit() < 1e-9


def test_stall_on_empty_lattice():
    spec = ModelSpec(d=1, alpha=1.5, L=8,
                     rate_family=RateFamily("linear", 1.0, 0.0), gamma=1.0)
    occ = np.zeros(8, dtype=np.int32)
    sim = Simulator(spec, occ, (1, 2, 3, 4))
    with pytest.raises(StallError):
        sim.step()


def test_max_events_cap():
    spec, sim = _sim()
    fired = sim.advance(1e9, max_events=7)
    assert fired == 7
    assert sim.sim_time < 1e9


def test_advance_until_observer_intervals():
    spec, sim = _sim()
    seen = []
    fired = sim.advance_until(0.5, observer=lambda dt, s, d: seen.append((dt, s, d)))
    assert seen[-1][1] == -1 and seen[-1][2] == -1
    assert len(seen) == fired + 1
    assert sum(dt for dt, _, _ in seen) == pytest.approx(0.5, rel=1e-12)


def test_event_moves_one_particle():
    spec, sim = _sim("affine", L=16)
    before = sim.occupancy.copy()
    dt, src, dst = sim.step()
    after = sim.occupancy
    assert dt > 0
    assert after[src] == before[src] - 1
    assert after[dst] == before[dst] + 1
    assert after.sum() == before.sum()


def test_equilibrium_start_depends_only_on_seed():
    spec, _ = _sim()
    prof = fugacity_of_density(1.0, spec.rate_family)
    occ1, st1 = equilibrium_start(spec, prof, 77, 3)
    occ2, st2 = equilibrium_start(spec, prof, 77, 3)
    occ3, _ = equilibrium_start(spec, prof, 77, 4)
    assert np.array_equal(occ1, occ2) and st1 == st2
    assert not np.array_equal(occ1, occ3)


def test_simulator_input_validation():
    spec, _ = _sim(L=8)
    with pytest.raises(ValueError):
        Simulator(spec, np.zeros(4, dtype=np.int32), (1, 2, 3, 4))
    bad = np.zeros(8, dtype=np.int32)
    bad[0] = -1
    with pytest.raises(ValueError):
        Simulator(spec, bad, (1, 2, 3, 4))


def test_checkpoint_roundtrip(tmp_path):
    spec, sim = _sim("affine", L=16)
    sim.advance(2.0)
    path = tmp_path / "state.ckpt"
    save_checkpoint(path, spec, sim.occupancy, sim.sim_time)
    d, L, occ, t = load_checkpoint(path)
    assert (d, L) == (1, 16)
    assert t == sim.sim_time
    assert np.array_equal(occ, sim.occupancy)
    # resumed simulator continues from the stored time
    resumed = Simulator(spec, occ, (5, 6, 7, 8), sim_time=t)
    assert resumed.sim_time == t
    resumed.advance(t + 1.0)
    assert resumed.occupancy.sum() == sim.total


def test_checkpoint_rejects_corruption(tmp_path):
    spec, sim = _sim(L=8)
    path = tmp_path / "state.ckpt"
    save_checkpoint(path, spec, sim.occupancy, 1.0)
    blob = bytearray(path.read_bytes())
    blob[0] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(ValueError):
        load_checkpoint(path)
    path.write_bytes(b"Z")
    with pytest.raises(ValueError):
        load_checkpoint(path)
