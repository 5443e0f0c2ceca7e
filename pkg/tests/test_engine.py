"""Driver-level contracts: step-grid validation, event splitting, seeding,
deterministic aggregation, and standard-error scaling."""

import numpy as np
import pytest

from tlamonitor import apd, engine, tla


def test_engine_config_validation():
    with pytest.raises(ValueError, match="dt"):
        engine.EngineConfig(dt=0.0, t_final=1.0)
    with pytest.raises(ValueError, match="t_final"):
        engine.EngineConfig(dt=1e-2, t_final=1e-3)
    with pytest.raises(ValueError, match="integer multiple"):
        engine.EngineConfig(dt=3e-4, t_final=1.0)
    with pytest.raises(ValueError, match="sample_stride"):
        engine.EngineConfig(dt=1e-3, t_final=1.0, sample_stride=0)
    with pytest.raises(ValueError, match="multiple of sample_stride"):
        engine.EngineConfig(dt=1e-3, t_final=1.0, sample_stride=3)
    cfg = engine.EngineConfig(dt=1e-3, t_final=1.0, sample_stride=10)
    assert cfg.n_steps == 1000
    assert cfg.n_samples == 101
    assert cfg.times()[0] == 0.0
    assert cfg.times()[-1] == pytest.approx(1.0)


def test_split_step_at_events():
    # no events -> one interval
    assert engine.split_step_at_events(1.0, 0.5, []) == [(1.0, 1.5)]
    # event at midpoint -> two equal halves
    parts = engine.split_step_at_events(0.0, 1.0, [0.5])
    assert parts == [(0.0, 0.5), (0.5, 1.0)]
    # event exactly at the end -> single interval ending there
    assert engine.split_step_at_events(0.0, 1.0, [1.0]) == [(0.0, 1.0)]
    # events outside the step are ignored; inside ones partition it
    parts = engine.split_step_at_events(2.0, 1.0, [1.5, 2.25, 2.75, 4.0])
    assert parts == [(2.0, 2.25), (2.25, 2.75), (2.75, 3.0)]
    assert parts[0][0] == 2.0 and parts[-1][1] == 3.0


def test_trajectory_seed_scheme():
    a = engine.trajectory_seed(123, 0)
    b = engine.trajectory_seed(123, 1)
    assert a.entropy == 123 and a.spawn_key == (0,)
    g1 = np.random.Generator(np.random.PCG64(a))
    g2 = np.random.Generator(np.random.PCG64(b))
    assert g1.random() != g2.random()
    # reproducible
    g3 = np.random.Generator(np.random.PCG64(engine.trajectory_seed(123, 0)))
    assert np.random.Generator(np.random.PCG64(
        engine.trajectory_seed(123, 0))).random() == g3.random()


def make_constant_model(n_samples):
    times = np.arange(n_samples) * 0.1

    def model(seed):
        const = np.full(n_samples, 0.25)
        return engine.TrajectoryRecord(
            times=times, x=const, y=-const, z=0 * const,
            purity=np.full(n_samples, 0.75), mode="trivial")
    return model


def test_trivial_model_aggregates_constant():
    cfg = engine.EngineConfig(dt=0.1, t_final=2.0, sample_stride=1,
                              master_seed=5, n_trajectories=7, burn_in=0.0)
    res = engine.run_ensemble(make_constant_model(cfg.n_samples), cfg)
    assert np.all(res.mean_x == 0.25)
    assert np.all(res.se_x == 0.0)
    assert np.all(res.mean_purity == 0.75)
    assert np.all(res.window_purity == 0.75)


def test_single_trajectory_aggregate_equals_record():
    sys_p = tla.SystemParams(omega=10.0)
    p = apd.ApdParams(eta=0.8, gamma_r=7.0, tau_dd=2.0, gamma_dk=5e-6)
    cfg = engine.EngineConfig(dt=1e-4, t_final=5.0, sample_stride=100,
                              master_seed=77, n_trajectories=1, burn_in=2.0)

    def model(seed):
        rec, _ = apd.run_apd_trajectory(sys_p, p, dt=cfg.dt,
                                        t_final=cfg.t_final, seed=seed,
                                        sample_stride=cfg.sample_stride)
        return rec

    res, recs = engine.run_ensemble(model, cfg, collect_records=True)
    assert np.array_equal(res.mean_z, recs[0].z)
    assert np.array_equal(res.mean_purity, recs[0].purity)


def test_run_ensemble_deterministic_and_jobs_invariant():
    sys_p = tla.SystemParams(omega=10.0)
    p = apd.ApdParams(eta=0.8, gamma_r=7.0, tau_dd=2.0, gamma_dk=5e-6)

    def model(seed):
        rec, _ = apd.run_apd_trajectory(sys_p, p, dt=1e-4, t_final=3.0,
                                        seed=seed, sample_stride=100)
        return rec

    base = dict(dt=1e-4, t_final=3.0, sample_stride=100, master_seed=11,
                n_trajectories=24, burn_in=1.0)
    r1 = engine.run_ensemble(model, engine.EngineConfig(**base, n_jobs=1))
    r2 = engine.run_ensemble(model, engine.EngineConfig(**base, n_jobs=1))
    r3 = engine.run_ensemble(model, engine.EngineConfig(**base, n_jobs=2))
    assert np.array_equal(r1.mean_z, r2.mean_z)
    assert np.array_equal(r1.window_purity, r2.window_purity)
    assert np.array_equal(r1.mean_z, r3.mean_z)
    assert np.array_equal(r1.se_purity, r3.se_purity)


def test_standard_error_scaling():
    """SE estimates shrink as 1/sqrt(n) across n = 100, 400, 1600."""
    sys_p = tla.SystemParams(omega=2.0)
    p = apd.ApdParams(eta=0.8, gamma_r=5.0, tau_dd=0.5, gamma_dk=0.0)

    def model(seed):
        rec, _ = apd.run_apd_trajectory(sys_p, p, dt=2e-4, t_final=5.0,
                                        seed=seed, sample_stride=250)
        return rec

    ses = []
    for n in (100, 400, 1600):
        cfg = engine.EngineConfig(dt=2e-4, t_final=5.0, sample_stride=250,
                                  master_seed=1234, n_trajectories=n,
                                  burn_in=1.0, n_jobs=2)
        res = engine.run_ensemble(model, cfg)
        ses.append(np.median(res.se_z[4:]))
    assert ses[0] / ses[1] == pytest.approx(2.0, rel=0.2)
    assert ses[1] / ses[2] == pytest.approx(2.0, rel=0.2)


def test_record_validation():
    times = np.array([0.0, 0.1, 0.1])
    with pytest.raises(ValueError, match="strictly increasing"):
        engine.TrajectoryRecord(times=times, x=times, y=times, z=times,
                                purity=times, mode="bad")
    with pytest.raises(ValueError, match="length"):
        engine.TrajectoryRecord(times=np.array([0.0, 0.1]),
                                x=np.zeros(3), y=np.zeros(2), z=np.zeros(2),
                                purity=np.zeros(2), mode="bad")
    rec = engine.TrajectoryRecord(times=np.array([0.0, 1.0, 2.0]),
                                  x=np.zeros(3), y=np.zeros(3), z=np.zeros(3),
                                  purity=np.array([1.0, 0.8, 0.6]), mode="ok")
    assert rec.window_purity(1.0) == pytest.approx(0.7)
    with pytest.raises(ValueError, match="burn_in"):
        rec.window_purity(5.0)
