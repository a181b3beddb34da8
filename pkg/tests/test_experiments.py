import math

import numpy as np
import pytest

from emlb import models
from emlb.errors import ConfigError, InputError
from emlb.experiments import (
    LIMIT_COLUMNS,
    EnergyAccumulator,
    LimitKind,
    constraint_monitor,
    decay_trend,
    dispersion_test,
    energy_report,
    energy_run,
    fit_order,
    limit_sweep,
    monotone_above_floor,
    single_mode_state,
    slowest_constrained_mode,
)
from emlb.fields import PhysicalParams, equilibrium, grad
from emlb.integrators import RunConfig, TimeSeries, run
from emlb.littlewood_paley import FilterBank, block_norms


class TestHelpers:
    def test_fit_order_power_law(self):
        p = [0.5, 0.25, 0.125, 0.0625]
        e = [3.0 * v ** 0.7 for v in p]
        assert fit_order(p, e) == pytest.approx(0.7)
        # only the last three rungs count
        e[0] = 1e3
        assert fit_order(p, e) == pytest.approx(0.7)
        assert math.isnan(fit_order(p, [1, 0, 1, 1]))

    def test_monotone_above_floor(self):
        assert monotone_above_floor([4, 3, 2, 1], 0.0)
        assert not monotone_above_floor([4, 3, 3.5, 1], 0.0)
        assert monotone_above_floor([4, 3, 0.5, 0.6], 1.0)
        assert not monotone_above_floor([4, 3, 0.5, 1.2], 1.0)

    def test_limit_kind_validation(self):
        with pytest.raises(ConfigError):
            LimitKind("quasineutral", [0.5])
        with pytest.raises(ConfigError):
            LimitKind("relaxation", [0.5, 0.5])
        with pytest.raises(ConfigError):
            LimitKind("relaxation", [2.0, 0.5])
        assert LimitKind("combined", [1, 0.5]).ladder == [1.0, 0.5]


class TestEnergy:
    def test_equilibrium_degenerate(self, grid32, params):
        eq = equilibrium(grid32, params)
        rep = energy_report(TimeSeries(times=[0.0, 1.0], snapshots=[eq, eq]), grid32, params)
        assert rep.degenerate and rep.ratio == 0.0 and rep.lhs == 0.0

    def test_time_constant_factorisation(self, grid32):
        # synthetic constant-in-time W: sup term is the block-joint Besov norm,
        # L~^2 terms are sqrt(T) times the weighted norms
        p = PhysicalParams(tau=0.25, eps=0.5)
        x, y = grid32.coordinates()
        rho = 1e-3 * np.cos(x + y)
        u = np.stack([1e-3 * np.sin(2 * x) + 0 * y, 1e-3 * np.cos(3 * y) + 0 * x, np.zeros(grid32.shape)])
        e = np.stack([np.zeros(grid32.shape), 2e-3 * np.cos(x) + 0 * y, np.zeros(grid32.shape)])
        f = np.stack([np.zeros(grid32.shape), np.zeros(grid32.shape), 1e-3 * np.sin(x - 2 * y)])
        w = models.SymState(rho, u, e, f)
        T = 3.0
        times = np.linspace(0.0, T, 7)
        rep = energy_report((times, [w] * times.size), grid32, p)
        bank = FilterBank(grid32)
        weights = bank.weights(grid32.sigma)
        b = {k: block_norms(v, bank) for k, v in dict(rho=rho, u=u, e=e, f=f).items()}
        joint = np.sqrt(sum(v ** 2 for v in b.values()))
        assert rep.sup == pytest.approx(np.sum(weights * joint), rel=1e-12)
        assert rep.rhs == pytest.approx(rep.sup, rel=1e-12)
        tup = np.sqrt(p.tau * b["rho"] ** 2 + b["u"] ** 2 / p.tau + p.tau * p.eps * b["e"] ** 2)
        assert rep.dissipation == pytest.approx(math.sqrt(T) * np.sum(weights * tup), rel=1e-12)
        gf = grad(grid32, f[2])
        gf_blocks = block_norms(gf, bank)
        expected_f = math.sqrt(T) * np.sum(bank.weights(grid32.sigma - 1) * gf_blocks) / math.sqrt(p.eps)
        assert rep.dissipation_gradf == pytest.approx(expected_f, rel=1e-12)
        assert rep.lhs == pytest.approx(rep.sup + rep.dissipation + rep.dissipation_gradf)

    def test_empty_series(self, grid32, params):
        with pytest.raises(InputError):
            EnergyAccumulator(grid32, params).report()
        with pytest.raises(InputError):
            energy_report(TimeSeries(), grid32, params)

    def test_energy_run_rejects_scaled(self, grid32):
        cfg = RunConfig(grid32, PhysicalParams(tau=0.5), system="scaled_relax")
        with pytest.raises(ConfigError):
            energy_run(cfg)

    def test_linear_sup_equals_initial(self, grid32):
        # the block energy of the linearised system never increases
        p = PhysicalParams(tau=0.5, eps=0.5)
        cfg = RunConfig(grid32, p, t_final=2.0, linear_only=True,
                        initial_data={"kind": "random", "amplitude": 1e-3, "fields": ["n", "u", "B"]})
        rep = energy_run(cfg, seed=4)
        assert rep.sup == pytest.approx(rep.rhs, rel=1e-9)
        assert 1.0 < rep.ratio < 5.0


class TestConstraintMonitor:
    def test_small_run(self, grid32, params):
        cfg = RunConfig(grid32, params, t_final=0.5, initial_data={"kind": "random", "amplitude": 1e-2, "fields": ["n", "u", "B"]})
        mon = constraint_monitor(run(cfg, seed=1))
        assert mon["drift"] < 1e-12 and mon["max_gauss"] < 1e-12

    def test_empty(self):
        with pytest.raises(InputError):
            constraint_monitor(TimeSeries())


class TestDispersion:
    def test_two_modes(self):
        p = PhysicalParams(tau=0.5, eps=0.5, lam=0.8, b_bar=(0, 0, 0.5))
        res = dispersion_test(p, [(1, 0), (2, -1)], n_samples=6, n_traj=2)
        assert [r["k"] for r in res] == [[1, 0], [2, -1]]
        for r in res:
            assert r["max_rel_err"] < 5e-3
            assert len(r["measured_rates"]) == 8 and not r["degenerate_fit"]

    def test_zero_mode_rates(self):
        # k = 0: only the relaxation / plasma coupling block remains
        p = PhysicalParams(tau=0.5)
        r = dispersion_test(p, [(0, 0)], n_samples=6)[0]
        assert len(r["symbol_eigenvalues"]) == 9
        assert r["max_rel_err"] < 5e-3

    def test_validation(self):
        with pytest.raises(ConfigError):
            dispersion_test(PhysicalParams(), [(1, 0)], amplitude=1e-3)
        with pytest.raises(ConfigError):
            dispersion_test(PhysicalParams(), [(15, 0)])


class TestDecay:
    def test_equilibrium(self, grid32, params):
        series = run(RunConfig(grid32, params, t_final=1.0))
        rep = decay_trend(series, grid32, params)
        assert rep["initial"] == 0.0 and rep["ratio"] == 0.0

    def test_single_mode_rate(self, grid32):
        p = PhysicalParams(tau=0.5)
        k = (1, 1)
        val, vec = slowest_constrained_mode(k, p)
        st = single_mode_state(grid32, p, k, vec, 1e-6)
        cfg = RunConfig(grid32, p, t_final=10.0, dt=0.05, output_stride=10, linear_only=True)
        rep = decay_trend(run(cfg, initial=st), grid32, p)
        assert rep["fitted_rate"] == pytest.approx(val.real, rel=1e-2)

    def test_needs_snapshots(self, grid32, params):
        with pytest.raises(InputError):
            decay_trend(TimeSeries(), grid32, params)


class TestLimitSweep:
    def test_relaxation_smoke(self, grid32):
        base = RunConfig(grid32, PhysicalParams(), t_final=0.5, initial_data={"kind": "random", "amplitude": 1e-2})
        rep = limit_sweep(LimitKind("relaxation", [0.5, 0.25, 0.125]), base, seed=5, n_samples=5)
        assert [r["param"] for r in rep.records] == [0.5, 0.25, 0.125]
        assert rep.reference["system"] == "drift_diffusion"
        rows = rep.csv_rows()
        assert len(rows) == 4 and rows[-1][0] == "order"
        assert all(np.isfinite(rep.column(c)).all() for c in LIMIT_COLUMNS[1:])
        assert rep.records[0]["darcy"] is not None
        # n converges towards the drift-diffusion solution
        assert rep.records[-1]["err_n_final"] < rep.records[0]["err_n_final"]

    def test_nonrelativistic_reference(self, grid32):
        base = RunConfig(grid32, PhysicalParams(), t_final=0.3, initial_data={"kind": "random", "amplitude": 1e-2})
        rep = limit_sweep(LimitKind("nonrelativistic", [0.25, 1 / 16]), base, seed=5, n_samples=3)
        assert rep.reference["system"] == "euler_poisson"
        assert rep.records[0]["darcy"] is None
        assert rep.records[1]["err_u"] < rep.records[0]["err_u"]

    def test_concurrent_rungs_match_sequential(self, grid32):
        base = RunConfig(grid32, PhysicalParams(), t_final=0.3, initial_data={"kind": "random", "amplitude": 1e-2})
        kind = LimitKind("relaxation", [0.5, 0.25, 0.125])
        seq = limit_sweep(kind, base, seed=3, n_samples=3)
        par = limit_sweep(kind, base, seed=3, n_samples=3, workers=3)
        assert par.to_dict() == seq.to_dict()
