import json
import math

import numpy as np
import pytest

from nlslab.config import parse_config
from nlslab.dynamics import ObservableSeries, PhysicsParams
from nlslab.errors import ConfigurationError, DomainError
from nlslab.experiment import run_experiment
from nlslab.functionals import Observables
from nlslab.grid import Grid
from nlslab.oracles import GaussianSpec, free_variance_norm, gaussian_initial
from nlslab.runs import Trajectory
from nlslab.scattering import ScatteringEstimate
from nlslab.verifier import (
    CHECK_NAMES,
    FAIL,
    INCONCLUSIVE,
    PASS,
    SuiteReport,
    Tolerances,
    check_alpha_zero_range,
    check_decay_rates,
    check_dynamics_invariants,
    check_equivalence,
    check_theorem_limits,
    checks_for,
    converse_applies,
    forward_case,
    is_real_profile,
    judge,
    run_suite,
)


def obs(t, **kw):
    base = dict(t=t, mass=1.0, grad_sq=1.0, energy=0.5, h=1.0, m1=0.0, lalpha2=1.0, linf=1.0,
                xnorm_sq=3.0, pc_norm=1.0, boundary_frac=0.0, hi_spec_frac=0.0)
    base.update(kw)
    return Observables(**base)


GRID = Grid(8 * math.pi, 256)
PHI = gaussian_initial(GaussianSpec(), GRID)


def trajectory(p, rows):
    return Trajectory(p, PHI, ObservableSeries(rows), {0.0: PHI}, PHI)


def by_name(reports):
    return {r.name: r for r in reports}


class TestJudge:
    @pytest.mark.parametrize("metric,measured,predicted,tol,ok", [
        ("abs", 1.0, 1.05, 0.1, True), ("abs", 1.0, 1.2, 0.1, False),
        ("le", 1.05, 1.0, 0.1, True), ("le", 1.2, 1.0, 0.1, False),
        ("ge", 0.95, 1.0, 0.1, True), ("ge", 0.8, 1.0, 0.1, False),
        ("range", 0.5, (0.0, 1.0), 0.0, True), ("range", 1.5, (0.0, 1.0), 0.1, False),
        ("sign", -1.0, -0.5, 0.1, True), ("sign", 1.0, -0.5, 0.1, False), ("sign", 1.0, -0.05, 0.1, True),
    ])
    def test_metrics(self, metric, measured, predicted, tol, ok):
        r = judge("virial", measured, predicted, tol, metric)
        assert r.passed is ok
        assert r.citation == "virial-identity"

    def test_nonfinite_fails(self):
        assert judge("virial", math.nan, 0.0, 1.0, "le").status == FAIL

    def test_extra_condition(self):
        assert judge("decay_lr", -1.0, -0.5, 0.15, "le", extra_ok=False).status == FAIL

    def test_tolerance_overrides(self):
        t = Tolerances({"virial": 0.5})
        assert t["virial"] == 0.5 and t["mass_drift"] == 1e-10
        with pytest.raises(DomainError):
            Tolerances({"nonsense": 1.0})


class TestRegimes:
    @pytest.mark.parametrize("d,alpha,case", [(1, 5.0, "converge"), (1, 4.0, "bounded"), (1, 3.0, None),
                                              (2, 2.0, "open"), (2, 2.5, "converge"), (3, 1.6, "bounded")])
    def test_forward_case(self, d, alpha, case):
        assert forward_case(PhysicsParams(-1.0, alpha, d)) == case

    @pytest.mark.parametrize("lam,alpha,d,ok", [(-1, 2.6, 1, True), (-1, 2.5, 1, False), (1, 4.5, 1, True),
                                                (1, 4.0, 1, False), (-1, 1.5, 2, True), (0, 5.0, 1, False)])
    def test_converse(self, lam, alpha, d, ok):
        assert converse_applies(PhysicsParams(lam, alpha, d)) is ok

    def test_real_profile_detection(self):
        assert is_real_profile(PHI.values)
        assert is_real_profile((2 - 3j) * PHI.values)
        assert not is_real_profile(gaussian_initial(GaussianSpec(a=1 + 1j), GRID).values)


class TestDynamicsChecksSynthetic:
    dt = 0.1
    t = np.arange(0, 21, 1) * 0.1 + 0.0

    def _critical_rows(self, perturb=0.0):
        E, h0, m10 = 0.7, 0.3, 0.2
        ts = np.round(np.arange(0, 201) * self.dt, 12)
        return [obs(s, energy=E, h=h0 + m10 * s + 8 * E * s * s + perturb * s**3, m1=m10 + 16 * E * s,
                    grad_sq=2 * E - 0.1 / (1 + s) ** 2) for s in ts]

    def test_exact_mass_critical_data_passes(self):
        p = PhysicsParams(-1.0, 4.0)
        reps = by_name(check_dynamics_invariants(trajectory(p, self._critical_rows()), p))
        for name in ("mass_drift", "energy_drift", "virial", "h_prime", "gradient_bound", "mass_critical_variance"):
            assert reps[name].status == PASS, name

    def test_perturbed_variance_fails(self):
        p = PhysicsParams(-1.0, 4.0)
        reps = by_name(check_dynamics_invariants(trajectory(p, self._critical_rows(perturb=0.01)), p))
        assert reps["virial"].status == FAIL
        assert reps["mass_critical_variance"].status == FAIL

    def test_noncritical_virial(self):
        # h = 1 + t + 3 t^2 + 0.1 t^3, so h'' = 6 + 0.6 t; choose grad_sq to satisfy the identity
        p = PhysicsParams(-1.0, 3.0)
        E = 5.0
        rows = []
        for s in np.round(np.arange(0, 201) * self.dt, 12):
            h2 = 6 + 0.6 * s
            g = (4 * 3 * E - h2) / (2 * (3 - 4))
            rows.append(obs(s, energy=E, h=1 + s + 3 * s * s + 0.1 * s**3, m1=1 + 6 * s + 0.3 * s * s, grad_sq=g))
        reps = by_name(check_dynamics_invariants(trajectory(p, rows), p))
        assert reps["virial"].status == PASS
        assert reps["virial"].measured < 1e-9
        assert "mass_critical_variance" not in reps

    def test_gradient_bound_direction(self):
        p_def, p_foc = PhysicsParams(-1.0, 4.0), PhysicsParams(1.0, 4.0)
        above = [obs(s, energy=0.5, grad_sq=1.0 + 1e-3) for s in (0.0, 1.0)]
        assert by_name(check_dynamics_invariants(trajectory(p_def, above), p_def))["gradient_bound"].status == FAIL
        assert by_name(check_dynamics_invariants(trajectory(p_foc, above), p_foc))["gradient_bound"].status == PASS

    def test_sparse_snapshots_inconclusive(self):
        p = PhysicsParams(-1.0, 4.0)
        rows = [obs(float(s)) for s in range(0, 21)]
        reps = by_name(check_dynamics_invariants(trajectory(p, rows), p))
        assert reps["virial"].status == INCONCLUSIVE
        assert reps["h_prime"].status == INCONCLUSIVE

    def test_mass_drift_zero_tolerance_forces_fail(self):
        p = PhysicsParams(-1.0, 4.0)
        rows = [obs(0.0, mass=1.0), obs(1.0, mass=1.0 + 1e-15)]
        rep = by_name(check_dynamics_invariants(trajectory(p, rows), p, {"mass_drift": 0.0}))["mass_drift"]
        assert rep.status == FAIL


class TestDecaySynthetic:
    def _rows(self, slope):
        ts = np.arange(1, 161) * 0.25
        return [obs(float(s), linf=s**slope) for s in ts]

    def test_exact_rate_passes_with_equality(self):
        p = PhysicsParams(-1.0, 4.0)
        r = by_name(check_decay_rates(trajectory(p, self._rows(-0.5)), p))["decay_lr"]
        assert r.status == PASS
        assert r.measured == pytest.approx(-0.5, abs=1e-12)
        assert r.diagnostics["r_squared"] == pytest.approx(1.0)

    def test_slow_decay_fails(self):
        p = PhysicsParams(-1.0, 4.0)
        assert by_name(check_decay_rates(trajectory(p, self._rows(-0.2)), p))["decay_lr"].status == FAIL

    def test_pullback_without_estimate_inconclusive(self):
        p = PhysicsParams(-1.0, 4.0)
        assert by_name(check_decay_rates(trajectory(p, self._rows(-0.5)), p))["decay_pullback"].status == INCONCLUSIVE

    def test_pullback_rate_needs_threshold(self):
        p = PhysicsParams(-1.0, 2.5, 2)
        ok = PhysicsParams(-1.0, 0.9, 2)
        r = by_name(check_decay_rates(trajectory(ok, self._rows(-0.5)), ok, r=4.0))["decay_pullback"]
        assert "4/(d+2)" in r.diagnostics["reason"]
        assert p.alpha > 4 / 4


class TestTheoremLimitsSynthetic:
    def _setup(self, p, A, m1_phi=0.0, m1_plus=0.0):
        up = obs(0.0, h=0.5, grad_sq=1.2, m1=m1_plus, xnorm_sq=2.9)
        est = ScatteringEstimate(PHI, 40.0, 0.0, up)
        ts = np.arange(0, 161) * 0.25
        rows = [obs(float(s), m1=m1_phi if s == 0 else 0.0, h=(float(free_variance_norm(up, s)) + A(s)) ** 2) for s in ts]
        return trajectory(p, rows), est

    def test_mass_critical_limit_exact(self):
        p = PhysicsParams(-1.0, 4.0)
        L = (0.0 - 0.4) / (4 * math.sqrt(1.2))
        run, est = self._setup(p, lambda s: L, m1_plus=0.4)
        reps = by_name(check_theorem_limits(run, est, p))
        assert reps["deviation_limit"].status == PASS
        assert reps["deviation_limit"].predicted == pytest.approx(L)
        assert reps["orientation"].status == PASS
        assert reps["moment_order"].status == PASS
        assert reps["real_profile_moment"].status == PASS

    def test_mass_critical_limit_perturbed(self):
        p = PhysicsParams(-1.0, 4.0)
        run, est = self._setup(p, lambda s: 0.5, m1_plus=0.4)
        reps = by_name(check_theorem_limits(run, est, p))
        assert reps["deviation_limit"].status == FAIL
        assert reps["orientation"].status == FAIL     # significant negative limit, positive deviation

    def test_reversed_chain_fails(self):
        p = PhysicsParams(-1.0, 5.0)
        run, est = self._setup(p, lambda s: 1.0, m1_plus=-0.4)
        reps = by_name(check_theorem_limits(run, est, p))
        assert reps["moment_order"].status == FAIL
        assert reps["orientation"].status == FAIL

    def test_sandwich_sides(self):
        up_L = (0.0 - 0.4) / (4 * math.sqrt(1.2))
        p = PhysicsParams(-1.0, 5.0)        # lower bound: A >= L
        run, est = self._setup(p, lambda s: up_L + 0.01, m1_plus=0.4)
        assert by_name(check_theorem_limits(run, est, p))["deviation_sandwich"].status == PASS
        run, est = self._setup(p, lambda s: up_L - 1.0, m1_plus=0.4)
        assert by_name(check_theorem_limits(run, est, p))["deviation_sandwich"].status == FAIL
        p3 = PhysicsParams(-1.0, 3.0)       # upper bound: A <= L
        run, est = self._setup(p3, lambda s: up_L - 0.5, m1_plus=0.4)
        r = by_name(check_theorem_limits(run, est, p3))["deviation_sandwich"]
        assert r.status == PASS and r.diagnostics["side"] == "limsup"

    def test_linear_degenerate_case(self):
        p = PhysicsParams(0.0, 4.0)
        run, est = self._setup(p, lambda s: 0.0)
        r = by_name(check_theorem_limits(run, est, p))["deviation_limit"]
        assert r.status == PASS and r.predicted == 0.0

    def test_unconverged_is_inconclusive(self):
        p = PhysicsParams(-1.0, 4.0)
        run, est = self._setup(p, lambda s: 0.0)
        est.converged = False
        reps = by_name(check_theorem_limits(run, est, p))
        assert reps["deviation_limit"].status == INCONCLUSIVE
        assert reps["deviation_moment_bound"].status == INCONCLUSIVE


def test_alpha_zero_static_check():
    assert check_alpha_zero_range().status == PASS
    assert check_alpha_zero_range(tolerances={"alpha_zero_range": 0.0}).status == PASS


SMALL = """
physics.lambda = {lam}
physics.alpha = {alpha}
grid.L = 100*pi
grid.M = 8192
time.t_end = {T}
time.snapshot_stride = 10
verify.t_eval = {te}
verify.keep_interval = 0.25
time.early_dt = 0.0005
time.early_until = 1
"""


@pytest.fixture(scope="module")
def supercritical_result():
    cfg = parse_config(SMALL.format(lam=-1, alpha=5, T=8, te=4), name="small5")
    return run_experiment(cfg)


@pytest.fixture(scope="module")
def linear_result():
    cfg = parse_config(SMALL.format(lam=0, alpha=5, T=4, te=2), name="linear")
    return run_experiment(cfg)


class TestEquivalenceOnRuns:
    def test_supercritical_forward_decay(self, supercritical_result):
        r = supercritical_result
        reps = by_name(check_equivalence(r.run, r.est, r.config.physics_params(), t_eval=4.0))
        assert reps["forward_decay"].status == PASS
        assert reps["forward_decay"].measured < 0.7
        assert reps["co_convergence"].status == PASS
        assert reps["uniqueness"].status == PASS
        assert "sup_pullback_xnorm" in reps["forward_decay"].diagnostics

    def test_linear_all_zero(self, linear_result):
        r = linear_result
        reps = by_name(check_equivalence(r.run, r.est, r.config.physics_params(), t_eval=2.0))
        assert reps["forward_decay"].status == PASS
        assert reps["forward_decay"].measured < 1e-10
        assert reps["uniqueness"].measured < 1e-12

    def test_unconverged_inconclusive(self, supercritical_result):
        r = supercritical_result
        est = ScatteringEstimate(r.est.u_plus, r.est.horizon, r.est.residual, r.est.observables, converged=False)
        reps = check_equivalence(r.run, est, r.config.physics_params())
        assert {x.status for x in reps} == {INCONCLUSIVE}

    def test_open_case_label(self):
        cfg = parse_config("""
physics.lambda = -1
physics.alpha = 2
grid.d = 2
grid.L = 8*pi
grid.M = 256
time.t_end = 1
time.snapshot_stride = 10
init.amp_re = 0.5
verify.t_eval = 1
verify.keep_interval = 0.1
""")
        r = run_experiment(cfg, negative=False)
        reps = by_name(check_equivalence(r.run, r.est, cfg.physics_params(), t_eval=1.0))
        assert reps["forward_decay"].status == INCONCLUSIVE
        assert reps["forward_decay"].diagnostics["reason"] == "open - no predicate"


class TestSuite:
    def test_empty_suite_passes(self):
        s = run_suite([])
        assert s.ok and s.exit_status == 0 and s.reports == []

    def test_reports_sorted_and_tagged(self, supercritical_result):
        reps = checks_for(supercritical_result)
        s = SuiteReport(sorted(reps, key=lambda r: r.name), ["small5"])
        names = [r.name for r in s.reports]
        assert names == sorted(names)
        assert all(r.citation for r in s.reports)
        assert all(r.diagnostics["experiment"] == "small5" for r in s.reports)
        assert set(names) <= set(CHECK_NAMES) | {"moment_order_minus"}
        payload = json.loads(json.dumps(s.to_json()))
        assert payload["counts"][FAIL] == s.count(FAIL)
        statements = {row["statement"] for row in s.traceability()}
        assert "forward-convergence d=2 alpha=2" in statements
        assert "criterion" not in s.to_text().lower()

    def test_supercritical_small_run_all_pass(self, supercritical_result):
        reps = checks_for(supercritical_result)
        bad = [(r.name, r.measured, r.predicted) for r in reps if r.status == FAIL]
        assert not bad

    def test_standing_hypothesis_enforced(self):
        cfg = parse_config("physics.lambda = -1\nphysics.alpha = 1.5\n")
        with pytest.raises(ConfigurationError):
            run_suite([cfg])

    def test_forced_failure(self):
        cfg = parse_config(SMALL.format(lam=-1, alpha=5, T=2, te=2) + "verify.checks = mass_drift\nverify.tol.mass_drift = 0\n")
        s = run_suite([cfg])
        assert s.count(FAIL) == 1 and s.exit_status == 1

    def test_run_errors_recorded(self):
        cfg = parse_config("physics.lambda = -1\nphysics.alpha = 4\ngrid.L = 4\ngrid.M = 256\ntime.t_end = 5\n",
                           name="tiny-box")
        s = run_suite([cfg])
        assert not s.ok and s.errors and "tiny-box" in s.errors[0]

    def test_deterministic_report(self):
        text = SMALL.format(lam=-1, alpha=5, T=2, te=2)
        a = run_suite([parse_config(text, name="a")]).to_json()
        b = run_suite([parse_config(text, name="a")]).to_json()
        assert a == b
