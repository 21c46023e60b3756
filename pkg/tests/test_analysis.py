import numpy as np
import pytest

from mhekit.core import CostSpec, EstimateSequence, HorizonSolution, IossCertificate, ValidationError
from mhekit.models import make_random_lti, scalar_integrator
from mhekit.simulate import InputProfile, NoiseSpec, simulate
from mhekit.solver import HorizonProblem, solve_linear_horizon
from mhekit.estimators import delayed_mhe_multi, fie, mhe
from mhekit.analysis import (
    EnvelopeFit,
    accuracy_bound,
    accuracy_bound_curve,
    fit_exponential_envelope,
    performance,
    regret,
    sse,
    turnpike_profile,
)


class TestPerformance:
    def test_truth_with_zero_noise_scores_zero(self):
        model = make_random_lti(3, 1, 2, seed=0)
        profile = InputProfile("sinusoid", {"amplitude": [1.0], "frequency": [0.03]})
        batch = simulate(model, np.zeros(3), profile, NoiseSpec.silent(3, 2), T=12, seed=0)
        cost = CostSpec(Q=np.eye(3), R=np.eye(2), G=np.eye(2))
        assert performance(batch.states, batch, cost, 0, 12) == pytest.approx(0.0, abs=1e-20)

    def test_empty_interval_is_zero(self, scalar_batch, unit_cost):
        assert performance(scalar_batch.states[5:6], scalar_batch, unit_cost, 5, 5) == 0.0

    def test_hand_summed_stage_costs(self, scalar_batch, unit_cost, scalar_benchmark):
        # direct summation oracle on the benchmark segment [5, 25]
        t1, t2 = 5, 25
        xs = scalar_benchmark.array(t1, t2)
        J = performance(scalar_benchmark, scalar_batch, unit_cost, t1, t2)
        expect = 0.0
        for k in range(t2 - t1):
            w = xs[k + 1, 0] - xs[k, 0]
            e = scalar_batch.y(t1 + k)[0] - xs[k, 0]
            expect += w * w + e * e
        assert J == pytest.approx(expect, rel=1e-12)

    def test_additive_over_adjacent_intervals(self, scalar_batch, unit_cost, scalar_benchmark):
        a = performance(scalar_benchmark, scalar_batch, unit_cost, 0, 12)
        b = performance(scalar_benchmark, scalar_batch, unit_cost, 12, 30)
        c = performance(scalar_benchmark, scalar_batch, unit_cost, 0, 30)
        assert a + b == pytest.approx(c, rel=1e-12)

    def test_rejects_reversed_interval(self, scalar_batch, unit_cost, scalar_benchmark):
        with pytest.raises(ValidationError):
            performance(scalar_benchmark, scalar_batch, unit_cost, 10, 5)


class TestSse:
    def test_exact_estimate_scores_zero(self, scalar_batch):
        assert sse(scalar_batch.states, scalar_batch) == 0.0

    def test_single_index_squared_error(self, scalar_batch):
        est = EstimateSequence(t_start=4, estimates=(scalar_batch.x(4) + 2.0)[None, :],
                               delay=0, kind="fie")
        assert sse(est, scalar_batch, 4, 4) == pytest.approx(4.0)

    def test_requires_truth(self, unit_cost):
        from mhekit.core import DataBatch

        bare = DataBatch(t0=0, inputs=np.zeros((3, 0)), outputs=np.ones((3, 1)),
                         meta={"model_id": "scalar"})
        with pytest.raises(ValidationError):
            sse(np.ones((3, 1)), bare)


class TestRegret:
    def test_benchmark_against_itself_is_zero(self, scalar_batch, unit_cost, scalar_benchmark):
        assert regret(scalar_benchmark, scalar_benchmark, scalar_batch, unit_cost, 0, 30) == 0.0

    def test_delay_reduces_regret(self, scalar_batch, unit_cost, scalar_benchmark):
        N = 10
        runs = delayed_mhe_multi(scalar_batch, unit_cost, N, [0, N // 2])
        t1, t2 = N // 2, 30 - N // 2
        r0 = regret(runs[0], scalar_benchmark, scalar_batch, unit_cost, t1, t2)
        r5 = regret(runs[N // 2], scalar_benchmark, scalar_batch, unit_cost, t1, t2)
        assert r5 <= r0

    def test_per_step_regret_approaches_constant(self, scalar_batch, unit_cost, scalar_benchmark):
        # linear-growth pattern: the per-step regret of plain MHE settles
        est = mhe(scalar_batch, unit_cost, 8)
        rates = []
        for t2 in (15, 20, 25, 30):
            rates.append(regret(est, scalar_benchmark, scalar_batch, unit_cost, 4, t2) / (t2 - 4))
        spread = max(rates) - min(rates)
        assert spread < 0.25 * max(rates)


class TestTurnpikeProfile:
    def test_benchmark_windows_give_zero_profile(self, scalar_benchmark):
        xs = scalar_benchmark.array(5, 15)
        ws = np.asarray(scalar_benchmark.extras["ws"])[5:15]
        sol = HorizonSolution(window=(5, 15), xs=xs, ws=ws, cost=1.0)
        prof = turnpike_profile([sol], scalar_benchmark, N=10)
        assert np.max(prof.state_dev) < 1e-14
        assert np.max(prof.z_dev) < 1e-14

    def test_arc_invariance_across_horizons(self, scalar_model, scalar_batch, unit_cost,
                                            scalar_benchmark):
        devs = {}
        for N in (16, 24):
            prob = HorizonProblem(model=scalar_model, us=scalar_batch.inputs[: N + 1],
                                  ys=scalar_batch.outputs[: N + 1], cost=unit_cost)
            sol = solve_linear_horizon(prob)
            prof = turnpike_profile([sol], scalar_benchmark, N=N)
            devs[N] = prof.state_dev[0]
        # left arcs coincide where the far boundary's tail is negligible
        assert np.max(np.abs(devs[16][:3] - devs[24][:3])) < 1e-6
        assert np.max(np.abs(devs[16][-3:] - devs[24][-3:])) < 1e-6

    def test_summaries(self, scalar_model, scalar_batch, unit_cost, scalar_benchmark):
        N = 20
        prob = HorizonProblem(model=scalar_model, us=scalar_batch.inputs[: N + 1],
                              ys=scalar_batch.outputs[: N + 1], cost=unit_cost)
        sol = solve_linear_horizon(prob)
        prof = turnpike_profile([sol], scalar_benchmark, N=N, eps=1e-3)
        assert prof.approach_lengths()[0] <= 8
        assert prof.leave_lengths()[0] <= 8
        assert prof.midpoint_dev[0] < 1e-6

    def test_mismatched_window_length_rejected(self, scalar_benchmark):
        sol = HorizonSolution(window=(0, 4), xs=np.zeros((5, 1)), ws=np.zeros((4, 1)), cost=0.0)
        with pytest.raises(ValidationError):
            turnpike_profile([sol], scalar_benchmark, N=10)


class TestEnvelopeFit:
    def test_exact_exponential_recovered(self):
        N = 20
        s = np.minimum(np.arange(N + 1), N - np.arange(N + 1))
        dev = 2.0 * np.power(0.5, s)
        from mhekit.analysis import TurnpikeProfile

        prof = TurnpikeProfile(taus=np.array([0]), state_dev=dev[None, :], z_dev=None,
                               N=N, eps=1e-3)
        fit = fit_exponential_envelope(prof)
        assert fit.ok
        assert fit.K == pytest.approx(2.0, abs=1e-9)
        assert fit.lam == pytest.approx(0.5, abs=1e-9)
        assert fit.residual < 1e-9

    def test_scale_equivariance(self):
        from mhekit.analysis import TurnpikeProfile

        rng = np.random.default_rng(0)
        N = 16
        s = np.minimum(np.arange(N + 1), N - np.arange(N + 1))
        dev = 1.3 * np.power(0.4, s) * np.exp(0.05 * rng.normal(size=N + 1))
        f1 = fit_exponential_envelope(TurnpikeProfile(np.array([0]), dev[None, :], None, N, 1e-3))
        f2 = fit_exponential_envelope(TurnpikeProfile(np.array([0]), (7.0 * dev)[None, :],
                                                      None, N, 1e-3))
        assert f2.K == pytest.approx(7.0 * f1.K, rel=1e-12)
        assert f2.lam == pytest.approx(f1.lam, rel=1e-12)

    def test_all_zero_profile_flags_failure(self):
        from mhekit.analysis import TurnpikeProfile

        prof = TurnpikeProfile(np.array([0]), np.zeros((1, 11)), None, 10, 1e-3)
        fit = fit_exponential_envelope(prof)
        assert not fit.ok

    def test_scalar_study_is_exponentially_turnpiked(self, scalar_model, scalar_batch,
                                                     unit_cost, scalar_benchmark):
        N = 30
        prob = HorizonProblem(model=scalar_model, us=scalar_batch.inputs[: N + 1],
                              ys=scalar_batch.outputs[: N + 1], cost=unit_cost)
        sol = solve_linear_horizon(prob)
        prof = turnpike_profile([sol], scalar_benchmark, N=N)
        fit = fit_exponential_envelope(prof)
        assert fit.ok and 0.0 < fit.lam < 1.0
        logd = np.log(prof.state_dev[0][prof.state_dev[0] > 1e-12])
        assert fit.residual < 0.1 * np.linalg.norm(logd)


def scalar_certificate():
    # supply inequality for x+ = x + w, y = x: p(a+b)^2 <= (eta*p + r)a^2 + q b^2
    # holds for all (a, b) iff [[eta*p + r - p, -p], [-p, q - p]] is PSD;
    # p=1, eta=0.5, q=3, r=1.5 gives [[1, -1], [-1, 2]], eigenvalues > 0
    return IossCertificate(P1=[[1.0]], P2=[[1.0]], Q=[[3.0]], R=[[1.5]], eta=0.5)


class TestAccuracyBound:
    def test_supply_inequality_pointwise(self):
        cert = scalar_certificate()
        p = cert.P1[0, 0]
        M = np.array([
            [cert.eta * p + cert.R[0, 0] - p, -p],
            [-p, cert.Q[0, 0] - p],
        ])
        assert np.min(np.linalg.eigvalsh(M)) >= 0.0
        rng = np.random.default_rng(0)
        for _ in range(200):
            a, b = rng.uniform(-10, 10, 2)
            lhs = p * (a + b) ** 2
            rhs = cert.eta * p * a * a + cert.Q[0, 0] * b * b + cert.R[0, 0] * a * a
            assert lhs <= rhs + 1e-12

    def test_truth_under_zero_noise_attains_zero(self):
        model = scalar_integrator()
        batch = simulate(model, [1.0], InputProfile("zero"), NoiseSpec.silent(1, 1),
                         T=10, seed=0)
        cert = scalar_certificate()
        cost = CostSpec(Q=cert.Q, R=cert.R, G=cert.R)
        lhs, rhs = accuracy_bound(cert, batch.states, batch, cost, 0, 10, 5)
        assert lhs == 0.0 and rhs == 0.0

    def test_bound_holds_along_estimator_run(self, unit_cost):
        model = scalar_integrator()
        noise = NoiseSpec(w_bounds=[0.4], v_bounds=[0.4])
        cert = scalar_certificate()
        cost_cert = CostSpec(Q=cert.Q, R=cert.R, G=cert.R)
        for seed in range(3):
            batch = simulate(model, [1.0], InputProfile("zero"), noise, T=25, seed=seed)
            est = mhe(batch, unit_cost, 8)
            lhs, rhs = accuracy_bound_curve(cert, est, batch, cost_cert, 0, 25)
            assert np.all(lhs <= rhs + 1e-12)

    def test_tau_at_interval_start(self, scalar_batch, unit_cost):
        cert = scalar_certificate()
        cost_cert = CostSpec(Q=cert.Q, R=cert.R, G=cert.R)
        est = fie(scalar_batch, unit_cost)
        lhs, rhs = accuracy_bound(cert, est, scalar_batch, cost_cert, 3, 20, 3)
        assert lhs <= rhs

    def test_invalid_certificate_rejected(self):
        with pytest.raises(ValidationError):
            IossCertificate(P1=[[1.0]], P2=[[1.0]], Q=[[1.0]], R=[[1.0]], eta=1.2)

    def test_tau_outside_interval_rejected(self, scalar_batch, unit_cost):
        cert = scalar_certificate()
        est = fie(scalar_batch, unit_cost)
        with pytest.raises(ValidationError):
            accuracy_bound(cert, est, scalar_batch, unit_cost, 0, 10, 11)
