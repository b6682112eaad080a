"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Heavy artifacts (fine trees, deep solves, large Monte Carlo runs) are
session fixtures shared across criteria.  Everything is deterministic:
solver grids and Monte Carlo seeds are pinned below.

This module takes ten minutes or so on one desktop core; the compiled
kernel backend is strongly recommended (built automatically on install).
"""

import json
import math
import time

import numpy as np
import pytest

import anscombe as A
from anscombe.cli import main as cli_main

TWO_POINT = A.SymmetricTwoPoint(1.0)
K = 2000
TREE_DR = 2.5e-5
S_MIN = -1.2e4
MC_PATHS = 100_000

SEED_STOP_TIME = 20260810
SEED_GIRSANOV_TP = 11
SEED_GIRSANOV_NORMAL = 12
SEED_OU = 101


@pytest.fixture(scope="session")
def b_sym():
    return A.solve_symmetric(TWO_POINT, A.SolverConfig(k=K))


@pytest.fixture(scope="session")
def tree_sym():
    vg = A.value_iteration(A.TrialReward(TWO_POINT), (1.0, 0.02), TREE_DR, y_max=8.0)
    return A.extract_boundary(vg)


@pytest.fixture(scope="session")
def c_deep():
    return A.solve_c(A.SolverConfig(k=K), s_min=S_MIN)


@pytest.fixture(scope="session")
def cq_deep():
    cfg = A.SolverConfig(k=K)
    return {q: A.solve_cq(q, cfg, s_min=S_MIN) for q in (0.0, 1.0, 5.0)}


@pytest.fixture(scope="session")
def b_asym():
    cfg = A.SolverConfig(k=K)
    return {q: A.solve_asymmetric(TWO_POINT, A.AsymmetricSpec(q), cfg) for q in (0.0, 1.0, 5.0)}


def _compare_window(solved, tree, lo=0.05, hi=0.95, side="upper"):
    mask = (solved.grid >= lo) & (solved.grid <= hi)
    rr = solved.grid[mask]
    if side == "upper":
        return float(np.max(np.abs(tree.upper_at(rr) - solved.upper[mask])))
    return float(np.max(np.abs(tree.lower_at(rr) - solved.lower[mask])))


class TestCriterion1:
    def test_symmetric_oracle_equivalence(self, acceptance, b_sym, tree_sym):
        t0 = time.time()
        sup = _compare_window(b_sym, tree_sym)
        elapsed = time.time() - t0
        acceptance.check(
            1,
            "tree oracle vs symmetric solve, sup diff <= 0.05 on [0.05, 0.95]",
            sup <= 0.05 and elapsed <= 600.0,
            f"sup={sup:.4f}",
        )


class TestCriterion2:
    def test_normal_oracle_equivalence(self, acceptance, c_deep):
        vg = A.value_iteration(A.StandardizedReward(0.0), (-1.0, -2.0), TREE_DR, y_max=7.0)
        tree = A.extract_boundary(vg)
        r0 = 1.0
        rr = np.linspace(0.05, 0.95, 181)
        ss = np.array([A.s_of_r(r, r0) for r in rr])
        bm_solver = np.array([A.posterior_mean_boundary(c_deep, r0, r) for r in rr])
        bm_tree = tree.upper_at(ss) / math.sqrt(r0 + 1.0)
        sup = float(np.max(np.abs(bm_solver - bm_tree)))
        acceptance.check(
            2,
            "posterior-mean boundary vs lattice oracle, sup diff <= 0.05",
            sup <= 0.05,
            f"sup={sup:.4f}",
        )


class TestCriterion3:
    def test_residual_certificate(self, acceptance, b_sym):
        from anscombe import _kernels
        from anscombe.priors import atoms

        pts, wts = atoms(TWO_POINT)
        res = _kernels.residual_symmetric_nodes(pts, wts, b_sym.grid, b_sym.upper)
        worst = float(np.max(res[1:]))
        acceptance.check(
            3,
            f"discretized-equation residual <= 1e-3 at all {K - 1} interior nodes",
            worst <= 1e-3,
            f"max={worst:.2e}",
        )


class TestCriterion4:
    def test_q_zero_reduction(self, acceptance, b_sym, b_asym, c_deep, cq_deep):
        d_r = float(np.max(np.abs(b_asym[0.0].upper - b_sym.upper)))
        d_s = float(np.max(np.abs(cq_deep[0.0].upper - c_deep.upper)))
        acceptance.check(
            4,
            "(a) coupled q=0 solves equal the symmetric ones within 1e-6",
            d_r <= 1e-6 and d_s <= 1e-6,
            f"trial={d_r:.2e} standardized={d_s:.2e}",
        )

    def test_monotone_in_q(self, acceptance, b_asym, cq_deep):
        ok_r = bool(
            np.all(b_asym[1.0].upper <= b_asym[0.0].upper + 1e-12)
            and np.all(b_asym[5.0].upper <= b_asym[1.0].upper + 1e-12)
        )
        ok_s = bool(
            np.all(cq_deep[1.0].upper <= cq_deep[0.0].upper + 1e-12)
            and np.all(cq_deep[5.0].upper <= cq_deep[1.0].upper + 1e-12)
        )
        acceptance.check(
            4,
            "(b) upper boundary pointwise nonincreasing in q over {0, 1, 5}",
            ok_r and ok_s,
        )

    def test_asymmetric_tree(self, acceptance, b_asym):
        vg = A.value_iteration(A.TrialReward(TWO_POINT, q=1.0), (1.0, 0.02), TREE_DR, y_max=8.0)
        tree = A.extract_boundary(vg)
        du = _compare_window(b_asym[1.0], tree, side="upper")
        dl = _compare_window(b_asym[1.0], tree, side="lower")
        acceptance.check(
            4,
            "(c) q=1 boundaries vs lattice oracle within 0.05",
            du <= 0.05 and dl <= 0.05,
            f"upper={du:.4f} lower={dl:.4f}",
        )


class TestCriterion5:
    def test_deep_time_ratios(self, acceptance, c_deep, cq_deep):
        tols = {-100.0: 0.05, -1000.0: 0.03, -1e4: 0.02}
        detail = []
        ok = True
        for q, curve in ((0.0, c_deep), (1.0, cq_deep[1.0])):
            for s, tol in tols.items():
                ratio = float(curve.upper_at(s)) / A.asymptotic_cq(s, q)
                ok = ok and abs(ratio - 1.0) <= tol
                detail.append(f"q={q:g},s={s:g}:{ratio:.4f}")
        acceptance.check(
            5,
            "solved/deep-time-form ratios within 5%/3%/2% at s = -1e2/-1e3/-1e4",
            ok,
            " ".join(detail),
        )

    def test_pvalue_linearization(self, acceptance, c_deep):
        rr = np.exp(np.linspace(math.log(1e-4), math.log(1e-2), 25))
        ratios = np.array(
            [A.pvalue_boundary(c_deep, 0.0, 0.0, r) / r for r in rr]
        )
        ok = bool(np.all(np.abs(ratios - 1.0) <= 0.15))
        acceptance.check(
            5,
            "p-value boundary over r within 15% of 1 on [1e-4, 1e-2]",
            ok,
            f"range=[{ratios.min():.3f}, {ratios.max():.3f}]",
        )


class TestCriterion6:
    def test_regulator_comparison(self, acceptance, capsys):
        ok = cli_main(["compare-classical", "--alpha", "0.025", "--r", "1e-5"]) == 0
        large = json.loads(capsys.readouterr().out)
        ok = ok and cli_main(["compare-classical", "--alpha", "0.025", "--r", "1e-3"]) == 0
        small = json.loads(capsys.readouterr().out)
        exact = large["classical_threshold"] == 0.025 * 0.025
        ok = (
            ok
            and exact
            and abs(large["classical_threshold"] - 0.000625) < 1e-12
            and large["verdict"] == "classical_accepts_more"
            and small["verdict"] == "optimal_accepts_more"
        )
        acceptance.check(
            6,
            "classical two-studies threshold 0.000625 and both orderings reproduced",
            ok,
            f"thr={large['classical_threshold']:.6g}",
        )


class TestCriterion7:
    def test_one_sided_closed_forms(self, acceptance):
        ok = True
        detail = []
        for d in (0.1, 1.0, 10.0):
            c = math.sqrt(d * d + 2.0)
            closed = A.maximin_exp_one_sided(d).threshold
            numeric = A.find_root(
                lambda x: d * math.cosh(d * x) - c * math.sinh(d * x),
                A.RootBracket(1e-8, 5.0 / d, tol=1e-14),
            )
            form2 = math.log((c + d) / (c - d)) / (2.0 * d)
            ok = ok and abs(closed - numeric) <= 1e-10 and abs(closed - form2) <= 1e-12
            detail.append(f"d={d:g}:{abs(closed - numeric):.1e}")
        acceptance.check(
            7,
            "(a) one-sided threshold closed form vs numeric root <= 1e-10",
            ok,
            " ".join(detail),
        )

    def test_mean_stop_time(self, acceptance):
        res = A.maximin_exp_two_sided(1.0)
        est = A.mc_mean_stop_time(
            res.threshold, n_paths=MC_PATHS, step=5e-6, seed=SEED_STOP_TIME
        )
        diff = abs(est.mean - res.expected_stop_time)
        acceptance.check(
            7,
            "(b) Monte Carlo mean exit time equals threshold^2 within 3 s.e.",
            diff <= 3.0 * est.std_error,
            f"diff={diff:.5f} 3se={3 * est.std_error:.5f}",
        )


class TestCriterion8:
    def test_kummer_residuals(self, acceptance):
        worst = max(abs(A.lomax_threshold(r0).residual) for r0 in (0.1, 1.0, 10.0))
        acceptance.check(
            8,
            "(a) Kummer-equation residual <= 1e-8 at r0 in {0.1, 1, 10}",
            worst <= 1e-8,
            f"max={worst:.1e}",
        )

    def test_threshold_local_optimality(self, acceptance):
        r0 = 1.0
        w = A.lomax_threshold(r0).threshold
        rate = 2.0 * r0 + 1.0
        base = A.mc_ou_discounted_value(w, rate, n_paths=MC_PATHS, step=1e-4, seed=SEED_OU)
        ok = True
        detail = [f"V(w*)={base.mean:.5f}"]
        for factor in (0.9, 1.1):
            other = A.mc_ou_discounted_value(
                factor * w, rate, n_paths=MC_PATHS, step=1e-4, seed=SEED_OU
            )
            comb = math.hypot(base.std_error, other.std_error)
            ok = ok and base.mean >= other.mean - 3.0 * comb
            detail.append(f"V({factor:g}w*)={other.mean:.5f}")
        acceptance.check(
            8, "(b) simulated threshold value is a local maximum within 3 s.e.",
            ok, " ".join(detail),
        )


class TestCriterion9:
    def test_two_point_cross_check(self, acceptance, b_sym):
        t0 = time.time()
        pol = A.mc_policy_value(
            TWO_POINT, b_sym, n_paths=MC_PATHS, step=1e-4, seed=SEED_GIRSANOV_TP
        )
        trn = A.mc_transformed_value(
            TWO_POINT, b_sym, n_paths=MC_PATHS, step=1e-4, seed=SEED_GIRSANOV_TP
        )
        elapsed = time.time() - t0
        comb = math.hypot(pol.std_error, trn.std_error)
        diff = abs(pol.mean - trn.mean)
        acceptance.check(
            9,
            "(a) drifted vs driftless estimates agree (two-point prior)",
            diff <= 3.0 * comb and elapsed <= 300.0,
            f"diff={diff:.5f} 3se={3 * comb:.5f} t={elapsed:.0f}s",
        )

    def test_normal_cross_check(self, acceptance, c_deep, b_sym):
        prior = A.NormalConjugate(0.0, 1.0)
        upper = np.array([A.sum_boundaries(c_deep, 0.0, 1.0, r)[0] for r in b_sym.grid])
        boundary = A.Boundary(grid=b_sym.grid, upper=upper)
        pol = A.mc_policy_value(
            prior, boundary, n_paths=MC_PATHS, step=1e-4, seed=SEED_GIRSANOV_NORMAL
        )
        trn = A.mc_transformed_value(
            prior, boundary, n_paths=MC_PATHS, step=1e-4, seed=SEED_GIRSANOV_NORMAL
        )
        comb = math.hypot(pol.std_error, trn.std_error)
        diff = abs(pol.mean - trn.mean)
        acceptance.check(
            9,
            "(b) drifted vs driftless estimates agree (normal prior)",
            diff <= 3.0 * comb,
            f"diff={diff:.5f} 3se={3 * comb:.5f}",
        )


class TestCriterion10:
    def test_fixed_point_agreement(self, acceptance, b_sym):
        cfg = A.SolverConfig(k=K, fp_tol=1.2e-5, fp_max_iter=2500)
        fp = A.solve_fixed_point(TWO_POINT, cfg)
        sup = float(np.max(np.abs(fp.boundary.upper - b_sym.upper)))
        acceptance.check(
            10,
            "trapezoid vs fixed-point boundaries within 0.02 on the shared grid",
            sup <= 0.02,
            f"sup={sup:.4f} iters={fp.iterations}",
        )


class TestCriterion11:
    def test_discount_properties(self, acceptance):
        models = [
            A.FixedHorizon(50.0),
            A.ExponentialHorizon(2.0),
            A.LomaxHorizon(3.0, 4.0),
            A.LomaxHorizon(1.0, 1000.0),
        ]
        ok = all(A.f_tilde(m, 0.0) == 1.0 for m in models)
        ok = ok and all(A.f_tilde_derivative(m, 0.0) == -1.0 for m in models)
        grid = np.linspace(0.0, 6.0, 1500)
        for m in models:
            vals = np.array([A.f_tilde(m, r) for r in grid])
            ok = ok and bool(np.all(np.diff(vals, 2) >= -1e-12))
        lom = A.LomaxHorizon(1.0, 1000.0)
        rr = np.linspace(0.0, 5.0, 600)
        gap = max(abs(A.f_tilde(lom, r) - math.exp(-r)) for r in rr)
        ok = ok and gap <= 2e-3
        acceptance.check(
            11,
            "discount starts at 1 with slope -1, stays convex; heavy-tail limit",
            ok,
            f"lomax-vs-exp gap={gap:.1e}",
        )
