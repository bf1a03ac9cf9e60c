"""Acceptance criteria A1-A16, one test each, at the stated tolerances."""

import math
import time

import numpy as np
import pytest

from cylidla import _rng, experiments as ex, graphs, harmonic, idla, observables, spectral, stats

ALL_GRAPHS = [graphs.build_cycle(8), graphs.build_cycle(16), graphs.build_cycle(64),
              graphs.build_torus(3, 2), graphs.build_torus(4, 2), graphs.build_torus(8, 2),
              graphs.build_torus(5, 2), graphs.build_generalized_petersen(5, 2),
              graphs.build_generalized_petersen(12, 5), graphs.build_complete(6),
              graphs.build_hypercube(4)]


@pytest.fixture(scope="module")
def a11_runs():
    base = dict(graph={"family": "cycle", "N": 64}, a_N=64, y0=1.0, replicates=1000,
                master_seed=20261016)
    return {eps: ex.exp_gff_clt(ex.ExperimentConfig(**base, fastforward_eps=eps))
            for eps in (1e-9, 1e-6, 1e-12)}


def test_a1_spectrum_oracle(criterion):
    g = graphs.build_cycle(64)
    spectral.decompose(graphs.build_cycle(8))  # compile outside the timed region
    t0 = time.perf_counter()
    s = spectral.decompose(g)
    elapsed = time.perf_counter() - t0
    c = spectral.closed_form_cycle(64)
    ev = float(np.max(np.abs(np.sort(s.eigenvalues) - np.sort(c.eigenvalues))))
    proj = max(float(np.max(np.abs(s.projector(b) - c.projector(b)))) for b in c.blocks())
    criterion("A1", ev <= 1e-10 and proj <= 1e-8 and elapsed < 1.0,
              f"eig diff {ev:.2e}, projector diff {proj:.2e}, {elapsed:.3f} s")


def test_a2_orthonormality_parseval(criterion):
    worst_o = worst_p = 0.0
    for g in ALL_GRAPHS:
        routes = [spectral.decompose(g)]
        cf = spectral.closed_form(g)
        if cf is not None:
            routes.append(cf)
        for s in routes:
            F = s.vectors
            worst_o = max(worst_o, float(np.max(np.abs(F.T @ F / g.N - np.eye(g.N)))))
            worst_p = max(worst_p, float(np.max(np.abs((F**2).sum(axis=1) - g.N))) / g.N)
    criterion("A2", worst_o <= 1e-8 and worst_p <= 1e-6,
              f"orthonormality {worst_o:.2e}, Parseval {worst_p:.2e} (relative)")


def test_a3_harmonicity(criterion):
    # Window: the band a cluster of T particles occupies, [-2 a_N, T/N + 4].
    t0 = time.perf_counter()
    worst_psi = worst_h = worst_rel = 0.0
    for g, N, a_N in [(graphs.build_cycle(16), 16, 16.0), (graphs.build_torus(4, 2), 16, 4.0)]:
        s = spectral.spectrum_for(g)
        T = int(N * a_N)
        tf = harmonic.TestFunction([harmonic.Mode(2, harmonic.ConstAlpha()),
                                    harmonic.Mode(3, harmonic.PolyAlpha([1.0, 0.5]))])
        ext = harmonic.HarmonicExtension(tf, s, a_N, T)
        ys = range(-2 * int(a_N), T // N + 5)
        r = harmonic.harmonicity_residual(ext, g, ys)
        worst_psi = max(worst_psi, r)
        worst_rel = max(worst_rel, r / float(np.max(np.abs(ext(np.arange(N), ys[-1])))))
        H = harmonic.LayerHitFunction((1, 5), s)
        worst_h = max(worst_h, harmonic.harmonicity_residual(H, g, range(-20, 5)))
    elapsed = time.perf_counter() - t0
    criterion("A3", worst_psi <= 1e-10 and worst_h <= 1e-10 and elapsed < 1.0,
              f"psi residual {worst_psi:.2e} ({worst_rel:.1e} relative), H residual "
              f"{worst_h:.2e}, {elapsed:.3f} s")


def test_a4_hzeta_three_way(criterion):
    t0 = time.perf_counter()
    res = ex.exp_hzeta_validation(ex.ExperimentConfig(
        name="hzeta", graph={"family": "cycle", "N": 8}, zeta=[0, 4], walks=100000,
        master_seed=4))
    elapsed = time.perf_counter() - t0
    s = res.summary
    pmin = min(m["p_value"] for m in s["monte_carlo"])
    ok = s["max_solve_error"] <= 1e-8 and pmin > 1e-3 and len(s["monte_carlo"]) == 3
    criterion("A4", ok and elapsed < 60,
              f"solve diff {s['max_solve_error']:.2e}, min MC p {pmin:.3f}, {elapsed:.1f} s")


def test_a5_abelian_exchange(criterion):
    worst = 0
    trials = 0
    for gs in ex.ABELIAN_GRAPHS:
        g = ex._build(gs)
        for T in (16, 64):
            worst = max(worst, ex.resample_suite(g, T, 1000, 5))
            trials += 1000
    criterion("A5", worst <= 2, f"{trials} trials, max |A sym-diff A'| = {worst}")


def test_a6_order_invariance(criterion):
    mism, digest = ex.permutation_suite(graphs.build_cycle(8), 64, 100, 6)
    criterion("A6", mism == 0, f"100 permutations, {mism} mismatches, digest {digest[:12]}")


def test_a7_couplings(criterion):
    v = ex.coupling_suite(graphs.build_cycle(8), 64, [2, 5], 100, 7)
    bad = {k: n for k, n in v.items() if k != "growth"}
    criterion("A7", sum(bad.values()) == 0, f"100 trials, violations {bad}")


def test_a8_conservation_and_height(criterion):
    # Every experiment run also goes through this check (NumericFailure otherwise).
    bad = runs = 0
    for g in ALL_GRAPHS[:9]:
        for mode in idla.MODES:
            for r in range(10):
                _, log = idla.run(g, 3 * g.N, _rng.replicate_seed(8, r),
                                  idla.EngineOptions(mode=mode))
                bad += not idla.check_growth(log)
                bad += not ex.growth_invariants(log.sites())
                runs += 1
    criterion("A8", bad == 0, f"{runs} runs across graphs and engine modes, {bad} violations")


def test_a9_first_hit_uniformity(criterion):
    t0 = time.perf_counter()
    res = ex.exp_hit_uniformity(ex.ExperimentConfig(
        name="hit_uniformity", level=10, walks=100000, master_seed=9,
        graphs=[{"family": "petersen", "n": 12, "k": 5}, {"family": "torus", "n": 5, "dim": 2}]))
    elapsed = time.perf_counter() - t0
    ps = [g["p_value"] for g in res.summary["graphs"]]
    criterion("A9", res.passed and elapsed < 60,
              f"p = {ps[0]:.3f} (Nauru), {ps[1]:.3f} (torus 5x5), {elapsed:.1f} s")


def test_a10_martingale_zero_mean(criterion):
    g = graphs.build_cycle(16)
    T, h, M = 128, 6, 1000
    s = spectral.spectrum_for(g)
    H = harmonic.LayerHitFunction((0, h), s)
    ext = harmonic.HarmonicExtension(harmonic.TestFunction.single(2), s, 16.0, T)
    mz, mpsi = [], []
    for r in range(M):
        seed = _rng.replicate_seed(10, r)
        _, _, slog = idla.run_stopped(g, T, h, seed)
        assert idla.check_growth(slog, stopped=True)
        mz.append(observables.martingale_trace_hzeta(slog.sites(), H)[-1])
        _, flog = idla.run(g, T, seed)
        assert idla.check_growth(flog)
        mpsi.append(observables.martingale_trace_psi(flog.sites(), ext)[-1])
    out = []
    for vals in (mz, mpsi):
        mean, var = ex.sample_mean_var(vals)
        out.append(abs(mean) / math.sqrt(var / M))
    criterion("A10", max(out) <= 4.0,
              f"|mean|/SE = {out[0]:.2f} (M_zeta), {out[1]:.2f} (M_N psi), M = {M}")


def test_a11_gff_variance(criterion, a11_runs):
    res = a11_runs[1e-9]
    s = res.summary
    gap_ratio = s["extra"]["gap_variance_ratio"]
    ok = s["relative_error"] <= 0.2 and gap_ratio <= 0.1 and s["ks"] <= 0.06
    criterion("A11", ok, f"variance {s['variance']:.5f} vs sigma^2 {s['target_sigma2']:.5f} "
                         f"(rel err {s['relative_error']:.3f}), gap ratio {gap_ratio:.4f}, "
                         f"KS {s['ks']:.4f}")


def test_a12_torus_variance(criterion):
    res = ex.exp_gff_clt(ex.ExperimentConfig(
        graph={"family": "torus", "n": 8, "dim": 2}, a_N=8, y0=1.0, replicates=1000,
        master_seed=12, tolerances={"variance_rel": 0.25}), target="surrogate")
    s = res.summary
    criterion("A12", s["relative_error"] <= 0.25,
              f"variance {s['variance']:.5f} vs surrogate {s['target_sigma2']:.5f} "
              f"(rel err {s['relative_error']:.3f}; limit value {s['extra']['sigma2_closed_form']:.5f})")


def test_a13_max_fluct_scaling(criterion):
    res = ex.exp_max_fluct(ex.ExperimentConfig(
        name="max_fluct", graph={"family": "cycle", "N": 16}, sizes=[16, 32, 64], replicates=200,
        master_seed=13))
    s = res.summary
    ok = s["fit_sqrt"]["r2"] > s["fit_linear"]["r2"] and s["corridor_fraction"] >= 0.99
    criterion("A13", ok, f"R^2 sqrt {s['fit_sqrt']['r2']:.4f} vs linear {s['fit_linear']['r2']:.4f}, "
                         f"corridor C {s['corridor_C']:.3f} covers {s['corridor_fraction']:.3f}")


def test_a14_apriori_tail(criterion):
    res = ex.exp_apriori_tail(ex.ExperimentConfig(
        name="apriori_tail", graph={"family": "cycle", "N": 16}, T=160, heights=list(range(3, 9)),
        replicates=10000, master_seed=14))
    worst = max(r[2] - r[3] - 3 * r[4] for r in res.rows)
    criterion("A14", res.summary["violations"] == 0,
              f"max (empirical - bound - 3 se) = {worst:.3g} over h = 3..8")


def test_a15_fastforward_fidelity(criterion, a11_runs):
    ff = ex.fastforward_bias(graphs.build_cycle(8), 64, 10000, 15, 1e-6)
    v6 = a11_runs[1e-6].summary
    v12 = a11_runs[1e-12].summary
    shift = abs(v6["variance"] - v12["variance"])
    se = v12["se_variance"]
    criterion("A15", ff["p_value"] > 1e-3 and shift < se,
              f"histogram p {ff['p_value']:.3f} over {ff['cells']} cells; variance shift "
              f"{shift:.2e} < SE {se:.2e}")


def test_a16_determinism(criterion):
    configs = [
        ex.ExperimentConfig(graph={"family": "cycle", "N": 16}, replicates=64, master_seed=16),
        ex.ExperimentConfig(name="max_fluct", graph={"family": "cycle", "N": 8}, sizes=[8, 16],
                            replicates=24, master_seed=16),
        ex.ExperimentConfig(name="apriori_tail", graph={"family": "cycle", "N": 16}, T=16,
                            heights=[2, 3], replicates=100, master_seed=16),
    ]
    same = [ex.run_experiment(c, threads=1).csv_text() == ex.run_experiment(c, threads=8).csv_text()
            for c in configs]
    criterion("A16", all(same), f"byte-identical CSV at 1 vs 8 workers: {same}")
