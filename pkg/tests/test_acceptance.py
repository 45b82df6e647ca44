"""Acceptance gate: one test per release criterion.

Every test prints a single "criterion N [...]: PASS/FAIL (...)" line before
asserting, so the verdict survives in the captured output either way.  Run
with -s to see all nine lines on a green suite.
"""

import pathlib
import time

import numpy as np
import scipy.linalg

from qmslab import cli, sampling
from qmslab.entropy import (entropy_production_direct,
                            entropy_production_fisher, estimate_mlsi)
from qmslab.holley_stroock import (chain_rule_check, check_entropy_comparison,
                                   check_ep_comparison, hs_factor_primitive)
from qmslab.lindblad import (JumpOperatorSet, LindbladModel,
                             complete_matrix_unit_generator,
                             depolarizing_generator, semigroup_superoperator,
                             stabilizing_generator)
from qmslab.operator_core import (choi_matrix, dag, is_tp,
                                  lindblad_relative_entropy, powm_psd, unvec,
                                  vec)
from qmslab.reporting import summarize_reports
from qmslab.sdpi import (channel_from_model, check_sdpi_bound,
                         depolarizing_channel, estimate_sdpi,
                         state_projection_superop)
from qmslab.stateprep import (build_history_model, clock_transition_generator,
                              default_time_points, run_preparation,
                              run_stopping_time, stopping_register_threshold)
from qmslab.thermal import (GibbsSpec, effective_low_energy_model,
                            ladder_model, thermal_hs_factor, truncated_gibbs)

from test_lindblad import random_db_model, unit

CONFIGS = pathlib.Path(__file__).resolve().parents[1] / "configs"

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)


def verdict(num, slug, ok, detail):
    line = "criterion %d [%s]: %s (%s)" % (num, slug, "PASS" if ok else "FAIL",
                                           detail)
    print(line)
    assert ok, line


def shared_jump_pair(seed, d):
    """Two primitive models on one path-connected jump set, random diagonals."""
    rng = sampling.child_rng(seed, 0)
    ops = []
    for k in range(d - 1):
        chi = 0.3 + rng.random()
        ops += [unit(d, k, k + 1, chi), unit(d, k + 1, k, chi)]
    js = JumpOperatorSet(ops)
    p = sampling.random_probability_vector(rng, d)
    q = sampling.random_probability_vector(rng, d)
    return (LindbladModel.from_jumps(js, np.diag(p)),
            LindbladModel.from_jumps(js, np.diag(q)))


def test_criterion_1_entropy_production_two_routes():
    n_models, n_states = 500, 10
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(n_models):
        d = 2 + i % 4
        model = random_db_model(1000 + i, d)
        rng = sampling.child_rng(1, i)
        for rho in sampling.random_state_suite(rng, d, n_states):
            a = entropy_production_direct(model, rho)
            b = entropy_production_fisher(model, rho)
            worst = max(worst, abs(a - b) / (1.0 + a))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 120.0
    verdict(1, "entropy-production-two-routes", ok,
            f"{n_models} models x {n_states} states dims 2-5, worst "
            f"|direct-fisher|/(1+direct) {worst:.2e} vs 1e-8, "
            f"{elapsed:.1f}s vs 120s")


def test_criterion_2_entropy_derivative_identity():
    h = 1e-5
    worst = 0.0
    for i in range(200):
        d = 2 + i % 3
        model = random_db_model(2000 + i, d)
        rng = sampling.child_rng(2, i)
        # spectral floor keeps the backward half-step positive definite
        rho = 0.9 * sampling.random_full_rank_density(rng, d) \
            + 0.1 * np.eye(d) / d
        sig = model.sigma.rho
        ep = entropy_production_direct(model, rho)
        side = []
        for t in (h, -h):
            out = unvec(semigroup_superoperator(model.schrodinger, t)
                        @ vec(rho))
            out = 0.5 * (out + dag(out))
            side.append(lindblad_relative_entropy(out, sig))
        minus_ddt = (side[1] - side[0]) / (2.0 * h)
        worst = max(worst, abs(minus_ddt - ep) / (1.0 + abs(ep)))
    ok = worst <= 1e-5
    verdict(2, "entropy-derivative-identity", ok,
            f"200 instances, central step h={h:g} at t=0, worst "
            f"|(-dD/dt)-EP|/(1+EP) {worst:.2e} vs 1e-5")


def test_criterion_3_change_of_measure_suites():
    reports = []
    for i in range(100):
        d = 2 + i % 3
        a, b = shared_jump_pair(3000 + i, d)
        reports += check_entropy_comparison(a, b, n_samples=25, seed=300 + i)
        reports += check_ep_comparison(a, b, n_samples=25, seed=600 + i)
        m, _ = shared_jump_pair(9000 + i, 2 + (i + 1) % 3)
        reports += check_entropy_comparison(m, n_samples=25, seed=900 + i,
                                            ancilla_dim=2)
        reports += check_ep_comparison(m, n_samples=25, seed=1200 + i,
                                       ancilla_dim=2 if i % 2 else None)
    summ = summarize_reports(reports)
    ok = summ["n_total"] == 10_000 and summ["n_fail"] == 0
    verdict(3, "change-of-measure-comparisons", ok,
            f"{summ['n_total']} pointwise instances over 4 suites, "
            f"{summ['n_fail']} failures at slack >= -(1e-9+1e-9|rhs|), "
            f"worst slack {summ['worst_slack']:.2e}")


def test_criterion_4_reference_decay_constants():
    ok = True
    details = []
    for m in (3, 4):
        est = estimate_mlsi(complete_matrix_unit_generator(m),
                            n_samples=200, seed=40 + m)
        lo = float(np.min(est.ratios))
        ok = ok and lo >= 2 * m - 1e-6 and est.value >= 2 * m - 1e-6
        details.append(f"complete m={m} min ratio {lo:.8f} vs {2 * m}-1e-6")
    rng = sampling.child_rng(44, 0)
    for model in (depolarizing_generator(2), depolarizing_generator(3),
                  stabilizing_generator(sampling.random_full_rank_density(
                      rng, 3))):
        est = estimate_mlsi(model, n_samples=200, seed=45)
        lo = float(np.min(est.ratios))
        ok = ok and lo >= 1.0 - 1e-6 and est.value >= 1.0 - 1e-6
        details.append(f"{model.label} min ratio {lo:.8f} vs 1-1e-6")
    verdict(4, "reference-decay-constants", ok, "; ".join(details))


def test_criterion_5_contraction_proof_chain():
    ok = True
    worst_c = 0.0
    n_chain = 0
    for i in range(100):
        d = 2 if i % 2 == 0 else 3
        model, _ = shared_jump_pair(5000 + i, d)
        ch = channel_from_model(model, 0.3 + 0.012 * i)
        rep = check_sdpi_bound(ch, n_samples=100, seed=500 + i)
        w = rep.witness
        n_chain += w["n_checked"]
        worst_c = max(worst_c, w["c_phi"])
        ok = ok and rep.passed and w["all_samples_pass"] \
            and w["c_phi"] <= 1.0 + 1e-9 \
            and w["estimate_comparison"]["pass"]
    # qubit depolarizing classical reduction: images commute with inputs,
    # so the contraction ratio depends only on the Bloch radius
    def binary_center_kl(r):
        p = (1.0 + r) / 2.0
        return p * np.log(2.0 * p) + (1.0 - p) * np.log(2.0 * (1.0 - p))

    p_mix = 0.35
    radii = np.geomspace(1e-4, 1.0 - 1e-9, 10_000)
    oracle = float(np.max(binary_center_kl((1.0 - p_mix) * radii)
                          / binary_center_kl(radii)))
    est = estimate_sdpi(depolarizing_channel(2, p_mix),
                        state_projection_superop(np.eye(2) / 2.0),
                        n_samples=200, seed=55)
    rel = abs(est.value - oracle) / oracle
    ok = ok and rel <= 0.02
    verdict(5, "contraction-proof-chain", ok,
            f"100 channels x 100 states, {n_chain} chain samples pass, "
            f"max c estimate {worst_c:.6f} vs 1+1e-9; depolarizing estimate "
            f"within {rel:.2%} of 1e4-point grid oracle vs 2%")


def test_criterion_6_preparation_and_stopping():
    ok = True
    worst_slack = np.inf
    n_runs = 0
    rng = sampling.child_rng(6, 0)
    gates = [PAULI_X, HADAMARD, HADAMARD @ PAULI_X]
    for T in (1, 2, 3):
        logical = random_db_model(6000 + T, 2)
        hm = build_history_model(logical, gates[:T], n_samples=30,
                                 seed=60 + T)
        for j, s in enumerate(default_time_points(hm.kappa, n=10)):
            X = sampling.random_positive_definite(rng, 2) if j % 2 \
                else sampling.random_density(rng, 2)
            run = run_preparation(hm, X, float(s),
                                  input_mode="uniform" if j % 2 else "zero")
            ok = ok and run.report.passed and run.decay_report.passed \
                and run.trace_report.passed
            worst_slack = min(worst_slack, run.report.slack)
            n_runs += 1
    # restart rule: observed failure probability is the product closed form
    hm = build_history_model(random_db_model(6100, 2), [PAULI_X, HADAMARD],
                             n_samples=30, seed=61)
    s = 2.0 / hm.kappa
    m = max(1, int(np.ceil(stopping_register_threshold(hm.T, hm.kappa, s))))
    srun = run_stopping_time(hm, np.eye(2) / 2.0, s, m)
    p = np.maximum(scipy.linalg.expm(-s * clock_transition_generator(
        hm.tim_model))[:, 0].real, 0.0)
    closed = (1.0 - p[hm.T] / p.sum()) ** m
    eps_dev = abs(srun.failure_prob - closed) / closed
    ok = ok and eps_dev <= 1e-12 and srun.report.passed \
        and srun.renormalized_report.passed
    verdict(6, "preparation-and-stopping", ok,
            f"T=1,2,3 x 10-point time grid, {n_runs} runs, worst bound slack "
            f"{worst_slack:.2e} vs -(1e-8+1e-9 rhs); failure prob vs closed "
            f"form rel dev {eps_dev:.2e} vs 1e-12 at m={m}")


def test_criterion_7_thermal_transfer():
    ok = True
    rng = np.random.default_rng(7)
    worst = 0.0
    for beta in (0.0, 0.5, 1.0, 2.0):
        for _ in range(3):
            g = GibbsSpec(tuple(np.sort(rng.uniform(0.0, 3.0, size=4))), beta)
            fa = thermal_hs_factor(g)
            fb = hs_factor_primitive(ladder_model(g))
            worst = max(worst, abs(fa.total - fb.total) / fb.total)
    ok = ok and worst <= 1e-10
    mono = True
    for beta in (0.7, 1.5):
        g = GibbsSpec((0.0, 1.0, 2.5, 4.0, 5.2), beta)
        dists = np.array([truncated_gibbs(g, l)[1:] for l in range(1, g.m + 1)])
        mono = mono and np.all(np.diff(dists[:, 0]) <= 1e-12) \
            and np.all(np.diff(dists[:, 1]) <= 1e-12)
    ok = ok and mono
    worst_decay = np.inf
    for i, (en, beta, e0) in enumerate((((0.0, 1.0, 2.2, 3.1), 1.0, 2.2),
                                        ((0.0, 0.8, 1.6, 4.0), 1.5, 1.6))):
        g = GibbsSpec(en, beta)
        _, rep = effective_low_energy_model(ladder_model(g), g, e0,
                                            seed=70 + i)
        ok = ok and rep.passed
        worst_decay = min(worst_decay, rep.slack)
    verdict(7, "thermal-transfer", ok,
            f"closed-form factor vs generic route rel dev {worst:.2e} vs "
            f"1e-10 on 4 betas x 3 spectra; truncation distances monotone: "
            f"{mono}; flag-free decay worst slack {worst_decay:.2e} vs -1e-8 "
            f"on 4-level ladders")


def test_criterion_8_structural_suite():
    ok = True
    models = [random_db_model(8000 + i, 2 + i % 3) for i in range(24)]
    models += [depolarizing_generator(2), depolarizing_generator(3),
               complete_matrix_unit_generator(3),
               ladder_model(GibbsSpec((0.0, 1.0, 2.5), 1.2)),
               stabilizing_generator(sampling.random_full_rank_density(
                   sampling.child_rng(8, 0), 3))]
    rng = sampling.child_rng(8, 1)
    worst_eig = 0.0
    tp_all = True
    for model in models:
        for t in (0.3, 1.7, float(rng.uniform(0.05, 3.0))):
            P = semigroup_superoperator(model.schrodinger, t)
            C = choi_matrix(P)
            w = np.linalg.eigvalsh(0.5 * (C + dag(C)))
            worst_eig = min(worst_eig, float(w.min()))
            tp_all = tp_all and is_tp(P)
    ok = ok and worst_eig >= -1e-9 and tp_all
    worst_dp = np.inf
    for i in range(40):
        d = 2 + i % 2
        rng = sampling.child_rng(80, i)
        ks = [sampling.random_complex(rng, (d, d)) for _ in range(3)]
        norm = powm_psd(sum(dag(K) @ K for K in ks), -0.5)
        ks = [K @ norm for K in ks]
        X = sampling.random_positive_definite(rng, d)
        Y = sampling.random_positive_definite(rng, d)
        lhs = lindblad_relative_entropy(sum(K @ X @ dag(K) for K in ks),
                                        sum(K @ Y @ dag(K) for K in ks))
        rhs = lindblad_relative_entropy(X, Y)
        worst_dp = min(worst_dp, rhs - lhs)
        ok = ok and lhs <= rhs + 1e-9 * (1.0 + abs(rhs))
    corner = LindbladModel.from_jumps(
        JumpOperatorSet([unit(4, 0, 1, 0.8), unit(4, 1, 0, 0.8)]),
        np.diag([0.3, 0.2, 0.3, 0.2]))
    chain_ok = True
    for i, model in enumerate((random_db_model(8800, 2),
                               random_db_model(8801, 3), corner)):
        fa = model.fixed_point(80 + i)
        rng = sampling.child_rng(88, i)
        for _ in range(10):
            X = sampling.random_positive_definite(rng, model.dim)
            Y = fa.E_star(sampling.random_positive_definite(rng, model.dim))
            rep = chain_rule_check(X, 0.5 * (Y + dag(Y)), fa.E_star)
            chain_ok = chain_ok and rep.passed
    ok = ok and chain_ok
    verdict(8, "structural-suite", ok,
            f"{len(models)} semigroups x 3 times, worst Choi eigenvalue "
            f"{worst_eig:.2e} vs -1e-9, trace preserving: {tp_all}; data "
            f"processing worst slack {worst_dp:.2e} vs -1e-9(1+rhs) on 40 "
            f"channels; chain rule within 1e-9(1+total) on 30 draws: "
            f"{chain_ok}")


def test_criterion_9_manifest_determinism(tmp_path):
    qubit = str(CONFIGS / "qubit_ad.yaml")
    invocations = {
        "check-model": ["check-model", qubit, "--samples", "6",
                        "--seed", "9"],
        "decay": ["decay", qubit, "--samples", "4", "--seed", "9",
                  "--t-max", "1.5", "--n-times", "8", "--no-figures"],
        "estimate": ["estimate", qubit, "--kind", "mlsi", "--samples", "15",
                     "--seed", "9"],
        "hs-verify": ["hs-verify", str(CONFIGS / "qutrit_base.yaml"),
                      str(CONFIGS / "qutrit_perturbed.yaml"),
                      "--samples", "4", "--seed", "9"],
    }
    ok = True
    n_files = 0
    for tag, argv in invocations.items():
        blobs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{tag}-{rep}"
            rc = cli.main(argv + ["--out", str(out)])
            ok = ok and rc == 0
            # wall times live in timing.txt; every other artifact must be
            # reproducible byte for byte
            blobs.append({p.name: p.read_bytes() for p in out.iterdir()
                          if p.is_file() and p.name != "timing.txt"})
        ok = ok and "manifest.json" in blobs[0] and blobs[0] == blobs[1]
        n_files += len(blobs[0])
    verdict(9, "manifest-determinism", ok,
            f"{len(invocations)} commands x 2 same-seed runs, {n_files} "
            f"artifacts byte-compared")
