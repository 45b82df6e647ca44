"""Gibbs targets: factor transfer, truncation, flags, and relaxation."""

import numpy as np
import pytest
import scipy.linalg

from qmslab.errors import (DomainViolation, IncompatibleStates, ModelError,
                           SubalgebraError, SupportError)
from qmslab.holley_stroock import hs_factor_primitive
from qmslab.lindblad import (JumpOperatorSet, LindbladModel,
                             stabilizing_generator)
from qmslab.operator_core import dag, unvec, vec
from qmslab.thermal import (GibbsSpec, effective_low_energy_model,
                            flagged_evolution, ladder_model,
                            low_energy_projector, t1_relaxation_check,
                            thermal_hs_factor, truncated_gibbs,
                            truncated_spec)

from test_lindblad import unit

LADDER4 = GibbsSpec((0.0, 1.0, 5.0, 6.0), 2.0)


def conditioned_low_gibbs(g, e0):
    p = g.probabilities * (np.asarray(g.energies) <= e0 + 1e-12)
    return np.diag(p / p.sum()).astype(complex)


def test_gibbs_spec_validation():
    with pytest.raises(DomainViolation):
        GibbsSpec((1.0, 0.5), 1.0)
    with pytest.raises(DomainViolation):
        GibbsSpec((), 1.0)
    with pytest.raises(DomainViolation):
        GibbsSpec((0.0, 1.0), -0.5)
    with pytest.raises(DomainViolation):
        GibbsSpec((0.0, np.inf), 1.0)
    g = GibbsSpec((0.0, 1.0, 2.5), 0.8)
    np.testing.assert_allclose(g.probabilities.sum(), 1.0, rtol=1e-14)
    np.testing.assert_allclose(
        g.partition_function,
        np.exp(-0.8 * np.array([0.0, 1.0, 2.5])).sum(), rtol=1e-14)
    # huge gaps stay well conditioned through the ground shift
    big = GibbsSpec((1000.0, 3000.0), 1.0)
    np.testing.assert_allclose(big.probabilities[0], 1.0, atol=1e-300)
    assert np.isfinite(big.probabilities).all()


def test_shift_invariance():
    a = GibbsSpec((0.0, 1.0, 2.5), 0.8)
    b = GibbsSpec((5.0, 6.0, 7.5), 0.8)
    np.testing.assert_allclose(a.probabilities, b.probabilities, rtol=1e-14)
    np.testing.assert_allclose(thermal_hs_factor(a).total,
                               thermal_hs_factor(b).total, rtol=1e-14)


def test_thermal_factor_closed_form():
    g = GibbsSpec((0.0, 1.0, 2.0), 1.0)
    fac = thermal_hs_factor(g)
    np.testing.assert_allclose(fac.total, np.exp(2.5), rtol=1e-12)
    np.testing.assert_allclose(fac.total, 12.182493960703473, rtol=1e-12)


def test_thermal_factor_matches_ladder_model():
    rng = np.random.default_rng(110)
    for beta in (0.0, 0.5, 1.0, 2.0):
        for _ in range(3):
            e = np.sort(rng.uniform(0.0, 3.0, size=4))
            g = GibbsSpec(tuple(e), beta)
            fac = thermal_hs_factor(g)
            gen = hs_factor_primitive(ladder_model(g))
            np.testing.assert_allclose(fac.total, gen.total,
                                       rtol=1e-10, atol=1e-12)


def test_ladder_model_structure():
    g = GibbsSpec((0.0, 1.0, 2.5), 0.8)
    model = ladder_model(g, chi=0.7)
    assert model.fixed_point().is_trivial
    gaps = {0.8 * 1.0, 0.8 * 1.5}
    got = {round(abs(w), 12) for w in model.bohr_freqs}
    assert got == {round(x, 12) for x in gaps}
    with pytest.raises(ModelError):
        ladder_model(GibbsSpec((0.0,), 1.0))
    with pytest.raises(DomainViolation):
        ladder_model(g, chi=0.0)


def test_degenerate_spectrum_keeps_zero_frequency_edge():
    g = GibbsSpec((0.0, 1.0, 1.0, 2.0), 1.5)
    model = ladder_model(g)
    assert model.dim == 4 and len(model.jumps.ops) == 6
    assert min(abs(w) for w in model.bohr_freqs) == pytest.approx(0.0,
                                                                  abs=1e-12)
    fac = thermal_hs_factor(g)
    np.testing.assert_allclose(fac.total,
                               hs_factor_primitive(model).total, rtol=1e-10)


def test_truncated_spec():
    with pytest.raises(DomainViolation):
        truncated_spec(LADDER4, 0)
    with pytest.raises(DomainViolation):
        truncated_spec(LADDER4, 5)
    with pytest.raises(DomainViolation):
        truncated_spec(LADDER4, 1.5)
    assert truncated_spec(LADDER4, 4).energies == LADDER4.energies
    assert truncated_spec(LADDER4, 1).energies == (0.0,) * 4
    tg = truncated_spec(LADDER4, 2)
    assert tg.energies == (0.0, 1.0, 1.0, 1.0)
    np.testing.assert_allclose(thermal_hs_factor(tg).total,
                               20.085536923187668, rtol=1e-12)


def test_truncated_gibbs_distances():
    sig_t, bound, actual = truncated_gibbs(LADDER4, 2)
    np.testing.assert_allclose(bound, 0.38502054102987476, rtol=1e-12)
    np.testing.assert_allclose(actual, 0.38492974529247004, rtol=1e-12)
    assert actual <= bound
    # nuclear norm of the diagonal difference as the second distance route
    diff = np.diag(LADDER4.probabilities).astype(complex) - sig_t
    np.testing.assert_allclose(np.linalg.norm(diff, "nuc"), actual,
                               rtol=1e-10)
    dists = [truncated_gibbs(LADDER4, l)[2] for l in (1, 2, 3, 4)]
    np.testing.assert_allclose(
        dists, [1.2615141833355659, 0.38492974529247004,
                6.91467380553974e-05, 0.0], rtol=1e-10, atol=1e-15)
    assert np.all(np.diff(dists) <= 1e-15)


def test_low_energy_projector():
    proj, d0, mask = low_energy_projector(LADDER4, 1.0)
    assert d0 == 2 and list(mask) == [True, True, False, False]
    np.testing.assert_allclose(proj, np.diag([1, 1, 0, 0]).astype(complex))
    assert low_energy_projector(LADDER4, 0.5)[1] == 1
    assert low_energy_projector(LADDER4, 100.0)[1] == 4


def test_flagged_evolution():
    model = ladder_model(LADDER4)
    rho0 = conditioned_low_gibbs(LADDER4, 1.0)
    traj = flagged_evolution(model, LADDER4, 1.0, rho0, 1.0, m_steps=64)
    # marginalizing the flag must reproduce the unmeasured evolution
    assert traj.details["marginal_dev"] <= 1e-10
    np.testing.assert_allclose(np.prod(traj.step_low_probs), traj.p_low,
                               rtol=1e-12)
    assert traj.details["converged"]
    np.testing.assert_allclose(traj.details["p_low_limit"],
                               0.9956628440590714, atol=5e-6)
    assert len(traj.conditional_states) == 65
    for st in traj.conditional_states:
        np.testing.assert_allclose(np.trace(st).real, 1.0, rtol=1e-9)
    # independent superoperator route for the flag-survival probability
    proj = np.diag([1.0, 1.0, 0.0, 0.0])
    meas = np.kron(proj, proj)
    step = meas @ scipy.linalg.expm(
        -(1.0 / 64) * model.schrodinger.matrix)
    v = np.linalg.matrix_power(step, 64) @ (meas @ vec(rho0))
    np.testing.assert_allclose(np.trace(unvec(v)).real, traj.p_low,
                               atol=1e-10)


def test_flagged_evolution_rejections():
    model = ladder_model(LADDER4)
    rho0 = conditioned_low_gibbs(LADDER4, 1.0)
    with pytest.raises(SupportError):
        flagged_evolution(model, LADDER4, 1.0, LADDER4.state().rho, 1.0)
    with pytest.raises(DomainViolation):
        flagged_evolution(model, LADDER4, 1.0, rho0, -1.0)
    with pytest.raises(DomainViolation):
        flagged_evolution(model, LADDER4, 1.0, rho0, 1.0, m_steps=0)
    with pytest.raises(DomainViolation):
        flagged_evolution(model, LADDER4, -1.0, rho0, 1.0)
    with pytest.raises(DomainViolation):
        flagged_evolution(model, LADDER4, 1.0, 2.0 * rho0, 1.0)
    with pytest.raises(IncompatibleStates):
        flagged_evolution(ladder_model(GibbsSpec((0.0, 1.0), 2.0)),
                          LADDER4, 1.0, rho0, 1.0)
    with pytest.raises(IncompatibleStates):
        flagged_evolution(ladder_model(LADDER4), GibbsSpec(LADDER4.energies,
                                                           1.0), 1.0, rho0,
                          1.0)
    with pytest.raises(ModelError):
        flagged_evolution(stabilizing_generator(LADDER4.state().rho),
                          LADDER4, 1.0, rho0, 1.0)


def mixing_jump_model():
    # |0><1| + |2><3| shares one Bohr frequency but straddles the cutoff
    A = unit(4, 0, 1) + unit(4, 2, 3)
    return LindbladModel.from_jumps(JumpOperatorSet([A, dag(A)]),
                                    LADDER4.state().rho)


def test_cutoff_straddling_jump_rejected():
    model = mixing_jump_model()
    rho0 = conditioned_low_gibbs(LADDER4, 1.0)
    with pytest.raises(DomainViolation):
        flagged_evolution(model, LADDER4, 1.0, rho0, 1.0)
    with pytest.raises(SubalgebraError):
        effective_low_energy_model(model, LADDER4, 1.0)


def test_effective_low_energy_model():
    model = ladder_model(LADDER4)
    effective, report = effective_low_energy_model(model, LADDER4, 1.0,
                                                   n_samples=6, seed=111,
                                                   mlsi_samples=40)
    assert report.passed, report.as_dict()
    assert effective.dim == 2
    # the restriction equals a two-level ladder built from scratch
    twolevel = ladder_model(GibbsSpec((0.0, 1.0), 2.0))
    np.testing.assert_allclose(effective.heisenberg.matrix,
                               twolevel.heisenberg.matrix, atol=1e-12)
    w = report.witness
    np.testing.assert_allclose(w["factor_total"], np.exp(3.0), rtol=1e-12)
    np.testing.assert_allclose(w["alpha"],
                               w["alpha_uniform"] / w["factor_total"],
                               rtol=1e-12)
    assert w["n_kept"] == 2 and w["n_dropped"] == 4
    # cutoff above the top level keeps the model untouched
    same, rep2 = effective_low_energy_model(model, LADDER4, 10.0,
                                            n_samples=4, seed=111,
                                            mlsi_samples=40)
    assert same is model
    assert rep2.passed


def test_effective_model_needs_surviving_jump():
    g = GibbsSpec((0.0, 5.0), 1.0)
    with pytest.raises(ModelError):
        effective_low_energy_model(ladder_model(g), g, 0.0)


def test_t1_relaxation_check():
    rep = t1_relaxation_check(0.7, 2, n_samples=24, seed=112)
    assert rep.passed, rep.as_dict()
    w = rep.witness
    assert w["n_finite"] + w["n_skipped"] == 24
    assert w["n_finite"] > 0 and w["n_skipped"] > 0
    with pytest.raises(DomainViolation):
        t1_relaxation_check(0.0, 2)
    with pytest.raises(DomainViolation):
        t1_relaxation_check(0.7, 2, dim_a=1)
