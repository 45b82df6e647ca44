"""Entropy production routes, decay traces, sampled decay constants."""

import numpy as np
import pytest
import scipy.integrate
import scipy.linalg

from qmslab.entropy import (decay_trace, default_time_grid,
                            difference_quotient_kernel, doi_apply,
                            entropy_production_direct,
                            entropy_production_fisher, estimate_clsi_witness,
                            estimate_mlsi, extend_model, extend_superoperator,
                            relative_entropy_to_fixed)
from qmslab.errors import DegenerateSampling, DomainViolation
from qmslab.lindblad import (JumpOperatorSet, LindbladModel,
                             complete_matrix_unit_generator,
                             depolarizing_generator, evolve,
                             stabilizing_generator)
from qmslab.operator_core import dag, lindblad_relative_entropy
from qmslab import sampling

from test_lindblad import random_db_model, unit


def test_difference_quotient_kernel():
    K = difference_quotient_kernel(np.array([1.0, 2.0]),
                                   np.array([1.0, 4.0]))
    want = np.array([
        [1.0, (np.log(1.0) - np.log(4.0)) / (1.0 - 4.0)],
        [(np.log(2.0) - np.log(1.0)) / (2.0 - 1.0),
         (np.log(2.0) - np.log(4.0)) / (2.0 - 4.0)],
    ])
    np.testing.assert_allclose(K.values, want, atol=1e-14)
    with pytest.raises(ValueError):
        difference_quotient_kernel(np.array([1.0]), np.array([2.0]),
                                   f=np.exp)


def test_doi_apply_quadrature_oracle():
    # independent route: integrate (r + a rho)^-1 Y (r + b rho)^-1 dr
    rng = sampling.child_rng(40, 0)
    rho = sampling.random_full_rank_density(rng, 3)
    Y = sampling.random_complex(rng, (3, 3))
    omega = 0.7
    a, b = np.exp(omega / 2.0), np.exp(-omega / 2.0)
    eye = np.eye(3)

    def entry(r, i, j, part):
        M = np.linalg.inv(r * eye + a * rho) @ Y @ \
            np.linalg.inv(r * eye + b * rho)
        return getattr(M[i, j], part)

    want = np.zeros((3, 3), dtype=complex)
    for i in range(3):
        for j in range(3):
            re = scipy.integrate.quad(entry, 0, np.inf, args=(i, j, "real"))[0]
            im = scipy.integrate.quad(entry, 0, np.inf, args=(i, j, "imag"))[0]
            want[i, j] = re + 1j * im
    np.testing.assert_allclose(doi_apply(rho, omega, Y), want,
                               atol=1e-7, rtol=1e-7)


def test_doi_apply_commuting_case():
    # diagonal rho: entrywise classical difference quotient
    p = np.array([0.5, 0.3, 0.2])
    rho = np.diag(p).astype(complex)
    Y = np.ones((3, 3), dtype=complex)
    out = doi_apply(rho, 0.0, Y)
    for k in range(3):
        for l in range(3):
            if k == l:
                np.testing.assert_allclose(out[k, l], 1.0 / p[k], atol=1e-12)
            else:
                np.testing.assert_allclose(
                    out[k, l],
                    (np.log(p[k]) - np.log(p[l])) / (p[k] - p[l]), atol=1e-12)
    with pytest.raises(DomainViolation):
        doi_apply(np.diag([1.0, 0.0]).astype(complex), 0.0, np.eye(2))


def test_ep_routes_agree():
    for seed, d in ((41, 2), (42, 3), (43, 4), (44, 5)):
        model = random_db_model(seed, d)
        rng = sampling.child_rng(seed, 7)
        for i in range(5):
            rho = sampling.random_density(rng, d) if i % 2 else \
                sampling.random_full_rank_density(rng, d)
            a = entropy_production_direct(model, rho)
            b = entropy_production_fisher(model, rho)
            assert abs(a - b) <= 1e-9 * (1.0 + abs(a))
            assert a >= -1e-11


def test_ep_vanishes_at_sigma():
    model = random_db_model(45, 3)
    assert entropy_production_direct(model, model.sigma.rho) == \
        pytest.approx(0.0, abs=1e-11)


def test_ep_equals_entropy_derivative():
    # -d/dt D(rho_t || sigma) by central difference
    model = random_db_model(46, 3)
    rng = sampling.child_rng(46, 5)
    rho0 = sampling.random_full_rank_density(rng, 3)
    sig = model.sigma.rho
    h = 1e-5
    for t in (0.1, 0.8):
        dm = lindblad_relative_entropy(evolve(model.schrodinger, rho0, t - h),
                                       sig)
        dp = lindblad_relative_entropy(evolve(model.schrodinger, rho0, t + h),
                                       sig)
        deriv = (dp - dm) / (2.0 * h)
        ep = entropy_production_direct(model,
                                       evolve(model.schrodinger, rho0, t))
        np.testing.assert_allclose(-deriv, ep, rtol=1e-5, atol=1e-9)


def test_decay_trace_monotone():
    model = random_db_model(47, 3)
    rng = sampling.child_rng(47, 3)
    rho0 = sampling.random_full_rank_density(rng, 3)
    grid = default_time_grid(model, n=20)
    assert grid[0] == 0.0 and len(grid) == 20
    trace = decay_trace(model, rho0, grid)
    assert np.all(np.diff(trace.entropies) <= 1e-11)
    assert np.all(trace.eps >= -1e-11)
    with pytest.raises(DomainViolation):
        decay_trace(model, rho0, [0.5, 1.0])
    with pytest.raises(DomainViolation):
        decay_trace(model, rho0, [0.0, 1.0, 1.0])


def test_relative_entropy_to_fixed_primitive():
    model = random_db_model(48, 3)
    fpa = model.fixed_point()
    if not fpa.is_trivial:
        pytest.skip("sampled model not primitive")
    rng = sampling.child_rng(48, 2)
    rho = sampling.random_full_rank_density(rng, 3)
    np.testing.assert_allclose(relative_entropy_to_fixed(model, rho),
                               lindblad_relative_entropy(rho,
                                                         model.sigma.rho),
                               rtol=1e-10)


def test_mlsi_complete_matrix_units():
    m = 3
    model = complete_matrix_unit_generator(m)
    est = estimate_mlsi(model, n_samples=60, seed=49)
    assert est.value >= 2 * m - 1e-6
    assert min(est.ratios) >= 2 * m - 1e-6


def test_mlsi_stabilizing_and_depolarizing():
    rng = sampling.child_rng(50, 0)
    sig = sampling.random_full_rank_density(rng, 3)
    for model in (stabilizing_generator(sig), depolarizing_generator(3)):
        est = estimate_mlsi(model, n_samples=60, seed=50)
        assert est.value >= 1.0 - 1e-6
        assert min(est.ratios) >= 1.0 - 1e-6


def test_mlsi_degenerate_sampling():
    # L = 0 keeps every state fixed; no usable denominator anywhere
    zero = LindbladModel.from_jumps(
        JumpOperatorSet([np.zeros((2, 2), dtype=complex)]), np.eye(2) / 2)
    with pytest.raises(DegenerateSampling):
        estimate_mlsi(zero, n_samples=10, seed=51, refine=False)


def test_extend_model_two_routes():
    model = random_db_model(52, 2)
    ext = extend_model(model, 3)
    want = extend_superoperator(model.heisenberg.matrix, 2, 3)
    np.testing.assert_allclose(ext.heisenberg.matrix, want, atol=1e-10)
    # product states keep the base entropy production
    rng = sampling.child_rng(52, 4)
    rho = sampling.random_full_rank_density(rng, 2)
    from qmslab.operator_core import tensor
    np.testing.assert_allclose(
        entropy_production_direct(ext, tensor(rho, np.eye(3) / 3)),
        entropy_production_direct(model, rho), rtol=1e-9, atol=1e-12)


def test_clsi_witness_certificate():
    model = random_db_model(53, 2)
    est = estimate_clsi_witness(model, ancilla_dim=2, n_samples=40, seed=53)
    assert est.value > 0
    assert est.method.startswith("clsi")
    # the argmin state certifies the reported value on the extended model
    from qmslab.entropy import mlsi_ratio_function
    ratio = mlsi_ratio_function(extend_model(model, 2))
    np.testing.assert_allclose(ratio(est.argmin_state), est.value, rtol=1e-9)
    # a product certificate for the plain estimate stays a valid extended ratio
    direct = estimate_mlsi(model, n_samples=40, seed=53)
    from qmslab.operator_core import tensor
    np.testing.assert_allclose(ratio(tensor(direct.argmin_state,
                                            np.eye(2) / 2)),
                               direct.value, rtol=1e-8)
