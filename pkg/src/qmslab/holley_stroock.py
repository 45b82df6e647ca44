"""Perturbation factors for entropy decay constants and their machine checks.

A jump model with invariant state sigma is compared against either the heat
semigroup of the same jumps (primitive route) or a second model sharing the
jumps with invariant state sigma' (block route). The transfer constant
factorizes into an entropy-comparison factor and an entropy-production
comparison factor, and each factor's inequality is checked pointwise on
randomized positive operators.
"""

import dataclasses

import numpy as np

from .errors import (
    DomainViolation,
    HypothesisError,
    IncompatibleStates,
    ModelError,
    PrimitivityError,
)
from .operator_core import (
    as_full_rank_state,
    dag,
    kms_inner,
    lindblad_relative_entropy,
    sqrtm_psd,
    tensor,
    partial_trace,
)
from .lindblad import JumpOperatorSet, LindbladModel, check_primitivity
from .entropy import entropy_production_direct
from .reporting import make_report
from . import sampling


@dataclasses.dataclass
class PerturbationFactor:
    """entropy_factor bounds the entropy comparison from above, ep_factor
    bounds the entropy-production comparison from below; the decay-constant
    transfer multiplies by total = entropy_factor / ep_factor."""

    entropy_factor: float
    ep_factor: float
    total: float
    details: dict = dataclasses.field(default_factory=dict)


def model_is_primitive(model):
    if model.jumps is not None:
        return check_primitivity(model.jumps)
    # E projects onto the fixed-point algebra, so tr(E) = dim F
    return int(round(np.trace(model.fixed_point().E.matrix).real)) == 1


def hs_factor_primitive(model):
    """(max_k s_k / min_l s_l) * max_j e^{|w_j|/2} for a primitive jump model."""
    if model.jumps is None:
        raise ModelError("factor needs a jump-operator model")
    if not model_is_primitive(model):
        raise PrimitivityError("model is not primitive")
    s = model.sigma.eigenvalues
    freqs = model.bohr_freqs
    entropy_factor = float(s.max())
    ep_factor = float(s.min() * np.exp(-np.abs(freqs).max() / 2.0)) if len(freqs) \
        else float(s.min())
    total = entropy_factor / ep_factor
    return PerturbationFactor(entropy_factor, ep_factor, total, {
        "state_ratio": float(s.max() / s.min()),
        "freq_factor": float(np.exp(np.abs(freqs).max() / 2.0)),
    })


def _shared_jumps(model_a, model_b, tol=1e-10):
    if model_a.jumps is None or model_b.jumps is None:
        raise ModelError("both models need jump operators")
    opsa, opsb = model_a.jumps.ops, model_b.jumps.ops
    if len(opsa) != len(opsb):
        raise IncompatibleStates("jump lists differ in length")
    for A, B in zip(opsa, opsb):
        if np.abs(A - B).max() > tol * max(1.0, np.abs(A).max()):
            raise IncompatibleStates("jump operators differ")


def _simultaneous_spectra(tau, tau_prime, tol=1e-9):
    """Aligned eigenvalues of two commuting density matrices."""
    comm_dev = np.abs(tau @ tau_prime - tau_prime @ tau).max()
    if comm_dev > tol:
        raise IncompatibleStates(f"block states do not commute ({comm_dev:.3e})")
    w, U = np.linalg.eigh(tau)
    B = dag(U) @ tau_prime @ U
    # refine within degenerate clusters of tau so both become diagonal
    groups = []
    start = 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[i] - w[i - 1] > 1e-10 * max(1.0, np.abs(w).max()):
            groups.append((start, i))
            start = i
    for a, b in groups:
        if b - a > 1:
            _, V = np.linalg.eigh(B[a:b, a:b])
            U[:, a:b] = U[:, a:b] @ V
    B = dag(U) @ tau_prime @ U
    off = np.abs(B - np.diag(np.diag(B))).max()
    if off > 1e-8:
        raise IncompatibleStates(f"joint diagonalization failed ({off:.3e})")
    lam = np.real(np.diag(dag(U) @ tau @ U))
    lam_p = np.real(np.diag(B))
    return lam, lam_p


def nonprimitive_block_data(model_sigma, model_prime, seed=0):
    """Per-block (lam, lam', weight) from the shared fixed-point algebra."""
    _shared_jumps(model_sigma, model_prime)
    fpa = model_sigma.fixed_point(seed)
    out = []
    for blk in fpa.blocks:
        V = blk.isometry
        n, m = blk.n, blk.m
        sb = dag(V) @ model_sigma.sigma.rho @ V
        sbp = dag(V) @ model_prime.sigma.rho @ V
        for name, mat in (("sigma", sb), ("sigma'", sbp)):
            h = partial_trace(mat, (n, m), "first")
            dev = np.abs(h - (np.trace(h) / n) * np.eye(n)).max()
            if dev > 1e-8:
                raise IncompatibleStates(
                    f"{name} block H-marginal is not uniform ({dev:.3e})")
        wt, wtp = np.trace(sb).real, np.trace(sbp).real
        if abs(wt - wtp) > 1e-9:
            raise IncompatibleStates(
                f"block weights differ ({wt:.6g} vs {wtp:.6g})")
        tau = partial_trace(sb, (n, m), "second") / wt
        tau_p = partial_trace(sbp, (n, m), "second") / wtp
        lam, lam_p = _simultaneous_spectra(tau, tau_p)
        out.append((lam, lam_p, wt))
    return fpa, out


def hs_factor_nonprimitive(model_sigma, model_prime, seed=0):
    """Blockwise eigenvalue ratios times the frequency-shift factor."""
    fpa, blocks = nonprimitive_block_data(model_sigma, model_prime, seed)
    ratios = np.concatenate([lam / lam_p for lam, lam_p, _ in blocks])
    r = float(ratios.max())
    R = float((1.0 / ratios).max())
    dfreq = np.abs(model_sigma.bohr_freqs - model_prime.bohr_freqs)
    freq = float(np.exp(dfreq.max() / 2.0)) if len(dfreq) else 1.0
    total = r * R * freq
    return PerturbationFactor(
        entropy_factor=r,
        ep_factor=1.0 / (R * freq),
        total=total,
        details={"r": r, "R": R, "freq_factor": freq},
    )


def _ancilla_first_extension(model, ancilla_dim):
    """id_K (x) L with the ancilla as the FIRST tensor factor."""
    dK = int(ancilla_dim)
    eyeK = np.eye(dK)
    ops = [tensor(eyeK, A) for A in model.jumps.ops]
    sig_ext = tensor(eyeK / dK, model.sigma.rho)
    return LindbladModel.from_jumps(JumpOperatorSet(ops), sig_ext,
                                    bohr_freqs=model.bohr_freqs,
                                    label="idK(x)" + model.label)


def check_entropy_comparison(model_sigma, model_prime=None, n_samples=100,
                             seed=0, ancilla_dim=2, abs_tol=1e-9, rel_tol=1e-9):
    """Pointwise entropy-comparison inequalities on random PSD inputs.

    With a second model: D_Lin(Gam_s X || E_s* Gam_s X) <= r D_Lin(Gam_s' X || E_s'* Gam_s' X).
    Without: the primitive heat form on K (x) H with factor max_k s_k,
    D_Lin(Gam_{I(x)s}X || tr_H(.)(x)s) <= max_k s_k D_Lin(X || tr_H(X)(x)I/d_H).
    """
    reports = []
    if model_prime is not None:
        factor = hs_factor_nonprimitive(model_sigma, model_prime, seed)
        r = factor.entropy_factor
        fa = model_sigma.fixed_point(seed)
        fb = model_prime.fixed_point(seed)
        d = model_sigma.dim
        sh_a = model_sigma.sigma.power(0.5)
        sh_b = model_prime.sigma.power(0.5)
        for i in range(n_samples):
            rng = sampling.child_rng(seed, i)
            X = sampling.random_positive_definite(rng, d)
            Ga = sh_a @ X @ sh_a
            Gb = sh_b @ X @ sh_b
            lhs = lindblad_relative_entropy(Ga, fa.E_star(Ga))
            rhs = r * lindblad_relative_entropy(Gb, fb.E_star(Gb))
            reports.append(make_report("entropy-comparison-blocks", lhs, rhs,
                                       abs_tol, rel_tol, {"sample": i}))
        return reports
    # primitive/heat route with the ancilla as first factor
    if not model_is_primitive(model_sigma):
        raise PrimitivityError("heat-route comparison needs a primitive model")
    dH = model_sigma.dim
    dK = ancilla_dim
    smax = float(model_sigma.sigma.eigenvalues.max())
    sig = model_sigma.sigma.rho
    sh = model_sigma.sigma.power(0.5)
    eyeK = np.eye(dK)
    for i in range(n_samples):
        rng = sampling.child_rng(seed, i)
        X = sampling.random_positive_definite(rng, dK * dH)
        GX = tensor(eyeK, sh) @ X @ tensor(eyeK, sh)
        lhs = lindblad_relative_entropy(
            GX, tensor(partial_trace(GX, (dK, dH), "first"), sig))
        rhs = smax * lindblad_relative_entropy(
            X, tensor(partial_trace(X, (dK, dH), "first"), np.eye(dH) / dH))
        reports.append(make_report("entropy-comparison-heat", lhs, rhs,
                                   abs_tol, rel_tol, {"sample": i}))
    return reports


def check_ep_comparison(model_sigma, model_prime=None, n_samples=100, seed=0,
                        ancilla_dim=None, abs_tol=1e-9, rel_tol=1e-9):
    """Pointwise entropy-production comparisons on random PSD inputs.

    With a second model: EP_{L'}(Gam_{s'}X) <= R max_j e^{|w_j-v_j|/2} EP_L(Gam_s X).
    Without: EP_L(Gam_s X) >= min_k s_k min_j e^{-|w_j|/2} EP_{L0}(X),
    optionally on K (x) H when ancilla_dim is set.
    """
    reports = []
    if model_prime is not None:
        factor = hs_factor_nonprimitive(model_sigma, model_prime, seed)
        cmp_factor = 1.0 / factor.ep_factor  # R * freq
        d = model_sigma.dim
        sh_a = model_sigma.sigma.power(0.5)
        sh_b = model_prime.sigma.power(0.5)
        for i in range(n_samples):
            rng = sampling.child_rng(seed, i)
            X = sampling.random_positive_definite(rng, d)
            lhs = entropy_production_direct(model_prime, sh_b @ X @ sh_b)
            rhs = cmp_factor * entropy_production_direct(model_sigma, sh_a @ X @ sh_a)
            reports.append(make_report("ep-comparison-blocks", lhs, rhs,
                                       abs_tol, rel_tol, {"sample": i}))
        return reports
    if not model_is_primitive(model_sigma):
        raise PrimitivityError("heat-route comparison needs a primitive model")
    s = model_sigma.sigma.eigenvalues
    gamma = float(s.min() * np.exp(-np.abs(model_sigma.bohr_freqs).max() / 2.0))
    if ancilla_dim:
        base = _ancilla_first_extension(model_sigma, ancilla_dim)
        sh = tensor(np.eye(ancilla_dim), model_sigma.sigma.power(0.5))
    else:
        base = model_sigma
        sh = model_sigma.sigma.power(0.5)
    heat = LindbladModel.from_jumps(
        base.jumps, np.eye(base.dim) / base.dim,
        label="heat(" + model_sigma.label + ")")
    d = base.dim
    for i in range(n_samples):
        rng = sampling.child_rng(seed, i)
        X = sampling.random_positive_definite(rng, d)
        lhs = gamma * entropy_production_direct(heat, X)
        rhs = entropy_production_direct(base, sh @ X @ sh)
        reports.append(make_report("ep-comparison-heat", lhs, rhs,
                                   abs_tol, rel_tol, {"sample": i}))
    return reports


def dirichlet_form(model, X):
    """E_L(X) = Re <X, L(X)>_sigma, nonnegative for detailed-balance models."""
    return float(np.real(kms_inner(model.sigma, X, model.heisenberg(X))))


def lp_sigma_norm(sigma, X, p):
    """Weighted p-norm (tr |sigma^{1/2p} X sigma^{1/2p}|^p)^{1/p}; p = inf is
    the plain operator norm."""
    s = as_full_rank_state(sigma)
    X = np.asarray(X, dtype=complex)
    if p == np.inf or p == "inf":
        return float(np.linalg.norm(X, 2))
    p = float(p)
    if p < 1:
        raise DomainViolation("p must be >= 1")
    g = s.power(1.0 / (2.0 * p))
    sv = np.linalg.svd(g @ X @ g, compute_uv=False)
    return float((sv ** p).sum() ** (1.0 / p))


def chain_rule_check(X, Y, E_star, abs_tol=1e-9, rel_tol=1e-9):
    """D_Lin(X||Y) = D_Lin(X||E_*(X)) + D_Lin(E_*(X)||Y) when Y = E_*(Y)."""
    EX = E_star(X)
    EY = E_star(Y)
    if np.abs(EY - Y).max() > 1e-8 * max(1.0, np.abs(Y).max()):
        raise DomainViolation("chain rule needs Y fixed by E_*")
    total = lindblad_relative_entropy(X, Y)
    split = lindblad_relative_entropy(X, EX) + lindblad_relative_entropy(EX, Y)
    dev = abs(total - split)
    return make_report("chain-rule", dev, 0.0, abs_tol + rel_tol * abs(total),
                       0.0, {"total": float(total), "split": float(split)})


def always_valid_lsi_pair(model):
    """(c', d') = (0, ln ||sigma^{-1}||) holds for every state."""
    return 0.0, float(np.log(1.0 / model.sigma.eigenvalues.min()))


def _lsi_sides(model, rho, fpa):
    """lhs D(rho||E_* rho) and the pair (Dirichlet term, L2 term)."""
    sq = model.sigma.power(-0.25)
    Y = sq @ sqrtm_psd(rho) @ sq
    lhs = lindblad_relative_entropy(rho, fpa.E_star(rho))
    diri = dirichlet_form(model, Y)
    l2 = float(np.trace(rho).real)  # ||s^{-1/4} rho^{1/2} s^{-1/4}||_{L2(s)}^2
    return lhs, diri, l2


def fit_lsi_pair(model, n_samples=100, seed=0, d_fraction=0.5):
    """Empirical (c', d'): fix d' as a fraction of the analytic bound and take
    c' as the sampled sup of (lhs - d')/Dirichlet."""
    _, d_max = always_valid_lsi_pair(model)
    d_val = d_fraction * d_max
    fpa = model.fixed_point()
    c_val = 0.0
    for i in range(n_samples):
        rng = sampling.child_rng(seed, i)
        rho = sampling.random_full_rank_density(rng, model.dim)
        lhs, diri, l2 = _lsi_sides(model, rho, fpa)
        if diri > 1e-12:
            c_val = max(c_val, (lhs - d_val * l2) / diri)
    return max(c_val, 0.0), d_val


def transfer_weak_lsi(c_prime, d_prime, factor):
    """Thm-form transfer: c = r R freq c', d = r R d'."""
    r = factor.details["r"]
    R = factor.details["R"]
    freq = factor.details["freq_factor"]
    return r * R * freq * c_prime, r * R * d_prime


def check_lsi_perturbation(model_sigma, model_prime, c_d_prime=None,
                           n_samples=100, seed=0, abs_tol=1e-8, rel_tol=1e-9):
    """Validate an LSI pair on model_prime, transfer it, check on model_sigma.

    Returns (aggregate report, per-sample reports). HypothesisError when the
    supplied (c', d') fails on the sample set for model_prime.
    """
    factor = hs_factor_nonprimitive(model_sigma, model_prime, seed)
    if c_d_prime is None:
        c_d_prime = always_valid_lsi_pair(model_prime)
    c_p, d_p = c_d_prime
    fpa_p = model_prime.fixed_point(seed)
    fpa_s = model_sigma.fixed_point(seed)
    # stage 1: the hypothesis must hold for model_prime on the samples
    for i in range(n_samples):
        rng = sampling.child_rng(seed, i)
        rho = sampling.random_full_rank_density(rng, model_prime.dim)
        lhs, diri, l2 = _lsi_sides(model_prime, rho, fpa_p)
        if lhs > c_p * diri + d_p * l2 + abs_tol:
            raise HypothesisError(
                f"(c', d') = ({c_p}, {d_p}) fails at sample {i}")
    c_s, d_s = transfer_weak_lsi(c_p, d_p, factor)
    reports = []
    for i in range(n_samples):
        rng = sampling.child_rng(seed, i)
        rho = sampling.random_full_rank_density(rng, model_sigma.dim)
        lhs, diri, l2 = _lsi_sides(model_sigma, rho, fpa_s)
        reports.append(make_report("lsi-transfer", lhs, c_s * diri + d_s * l2,
                                   abs_tol, rel_tol, {"sample": i}))
    worst = min(reports, key=lambda r: r.slack)
    agg = make_report("lsi-transfer-worst", worst.lhs, worst.rhs, abs_tol,
                      rel_tol, {"n_samples": n_samples,
                                "c": float(c_s), "d": float(d_s)})
    return agg, reports


def check_hs_transfer(model_sigma, model_prime, est_sigma, est_prime,
                      rel_slack=0.1):
    """Directional consistency of sampled estimates with the transfer bound.

    Both inputs are upper-bound estimates of their true constants, so this is
    a diagnostic (estimates can violate the true-constant ordering by
    sampling slack), never a hard failure.
    """
    factor = hs_factor_nonprimitive(model_sigma, model_prime)
    return make_report("hs-transfer-diagnostic", est_prime.value,
                       factor.total * est_sigma.value,
                       abs_tol=0.0, rel_tol=rel_slack,
                       witness={"total": factor.total,
                                "est_sigma": est_sigma.value,
                                "est_prime": est_prime.value})
