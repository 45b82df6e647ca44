"""Entropy production, decay traces, and sampled entropy-ratio constants.

Entropy production has two routes that must agree:
  direct:  EP(rho) = tr(L_*(rho)(ln rho - ln sigma))
  fisher:  sum_j <Gam(delta_j X), T_j(Gam(delta_j X))>_HS, X = Gam^{-1}(rho),
where T_j is the double operator integral with the logarithmic difference
quotient evaluated on the spectra of e^{+w_j/2} rho (left) and
e^{-w_j/2} rho (right). The agreement of the two is the central
cross-validation of the package.
"""

import dataclasses

import numpy as np

from .errors import DomainViolation, DegenerateSampling
from .operator_core import (
    REG_EPS,
    RANK_FLOOR,
    Superoperator,
    apply_superop,
    check_hermitian,
    dag,
    lindblad_relative_entropy,
    regularize,
    relative_entropy,
    tensor,
    vec,
    unvec,
)
from .lindblad import LindbladModel, JumpOperatorSet, evolve
from .reporting import ConstantEstimate
from . import sampling

DQ_TOL_FACTOR = 1e-9


@dataclasses.dataclass
class DifferenceQuotientKernel:
    """Entrywise kernel (f(x_k) - f(y_l))/(x_k - y_l) with derivative branch."""

    left_spectrum: np.ndarray
    right_spectrum: np.ndarray
    values: np.ndarray


def difference_quotient_kernel(left, right, f=np.log, fprime=None, dq_tol=None):
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    if fprime is None:
        # default pair for f = ln
        if f is not np.log:
            raise ValueError("fprime required for non-log f")
        fprime = lambda x: 1.0 / x
    if dq_tol is None:
        dq_tol = DQ_TOL_FACTOR * max(np.abs(left).max(), np.abs(right).max(), 1.0)
    X, Y = np.meshgrid(left, right, indexing="ij")
    close = np.abs(X - Y) < dq_tol
    denom = np.where(close, 1.0, X - Y)
    vals = np.where(close, fprime(X), (f(X) - f(Y)) / denom)
    return DifferenceQuotientKernel(left, right, vals)


def doi_apply(rho, omega, Y, dq_tol=None):
    """Apply the inverse-weighted-rho double operator integral to Y.

    In the eigenbasis of rho (eigenvalues p), the (k,l) entry of Y picks up
    the log difference quotient of the pair (e^{omega/2} p_k, e^{-omega/2} p_l).
    Equals the integral of (r + e^{omega/2} L_rho)^{-1}(r + e^{-omega/2} R_rho)^{-1} dr.
    """
    rho = check_hermitian(rho, tol=1e-9)
    p, U = np.linalg.eigh(rho)
    if p.min() <= 0:
        raise DomainViolation(f"doi_apply needs positive rho (min eig {p.min():.3e})")
    K = difference_quotient_kernel(np.exp(omega / 2.0) * p,
                                   np.exp(-omega / 2.0) * p, dq_tol=dq_tol)
    Yb = dag(U) @ np.asarray(Y, dtype=complex) @ U
    return U @ (K.values * Yb) @ dag(U)


def _prepare_state(model, rho, eps=REG_EPS):
    rho = check_hermitian(rho, tol=1e-8)
    w = np.linalg.eigvalsh(rho)
    if w.min() <= RANK_FLOOR:
        rho = regularize(rho, model.sigma.rho, eps)
    return rho


def entropy_production_direct(model, rho, eps=REG_EPS):
    """tr(L_*(rho)(ln rho - ln sigma)); rank-deficient inputs regularized."""
    rho = _prepare_state(model, rho, eps)
    p, U = np.linalg.eigh(rho)
    ln_rho = (U * np.log(p)) @ dag(U)
    ln_sig = model.sigma.log()
    drho = model.schrodinger(rho)
    return np.trace(drho @ (ln_rho - ln_sig)).real


def entropy_production_fisher(model, rho, eps=REG_EPS):
    """Sum of per-jump Fisher quadratic forms; needs jump operators."""
    if model.jumps is None:
        raise DomainViolation("fisher form needs a jump-operator model")
    rho = _prepare_state(model, rho, eps)
    si = model.sigma.power(-0.5)
    sh = model.sigma.power(0.5)
    X = si @ rho @ si
    total = 0.0
    for A, w in zip(model.jumps.ops, model.bohr_freqs):
        g = sh @ (A @ X - X @ A) @ sh
        total += np.trace(dag(g) @ doi_apply(rho, w, g)).real
    return total


def extend_superoperator(mat, dA, dB):
    """Matrix of M (x) id_B acting on B(H_A (x) H_B) in the vec convention."""
    mat = np.asarray(mat, dtype=complex)
    # Lten[a, a', c, c'] = mat[a' * dA + a, c' * dA + c]
    Lten = mat.reshape(dA, dA, dA, dA, order="F")
    d = dA * dB
    out = np.zeros((d * d, d * d), dtype=complex)
    unit = np.zeros((d, d), dtype=complex)
    for col in range(d * d):
        c_row = col % d
        c_col = col // d
        unit[c_row, c_col] = 1.0
        X4 = unit.reshape(dA, dB, dA, dB)
        Y4 = np.einsum("abcd,cidj->aibj", Lten, X4)
        out[:, col] = Y4.reshape(d, d).reshape(-1, order="F")
        unit[c_row, c_col] = 0.0
    return out


def extend_model(model, ancilla_dim):
    """The model of L (x) id on H (x) K with invariant state sigma (x) I/dK."""
    dK = int(ancilla_dim)
    sig_ext = tensor(model.sigma.rho, np.eye(dK) / dK)
    if model.jumps is not None:
        ops = [tensor(A, np.eye(dK)) for A in model.jumps.ops]
        return LindbladModel.from_jumps(
            JumpOperatorSet(ops), sig_ext,
            bohr_freqs=model.bohr_freqs,
            label=model.label + f"(x)id{dK}",
        )
    mat = extend_superoperator(model.heisenberg.matrix, model.dim, dK)
    return LindbladModel.from_superoperator(Superoperator(mat), sig_ext,
                                            label=model.label + f"(x)id{dK}")


def relative_entropy_to_fixed(model, rho, fpa=None, eps=REG_EPS):
    """D(rho || E_*(rho)) with E_* from the fixed-point algebra."""
    fpa = fpa or model.fixed_point()
    rho = _prepare_state(model, rho, eps)
    target = fpa.E_star(rho)
    return lindblad_relative_entropy(rho, target)


@dataclasses.dataclass
class DecayTrace:
    times: np.ndarray
    entropies: np.ndarray
    eps: np.ndarray


def decay_trace(model, rho0, time_grid, fpa=None):
    """Relative entropy to the fixed target and EP along the trajectory."""
    fpa = fpa or model.fixed_point()
    times = np.asarray(time_grid, dtype=float)
    if times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise DomainViolation("time grid must start at 0 and increase")
    target = fpa.E_star(_prepare_state(model, rho0))
    ents = []
    eps = []
    for t in times:
        rho_t = evolve(model.schrodinger, rho0, t)
        rho_t = _prepare_state(model, rho_t)
        ents.append(lindblad_relative_entropy(rho_t, target))
        eps.append(entropy_production_direct(model, rho_t))
    return DecayTrace(times, np.array(ents), np.array(eps))


def default_time_grid(model, n=40):
    gap = model.spectral_gap()
    inner = np.geomspace(1e-3 / gap, 10.0 / gap, n - 1)
    return np.concatenate([[0.0], inner])


def _hermitian_basis(d):
    basis = []
    for k in range(d):
        E = np.zeros((d, d), dtype=complex)
        E[k, k] = 1.0
        basis.append(E)
    for k in range(d):
        for l in range(k + 1, d):
            E = np.zeros((d, d), dtype=complex)
            E[k, l] = E[l, k] = 1.0 / np.sqrt(2.0)
            basis.append(E)
            E = np.zeros((d, d), dtype=complex)
            E[k, l] = -1j / np.sqrt(2.0)
            E[l, k] = 1j / np.sqrt(2.0)
            basis.append(E)
    return basis


def _clip_psd(rho, floor=1e-10):
    w, U = np.linalg.eigh(0.5 * (rho + dag(rho)))
    w = np.maximum(w, floor)
    rho = (U * w) @ dag(U)
    return rho / np.trace(rho).real


def _ratio_descent(fun, rho, steps=200, h=1e-6, floor=1e-10):
    """Projected gradient descent of fun over trace-one PSD matrices.

    Central finite differences in a Hermitian operator basis; gradient
    projected on the traceless slice; PSD kept by eigenvalue clipping.
    """
    d = rho.shape[0]
    basis = _hermitian_basis(d)
    best = fun(rho)
    lr = 0.05
    for _ in range(steps):
        grad = np.zeros((d, d), dtype=complex)
        for B in basis:
            fp = fun(_clip_psd(rho + h * B, floor))
            fm = fun(_clip_psd(rho - h * B, floor))
            # directions that leave the ratio's domain carry no information
            if np.isfinite(fp) and np.isfinite(fm):
                grad += ((fp - fm) / (2.0 * h)) * B
        grad -= (np.trace(grad) / d) * np.eye(d)
        gnorm = np.linalg.norm(grad)
        if gnorm < 1e-12 or not np.isfinite(gnorm):
            break
        improved = False
        for _ in range(12):
            cand = _clip_psd(rho - lr * grad / gnorm, floor)
            val = fun(cand)
            if val < best - 1e-14:
                rho, best = cand, val
                improved = True
                lr = min(lr * 1.6, 0.5)
                break
            lr *= 0.5
        if not improved or lr < 1e-10:
            break
    return best, rho


def mlsi_ratio_function(model, fpa=None, d_floor=1e-12):
    fpa = fpa or model.fixed_point()

    def ratio(rho):
        D = relative_entropy_to_fixed(model, rho, fpa)
        if D < d_floor:
            return np.inf
        return entropy_production_direct(model, rho) / D

    return ratio


def estimate_mlsi(model, n_samples=200, seed=0, refine=True, steps=200,
                  d_floor=1e-12, fpa=None):
    """Sampled infimum of EP/D with optional local descent refinement.

    The value is an upper-bound estimate of the true decay constant; the
    argmin state is the certificate.
    """
    fpa = fpa or model.fixed_point()
    ratio = mlsi_ratio_function(model, fpa, d_floor)
    d = model.dim
    best_val = np.inf
    best_rho = None
    ratios = []
    for i in range(n_samples):
        rng = sampling.child_rng(seed, i)
        rho = sampling.random_density(rng, d) if i % 2 == 0 \
            else sampling.boundary_biased_density(rng, d)
        val = ratio(rho)
        if np.isfinite(val):
            ratios.append(val)
            if val < best_val:
                best_val, best_rho = val, rho
    if best_rho is None:
        raise DegenerateSampling("all sampled states had vanishing entropy")
    if refine:
        best_val, best_rho = _ratio_descent(ratio, best_rho, steps=steps)
    return ConstantEstimate(float(best_val), n_samples, best_rho,
                            "mlsi-sampled-inf" + ("+descent" if refine else ""),
                            ratios)


def estimate_clsi_witness(model, ancilla_dim=2, n_samples=200, seed=0,
                          refine=True, steps=200, d_floor=1e-12):
    """MLSI estimator applied to L (x) id with bipartite samples."""
    ext = extend_model(model, ancilla_dim)
    est = estimate_mlsi(ext, n_samples=n_samples, seed=seed, refine=refine,
                        steps=steps, d_floor=d_floor)
    est.method = est.method.replace("mlsi", "clsi")
    return est
