"""Discrete-time channels with detailed balance and entropy contraction.

A channel with full-rank invariant state sigma and Kraus operators that are
modular eigenvectors (sigma K_j = e^{-omega_j} K_j sigma) admits a unital
counterpart obtained by reweighting the Kraus family; the relative-entropy
contraction coefficient of the original channel is controlled by that of the
counterpart times the condition number of sigma. Every inequality here is
checked on randomized states, and the proof chain is verified per sample with
the exact per-sample ratio so the check does not lean on estimator quality.
"""

import numpy as np
import scipy.linalg

from .errors import (
    DBCError,
    DegenerateSampling,
    DomainViolation,
    ModelError,
    PrimitivityError,
    ShapeError,
)
from .operator_core import (
    Superoperator,
    as_full_rank_state,
    check_square,
    choi_matrix,
    dag,
    gamma_map,
    gamma_power,
    lindblad_relative_entropy,
    superop_sandwich,
    superop_trace_dual,
    vec,
)
from .lindblad import JumpOperatorSet, extract_bohr_frequencies
from .entropy import _ratio_descent
from .reporting import ConstantEstimate, make_report
from . import sampling

KRAUS_TP_TOL = 1e-10
MODULAR_TOL = 1e-8
INTERTWINE_TOL = 1e-9


def _kraus_action_matrix(ops):
    d = ops[0].shape[0]
    out = np.zeros((d * d, d * d), dtype=complex)
    for K in ops:
        out += superop_sandwich(K, dag(K))
    return out


class KrausChannel:
    """Kraus family with a direction tag and optional invariant-state data.

    direction "schrodinger": the stored action X -> sum K X K* is the
    trace-preserving state map. direction "heisenberg": the stored action is
    the unital operator map. freqs hold omega_j with
    sigma K_j = e^{-omega_j} K_j sigma.
    """

    def __init__(self, kraus_ops, direction="schrodinger", sigma=None,
                 freqs=None, label=""):
        if direction not in ("schrodinger", "heisenberg"):
            raise DomainViolation(f"unknown direction {direction!r}")
        ops = [np.asarray(K, dtype=complex) for K in kraus_ops]
        if not ops:
            raise ShapeError("empty Kraus family")
        for K in ops:
            check_square(K)
            if K.shape != ops[0].shape:
                raise ShapeError("Kraus operators of mixed dimension")
        self.kraus_ops = ops
        self.direction = direction
        self.dim = ops[0].shape[0]
        self.label = label
        acc_dual = sum(dag(K) @ K for K in ops)
        acc_fwd = sum(K @ dag(K) for K in ops)
        eye = np.eye(self.dim)
        if direction == "schrodinger":
            dev = np.abs(acc_dual - eye).max()
            if dev > KRAUS_TP_TOL:
                raise ModelError(f"Kraus family not trace preserving ({dev:.3e})")
        else:
            dev = np.abs(acc_fwd - eye).max()
            if dev > KRAUS_TP_TOL:
                raise ModelError(f"Kraus action not unital ({dev:.3e})")
        self.sigma = None
        self.freqs = None
        if sigma is not None:
            s = as_full_rank_state(sigma)
            if s.dim != self.dim:
                raise ShapeError("state dimension != Kraus dimension")
            self.sigma = s
            if freqs is None:
                freqs = extract_bohr_frequencies(JumpOperatorSet(ops), s)
            freqs = np.asarray(freqs, dtype=float)
            if freqs.shape != (len(ops),):
                raise ShapeError("one frequency per Kraus operator required")
            for j, (K, w) in enumerate(zip(ops, freqs)):
                dev = np.abs(s.rho @ K - np.exp(-w) * K @ s.rho).max()
                if dev > MODULAR_TOL * max(1.0, np.abs(K).max()):
                    raise ModelError(
                        f"Kraus op {j} violates the modular relation ({dev:.3e})")
            self.freqs = freqs
        self._action = None

    @property
    def action(self):
        """The stored map X -> sum K X K* as a Superoperator."""
        if self._action is None:
            self._action = Superoperator(_kraus_action_matrix(self.kraus_ops))
        return self._action

    def phi_star(self):
        """Schrodinger (state) map."""
        if self.direction == "schrodinger":
            return self.action
        return self.action.trace_dual()

    def phi(self):
        """Heisenberg (operator) map."""
        if self.direction == "heisenberg":
            return self.action
        return self.action.trace_dual()

    def schrodinger_kraus(self):
        """Kraus operators and frequencies of the state map."""
        if self.direction == "schrodinger":
            return list(self.kraus_ops), self.freqs
        ops = [dag(K) for K in self.kraus_ops]
        freqs = -self.freqs if self.freqs is not None else None
        return ops, freqs


def check_channel_dbc(channel, tol=1e-8):
    """KMS self-adjointness of the Heisenberg map with respect to sigma."""
    if channel.sigma is None:
        raise DomainViolation("detailed balance needs an invariant state")
    phim = channel.phi().matrix
    G = gamma_map(channel.sigma).matrix
    scale = max(1.0, np.abs(phim).max())
    kms_dev = np.abs(G @ phim - dag(phim) @ G).max() / scale
    sp = channel.phi_star()(channel.sigma.rho)
    inv_dev = np.abs(sp - channel.sigma.rho).max()
    return make_report("channel-detailed-balance", max(kms_dev, inv_dev), tol,
                       abs_tol=0.0, rel_tol=0.0,
                       witness={"kms_dev": float(kms_dev),
                                "invariance_dev": float(inv_dev)})


def build_unital_counterpart(channel, tol=1e-8):
    """Reweight the Kraus family so the action intertwines with Gamma_sigma.

    With Schrodinger Kraus ops S_j (sigma S_j = e^{-omega_j} S_j sigma), the
    counterpart acts as X -> sum_j e^{omega_j} S_j X S_j*. It is unital and
    KMS-self-adjoint with respect to sigma; it is trace preserving and
    HS-self-adjoint only when sigma is proportional to the identity, so only
    unitality and the intertwining identity are enforced here.
    """
    if channel.sigma is None:
        raise DomainViolation("unital counterpart needs an invariant state")
    dbc = check_channel_dbc(channel, tol)
    if not dbc.passed:
        raise DBCError(f"detailed balance violated ({dbc.lhs:.3e})")
    s_ops, s_freqs = channel.schrodinger_kraus()
    if s_freqs is None:
        raise DomainViolation("channel frequencies unavailable")
    d = channel.dim
    b_ops = [np.exp(w / 2.0) * S for S, w in zip(s_ops, s_freqs)]
    out = KrausChannel(b_ops, direction="heisenberg",
                       sigma=np.eye(d) / d, freqs=np.zeros(len(b_ops)),
                       label="unital(" + channel.label + ")")
    # posts: intertwining Phi_* Gamma = Gamma Phi_0 and unitality
    G = gamma_map(channel.sigma).matrix
    lhsm = channel.phi_star().matrix @ G
    rhsm = G @ out.action.matrix
    dev = np.abs(lhsm - rhsm).max() / max(1.0, np.abs(rhsm).max())
    if dev > INTERTWINE_TOL:
        raise ModelError(f"intertwining identity off by {dev:.3e}")
    m0 = out.action.matrix
    hs_dev = np.abs(m0 - dag(m0)).max() / max(1.0, np.abs(m0).max())
    kms_dev = np.abs(G @ m0 - dag(m0) @ G).max() / max(1.0, np.abs(m0).max())
    out.diagnostics = {
        "intertwining_dev": float(dev),
        "hs_self_adjoint_dev": float(hs_dev),
        "kms_self_adjoint_dev": float(kms_dev),
    }
    if kms_dev > INTERTWINE_TOL:
        raise ModelError(f"counterpart lost KMS symmetry ({kms_dev:.3e})")
    return out


def channel_from_superoperator(phi_star, sigma, tol=1e-9):
    """Recover modular-eigenvector Kraus operators of a DBC channel.

    The Choi matrix of a channel commuting with the modular action of sigma is
    block diagonal over the eigenspaces of sigma^{-1} (x) sigma; eigenvectors
    of each block give Kraus operators that are modular eigenvectors, with
    omega read off the block.
    """
    mat = phi_star.matrix if isinstance(phi_star, Superoperator) else \
        np.asarray(phi_star, dtype=complex)
    s = as_full_rank_state(sigma)
    d = s.dim
    U = s.eigenvectors
    rot_in = superop_sandwich(U, dag(U))
    rot_out = superop_sandwich(dag(U), U)
    m_eig = rot_out @ mat @ rot_in  # channel in sigma's eigenbasis
    C = choi_matrix(Superoperator(m_eig))
    C = 0.5 * (C + dag(C))
    cmax = max(np.abs(C).max(), 1e-30)
    logs = np.log(s.eigenvalues)
    # flat Choi index (i, a) -> log ratio log s_a - log s_i
    keys = np.array([logs[a] - logs[i] for i in range(d) for a in range(d)])
    order = np.argsort(keys)
    groups = []
    start = 0
    for p in range(1, d * d + 1):
        if p == d * d or keys[order[p]] - keys[order[p - 1]] > 1e-8:
            groups.append(order[start:p])
            start = p
    # cross-block leakage means the modular action is not a symmetry
    leak = 0.0
    for gi, g in enumerate(groups):
        for h in groups[gi + 1:]:
            leak = max(leak, np.abs(C[np.ix_(g, h)]).max())
    if leak > 1e-7 * cmax:
        raise DBCError(f"Choi matrix leaks across modular blocks ({leak:.3e})")
    ops = []
    freqs = []
    for g in groups:
        block = C[np.ix_(g, g)]
        w, V = np.linalg.eigh(block)
        omega = -float(np.mean(keys[g]))
        for k in range(len(w)):
            if w[k] < -1e-8 * cmax:
                raise ModelError(f"Choi matrix not PSD (eig {w[k]:.3e})")
            if w[k] > 1e-10 * cmax:
                full = np.zeros(d * d, dtype=complex)
                full[g] = np.sqrt(w[k]) * V[:, k]
                S = full.reshape(d, d).T  # S[a, i] = v[(i, a)]
                ops.append(U @ S @ dag(U))
                freqs.append(omega)
    recon = _kraus_action_matrix(ops)
    dev = np.abs(recon - mat).max() / max(1.0, np.abs(mat).max())
    if dev > 1e-8:
        raise ModelError(f"Kraus reconstruction off by {dev:.3e}")
    return KrausChannel(ops, direction="schrodinger", sigma=s,
                        freqs=np.array(freqs))


def channel_from_model(model, t):
    """Semigroup snapshot e^{-t L_*} of a detailed-balance model."""
    if t < 0:
        raise DomainViolation("negative time")
    mat = scipy.linalg.expm(-t * model.schrodinger.matrix)
    return channel_from_superoperator(mat, model.sigma)


def channel_fixed_space_dim(channel, tol=1e-9):
    """Dimension of the eigenvalue-1 space of the state map."""
    w = np.linalg.eigvals(channel.phi_star().matrix)
    return int(np.sum(np.abs(w - 1.0) <= tol))


def channel_is_primitive(channel, tol=1e-9):
    return channel_fixed_space_dim(channel, tol) == 1


def channel_conditional_expectation(channel, tol=1e-9):
    """(E, E_star) projections onto the fixed points, KMS-orthogonal."""
    if channel.sigma is None:
        raise DomainViolation("conditional expectation needs sigma")
    G = gamma_power(channel.sigma, 0.5).matrix
    Gi = np.linalg.inv(G)
    Mh = G @ channel.phi().matrix @ Gi
    Mh = 0.5 * (Mh + dag(Mh))
    w, V = np.linalg.eigh(Mh)
    mask = np.abs(w - 1.0) <= tol
    P = V[:, mask] @ dag(V[:, mask])
    E = Gi @ P @ G
    return Superoperator(E), Superoperator(superop_trace_dual(E))


def state_projection_superop(state):
    """E_*(rho) = tr(rho) * state, the primitive-channel projection."""
    state = np.asarray(state, dtype=complex)
    d = state.shape[0]
    return Superoperator(np.outer(vec(state), vec(np.eye(d)).conj()))


def trace_projection_superop(d):
    """E_0(X) = (tr X / d) I."""
    return state_projection_superop(np.eye(d) / d)


def _sdpi_ratio(action_mat, e_star_mat, rho, d_floor):
    d = rho.shape[0]
    target = (e_star_mat @ vec(rho)).reshape(d, d, order="F")
    den = lindblad_relative_entropy(rho, target)
    if not np.isfinite(den) or den < d_floor:
        return None
    out = (action_mat @ vec(rho)).reshape(d, d, order="F")
    out = 0.5 * (out + dag(out))
    num = lindblad_relative_entropy(out, target)
    return num / den


def estimate_sdpi(channel, e_star, n_samples=200, seed=0, refine=True,
                  steps=200, d_floor=1e-10, extra_states=None):
    """Sampled supremum of the contraction ratio, with local ascent.

    The ratio is D_Lin(action(rho) || E_*(rho)) / D_Lin(rho || E_*(rho)) over
    the channel's stored action. E_* must absorb the action on its range.
    """
    e_mat = e_star.matrix if isinstance(e_star, Superoperator) else \
        np.asarray(e_star, dtype=complex)
    act = channel.action.matrix
    dev = np.abs(act @ e_mat - e_mat).max() / max(1.0, np.abs(e_mat).max())
    if dev > 1e-9:
        raise ModelError(f"action does not fix E_* outputs ({dev:.3e})")
    d = channel.dim
    best_val = -np.inf
    best_rho = None
    ratios = []
    pool = list(extra_states or [])
    for i in range(n_samples):
        rng = sampling.child_rng(seed, i)
        if i % 2 == 0:
            rho = sampling.random_full_rank_density(rng, d)
        else:
            rho = sampling.boundary_biased_density(rng, d)
        pool.append(rho)
    for rho in pool:
        r = _sdpi_ratio(act, e_mat, rho, d_floor)
        if r is None:
            continue
        ratios.append(r)
        if r > best_val:
            best_val, best_rho = r, rho
    if best_rho is None:
        raise DegenerateSampling("no sample with usable denominator")
    if refine:
        def neg_ratio(rho):
            r = _sdpi_ratio(act, e_mat, rho, d_floor)
            return np.inf if r is None else -r
        val, rho_ref = _ratio_descent(neg_ratio, best_rho, steps=steps)
        if -val > best_val:
            best_val, best_rho = -val, rho_ref
    return ConstantEstimate(
        value=float(best_val),
        n_samples=len(ratios),
        argmin_state=best_rho,
        method="sdpi-sampled-sup+ascent",
        ratios=np.array(ratios),
    )


def check_sdpi_bound(channel, n_samples=100, seed=0, abs_tol=1e-9,
                     rel_tol=1e-9, estimator_slack=0.05):
    """Contraction bound via the unital counterpart, verified two ways.

    Estimate level: c(Phi) <= min{1, kappa c(Phi_0)} with kappa the condition
    number of sigma, allowing the stated estimator slack. Sample level: for
    each state rho with X = Gamma^{-1}(rho),
    D_Lin(Phi_*(rho)||sigma) <= kappa r_0(X) D_Lin(rho||sigma) where r_0(X) is
    the exact per-sample counterpart ratio, so this part assumes nothing about
    either estimate.
    """
    if channel.sigma is None:
        raise DomainViolation("bound needs an invariant state")
    if not channel_is_primitive(channel):
        raise PrimitivityError("channel has multiple fixed points")
    d = channel.dim
    s = channel.sigma
    kappa = float(s.eigenvalues.max() / s.eigenvalues.min())
    phi0 = build_unital_counterpart(channel)
    e_sigma = state_projection_superop(s.rho)
    e_zero = trace_projection_superop(d)
    sig_inv_half = s.power(-0.5)
    # per-sample proof chain with the exact counterpart ratio
    phis = channel.phi_star().matrix
    act0 = phi0.action.matrix
    chain = []
    xs = []
    for i in range(n_samples):
        rng = sampling.child_rng(seed, i)
        if i % 2 == 0:
            rho = sampling.random_full_rank_density(rng, d)
        else:
            rho = sampling.boundary_biased_density(rng, d)
        X = sig_inv_half @ rho @ sig_inv_half
        e0x = (np.trace(X).real / d) * np.eye(d)
        den0 = lindblad_relative_entropy(X, e0x)
        if den0 < 1e-10:
            continue
        xs.append(X / np.trace(X).real)
        p0x = (act0 @ vec(X)).reshape(d, d, order="F")
        p0x = 0.5 * (p0x + dag(p0x))
        r0 = lindblad_relative_entropy(p0x, e0x) / den0
        prho = (phis @ vec(rho)).reshape(d, d, order="F")
        prho = 0.5 * (prho + dag(prho))
        lhs = lindblad_relative_entropy(prho, s.rho)
        rhs = kappa * r0 * lindblad_relative_entropy(rho, s.rho)
        chain.append(make_report("sdpi-chain-sample", lhs, rhs, abs_tol,
                                 rel_tol, {"sample": i, "r0": float(r0)}))
    if not chain:
        raise DegenerateSampling("no usable chain sample")
    c_phi = estimate_sdpi(channel, e_sigma, n_samples, seed)
    c_phi0 = estimate_sdpi(phi0, e_zero, n_samples, seed, extra_states=xs)
    worst = min(chain, key=lambda r: r.slack)
    est = make_report("sdpi-estimate-comparison", c_phi.value,
                      min(1.0, kappa * c_phi0.value),
                      abs_tol=abs_tol, rel_tol=estimator_slack,
                      witness={"estimator_slack": estimator_slack})
    return make_report(
        "sdpi-proof-chain", worst.lhs, worst.rhs, abs_tol, rel_tol,
        witness={
            "kappa": kappa,
            "c_phi": c_phi.value,
            "c_phi0": c_phi0.value,
            "n_checked": len(chain),
            "all_samples_pass": bool(all(r.passed for r in chain)),
            "estimate_comparison": est.as_dict(),
            "counterpart_diagnostics": phi0.diagnostics,
        })


def alpha2_unital(l_zero, n_samples=400, seed=0, refine=True, steps=200,
                  d_floor=1e-12, tol=1e-9):
    """Sampled log-Sobolev constant of a unital self-adjoint generator.

    Infimum over X > 0 of (<X, L0 X>_HS / d) divided by
    tr((X^2/d) ln X^2) - tr(X^2/d) ln tr(X^2/d).
    """
    mat = l_zero.matrix if isinstance(l_zero, Superoperator) else \
        np.asarray(l_zero, dtype=complex)
    d = int(round(np.sqrt(mat.shape[0])))
    eye = np.eye(d)
    unital_dev = np.abs((mat @ vec(eye)).reshape(d, d, order="F")).max()
    if unital_dev > tol:
        raise ModelError(f"generator is not unital ({unital_dev:.3e})")
    sa_dev = np.abs(mat - dag(mat)).max() / max(1.0, np.abs(mat).max())
    if sa_dev > tol:
        raise ModelError(f"generator is not HS-self-adjoint ({sa_dev:.3e})")

    def ratio(X):
        X = 0.5 * (X + dag(X))
        w = np.linalg.eigvalsh(X)
        if w.min() <= 0.0:
            return np.inf
        w2 = w * w
        tot = w2.sum()
        den = (w2 * np.log(w2)).sum() / d - (tot / d) * np.log(tot / d)
        if den < d_floor:
            return np.inf
        num = np.real(vec(X).conj() @ (mat @ vec(X))) / d
        return num / den

    best_val = np.inf
    best_x = None
    ratios = []
    for i in range(n_samples):
        rng = sampling.child_rng(seed, i)
        X = sampling.random_positive_definite(rng, d)
        r = ratio(X)
        if not np.isfinite(r):
            continue
        ratios.append(r)
        if r < best_val:
            best_val, best_x = r, X
    if best_x is None:
        raise DegenerateSampling("no sample with usable denominator")
    if refine:
        val, x_ref = _ratio_descent(ratio, best_x / np.trace(best_x).real,
                                    steps=steps)
        if val < best_val:
            best_val, best_x = val, x_ref
    return ConstantEstimate(
        value=float(best_val),
        n_samples=len(ratios),
        argmin_state=best_x,
        method="alpha2-sampled-inf+descent",
        ratios=np.array(ratios),
    )


def check_sdpi_corollary(channel, n_samples=200, seed=0, estimator_slack=0.05):
    """c(Phi) <= min{1, kappa (1 - alpha_2(id - Phi_0^2))} when Phi_0 is
    HS-self-adjoint (tracial sigma); otherwise raises ModelError from the
    alpha_2 preconditions."""
    if channel.sigma is None:
        raise DomainViolation("bound needs an invariant state")
    if not channel_is_primitive(channel):
        raise PrimitivityError("channel has multiple fixed points")
    s = channel.sigma
    kappa = float(s.eigenvalues.max() / s.eigenvalues.min())
    phi0 = build_unital_counterpart(channel)
    m0 = phi0.action.matrix
    l0 = np.eye(m0.shape[0]) - m0 @ m0
    alpha = alpha2_unital(l0, n_samples=n_samples, seed=seed)
    c_phi = estimate_sdpi(channel, state_projection_superop(s.rho),
                          n_samples, seed)
    return make_report("sdpi-lsi-corollary", c_phi.value,
                       min(1.0, kappa * (1.0 - alpha.value)),
                       abs_tol=1e-9, rel_tol=estimator_slack,
                       witness={"alpha2": alpha.value, "kappa": kappa,
                                "c_phi": c_phi.value})


def weyl_operators(d):
    """Clock and shift unitaries W_{kl} = X^k Z^l, d^2 of them."""
    X = np.zeros((d, d), dtype=complex)
    for a in range(d):
        X[(a + 1) % d, a] = 1.0
    Z = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    out = []
    for k in range(d):
        for l in range(d):
            out.append(np.linalg.matrix_power(X, k)
                       @ np.linalg.matrix_power(Z, l))
    return out

def depolarizing_channel(d, p):
    """rho -> (1-p) rho + p tr(rho) I/d in Kraus form, sigma = I/d."""
    if not 0.0 <= p <= 1.0:
        raise DomainViolation("p must lie in [0, 1]")
    ops = []
    for idx, W in enumerate(weyl_operators(d)):
        wgt = (1.0 - p) + p / d ** 2 if idx == 0 else p / d ** 2
        ops.append(np.sqrt(wgt) * W)
    return KrausChannel(ops, direction="schrodinger", sigma=np.eye(d) / d,
                        freqs=np.zeros(len(ops)), label=f"depolarizing-{p}")
