"""Graph-built semigroups targeting a prescribed state, and dissipative
preparation of a gate-sequence output with a time register.

The graph construction takes an edge set on the eigenbasis of a diagonal
target state and produces a detailed-balance generator whose jumps are the
matrix units of the edges (both orientations). The history construction
couples a logical model to a cyclic-clock register, conjugates by a
controlled gate staircase, and turns entropy decay of the product generator
into a preparation guarantee for the staircase output.
"""

import dataclasses

import numpy as np
import scipy.linalg

from .errors import (
    DegeneracyError,
    DomainViolation,
    IrreducibilityError,
    ModelError,
    ShapeError,
    UnitarityError,
)
from .operator_core import (
    Superoperator,
    as_full_rank_state,
    dag,
    lindblad_relative_entropy,
    superop_sandwich,
    tensor,
    vec,
)
from .lindblad import JumpOperatorSet, LindbladModel, evolve
from .entropy import estimate_mlsi
from .holley_stroock import PerturbationFactor
from .reporting import make_report


@dataclasses.dataclass
class GraphSpec:
    """Edge set on m vertices; edges are ordered pairs (r, s) with r < s.

    weights maps an edge to its coupling chi (default 1); the generator uses
    both orientations of every edge, so chi is orientation independent.
    """

    m: int
    edges: list
    weights: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.m < 2:
            raise DomainViolation("need at least two vertices")
        seen = set()
        for e in self.edges:
            r, s = e
            if not (0 <= r < s < self.m):
                raise DomainViolation(f"edge {e} out of range or not r < s")
            if (r, s) in seen:
                raise DomainViolation(f"duplicate edge {e}")
            seen.add((r, s))
        self.edges = [tuple(e) for e in self.edges]
        for e, chi in self.weights.items():
            if tuple(e) not in seen:
                raise DomainViolation(f"weight for unknown edge {e}")
            if chi == 0:
                raise DomainViolation(f"zero weight on edge {e}")

    def chi(self, edge):
        return float(self.weights.get(tuple(edge), 1.0))

    def symmetrized(self):
        out = []
        for r, s in self.edges:
            out.append((r, s))
            out.append((s, r))
        return out

    @classmethod
    def complete(cls, m):
        return cls(m, [(r, s) for r in range(m) for s in range(r + 1, m)])

    @classmethod
    def cycle(cls, m):
        edges = [(s, s + 1) for s in range(m - 1)] + [(0, m - 1)]
        return cls(m, sorted(set(edges)))

    @classmethod
    def path(cls, m):
        return cls(m, [(s, s + 1) for s in range(m - 1)])


def is_irreducible(spec):
    """Connectivity of the symmetrized edge set, by union-find."""
    parent = list(range(spec.m))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for r, s in spec.edges:
        parent[find(r)] = find(s)
    return len({find(v) for v in range(spec.m)}) == 1


def _diagonal_weights(sigma, m):
    """Eigenvalue vector of a target state given as vector, matrix or state."""
    if isinstance(sigma, (list, tuple)):
        sigma = np.asarray(sigma, dtype=float)
    if isinstance(sigma, np.ndarray) and sigma.ndim == 1:
        vals = np.asarray(sigma, dtype=float)
    else:
        rho = sigma.rho if hasattr(sigma, "rho") else np.asarray(sigma, dtype=complex)
        off = np.abs(rho - np.diag(np.diag(rho))).max()
        if off > 1e-12:
            raise DomainViolation(f"target state not diagonal ({off:.3e})")
        vals = np.diag(rho).real
    if vals.shape != (m,):
        raise ShapeError(f"state dimension {vals.shape} != vertex count {m}")
    if vals.min() <= 0:
        raise DomainViolation("target state must be full rank")
    if abs(vals.sum() - 1.0) > 1e-10:
        raise DomainViolation(f"target weights sum to {vals.sum()}")
    return vals


def _group_indices(vals, tol=1e-8):
    """Cluster near-equal weights; returns a group id per index."""
    order = np.argsort(vals)
    gid = np.zeros(len(vals), dtype=int)
    g = 0
    for k in range(1, len(vals)):
        if vals[order[k]] - vals[order[k - 1]] > tol * max(1.0, vals.max()):
            g += 1
        gid[order[k]] = g
    gid[order[0]] = 0
    return gid


def _edge_units(spec, keep):
    ops = []
    kept = []
    for r, s in spec.edges:
        if not keep(r, s):
            continue
        chi = spec.chi((r, s))
        E = np.zeros((spec.m, spec.m), dtype=complex)
        E[r, s] = chi
        ops.append(E)
        ops.append(dag(E))
        kept.append((r, s))
    return ops, kept


def _edge_keep_rule(vals, m, degenerate_rule):
    """Which edges survive for a given weight vector.

    A uniform target is the plain zero-frequency (heat) case and keeps every
    edge. A mixed degenerate spectrum keeps only edges between different
    weight clusters (the in-cluster coupling is set to zero), and requires
    explicit opt-in via degenerate_rule.
    """
    gid = _group_indices(vals)
    n_groups = len(set(gid))
    if n_groups == 1:
        return lambda r, s: True
    if n_groups < m:
        if not degenerate_rule:
            raise DegeneracyError(
                "target has repeated weights; no block rule given")
        return lambda r, s: gid[r] != gid[s]
    return lambda r, s: True


def build_graph_generator(spec, sigma, degenerate_rule=False):
    """Detailed-balance model with matrix-unit jumps on the edges of spec.

    sigma must be diagonal in the vertex basis; see _edge_keep_rule for how
    repeated weights are handled.
    """
    vals = _diagonal_weights(sigma, spec.m)
    keep = _edge_keep_rule(vals, spec.m, degenerate_rule)
    ops, kept = _edge_units(spec, keep)
    if not ops:
        raise ModelError("no edges survive the block rule")
    model = LindbladModel.from_jumps(JumpOperatorSet(ops), np.diag(vals),
                                     label=f"graph-m{spec.m}")
    model.kept_edges = kept
    return model


def graph_heat_partner(spec, sigma=None, degenerate_rule=False):
    """Zero-frequency model on the same surviving jump set, sigma = I/m."""
    if sigma is None:
        ops, kept = _edge_units(spec, lambda r, s: True)
    else:
        vals = _diagonal_weights(sigma, spec.m)
        keep = _edge_keep_rule(vals, spec.m, degenerate_rule)
        ops, kept = _edge_units(spec, keep)
    if not ops:
        raise ModelError("no edges survive the block rule")
    model = LindbladModel.from_jumps(JumpOperatorSet(ops),
                                     np.eye(spec.m) / spec.m,
                                     label=f"graph-heat-m{spec.m}")
    model.kept_edges = kept
    return model


def classical_graph_laplacian(spec):
    """Action of the heat generator on diagonal operators, as an m x m matrix.

    Each edge with coupling chi contributes rate 2 chi^2 in both directions.
    """
    A = np.zeros((spec.m, spec.m))
    for r, s in spec.edges:
        w = 2.0 * spec.chi((r, s)) ** 2
        A[r, r] += w
        A[s, s] += w
        A[r, s] -= w
        A[s, r] -= w
    return A


def diagonal_restriction(superop, tol=1e-10):
    """Restrict a superoperator to diagonal matrices; (A, invariance_dev).

    A[i, j] is the coefficient of E_ii in the image of E_jj; invariance_dev
    is the largest off-diagonal leak over the diagonal basis.
    """
    mat = superop.matrix if isinstance(superop, Superoperator) else \
        np.asarray(superop, dtype=complex)
    d = int(round(np.sqrt(mat.shape[0])))
    A = np.zeros((d, d))
    dev = 0.0
    E = np.zeros((d, d), dtype=complex)
    for j in range(d):
        E[j, j] = 1.0
        out = (mat @ vec(E)).reshape(d, d, order="F")
        E[j, j] = 0.0
        dev = max(dev, np.abs(out - np.diag(np.diag(out))).max())
        A[:, j] = np.diag(out).real
    if dev > tol * max(1.0, np.abs(mat).max()):
        raise ModelError(f"diagonal subalgebra not invariant ({dev:.3e})")
    return A, dev


def graph_hs_bound(spec, sigma, degenerate_rule=False):
    """Decay-constant transfer factor of a graph model from its weights.

    total = max_{kl} (sigma_k/sigma_l) * max over surviving oriented edges of
    (sigma_s/sigma_r)^{1/2}; matches the generic perturbation factor of the
    built model.
    """
    if not is_irreducible(spec):
        raise IrreducibilityError("edge set is not connected")
    vals = _diagonal_weights(sigma, spec.m)
    keep = _edge_keep_rule(vals, spec.m, degenerate_rule)
    max_w = 0.0
    for r, s in spec.edges:
        if not keep(r, s):
            continue
        max_w = max(max_w, abs(np.log(vals[s]) - np.log(vals[r])))
    state_ratio = float(vals.max() / vals.min())
    freq_factor = float(np.exp(max_w / 2.0))
    details = {"state_ratio": state_ratio, "freq_factor": freq_factor}
    n_complete = spec.m * (spec.m - 1) // 2
    if len(spec.edges) == n_complete:
        details["complete_graph_reference"] = 2.0 * spec.m / (
            state_ratio * freq_factor)
    return PerturbationFactor(
        entropy_factor=float(vals.max()),
        ep_factor=float(vals.min() * np.exp(-max_w / 2.0)),
        total=state_ratio * freq_factor,
        details=details,
    )


@dataclasses.dataclass
class HistoryModel:
    """Logical model coupled to a cyclic clock and conjugated by a staircase.

    cumulative[s] is the product of the first s gates; U applies
    cumulative[s] controlled on clock value s. kappa is the measured decay
    constant used in every preparation bound.
    """

    logical: LindbladModel
    T: int
    unitaries: list
    cumulative: list
    U: np.ndarray
    tim_model: LindbladModel
    product_model: LindbladModel
    conjugated_model: LindbladModel
    kappa: float
    kappa_details: dict

    @property
    def target_state(self):
        VT = self.cumulative[self.T]
        return VT @ self.logical.sigma.rho @ dag(VT)


def build_clock_model(T):
    """Cyclic nearest-neighbour hopping on T+1 clock values, all rates one."""
    n = T + 1
    ops = []
    for s in range(n):
        W = np.zeros((n, n), dtype=complex)
        W[s, (s + 1) % n] = 1.0
        ops.append(W)
        ops.append(dag(W))
    return LindbladModel.from_jumps(JumpOperatorSet(ops), np.eye(n) / n,
                                    label=f"clock-{n}")


def build_history_model(logical, unitaries, n_samples=60, seed=0):
    """Assemble the clock-coupled model and measure its decay constant.

    kappa is the most conservative of the sampled decay-ratio infima of the
    logical model, the clock model, and the uncoupled product model; the
    conjugated model shares the product spectrum exactly, so the same value
    governs it.
    """
    if logical.jumps is None:
        raise ModelError("history construction needs a jump-backed model")
    T = len(unitaries)
    if T < 1:
        raise DomainViolation("need at least one gate")
    n = logical.dim
    us = []
    for k, u in enumerate(unitaries):
        u = np.asarray(u, dtype=complex)
        if u.shape != (n, n):
            raise ShapeError(f"gate {k} has shape {u.shape}")
        if np.abs(dag(u) @ u - np.eye(n)).max() > 1e-10:
            raise UnitarityError(f"gate {k} is not unitary")
        us.append(u)
    tim = build_clock_model(T)
    nt = T + 1
    prod_ops = [tensor(A, np.eye(nt)) for A in logical.jumps.ops]
    prod_ops += [tensor(np.eye(n), W) for W in tim.jumps.ops]
    sig_prod = tensor(logical.sigma.rho, np.eye(nt) / nt)
    product = LindbladModel.from_jumps(JumpOperatorSet(prod_ops), sig_prod,
                                       label="history-product")
    cumulative = [np.eye(n, dtype=complex)]
    for u in us:
        cumulative.append(u @ cumulative[-1])
    U = np.zeros((n * nt, n * nt), dtype=complex)
    for s in range(nt):
        E = np.zeros((nt, nt))
        E[s, s] = 1.0
        U += tensor(cumulative[s], E)
    if np.abs(dag(U) @ U - np.eye(n * nt)).max() > 1e-10:
        raise UnitarityError("staircase unitary failed the unitarity check")
    conj_ops = [U @ A @ dag(U) for A in prod_ops]
    conjugated = LindbladModel.from_jumps(
        JumpOperatorSet(conj_ops), U @ sig_prod @ dag(U), label="history")
    # the conjugated generator must equal ad_U L ad_U* as a superoperator
    SU = superop_sandwich(U, dag(U))
    SUd = superop_sandwich(dag(U), U)
    lhs = conjugated.heisenberg.matrix
    rhs = SU @ product.heisenberg.matrix @ SUd
    dev = np.abs(lhs - rhs).max() / max(1.0, np.abs(rhs).max())
    if dev > 1e-9:
        raise ModelError(f"conjugation identity off by {dev:.3e}")
    est_log = estimate_mlsi(logical, n_samples=n_samples, seed=seed)
    est_tim = estimate_mlsi(tim, n_samples=n_samples, seed=seed)
    est_prod = estimate_mlsi(product, n_samples=n_samples, seed=seed)
    kappa = min(est_log.value, est_tim.value, est_prod.value)
    details = {
        "logical": est_log.value,
        "clock": est_tim.value,
        "product": est_prod.value,
        "min_combination": min(est_log.value, est_tim.value),
        "max_combination": max(est_log.value, est_tim.value),
        "conjugation_dev": float(dev),
    }
    return HistoryModel(logical, T, us, cumulative, U, tim, product,
                        conjugated, float(kappa), details)


def default_time_points(kappa, n=10):
    """Geometric grid of evolution times spanning one to ten decay units."""
    return np.geomspace(1.0, 10.0, n) / kappa


@dataclasses.dataclass
class PreparationRun:
    output: np.ndarray
    success_prob: float
    report: object
    decay_report: object
    trace_report: object
    details: dict


def _clock_block(state, n, nt, s):
    return state.reshape(n, nt, n, nt)[:, s, :, s]


def run_preparation(hm, X, s, input_mode="uniform"):
    """Evolve X with a fresh clock, read the final clock value, rescale.

    The returned report checks the preparation bound
    D_Lin(output || target) <= (T+1) e^{-kappa s} D_Lin(input || fixed point);
    decay_report checks the full-state entropy decay and trace_report the
    Pinsker control of the success probability.
    """
    if s < 0:
        raise DomainViolation("negative time")
    n, nt = hm.logical.dim, hm.T + 1
    X = np.asarray(X, dtype=complex)
    if X.shape != (n, n):
        raise ShapeError(f"input shape {X.shape}")
    if input_mode == "uniform":
        nu = np.eye(nt) / nt
    elif input_mode == "zero":
        nu = np.zeros((nt, nt))
        nu[0, 0] = 1.0
    else:
        raise DomainViolation(f"unknown input mode {input_mode!r}")
    U = hm.U
    rho_in = U @ tensor(X, nu) @ dag(U)
    fix = U @ tensor(hm.logical.sigma.rho, np.eye(nt) / nt) @ dag(U)
    d0 = lindblad_relative_entropy(tensor(X, nu),
                                   tensor(hm.logical.sigma.rho, np.eye(nt) / nt))
    evolved = evolve(hm.conjugated_model.schrodinger, rho_in, s)
    block = _clock_block(evolved, n, nt, hm.T)
    success = float(np.trace(block).real)
    out = nt * block
    target = hm.target_state
    decay = e_dec = lindblad_relative_entropy(evolved, fix)
    kappa = hm.kappa
    lhs = lindblad_relative_entropy(out, target)
    rhs = nt * np.exp(-kappa * s) * d0
    report = make_report("history-preparation", lhs, rhs,
                         abs_tol=1e-8, rel_tol=1e-9,
                         witness={"s": float(s), "kappa": kappa,
                                  "input_entropy": float(d0),
                                  "success_prob": success,
                                  "input_mode": input_mode})
    decay_report = make_report("history-full-decay", e_dec,
                               np.exp(-kappa * s) * d0,
                               abs_tol=1e-8, rel_tol=1e-9)
    trace_report = make_report(
        "history-trace-control",
        abs(success - 1.0 / nt),
        2.0 * np.sqrt(np.exp(-kappa * s) * d0),
        abs_tol=1e-10, rel_tol=1e-9)
    logical_entropy = lindblad_relative_entropy(X, hm.logical.sigma.rho)
    return PreparationRun(out, success, report, decay_report, trace_report,
                          {"logical_input_entropy": float(logical_entropy),
                           "full_input_entropy": float(d0),
                           "full_decay": float(decay)})


def clock_transition_generator(tim_model):
    """Classical generator of the clock restricted to its diagonal."""
    A, _ = diagonal_restriction(tim_model.schrodinger)
    return A


def hitting_distribution(A, s):
    """Distribution of one clock register started at 0 after time s."""
    p = scipy.linalg.expm(-s * A)[:, 0]
    p = np.maximum(p.real, 0.0)
    return p / p.sum()


@dataclasses.dataclass
class StoppingRun:
    output: np.ndarray
    failure_prob: float
    report: object
    renormalized_report: object
    details: dict


def stopping_register_threshold(T, kappa, s):
    """Registers needed for the renormalized half-rate guarantee."""
    return T * max(1.0, 2.0 * abs(np.log(kappa * s)))


def run_stopping_time(hm, X, s, m):
    """Preparation with m clock registers read at time s.

    Every register evolves independently and the staircase gate depends only
    on the maximal clock value, so the clock statistics reduce exactly to a
    product measure over {0..T}^m: success means at least one register shows
    T, in which case the applied gate is the full staircase. failure_prob is
    (1 - q_s(T))^m with q_s the single-register hitting distribution.
    """
    if m < 1 or int(m) != m:
        raise DomainViolation("register count must be a positive integer")
    if s < 0:
        raise DomainViolation("negative time")
    m = int(m)
    n, nt = hm.logical.dim, hm.T + 1
    X = np.asarray(X, dtype=complex)
    if X.shape != (n, n):
        raise ShapeError(f"input shape {X.shape}")
    A = clock_transition_generator(hm.tim_model)
    q = hitting_distribution(A, s)
    q_T = float(q[hm.T])
    eps_m = (1.0 - q_T) ** m
    eps_stationary = (1.0 - 1.0 / nt) ** m
    X_s = evolve(hm.logical.schrodinger, X, s)
    VT = hm.cumulative[hm.T]
    # all successful register outcomes apply the same full staircase
    selected = (1.0 - eps_m) * (VT @ X_s @ dag(VT))
    out = selected / (1.0 - eps_m)
    target = hm.target_state
    d0 = lindblad_relative_entropy(X, hm.logical.sigma.rho)
    lhs = lindblad_relative_entropy(out, target)
    rhs = np.exp(-hm.kappa * s) * d0 / (1.0 - eps_m)
    report = make_report("stopping-time-bound", lhs, rhs,
                         abs_tol=1e-8, rel_tol=1e-9,
                         witness={"s": float(s), "m": m,
                                  "failure_prob": eps_m,
                                  "stationary_failure": eps_stationary,
                                  "hit_prob": q_T})
    threshold = stopping_register_threshold(hm.T, hm.kappa, s)
    hat = out / np.trace(out).real
    renorm = make_report(
        "stopping-renormalized-bound",
        lindblad_relative_entropy(hat, target),
        np.exp(-hm.kappa * s / 2.0) * d0,
        abs_tol=1e-8, rel_tol=1e-9,
        witness={"m_threshold": float(threshold),
                 "threshold_met": bool(m >= threshold)})
    return StoppingRun(out, eps_m, report, renorm,
                       {"hitting_distribution": [float(x) for x in q],
                        "m_threshold": float(threshold)})
