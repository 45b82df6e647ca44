"""Gibbs-state targets: decay-rate transfer against the uniform state,
spectrum truncation, relaxation onto a pure state, and trajectories with a
classical low-energy flag attached at every step."""

import dataclasses

import numpy as np
import scipy.linalg

from .errors import (
    DomainViolation,
    IncompatibleStates,
    ModelError,
    SubalgebraError,
    SupportError,
)
from .operator_core import (
    FullRankState,
    check_hermitian,
    dag,
    lindblad_relative_entropy,
    partial_trace,
    superop_sandwich,
    tensor,
    unvec,
    vec,
)
from .lindblad import JumpOperatorSet, LindbladModel, evolve
from .holley_stroock import PerturbationFactor, hs_factor_primitive
from .entropy import estimate_mlsi
from .reporting import make_report
from . import sampling


@dataclasses.dataclass
class GibbsSpec:
    """Energy levels with an inverse temperature.

    Energies must come nondecreasing; the ground energy is recorded as
    ``shift`` and subtracted before any factor computation, which leaves the
    state itself untouched (the shift cancels against the normalization).
    """

    energies: tuple
    beta: float

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        if e.ndim != 1 or e.size == 0 or not np.isfinite(e).all():
            raise DomainViolation("energies must be a finite nonempty vector")
        if np.any(np.diff(e) < 0):
            raise DomainViolation("energies must be nondecreasing")
        b = float(self.beta)
        if not np.isfinite(b) or b < 0.0:
            raise DomainViolation("beta must be finite and nonnegative")
        self.energies = tuple(float(x) for x in e)
        self.beta = b
        self.shift = float(e[0])
        self.shifted = e - e[0]

    @property
    def m(self):
        return len(self.energies)

    @property
    def partition_function(self):
        return float(np.exp(-self.beta * np.asarray(self.energies)).sum())

    @property
    def probabilities(self):
        # shifted weights keep the exponentials well conditioned
        w = np.exp(-self.beta * self.shifted)
        return w / w.sum()

    def hamiltonian(self):
        return np.diag(np.asarray(self.energies, dtype=complex))

    def state(self):
        return FullRankState(np.diag(self.probabilities).astype(complex))


def ladder_model(g, chi=1.0, label="thermal-ladder"):
    """Nearest-neighbor jumps |k><k+1| plus adjoints at the Gibbs state.

    Primitive for every spectrum; the Bohr frequency of edge (k, k+1) is
    beta (E_{k+1} - E_k), so the frequency factor of this model reproduces
    the largest consecutive gap.
    """
    m = g.m
    if m < 2:
        raise ModelError("a ladder needs at least two levels")
    if chi == 0:
        raise DomainViolation("coupling must be nonzero")
    ops = []
    for k in range(m - 1):
        up = np.zeros((m, m), dtype=complex)
        up[k, k + 1] = chi
        ops.append(up)
        ops.append(dag(up))
    return LindbladModel.from_jumps(JumpOperatorSet(ops), g.state(),
                                    label=label)


def thermal_hs_factor(g):
    """e^{beta E_m} max_j e^{beta (E_{j+1}-E_j)/2} with energies shifted to
    E_1 = 0.

    After the shift the first term is the eigenvalue ratio of the Gibbs
    state, and the gap term is the frequency factor of the nearest-neighbor
    ladder, so the value agrees with hs_factor_primitive(ladder_model(g)).
    """
    top = float(g.shifted[-1])
    gaps = np.diff(np.asarray(g.energies, dtype=float))
    max_gap = float(gaps.max()) if gaps.size else 0.0
    state_ratio = float(np.exp(g.beta * top))
    freq_factor = float(np.exp(g.beta * max_gap / 2.0))
    return PerturbationFactor(state_ratio, 1.0 / freq_factor,
                              state_ratio * freq_factor, {
                                  "beta": g.beta,
                                  "shift": g.shift,
                                  "state_ratio": state_ratio,
                                  "freq_factor": freq_factor,
                                  "max_gap": max_gap,
                              })


def truncated_spec(g, l):
    """Compress levels l..m (1-based cutoff index) onto the energy E_l."""
    if int(l) != l or not 1 <= int(l) <= g.m:
        raise DomainViolation(f"cutoff index {l} outside 1..{g.m}")
    l = int(l)
    e = np.asarray(g.energies, dtype=float)
    comp = np.concatenate([e[:l - 1], np.full(g.m - l + 1, e[l - 1])])
    return GibbsSpec(tuple(comp), g.beta)


def truncated_gibbs(g, l):
    """Returns (sigma_tilde, distance_bound, distance_actual).

    sigma_tilde is the Gibbs state of the compressed spectrum. The bound
    2 (m - l) e^{-beta E_l} / Z-tilde treats every level above the cutoff as
    unoccupied and is first order in the compressed weight; the actual trace
    distance is computed exactly from the two probability vectors.
    """
    tg = truncated_spec(g, l)
    l = int(l)
    p = g.probabilities
    pt = tg.probabilities
    actual = float(np.abs(p - pt).sum())
    # same shift on both spectra, so the weight ratio is exact
    wt = np.exp(-g.beta * tg.shifted)
    bound = float(2.0 * (g.m - l) * wt[l - 1] / wt.sum())
    return np.diag(pt).astype(complex), bound, actual


def _relaxation_apply(rho, t, t1, dims):
    """Decay of the first register onto |0><0| at rate 1/t1."""
    d_a, d_b = dims
    decay = float(np.exp(-t / t1))
    ground = np.zeros((d_a, d_a), dtype=complex)
    ground[0, 0] = 1.0
    marginal = partial_trace(rho, dims, "second")
    return decay * np.asarray(rho, dtype=complex) \
        + (1.0 - decay) * tensor(ground, marginal)


def t1_relaxation_check(t1, dim_b, n_samples=40, seed=0, dim_a=2, times=None):
    """Pointwise decay check for pure-state relaxation on a bipartite input.

    The reference is |0><0| (x) rho_B with rho_B the sample's own second
    marginal. A finite relative entropy forces the first register onto |0>,
    where the map acts trivially and both sides vanish; full-rank samples
    have infinite reference entropy and are counted as skipped.
    """
    if t1 <= 0:
        raise DomainViolation("t1 must be positive")
    if dim_a < 2 or dim_b < 1:
        raise DomainViolation("register dimensions too small")
    if times is None:
        times = (0.0, 0.5 * t1, t1, 2.0 * t1)
    dims = (int(dim_a), int(dim_b))
    ground = np.zeros((dims[0], dims[0]), dtype=complex)
    ground[0, 0] = 1.0
    worst = None
    n_finite = 0
    n_skipped = 0
    for i in range(n_samples):
        rng = sampling.child_rng(seed, i)
        if i % 4 == 3:
            # generic full-rank input: reference support violated
            rho = sampling.random_full_rank_density(rng, dims[0] * dims[1])
        else:
            tau = sampling.random_full_rank_density(rng, dims[1])
            rho = tensor(ground, tau)
        ref = tensor(ground, partial_trace(rho, dims, "second"))
        d0 = lindblad_relative_entropy(rho, ref, allow_infinite=True)
        if not np.isfinite(d0):
            n_skipped += 1
            continue
        n_finite += 1
        for t in times:
            out = _relaxation_apply(rho, t, t1, dims)
            lhs = lindblad_relative_entropy(out, ref)
            rhs = float(np.exp(-t / t1) * d0)
            if worst is None or lhs - rhs > worst[0] - worst[1]:
                worst = (lhs, rhs, i, t)
    if worst is None:
        raise DomainViolation("no sample had finite reference entropy")
    return make_report("t1-relaxation", worst[0], worst[1], abs_tol=1e-9,
                       rel_tol=0.0, witness={
                           "t1": float(t1),
                           "dims": list(dims),
                           "n_finite": n_finite,
                           "n_skipped": n_skipped,
                           "worst_sample": int(worst[2]),
                           "worst_time": float(worst[3]),
                           "times": [float(t) for t in times],
                       })


def low_energy_projector(g, e0):
    """Diagonal projector onto levels with E <= e0 (closed cutoff)."""
    mask = np.asarray(g.energies) <= e0 + 1e-12
    d0 = int(mask.sum())
    return np.diag(mask.astype(complex)), d0, mask


def _split_jumps_by_cutoff(model, proj, error_cls, tol=1e-10):
    """Each jump must sit inside the low block or have no low-block part."""
    low, other = [], []
    for A in model.jumps.ops:
        scale = max(1.0, np.abs(A).max())
        inside = proj @ A @ proj
        if np.abs(A - inside).max() <= tol * scale:
            low.append(A)
        elif np.abs(inside).max() <= tol * scale:
            other.append(A)
        else:
            raise error_cls(
                "a jump mixes low-block action with the high-energy sector")
    return low, other


def _check_gibbs_model(model, g):
    if model.jumps is None:
        raise ModelError("flag dynamics needs a jump-operator model")
    if model.dim != g.m:
        raise IncompatibleStates(
            f"model dimension {model.dim} != level count {g.m}")
    dev = np.abs(model.sigma.rho - np.diag(g.probabilities)).max()
    if dev > 1e-8:
        raise IncompatibleStates(
            f"model fixed point is not the given Gibbs state ({dev:.3e})")


@dataclasses.dataclass
class FlaggedTrajectory:
    """Low-flag conditional trajectory of a stepwise-measured evolution.

    conditional_states are normalized; step_low_probs[i] is the conditional
    probability that measurement i keeps the low flag; p_low is their
    product, the probability that every flag stays low. marginal_state sums
    both branches at the final time (all flags traced out).
    """

    times: np.ndarray
    conditional_states: list
    step_low_probs: np.ndarray
    p_low: float
    marginal_state: np.ndarray
    m_steps: int
    details: dict = dataclasses.field(default_factory=dict)


def _flag_branch_run(l_star, proj, rho0, t, m, keep_states=False):
    """Exact two-outcome branching of m measured steps.

    The high branch is absorbed: once any flag fires the sample only has to
    stay normalized, so the absorbed state is dephased across the cut and
    evolved along, which is all the marginal needs.
    """
    d = rho0.shape[0]
    comp = np.eye(d) - proj
    step = scipy.linalg.expm(-(t / m) * l_star)
    low = proj @ rho0 @ proj
    absorbed = rho0 - low
    probs = [float(np.trace(low).real)]
    states = [low / np.trace(low).real] if keep_states else None
    for _ in range(m):
        low = unvec(step @ vec(low))
        low = 0.5 * (low + dag(low))
        prev = float(np.trace(low).real)
        kept = proj @ low @ proj
        leak = comp @ low @ comp
        if keep_states:
            absorbed = unvec(step @ vec(absorbed))
            absorbed = 0.5 * (absorbed + dag(absorbed))
            absorbed = proj @ absorbed @ proj + comp @ absorbed @ comp + leak
        low = kept
        tr_kept = float(np.trace(kept).real)
        probs.append(tr_kept / prev if prev > 1e-300 else 0.0)
        if keep_states:
            states.append(kept / tr_kept if tr_kept > 1e-300 else kept * 0.0)
    p_low = float(np.trace(low).real)
    marginal = low + absorbed if keep_states else None
    return p_low, np.asarray(probs), states, marginal


def _p_low_fast(l_star, proj, rho0, t, m):
    """tr((P e^{-(t/m) L_*} P)^m rho0) via a d^2 x d^2 matrix power.

    p_low converges like 1/m, so the doubling probe needs step counts far
    beyond what a per-step loop affords; log2(m) small matrix products cost
    nothing and agree with the loop to rounding.
    """
    meas = superop_sandwich(proj, proj)
    step = meas @ scipy.linalg.expm(-(t / m) * l_star)
    v = np.linalg.matrix_power(step, m) @ (meas @ vec(rho0))
    return float(np.trace(unvec(v)).real)


def flagged_evolution(model, g, e0, rho0, t, m_steps=256, max_doublings=40):
    """Evolution interleaved with a low/high energy measurement per step.

    Runs the requested m_steps grid, then keeps doubling the step count
    until p_low moves by less than 1e-6; the doubling record and the limit
    value land in details.
    """
    _check_gibbs_model(model, g)
    if t < 0:
        raise DomainViolation("negative time")
    if int(m_steps) < 1:
        raise DomainViolation("m_steps must be at least 1")
    m_steps = int(m_steps)
    proj, d0, _ = low_energy_projector(g, e0)
    if d0 == 0:
        raise DomainViolation("cutoff excludes every level")
    rho0 = check_hermitian(np.asarray(rho0, dtype=complex), tol=1e-9)
    if abs(np.trace(rho0).real - 1.0) > 1e-9:
        raise DomainViolation("rho0 must have unit trace")
    if np.abs(rho0 - proj @ rho0 @ proj).max() > 1e-10:
        raise SupportError("rho0 not supported in the low-energy subspace")
    low_jumps, high_jumps = _split_jumps_by_cutoff(model, proj,
                                                   DomainViolation)
    l_star = model.schrodinger.matrix
    p_low, probs, states, marginal = _flag_branch_run(
        l_star, proj, rho0, t, m_steps, keep_states=True)
    doubling = [(m_steps, p_low)]
    m = m_steps
    converged = False
    for _ in range(max_doublings):
        m *= 2
        p_next = _p_low_fast(l_star, proj, rho0, t, m)
        doubling.append((m, p_next))
        if abs(p_next - doubling[-2][1]) < 1e-6:
            converged = True
            break
    times = np.linspace(0.0, t, m_steps + 1)
    plain = evolve(model.schrodinger, rho0, t)
    return FlaggedTrajectory(
        times=times,
        conditional_states=states,
        step_low_probs=probs,
        p_low=p_low,
        marginal_state=marginal,
        m_steps=m_steps,
        details={
            "e0": float(e0),
            "d_low": d0,
            "n_low_jumps": len(low_jumps),
            "n_high_jumps": len(high_jumps),
            "doubling": [(int(mm), float(pp)) for mm, pp in doubling],
            "p_low_limit": float(doubling[-1][1]),
            "converged": converged,
            "marginal_dev": float(np.abs(marginal - plain).max()),
        })


def effective_low_energy_model(model, g, e0, n_samples=12, seed=0,
                               times=None, mlsi_samples=80):
    """Restriction to the low-energy block, with its decay certificate.

    Jumps crossing the cutoff are dropped (those are the flagged events);
    surviving jumps are compressed to the block and rebuilt at the
    renormalized low block of the Gibbs state. The decay rate alpha is the
    uniform-state estimate divided by the cutoff factor
    e^{beta E0} max_{E_{j+1} <= E0} e^{beta (E_{j+1}-E_j)/2}, and the decay
    inequality is checked along flag-free trajectories of the restriction.
    """
    _check_gibbs_model(model, g)
    proj, d0, mask = low_energy_projector(g, e0)
    if d0 == 0:
        raise DomainViolation("cutoff excludes every level")
    low_jumps, dropped = _split_jumps_by_cutoff(model, proj, SubalgebraError)
    if not low_jumps:
        raise ModelError("no jump survives below the cutoff")
    if d0 == g.m:
        effective = model
    else:
        compressed = [A[:d0, :d0] for A in low_jumps]
        p_low_block = g.probabilities[:d0]
        p_low_block = p_low_block / p_low_block.sum()
        effective = LindbladModel.from_jumps(
            JumpOperatorSet(compressed), np.diag(p_low_block).astype(complex),
            label=(model.label or "model") + "-low")

    beta = g.beta
    e0_shifted = float(e0) - g.shift
    e_sh = np.asarray(g.shifted, dtype=float)
    gaps = [e_sh[j + 1] - e_sh[j] for j in range(g.m - 1)
            if e_sh[j + 1] <= e0_shifted + 1e-12]
    max_gap = max(gaps) if gaps else 0.0
    state_part = float(np.exp(beta * e0_shifted))
    freq_part = float(np.exp(beta * max_gap / 2.0))
    factor = PerturbationFactor(state_part, 1.0 / freq_part,
                                state_part * freq_part, {
                                    "e0": float(e0),
                                    "beta": beta,
                                    "max_kept_gap": float(max_gap),
                                })

    flat = LindbladModel.from_jumps(
        effective.jumps, np.eye(effective.dim) / effective.dim,
        label="cutoff-flat")
    alpha_flat = estimate_mlsi(flat, n_samples=mlsi_samples, seed=seed).value
    alpha = alpha_flat / factor.total

    sigma_t = effective.sigma.rho
    if times is None:
        # a very loose factor makes 1/alpha astronomical; past a few gap
        # times the state has equilibrated and longer probes prove nothing
        t_scale = min(1.0 / alpha, 25.0 / effective.spectral_gap())
        times = np.geomspace(0.25, 4.0, 6) * t_scale
    worst = None
    for i in range(n_samples):
        rng = sampling.child_rng(seed, 10_000 + i)
        rho = sampling.random_full_rank_density(rng, effective.dim)
        d_start = lindblad_relative_entropy(rho, sigma_t)
        for t in times:
            out = evolve(effective.schrodinger, rho, t)
            lhs = lindblad_relative_entropy(out, sigma_t)
            rhs = float(np.exp(-alpha * t) * d_start)
            if worst is None or lhs - rhs > worst[0] - worst[1]:
                worst = (lhs, rhs, i, t)
    report = make_report("low-energy-decay", worst[0], worst[1],
                         abs_tol=1e-8, rel_tol=0.0, witness={
                             "alpha": float(alpha),
                             "alpha_uniform": float(alpha_flat),
                             "factor_total": float(factor.total),
                             "hs_factor_effective": float(
                                 hs_factor_primitive(effective).total),
                             "d_low": d0,
                             "n_kept": len(low_jumps),
                             "n_dropped": len(dropped),
                             "n_samples": n_samples,
                             "worst_sample": int(worst[2]),
                             "worst_time": float(worst[3]),
                         })
    return effective, report
