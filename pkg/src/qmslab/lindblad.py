"""Generators with detailed balance built from jump operators.

A model is a full-rank state sigma together with jump operators A_j that are
eigenvectors of the modular map X -> sigma X sigma^{-1}; the eigenvalue
e^{-omega_j} defines the Bohr frequency omega_j. The Heisenberg generator is

    L(X) = sum_j e^{-omega_j/2} (A_j* A_j X - A_j* X A_j)
         + e^{omega_j/2} (X A_j A_j* - A_j X A_j*)

and the Schrodinger generator is its trace dual. Omega = 0 everywhere gives
the heat generator, self-adjoint for the Hilbert-Schmidt inner product.
"""

import numpy as np
import scipy.linalg

from .errors import (
    ShapeError,
    ModelError,
    NotModularEigenvector,
    EvolutionError,
    PrimitivityError,
)
from .operator_core import (
    Superoperator,
    as_full_rank_state,
    apply_superop,
    check_square,
    dag,
    gamma_map,
    gamma_power,
    partial_trace,
    superop_left,
    superop_right,
    superop_sandwich,
    superop_trace_dual,
    tensor,
    vec,
    unvec,
)
from .reporting import make_report

MODEL_TOL = 1e-9
NULLSPACE_TOL = 1e-9


class JumpOperatorSet:
    """A list of jump operators with an adjoint-pairing witness.

    adjoint_perm[j] = index of the operator equal to A_j*, or None when the
    list is not closed under adjoints (allowed for diagnostics; generator
    builders require closure).
    """

    def __init__(self, ops):
        ops = [check_square(A) for A in ops]
        if not ops:
            raise ModelError("empty jump operator list")
        d = ops[0].shape[0]
        for A in ops:
            if A.shape[0] != d:
                raise ShapeError("jump operators of mixed dimension")
        self.ops = ops
        self.dim = d
        self.adjoint_perm = self._find_adjoint_permutation()

    def _find_adjoint_permutation(self):
        n = len(self.ops)
        perm = [None] * n
        used = [False] * n
        for j, A in enumerate(self.ops):
            Ad = dag(A)
            scale = max(1.0, np.abs(A).max())
            for k in range(n):
                if not used[k] and np.abs(self.ops[k] - Ad).max() <= 1e-10 * scale:
                    perm[j] = k
                    used[k] = True
                    break
            if perm[j] is None:
                return None
        return perm

    @property
    def adjoint_closed(self):
        return self.adjoint_perm is not None

    def __len__(self):
        return len(self.ops)

    def closed_under_adjoints(self):
        """Return a closed set: appends missing adjoints."""
        if self.adjoint_closed:
            return self
        ops = list(self.ops)
        for A in self.ops:
            Ad = dag(A)
            scale = max(1.0, np.abs(A).max())
            if not any(np.abs(B - Ad).max() <= 1e-10 * scale for B in ops):
                ops.append(Ad)
        return JumpOperatorSet(ops)


def extract_bohr_frequencies(jumps, sigma, rel_tol=1e-6):
    """Read omega_j off the grouped spectrum of sigma.

    With sigma = sum_k s_k P_k, a modular eigenvector has all its nonzero
    blocks P_k A P_l at one common ratio s_k/s_l = e^{-omega}; blocks at
    inconsistent ratios raise NotModularEigenvector.
    """
    s = as_full_rank_state(sigma)
    dec = s.spectrum
    vals = dec.eigenvalues
    projections = dec.projections
    out = []
    for j, A in enumerate(jumps.ops):
        norm = np.linalg.norm(A)
        if norm == 0.0:
            out.append(0.0)
            continue
        log_ratios = []
        weights = []
        for k, Pk in enumerate(projections):
            for l, Pl in enumerate(projections):
                w = np.linalg.norm(Pk @ A @ Pl)
                if w > 1e-12 * norm:
                    log_ratios.append(np.log(vals[k]) - np.log(vals[l]))
                    weights.append(w)
        if not log_ratios:
            out.append(0.0)
            continue
        log_ratios = np.array(log_ratios)
        spread = log_ratios.max() - log_ratios.min()
        if spread > rel_tol * max(1.0, np.abs(log_ratios).max()):
            raise NotModularEigenvector(
                f"jump {j}: block log-ratios spread {spread:.3e}")
        # e^{-omega} = s_k/s_l on nonzero blocks
        out.append(float(-log_ratios[int(np.argmax(weights))]))
    return np.array(out)


def _gkls_matrix(ops, freqs):
    d = ops[0].shape[0]
    L = np.zeros((d * d, d * d), dtype=complex)
    for A, w in zip(ops, freqs):
        Ad = dag(A)
        L += np.exp(-w / 2.0) * (superop_left(Ad @ A) - superop_sandwich(Ad, A))
        L += np.exp(w / 2.0) * (superop_right(A @ Ad) - superop_sandwich(A, Ad))
    return L


def build_heat_generator(jumps):
    """All Bohr frequencies zero; HS-self-adjoint PSD superoperator."""
    if not jumps.adjoint_closed:
        raise ModelError("heat generator needs an adjoint-closed jump set")
    return Superoperator(_gkls_matrix(jumps.ops, np.zeros(len(jumps))))


class LindbladModel:
    """Jump operators + frequencies + invariant state, with both generators.

    Superoperator-backed models (jumps is None) carry generators given
    directly as matrices; entropy-production and decay code paths work the
    same way, only the Fisher-form formula needs jumps.
    """

    def __init__(self, sigma, heisenberg, schrodinger, jumps=None,
                 bohr_freqs=None, label=""):
        self.sigma = as_full_rank_state(sigma)
        self.dim = self.sigma.dim
        self.heisenberg = heisenberg
        self.schrodinger = schrodinger
        self.jumps = jumps
        self.bohr_freqs = None if bohr_freqs is None else np.asarray(bohr_freqs, float)
        self.label = label
        self._fpa = {}

    @classmethod
    def from_jumps(cls, jumps, sigma, bohr_freqs=None, label="",
                   allow_nonclosed=False, validate=True):
        if not isinstance(jumps, JumpOperatorSet):
            jumps = JumpOperatorSet(jumps)
        s = as_full_rank_state(sigma)
        if jumps.dim != s.dim:
            raise ShapeError("jump dimension != state dimension")
        if not jumps.adjoint_closed and not allow_nonclosed:
            raise ModelError("jump set not closed under adjoints")
        freqs = extract_bohr_frequencies(jumps, s)
        if bohr_freqs is not None:
            given = np.asarray(bohr_freqs, float)
            if given.shape != freqs.shape or np.abs(given - freqs).max() > 1e-6:
                raise ModelError(
                    f"given Bohr frequencies disagree with the state "
                    f"(max dev {np.abs(given - freqs).max():.3e})")
            freqs = given
        model = cls(
            s,
            Superoperator(_gkls_matrix(jumps.ops, freqs)),
            None,
            jumps=jumps,
            bohr_freqs=freqs,
            label=label,
        )
        model.schrodinger = model.heisenberg.trace_dual()
        if validate:
            model._validate()
        return model

    @classmethod
    def from_superoperator(cls, heisenberg, sigma, label="", validate=True):
        if not isinstance(heisenberg, Superoperator):
            heisenberg = Superoperator(heisenberg)
        model = cls(sigma, heisenberg, heisenberg.trace_dual(), label=label)
        if validate:
            model._validate()
        return model

    def _validate(self):
        d = self.dim
        s = self.sigma
        if self.jumps is not None:
            # modular eigenvector relation at powers 1/2 and 1
            for p in (0.5, 1.0):
                sp = s.power(p)
                sm = s.power(-p)
                for A, w in zip(self.jumps.ops, self.bohr_freqs):
                    scale = max(1.0, np.abs(A).max())
                    dev = np.abs(sp @ A @ sm - np.exp(-w * p) * A).max()
                    if dev > 1e-8 * scale:
                        raise ModelError(f"modular relation violated ({dev:.3e})")
            if self.jumps.adjoint_closed:
                perm = self.jumps.adjoint_perm
                for j, k in enumerate(perm):
                    if abs(self.bohr_freqs[j] + self.bohr_freqs[k]) > 1e-10:
                        raise ModelError("adjoint pair frequencies do not negate")
        unital_dev = np.abs(self.heisenberg(np.eye(d))).max()
        if unital_dev > MODEL_TOL:
            raise ModelError(f"L(I) != 0 ({unital_dev:.3e})")
        stat_dev = np.abs(self.schrodinger(s.rho)).max()
        if stat_dev > MODEL_TOL:
            raise ModelError(f"L_*(sigma) != 0 ({stat_dev:.3e})")

    def fixed_point(self, seed=0):
        if seed not in self._fpa:
            self._fpa[seed] = fixed_point_algebra(self, seed=seed)
        return self._fpa[seed]

    def spectral_gap(self):
        """Smallest nonzero real part of spec(L)."""
        w = np.linalg.eigvals(self.heisenberg.matrix)
        re = np.sort(w.real)
        nz = re[re > 1e-9 * max(1.0, re.max())]
        if nz.size == 0:
            raise ModelError("generator has no decaying modes")
        return float(nz.min())


def check_detailed_balance(L, sigma, tol=1e-8):
    """KMS self-adjointness plus modular commutation, as matrix identities.

    <L(X),Y>_sigma - <X,L(Y)>_sigma over all matrix units equals the
    entrywise deviation of Gam L - L^dag Gam, Gam the vec-matrix of
    X -> sigma^{1/2} X sigma^{1/2}.
    """
    mat = L.matrix if isinstance(L, Superoperator) else np.asarray(L, dtype=complex)
    s = as_full_rank_state(sigma)
    G = gamma_map(s).matrix
    scale = max(1.0, np.abs(G @ mat).max())
    kms_dev = np.abs(G @ mat - dag(mat) @ G).max() / scale
    Dm = superop_sandwich(s.rho, np.linalg.inv(s.rho))
    mscale = max(1.0, np.abs(Dm @ mat).max())
    mod_dev = np.abs(Dm @ mat - mat @ Dm).max() / mscale
    return make_report(
        "detailed_balance",
        lhs=max(kms_dev, mod_dev),
        rhs=tol,
        abs_tol=0.0,
        rel_tol=0.0,
        witness={"kms_dev": float(kms_dev), "modular_dev": float(mod_dev)},
    )


def commutant_basis(ops, dim=None):
    """HS-orthonormal basis of {X : [A, X] = 0 for all A in ops}."""
    ops = [np.asarray(A, dtype=complex) for A in ops]
    d = dim if dim is not None else ops[0].shape[0]
    eye = np.eye(d)
    rows = []
    for A in ops:
        scale = max(1.0, np.abs(A).max())
        rows.append((np.kron(eye, A) - np.kron(A.T, eye)) / scale)
    M = np.vstack(rows) if rows else np.zeros((1, d * d))
    U, sv, Vh = np.linalg.svd(M)
    smax = sv.max() if sv.size else 0.0
    null_mask = sv <= NULLSPACE_TOL * max(smax, 1.0)
    # columns beyond len(sv) (if M had fewer rows than d^2) are all null
    cols = [Vh.conj().T[:, i] for i in range(len(sv)) if null_mask[i]]
    cols += [Vh.conj().T[:, i] for i in range(len(sv), d * d)]
    return [unvec(c) for c in cols]


def check_primitivity(jumps):
    """Primitive iff the commutant of the literal jump set is trivial."""
    ops = jumps.ops if isinstance(jumps, JumpOperatorSet) else list(jumps)
    return len(commutant_basis(ops)) == 1


class FixedPointBlock:
    """One summand B(H_i) (x) Id_{K_i} of the fixed-point algebra."""

    def __init__(self, n, m, isometry, tau, h, projection):
        self.n = n              # dim H_i (matrix factor)
        self.m = m              # dim K_i (multiplicity factor)
        self.isometry = isometry  # d x (n*m), V* V = Id, V V* = P_i
        self.tau = tau          # state on K_i carried by E_*
        self.h = h              # tr_{K_i} of the sigma block (trace = block weight)
        self.projection = projection


class FixedPointAlgebra:
    def __init__(self, blocks, E, E_star, basis, seed):
        self.blocks = blocks
        self.E = E if isinstance(E, Superoperator) else Superoperator(E)
        self.E_star = E_star if isinstance(E_star, Superoperator) else Superoperator(E_star)
        self.basis = basis
        self.seed = seed

    @property
    def is_trivial(self):
        return len(self.basis) == 1


def _orthonormalize_vecs(mats, tol=1e-10):
    # SVD, not plain QR: a zero or dependent leading column must not mask
    # later independent ones
    if not mats:
        return []
    V = np.column_stack([vec(M) for M in mats])
    U, sv, _ = np.linalg.svd(V, full_matrices=False)
    rank = int((sv > tol * max(1.0, sv.max())).sum()) if sv.size else 0
    return [unvec(U[:, i]) for i in range(rank)]


def _center_basis(F_basis):
    """Basis of the center of the algebra spanned by F_basis."""
    n = len(F_basis)
    rows = []
    for Fl in F_basis:
        block = np.column_stack(
            [vec(Fk @ Fl - Fl @ Fk) for Fk in F_basis])
        rows.append(block)
    M = np.vstack(rows)
    U, sv, Vh = np.linalg.svd(M)
    smax = sv.max() if sv.size else 0.0
    coeffs = [Vh.conj().T[:, i] for i in range(len(sv))
              if sv[i] <= NULLSPACE_TOL * max(smax, 1.0)]
    coeffs += [Vh.conj().T[:, i] for i in range(len(sv), n)]
    out = []
    for c in coeffs:
        Z = sum(ci * Fi for ci, Fi in zip(c, F_basis))
        out.append(Z)
    return out


def _grouped_eigh(M, tol_factor=1e-8):
    w, U = np.linalg.eigh(M)
    tol = tol_factor * max(1.0, np.abs(w).max())
    groups = []
    start = 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[i] - w[i - 1] > tol:
            groups.append((start, i))
            start = i
    return w, U, groups


def fixed_point_algebra(model_or_jumps, sigma=None, seed=0, max_tries=8):
    """Block decomposition of the commutant of {A_j, A_j*}.

    Randomized probes (central element, then a generic element per block)
    expose the decomposition F = (+)_i B(H_i) (x) Id_{K_i}; the derived
    conditional expectation E_* compresses a state blockwise to
    tr_K(V* rho V) (x) tau_i, where tau_i is the normalized K-marginal of
    sigma's block. All probes draw from a recorded seed.
    """
    if isinstance(model_or_jumps, LindbladModel):
        model = model_or_jumps
        s = model.sigma
        if model.jumps is not None:
            ops = list(model.jumps.ops) + [dag(A) for A in model.jumps.ops]
        else:
            # superoperator-backed: kernel projection route only
            return _fixed_point_from_kernel(model, seed)
    else:
        jumps = model_or_jumps
        ops = list(jumps.ops) + [dag(A) for A in jumps.ops]
        s = as_full_rank_state(sigma)
    d = s.dim
    F_basis = _orthonormalize_vecs(commutant_basis(ops, dim=d))
    rng = np.random.default_rng([seed, 0x5eed])
    center = _center_basis(F_basis)
    n_blocks = len(center)
    herm_center = _orthonormalize_vecs(
        [0.5 * (Z + dag(Z)) for Z in center] + [0.5j * (Z - dag(Z)) for Z in center])
    projections = None
    for _ in range(max_tries):
        Zr = sum(rng.standard_normal() * H for H in herm_center)
        Zr = 0.5 * (Zr + dag(Zr))
        w, U, groups = _grouped_eigh(Zr)
        if len(groups) == n_blocks:
            projections = []
            for a, b in groups:
                V = U[:, a:b]
                projections.append(V @ V.conj().T)
            break
    if projections is None:
        raise ModelError("could not separate central blocks")
    blocks = []
    for P in projections:
        di = int(round(np.trace(P).real))
        wP, UP = np.linalg.eigh(P)
        Q = UP[:, wP > 0.5]
        compressed = _orthonormalize_vecs([dag(Q) @ F @ Q for F in F_basis])
        ni = int(round(np.sqrt(len(compressed))))
        if ni * ni != len(compressed) or di % ni != 0:
            raise ModelError("inconsistent block dimensions")
        mi = di // ni
        Vb = _block_isometry(compressed, di, ni, mi, rng, max_tries)
        Vfull = Q @ Vb
        sig_block = dag(Vfull) @ s.rho @ Vfull
        h = partial_trace(sig_block, (ni, mi), "first")
        tau = partial_trace(sig_block, (ni, mi), "second")
        tr_blk = np.trace(sig_block).real
        tau = tau / tr_blk
        if np.abs(sig_block - tensor(h, tau)).max() > 1e-8:
            raise ModelError("sigma does not factorize over a fixed block")
        blocks.append(FixedPointBlock(ni, mi, Vfull, tau, h, P))
    E_star_mat = _expectation_star_matrix(blocks, d)
    E_mat = superop_trace_dual(E_star_mat)
    return FixedPointAlgebra(blocks, Superoperator(E_mat),
                             Superoperator(E_star_mat), F_basis, seed)


def _block_isometry(compressed, di, ni, mi, rng, max_tries):
    """Coordinates on a block: columns ordered (H index slow, K index fast)."""
    if ni == 1:
        return np.eye(di)
    for _ in range(max_tries):
        Mr = sum(rng.standard_normal() * F for F in compressed)
        Mr = 0.5 * (Mr + dag(Mr))
        w, U, groups = _grouped_eigh(Mr)
        if len(groups) != ni or any(b - a != mi for a, b in groups):
            continue
        cluster = [U[:, a:b] for a, b in groups]
        S = sum(rng.standard_normal() * F for F in compressed)
        cols = []
        ok = True
        for a in range(ni):
            W = dag(cluster[a]) @ S @ cluster[0]
            c = np.sqrt(np.trace(dag(W) @ W).real / mi)
            if c < 1e-8:
                ok = False
                break
            Ua = W / c
            if np.abs(dag(Ua) @ Ua - np.eye(mi)).max() > 1e-8:
                ok = False
                break
            cols.append(cluster[a] @ Ua)
        if ok:
            V = np.column_stack(cols)
            if np.abs(dag(V) @ V - np.eye(di)).max() < 1e-8:
                return V
    raise ModelError("block isometry construction failed")


def _expectation_star_matrix(blocks, d):
    E = np.zeros((d * d, d * d), dtype=complex)
    unit = np.zeros((d, d), dtype=complex)
    for i in range(d):
        for j in range(d):
            unit[i, j] = 1.0
            out = np.zeros((d, d), dtype=complex)
            for blk in blocks:
                V = blk.isometry
                inner = dag(V) @ unit @ V
                a = partial_trace(inner, (blk.n, blk.m), "first")
                out += V @ tensor(a, blk.tau) @ dag(V)
            E[:, j * d + i] = vec(out)
            unit[i, j] = 0.0
    return E


def _fixed_point_from_kernel(model, seed):
    """Conditional expectation as the KMS-orthogonal kernel projection."""
    s = model.sigma
    G = gamma_power(s, 0.5).matrix
    Gi = np.linalg.inv(G)
    Mh = G @ model.heisenberg.matrix @ Gi
    Mh = 0.5 * (Mh + dag(Mh))
    w, U = np.linalg.eigh(Mh)
    mask = np.abs(w) <= 1e-9 * max(1.0, np.abs(w).max())
    V = U[:, mask]
    Pi0 = V @ dag(V)
    E_mat = Gi @ Pi0 @ G
    E_star = superop_trace_dual(E_mat)
    return FixedPointAlgebra([], Superoperator(E_mat), Superoperator(E_star),
                             [np.eye(s.dim)], seed)


def conditional_expectation_kms(model):
    """Independent route to E: project onto ker(L) in the KMS geometry."""
    return _fixed_point_from_kernel(model, seed=0).E


def semigroup_superoperator(L, t):
    """expm(-t L) as a dense matrix (scaling and squaring)."""
    mat = L.matrix if isinstance(L, Superoperator) else np.asarray(L, dtype=complex)
    return scipy.linalg.expm(-t * mat)


def evolve(L_star, rho, t, tol=1e-9):
    """Apply e^{-t L_*}; re-Hermitize, renormalize small trace drift."""
    if t < 0:
        raise EvolutionError("negative time")
    mat = L_star.matrix if isinstance(L_star, Superoperator) else np.asarray(L_star, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    out = unvec(scipy.linalg.expm(-t * mat) @ vec(rho))
    out = 0.5 * (out + dag(out))
    tr_in = np.trace(rho).real
    drift = abs(np.trace(out).real - tr_in)
    if drift > tol * max(1.0, abs(tr_in)):
        raise EvolutionError(f"trace drift {drift:.3e}")
    if tr_in != 0.0:
        out *= tr_in / np.trace(out).real
    return out


def stabilizing_generator(sigma, label="stabilizing"):
    """L_*(rho) = rho - sigma tr(rho); Heisenberg L(X) = X - tr(sigma X) I.

    GNS-symmetric for any full-rank sigma; the simplest generator whose
    MLSI ratio is at least 1 on every state.
    """
    s = as_full_rank_state(sigma)
    d = s.dim
    Lh = np.eye(d * d) - np.outer(vec(np.eye(d)), vec(s.rho).conj())
    return LindbladModel.from_superoperator(Superoperator(Lh), s, label=label)


def depolarizing_generator(d, label="depolarizing"):
    """Stabilizing generator at sigma = I/d."""
    return stabilizing_generator(np.eye(d) / d, label=label)


def complete_matrix_unit_generator(m, label="complete-units"):
    """All m^2 matrix units (diagonal included) at sigma = I/m.

    Equals 2m (id - tr(.)/m I) as a superoperator; its entropy-production
    to entropy ratio is at least 2m on every state.
    """
    units = []
    for r in range(m):
        for s in range(m):
            E = np.zeros((m, m), dtype=complex)
            E[r, s] = 1.0
            units.append(E)
    return LindbladModel.from_jumps(JumpOperatorSet(units), np.eye(m) / m,
                                    label=label)
