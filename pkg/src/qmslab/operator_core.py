"""Dense complex operator primitives.

Everything downstream works with plain numpy arrays for operators and with
(d*d, d*d) matrices for superoperators acting on column-stacked vectorizations.
The vec convention is fixed project-wide: vec(X) = X.reshape(-1, order="F"),
so vec(A X B) = kron(B.T, A) vec(X).
"""

import numpy as np

# global tolerances; rank_floor defines "numerically zero" eigenvalues for
# support computations, group_tol_factor scales the eigenvalue grouping
HERM_TOL = 1e-12
RANK_FLOOR = 1e-10
GROUP_TOL_FACTOR = 1e-8
SUPPORT_TOL = 1e-8
REG_EPS = 1e-9

from .errors import (
    ShapeError,
    HermitianViolation,
    DomainViolation,
    SupportError,
    RankError,
)


def check_square(A):
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"expected square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A.real)) or not np.all(np.isfinite(A.imag)):
        raise DomainViolation("matrix has non-finite entries")
    return A


def check_hermitian(A, tol=HERM_TOL):
    """Validate Hermiticity in max-entry norm and return the symmetrized matrix."""
    A = check_square(A)
    dev = np.abs(A - A.conj().T).max()
    scale = max(1.0, np.abs(A).max())
    if dev > tol * scale:
        raise HermitianViolation(f"deviation from Hermiticity {dev:.3e}")
    return 0.5 * (A + A.conj().T)


def check_density(rho, tol=1e-12):
    """Validate a density matrix: Hermitian, PSD, unit trace."""
    rho = check_hermitian(rho, tol=max(tol, HERM_TOL))
    w = np.linalg.eigvalsh(rho)
    if w.min() < -tol:
        raise DomainViolation(f"negative eigenvalue {w.min():.3e}")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > max(tol, 1e-12):
        raise DomainViolation(f"trace {tr} != 1")
    return rho


def dag(A):
    return np.asarray(A).conj().T


def vec(X):
    """Column-stacking vectorization."""
    return np.asarray(X, dtype=complex).reshape(-1, order="F")


def unvec(v):
    v = np.asarray(v, dtype=complex)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ShapeError(f"vector of length {v.size} is not a square matrix")
    return v.reshape(d, d, order="F")


def superop_sandwich(A, B):
    """Matrix of X -> A X B in the vec convention."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    return np.kron(B.T, A)


def superop_left(A):
    d = A.shape[0]
    return superop_sandwich(A, np.eye(d))


def superop_right(B):
    d = B.shape[0]
    return superop_sandwich(np.eye(d), B)


def transpose_permutation(d):
    """Permutation matrix T with T vec(X) = vec(X.T)."""
    T = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            T[i * d + j, j * d + i] = 1.0
    return T


def superop_trace_dual(M):
    """Trace dual of a superoperator: tr(M_*(rho) X) = tr(rho M(X)).

    In the vec convention the dual is T M.T T with T the transpose permutation.
    """
    M = np.asarray(M, dtype=complex)
    d = int(round(np.sqrt(M.shape[0])))
    T = transpose_permutation(d)
    return T @ M.T @ T


def superop_hs_adjoint(M):
    """Adjoint w.r.t. the Hilbert-Schmidt inner product <A,B> = tr(A* B)."""
    return np.asarray(M, dtype=complex).conj().T


def apply_superop(M, X):
    return unvec(np.asarray(M, dtype=complex) @ vec(X))


class Superoperator:
    """A linear map on d x d matrices, stored as its d^2 x d^2 vec-matrix."""

    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=complex)
        d = int(round(np.sqrt(matrix.shape[0])))
        if matrix.shape != (d * d, d * d):
            raise ShapeError(f"superoperator matrix shape {matrix.shape}")
        self.dim = d
        self.matrix = matrix

    def __call__(self, X):
        return apply_superop(self.matrix, X)

    def compose(self, other):
        return Superoperator(self.matrix @ other.matrix)

    def trace_dual(self):
        return Superoperator(superop_trace_dual(self.matrix))

    @classmethod
    def identity(cls, d):
        return cls(np.eye(d * d))


class SpectralDecomposition:
    """Grouped eigendecomposition A = sum_k lam_k P_k with distinct lam_k."""

    def __init__(self, eigenvalues, projections, group_tol):
        self.eigenvalues = np.asarray(eigenvalues, dtype=float)
        self.projections = [np.asarray(P, dtype=complex) for P in projections]
        self.group_tol = float(group_tol)

    @property
    def dim(self):
        return self.projections[0].shape[0]

    def reconstruct(self):
        A = np.zeros_like(self.projections[0])
        for lam, P in zip(self.eigenvalues, self.projections):
            A = A + lam * P
        return A

    def apply_function(self, f):
        out = np.zeros_like(self.projections[0])
        for lam, P in zip(self.eigenvalues, self.projections):
            out = out + complex(f(lam)) * P
        return out


def spectral_decompose(A, group_tol=None):
    """Eigendecomposition with eigenvalues grouped within group_tol.

    Raw eigenvalues closer than group_tol share one projection; the defaults
    tie the tolerance to the spectral radius so degenerate spectra written
    with rounding noise still group correctly.
    """
    A = check_hermitian(A, tol=1e-10)
    w, U = np.linalg.eigh(A)
    if group_tol is None:
        group_tol = GROUP_TOL_FACTOR * max(1.0, np.abs(w).max())
    if group_tol <= 0:
        raise DomainViolation("group_tol must be positive")
    groups = []
    start = 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[i] - w[i - 1] > group_tol:
            groups.append((start, i))
            start = i
    eigenvalues = []
    projections = []
    for a, b in groups:
        eigenvalues.append(w[a:b].mean())
        V = U[:, a:b]
        projections.append(V @ V.conj().T)
    return SpectralDecomposition(eigenvalues, projections, group_tol)


def matrix_function(A, f, group_tol=None):
    """f(A) through the grouped spectral decomposition.

    Raises DomainViolation when f is undefined on an eigenvalue (non-finite
    or raising).
    """
    dec = A if isinstance(A, SpectralDecomposition) else spectral_decompose(A, group_tol)
    vals = []
    for lam in dec.eigenvalues:
        try:
            y = f(lam)
        except (ValueError, ZeroDivisionError) as exc:
            raise DomainViolation(f"function undefined at eigenvalue {lam}: {exc}")
        if not np.isfinite(y):
            raise DomainViolation(f"function not finite at eigenvalue {lam}")
        vals.append(y)
    out = np.zeros_like(dec.projections[0])
    for y, P in zip(vals, dec.projections):
        out = out + complex(y) * P
    return out


def _eigh_psd(A, floor=0.0):
    w, U = np.linalg.eigh(check_hermitian(A, tol=1e-9))
    return np.maximum(w, floor), U


def sqrtm_psd(A):
    w, U = _eigh_psd(A, floor=0.0)
    return (U * np.sqrt(np.maximum(w, 0.0))) @ U.conj().T


def powm_psd(A, p):
    w, U = _eigh_psd(A)
    if p < 0 and w.min() <= RANK_FLOOR * max(1.0, w.max()):
        raise RankError(f"negative power of a rank-deficient matrix (min eig {w.min():.3e})")
    return (U * np.power(w, p)) @ U.conj().T


def logm_psd(A):
    """Matrix log on the support; zero eigenvalues map to 0 (used only where
    the support was already checked)."""
    w, U = _eigh_psd(A)
    floor = RANK_FLOOR * max(1.0, w.max())
    lw = np.where(w > floor, np.log(np.maximum(w, floor)), 0.0)
    return (U * lw) @ U.conj().T


class FullRankState:
    """Full-rank density operator with its cached spectral data."""

    def __init__(self, rho, group_tol=None):
        rho = check_hermitian(rho, tol=1e-10)
        w, U = np.linalg.eigh(rho)
        if abs(np.trace(rho).real - 1.0) > 1e-10:
            raise DomainViolation(f"trace {np.trace(rho).real} != 1")
        if w.min() <= RANK_FLOOR:
            raise RankError(f"state not full rank (min eigenvalue {w.min():.3e})")
        self.rho = rho
        self.dim = rho.shape[0]
        self.eigenvalues = w
        self.eigenvectors = U
        self.spectrum = spectral_decompose(rho, group_tol)

    def power(self, p):
        w, U = self.eigenvalues, self.eigenvectors
        return (U * np.power(w, p)) @ U.conj().T

    def log(self):
        w, U = self.eigenvalues, self.eigenvectors
        return (U * np.log(w)) @ U.conj().T


def as_full_rank_state(sigma, group_tol=None):
    if isinstance(sigma, FullRankState):
        return sigma
    return FullRankState(sigma, group_tol)


def tensor(*ops):
    """Kronecker product; the first factor carries the slow index."""
    out = np.asarray(ops[0], dtype=complex)
    for B in ops[1:]:
        out = np.kron(out, np.asarray(B, dtype=complex))
    return out


def partial_trace(X, dims, keep):
    """Partial trace of X on H_A (x) H_B with dims = (dA, dB).

    keep is "first" or "second"; the other factor is traced out.
    """
    X = np.asarray(X, dtype=complex)
    dA, dB = dims
    if X.shape != (dA * dB, dA * dB):
        raise ShapeError(f"shape {X.shape} incompatible with dims {dims}")
    X4 = X.reshape(dA, dB, dA, dB)
    if keep == "first":
        return np.einsum("ikjk->ij", X4)
    if keep == "second":
        return np.einsum("kikj->ij", X4)
    raise ValueError("keep must be 'first' or 'second'")


def _support_projection(w, U, floor):
    mask = w > floor
    V = U[:, mask]
    return V @ V.conj().T, mask


def lindblad_relative_entropy(X, Y, allow_infinite=False):
    """D_Lin(X||Y) = tr(X(ln X - ln Y)) + tr(Y) - tr(X) for PSD X, Y.

    Eigenvalues below rank_floor count as exact zeros (0 ln 0 = 0). When the
    support of X sticks out of the support of Y by more than support_tol in
    trace mass, the value is +inf; SupportError unless allow_infinite.
    """
    X = check_hermitian(X, tol=1e-9)
    Y = check_hermitian(Y, tol=1e-9)
    wx, Ux = np.linalg.eigh(X)
    wy, Uy = np.linalg.eigh(Y)
    scale_x = max(1.0, wx.max()) if wx.size else 1.0
    scale_y = max(1.0, wy.max()) if wy.size else 1.0
    if wx.min() < -1e-10 * scale_x or wy.min() < -1e-10 * scale_y:
        raise DomainViolation("inputs must be positive semidefinite")
    floor_x = RANK_FLOOR * scale_x
    floor_y = RANK_FLOOR * scale_y
    Py, masky = _support_projection(wy, Uy, floor_y)
    # trace mass of X outside supp(Y)
    leak = np.trace(X - Py @ X @ Py).real
    if leak > SUPPORT_TOL * max(1.0, np.trace(X).real):
        if allow_infinite:
            return np.inf
        raise SupportError(f"support violation, leaked mass {leak:.3e}")
    lwx = np.where(wx > floor_x, np.log(np.maximum(wx, floor_x)), 0.0)
    lwy = np.where(masky, np.log(np.maximum(wy, floor_y)), 0.0)
    lnX = (Ux * lwx) @ Ux.conj().T
    lnY = (Uy * lwy) @ Uy.conj().T
    val = np.trace(X @ (lnX - lnY)).real + np.trace(Y).real - np.trace(X).real
    return val


def relative_entropy(rho, sigma, allow_infinite=False):
    """D(rho||sigma) for density operators; SupportError signals +inf."""
    rho = check_density(rho, tol=1e-9)
    sigma = check_hermitian(sigma, tol=1e-9)
    return lindblad_relative_entropy(rho, sigma, allow_infinite=allow_infinite) \
        - np.trace(sigma).real + 1.0


def regularize(rho, sigma, eps=REG_EPS):
    """Full-rank regularization (1-eps) rho + eps sigma used before EP/D."""
    return (1.0 - eps) * np.asarray(rho, dtype=complex) + eps * np.asarray(sigma, dtype=complex)


def gamma_map(sigma):
    """Superoperator of X -> sigma^{1/2} X sigma^{1/2}."""
    s = as_full_rank_state(sigma)
    h = s.power(0.5)
    return Superoperator(superop_sandwich(h, h))


def gamma_inverse(sigma):
    s = as_full_rank_state(sigma)
    h = s.power(-0.5)
    return Superoperator(superop_sandwich(h, h))


def gamma_power(sigma, p):
    """Superoperator of X -> sigma^{p/2} X sigma^{p/2} (p = 1 is gamma_map)."""
    s = as_full_rank_state(sigma)
    h = s.power(0.5 * p)
    return Superoperator(superop_sandwich(h, h))


def kms_inner(sigma, A, B):
    """KMS inner product tr(sigma^{1/2} A* sigma^{1/2} B).

    Conjugate-linear in the first argument.
    """
    s = as_full_rank_state(sigma)
    h = s.power(0.5)
    return np.trace(h @ dag(A) @ h @ np.asarray(B, dtype=complex))


def choi_matrix(M):
    """Choi matrix of a superoperator via its action on matrix units.

    C = sum_{ij} |i><j| (x) M(|i><j|) with the first factor slow, matching
    tensor(). CP iff C is PSD.
    """
    if isinstance(M, Superoperator):
        d, mat = M.dim, M.matrix
    else:
        mat = np.asarray(M, dtype=complex)
        d = int(round(np.sqrt(mat.shape[0])))
    C = np.zeros((d * d, d * d), dtype=complex)
    E = np.zeros((d, d), dtype=complex)
    for i in range(d):
        for j in range(d):
            E[i, j] = 1.0
            C += np.kron(E, apply_superop(mat, E))
            E[i, j] = 0.0
    return C


def is_cp(M, tol=1e-10):
    C = choi_matrix(M)
    w = np.linalg.eigvalsh(0.5 * (C + C.conj().T))
    herm_dev = np.abs(C - C.conj().T).max()
    return herm_dev < 1e-9 * max(1.0, np.abs(C).max()) and w.min() >= -tol * max(1.0, w.max())


def is_tp(M, tol=1e-10):
    """Trace preservation: the Hilbert-Schmidt adjoint applied to I gives I."""
    mat = M.matrix if isinstance(M, Superoperator) else np.asarray(M, dtype=complex)
    d = int(round(np.sqrt(mat.shape[0])))
    out = apply_superop(superop_hs_adjoint(mat), np.eye(d))
    return np.abs(out - np.eye(d)).max() <= tol


def is_unital(M, tol=1e-10):
    mat = M.matrix if isinstance(M, Superoperator) else np.asarray(M, dtype=complex)
    d = int(round(np.sqrt(mat.shape[0])))
    out = apply_superop(mat, np.eye(d))
    return np.abs(out - np.eye(d)).max() <= tol


def is_trace_nonincreasing(M, tol=1e-10):
    """Phi*(I) <= I for the Hilbert-Schmidt adjoint."""
    mat = M.matrix if isinstance(M, Superoperator) else np.asarray(M, dtype=complex)
    d = int(round(np.sqrt(mat.shape[0])))
    out = apply_superop(superop_hs_adjoint(mat), np.eye(d))
    w = np.linalg.eigvalsh(check_hermitian(out, tol=1e-8))
    return w.max() <= 1.0 + tol
