"""Random states, operators and unitaries with reproducible seeding.

Sample index i under base seed s always uses np.random.default_rng([s, i]),
so results do not depend on how a suite is split across workers.
"""

import numpy as np

from .operator_core import dag


def child_rng(base_seed, index):
    return np.random.default_rng([int(base_seed), int(index)])


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_hermitian(rng, d, scale=1.0):
    G = random_complex(rng, (d, d))
    return scale * 0.5 * (G + dag(G))


def random_unitary(rng, d):
    """Haar-distributed unitary via QR with phase fix."""
    G = random_complex(rng, (d, d)) / np.sqrt(2.0)
    Q, R = np.linalg.qr(G)
    ph = np.diag(R).copy()
    ph /= np.abs(ph)
    return Q * ph


def random_density(rng, d, rank=None):
    """Wishart-style density: G G* normalized, G of shape (d, rank)."""
    if rank is None:
        rank = d
    G = random_complex(rng, (d, rank))
    rho = G @ dag(G)
    return rho / np.trace(rho).real


def random_pure(rng, d):
    psi = random_complex(rng, (d,))
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def boundary_biased_density(rng, d):
    """(1-eps)|psi><psi| + eps I/d, eps log-uniform in [1e-6, 1e-1].

    Entropy-ratio infima concentrate near the boundary of the state space,
    so half of every sampling suite lives there.
    """
    eps = np.exp(rng.uniform(np.log(1e-6), np.log(1e-1)))
    return (1.0 - eps) * random_pure(rng, d) + eps * np.eye(d) / d


def random_state_suite(rng, d, n):
    """n states, alternating Wishart-smooth and boundary-biased draws."""
    out = []
    for i in range(n):
        if i % 2 == 0:
            out.append(random_density(rng, d))
        else:
            out.append(boundary_biased_density(rng, d))
    return out


def random_full_rank_density(rng, d, floor=1e-6):
    rho = random_density(rng, d)
    return (1.0 - floor) * rho + floor * np.eye(d) / d


def random_positive_definite(rng, d, scale=1.0, floor=1e-6):
    """PSD operator bounded away from singular, not trace normalized."""
    G = random_complex(rng, (d, d))
    X = G @ dag(G)
    return scale * (X / np.abs(np.linalg.eigvalsh(X)).max() + floor * np.eye(d))


def random_probability_vector(rng, d, floor=1e-4):
    p = rng.dirichlet(np.ones(d))
    p = (1.0 - d * floor) * p + floor
    return p / p.sum()
