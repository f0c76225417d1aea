"""Utility functions for tests: independent reference implementations."""

import numpy as np


def random_pd(dim: int, rng: np.random.Generator, complex_valued=True) -> np.ndarray:
    """Return a random Hermitian positive definite matrix."""
    a = rng.standard_normal((dim, dim))
    if complex_valued:
        a = a + 1j * rng.standard_normal((dim, dim))
    return a @ a.conj().T + dim * np.eye(dim)


def naive_schur(r_r, r_rs, r_s) -> np.ndarray:
    """Evaluate R_r - R_rs R_s^-1 R_sr entry by entry with an explicit inverse."""
    r_r, r_rs, r_s = (np.atleast_2d(np.asarray(obj)) for obj in (r_r, r_rs, r_s))
    inv = np.linalg.inv(r_s)
    r_sr = r_rs.conj().T
    out = np.array(r_r, dtype=np.result_type(r_r, r_rs, r_s, float))
    n_r, n_s = r_rs.shape
    for i in range(n_r):
        for j in range(n_r):
            total = 0.0
            for a in range(n_s):
                for b in range(n_s):
                    total += r_rs[i, a] * inv[a, b] * r_sr[b, j]
            out[i, j] -= total
    return out


def logdet2(matrix: np.ndarray) -> float:
    sign, value = np.linalg.slogdet(matrix)
    assert sign.real > 0
    return float(value / np.log(2.0))


def brute_force_smi(x, r_h, m_s, sigma2, r_h_cond=None) -> float:
    """Sensing MI from the full-dimension echo covariance ``Xk R Xk^H + sigma2 I``."""
    x = np.asarray(x)
    big_x = np.kron(x, np.eye(m_s))
    dim = big_x.shape[0]
    full = logdet2(np.eye(dim) + big_x @ r_h @ big_x.conj().T / sigma2)
    if r_h_cond is None:
        return full
    return full - logdet2(np.eye(dim) + big_x @ r_h_cond @ big_x.conj().T / sigma2)
