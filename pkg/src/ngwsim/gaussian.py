"""Gaussian phase-space linear algebra.

Everything in this package uses the quadrature ordering (x_A, p_A, x_B, p_B)
with [x, p] = 2i, so the vacuum covariance matrix is the identity.
"""

import numpy as np

from .errors import UnphysicalCovarianceError

# symplectic form: [xi_i, xi_j] = 2i * OMEGA_ij
OMEGA = np.array([
    [0.0, 1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0, 0.0],
])


def gaussian_moment(indices, sigma):
    """Isserlis expectation E[xi_{i1} ... xi_{ik}] for a centered Gaussian.

    Parameters
    ----------
    indices : sequence of int
        Coordinate indices, repeated according to the monomial powers.
    sigma : ndarray
        Covariance matrix of the Gaussian.
    """
    n = len(indices)
    if n == 0:
        return 1.0
    if n % 2 == 1:
        return 0.0
    head, rest = indices[0], list(indices[1:])
    total = 0.0
    for k in range(len(rest)):
        total += sigma[head, rest[k]] * gaussian_moment(rest[:k] + rest[k + 1:], sigma)
    return total


def poly_gauss_moment(indices, sigma, poly_q, poly0):
    """Central moment E[xi_{i1}...xi_{ik}] under the normalized density
    (xi^T Q xi + q0) G_sigma(xi), assuming Tr(Q sigma) + q0 = 1."""
    total = poly0 * gaussian_moment(list(indices), sigma)
    dim = sigma.shape[0]
    for a in range(dim):
        for b in range(a, dim):
            q = poly_q[a, b]
            if q == 0.0:
                continue
            w = q if a == b else 2.0 * q
            total += w * gaussian_moment(list(indices) + [a, b], sigma)
    return total


def local_rotation(phi_a, phi_b):
    """Symplectic map sending x_I to the rotated quadrature cos(phi) x + sin(phi) p."""
    out = np.zeros((4, 4))
    for off, phi in ((0, phi_a), (2, phi_b)):
        c, s = np.cos(phi), np.sin(phi)
        out[off, off] = c
        out[off, off + 1] = s
        out[off + 1, off] = -s
        out[off + 1, off + 1] = c
    return out


def mode_mixing(chi):
    """Two-mode mixing (beam-splitter) acting identically on x and p pairs.

    chi = -pi/4 maps x_A to (x_A - x_B)/sqrt(2) and x_B to (x_A + x_B)/sqrt(2).
    """
    c, s = np.cos(chi), np.sin(chi)
    out = np.zeros((4, 4))
    out[0, 0] = out[1, 1] = c
    out[0, 2] = out[1, 3] = s
    out[2, 0] = out[3, 1] = -s
    out[2, 2] = out[3, 3] = c
    return out


def symplectic_eigenvalues(cov):
    """Symplectic eigenvalues of a 4x4 covariance matrix (vacuum -> [1, 1])."""
    ev = np.linalg.eigvals(1j * OMEGA @ cov)
    nu = np.sort(np.abs(ev.real))
    return nu[::2].copy()


def check_physical(cov, tol=1e-9):
    """Raise UnphysicalCovarianceError unless cov is symmetric, positive and
    satisfies the uncertainty bound cov + i*OMEGA >= 0."""
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (4, 4) or not np.allclose(cov, cov.T, atol=1e-10):
        raise UnphysicalCovarianceError("covariance must be a symmetric 4x4 matrix")
    if np.linalg.eigvalsh(cov).min() <= 0:
        raise UnphysicalCovarianceError("covariance is not positive-definite")
    nu = symplectic_eigenvalues(cov)
    if nu.min() < 1.0 - tol:
        raise UnphysicalCovarianceError(
            f"uncertainty bound violated: min symplectic eigenvalue {nu.min():.6g} < 1"
        )
    return nu


def marginal_params(sigma, poly_q, poly0, keep):
    """Marginalize a centered polynomial-times-Gaussian density in closed form.

    Integrating out the complement of ``keep`` maps
    (xi^T Q xi + q0) G_sigma onto (y^T Q' y + c') G_sigma' with the same total
    integral. Returns (sigma', Q', c').
    """
    dim = sigma.shape[0]
    keep = list(keep)
    drop = [i for i in range(dim) if i not in keep]
    syy = sigma[np.ix_(keep, keep)]
    if not drop:
        return syy, poly_q[np.ix_(keep, keep)], poly0
    swy = sigma[np.ix_(drop, keep)]
    sww = sigma[np.ix_(drop, drop)]
    syy_inv = np.linalg.inv(syy)
    reg = swy @ syy_inv                      # conditional mean coefficient
    cond = sww - swy @ syy_inv @ swy.T       # conditional covariance
    qyy = poly_q[np.ix_(keep, keep)]
    qww = poly_q[np.ix_(drop, drop)]
    qyw = poly_q[np.ix_(keep, drop)]
    q_out = qyy + qyw @ reg + reg.T @ qyw.T + reg.T @ qww @ reg
    c_out = poly0 + np.trace(qww @ cond)
    return syy, q_out, c_out


def convolve_params(sigma, poly_q, poly0, noise_cov):
    """Convolve (xi^T Q xi + q0) G_sigma with a centered Gaussian of covariance
    noise_cov. The total integral is preserved exactly. Returns (sigma', Q', c')."""
    total = sigma + noise_cov
    k = sigma @ np.linalg.inv(total)
    q_out = k.T @ poly_q @ k
    c_out = poly0 + np.trace(poly_q @ k @ noise_cov)
    return total, q_out, c_out
