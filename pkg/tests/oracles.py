"""Independent reference computations used by the tests.

Nothing here imports the package; each function recomputes a quantity from
first principles so that tests compare two separate implementations.
"""

import math

import numpy as np


def jacobi_eigenvalues(a, tol=1e-14, max_sweeps=100):
    """Cyclic Jacobi rotations on a symmetric matrix; eigenvalues sorted descending."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    for _ in range(max_sweeps):
        off = math.sqrt(sum(a[i, j] ** 2 for i in range(n) for j in range(n) if i != j))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
    return sorted(np.diag(a), reverse=True)


def ring_circulant_eigenvalues(diag, off, n):
    """Eigenvalues of the symmetric circulant ring matrix, sorted descending."""
    return sorted((diag + 2 * off * math.cos(2 * math.pi * k / n) for k in range(n)), reverse=True)


EXAMPLE_LAMBDA2 = 0.34 + 0.66 * math.cos(2 * math.pi / 5)
EXAMPLE_LAMBDAN = 0.34 + 0.66 * math.cos(4 * math.pi / 5)


def alpha_max_g(lam_n, omega, gamma, r1=1.0, r2=1.0, b_v=0.0):
    bm = b_v + r2 * r2
    return (r1 - (1 - omega) * (1 - lam_n) * bm) / (omega * bm * gamma)


def alpha_max_i(lam_n, tau, gamma, r1=1.0, r2=1.0, b_v=0.0):
    bm = b_v + r2 * r2
    return (r1 - (1 - lam_n**tau) * bm) / (gamma * bm)


def c1_c2(lam2, lam_n, omega, alpha, h_m, gamma, r1, b):
    c1 = 1 - (omega * alpha * h_m + (1 - omega) / 2 * (1 - lam2)) * r1
    c2 = (alpha**2 * gamma * omega + alpha * (1 - omega) * (1 - lam_n)) * b / 2
    return c1, c2


def c3_c4(lam2, lam_n, tau, alpha, h_m, gamma, r1, b):
    c3 = 1 - (alpha * h_m + 0.5 * (1 - lam2**tau)) * r1
    c4 = (alpha**2 * gamma + alpha * (1 - lam_n**tau)) * b / 2
    return c3, c4


def radius_g(lam2, lam_n, omega, alpha, h_m, gamma, r1, b):
    num = b * (omega * alpha * gamma + (1 - omega) * (1 - lam_n))
    den = 2 * r1 * (omega * h_m + (1 - omega) * (1 - lam2) / alpha)
    return num / den


def radius_i(lam2, lam_n, tau, alpha, h_m, gamma, r1, b):
    return b * (alpha * gamma + 1 - lam_n**tau) / (2 * r1 * (h_m + (1 - lam2**tau) / alpha))


def omega_lower_vs_icdsgd(lam2, lam_n, tau, alpha, h_m, gamma):
    a, b = 1 - lam_n, 1 - lam2
    e, d = 1 - lam_n**tau, 1 - lam2**tau
    num = 2 * h_m * a - b * gamma + (b * e - d * a) / alpha
    den = 2 * h_m * (a + e) + (a * d - b * e) / alpha - gamma * (b + d)
    return num, den


def lyapunov_g(theta, pi, omega, alpha, loss):
    """Value of the omega-weighted Lyapunov function with an explicit Kronecker product."""
    n, d = theta.shape
    x = theta.reshape(-1)
    big = np.kron(np.eye(n) - pi, np.eye(d))
    return omega * loss + (1 - omega) / (2 * alpha) * x @ big @ x


def central_difference(f, x, step=None):
    x = np.asarray(x, dtype=float)
    h = 1e-6 * (1 + np.linalg.norm(x)) if step is None else step
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g
