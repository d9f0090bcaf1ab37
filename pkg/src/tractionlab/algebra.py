"""Dense small-matrix algebra and isotropic elastic energy densities.

Dimensions N = 2, 3 only.  The fixed 2D skew convention is

    J = e1 (x) e2 - e2 (x) e1 = [[0, 1], [-1, 0]],

so a 2D skew matrix is W = a*J with |W|^2 = 2 a^2 and W^2 = -a^2 I.
A 3D skew matrix is parametrized by its axis vector w, W x = w x x,
with |W|^2 = 2 |w|^2 and W^2 = w (x) w - |w|^2 I.
"""

from dataclasses import dataclass

import numpy as np

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])

_UNIT_NORM_TOL = 1e-12


@dataclass(frozen=True)
class SkewParam:
    """Parametrized skew-symmetric matrix.

    dim 2: ``coeffs`` is a single scalar a, the matrix is a*J.
    dim 3: ``coeffs`` is the axis vector w, the matrix sends x to w x x.
    """

    dim: int
    coeffs: tuple

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        c = tuple(float(v) for v in np.atleast_1d(self.coeffs))
        expected = 1 if self.dim == 2 else 3
        if len(c) != expected:
            raise ValueError(f"dim {self.dim} needs {expected} coefficients, got {len(c)}")
        object.__setattr__(self, "coeffs", c)

    def matrix(self):
        """Materialize the skew matrix."""
        if self.dim == 2:
            return self.coeffs[0] * J2
        wx, wy, wz = self.coeffs
        return np.array([[0.0, -wz, wy], [wz, 0.0, -wx], [-wy, wx, 0.0]])

    def norm_sq(self):
        """Squared Frobenius norm |W|^2 (= 2 for the unit normalization)."""
        if self.dim == 2:
            return 2.0 * self.coeffs[0] ** 2
        return 2.0 * float(np.dot(self.coeffs, self.coeffs))

    def is_zero(self, tol=0.0):
        return self.norm_sq() <= tol


def skew2(a):
    """2D skew parameter a*J."""
    return SkewParam(2, (a,))


def skew3(w):
    """3D skew parameter with axis vector w."""
    return SkewParam(3, tuple(np.asarray(w, dtype=float)))


def skew_square(w):
    """Return W^2 for the materialized skew matrix W.

    The result is symmetric negative semidefinite:
    2D gives -a^2 I, 3D gives w (x) w - |w|^2 I.
    """
    if w.dim == 2:
        a = w.coeffs[0]
        return -(a * a) * np.eye(2)
    axis = np.asarray(w.coeffs)
    return np.outer(axis, axis) - float(np.dot(axis, axis)) * np.eye(3)


def rodrigues(theta, w):
    """Rotation matrix exp(theta*W) = I + sin(theta) W + (1-cos(theta)) W^2.

    Parameters
    ----------
    theta : float
        Rotation angle in radians.
    w : SkewParam
        Unit-normalized skew parameter, |W|^2 = 2 required.

    Returns
    -------
    ndarray
        Proper rotation matrix of shape (dim, dim).
    """
    nsq = w.norm_sq()
    if abs(nsq - 2.0) > _UNIT_NORM_TOL:
        raise ValueError(f"rodrigues requires |W|^2 = 2, got {nsq!r}")
    W = w.matrix()
    return np.eye(w.dim) + np.sin(theta) * W + (1.0 - np.cos(theta)) * (W @ W)


@dataclass(frozen=True)
class Density:
    """Isotropic stored-energy description with moduli (mu, lam).

    The finite-strain density is mu*|C - I|^2 + (lam/2)*Tr(C - I)^2 with
    C = F^T F, quadratic in the nonlinear strain, so the rescaled density
    is evaluated in closed form.  lam = 0 recovers the plain quadratic
    |C - I|^2 density (with mu = 1).
    """

    mu: float
    lam: float = 0.0

    def __post_init__(self):
        if not self.mu > 0.0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.lam < 0.0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")

    def quadratic(self, B):
        """Small-strain energy density 4 mu |B|^2 + 2 lam (Tr B)^2.

        B is expected symmetric; the value dominates 4 mu |B|^2 (ellipticity).
        """
        B = np.asarray(B)
        return 4.0 * self.mu * float(np.sum(B * B)) + 2.0 * self.lam * float(np.trace(B)) ** 2

    def quadratic_gradient(self, B):
        """Gradient of ``quadratic`` in B: 8 mu B + 4 lam (Tr B) I."""
        B = np.asarray(B)
        return 8.0 * self.mu * B + 4.0 * self.lam * np.trace(B) * np.eye(B.shape[0])

    def rescaled(self, h, B):
        """Rescaled stored-energy density h^-2 W(I + h B).

        Returns +inf when det(I + h B) <= 0 (orientation lost).  Otherwise
        evaluates the closed form h^-2 quadratic(Eh) with the nonlinear
        strain Eh = h sym(B) + (h^2/2) B^T B.  Converges to
        quadratic(sym B) as h -> 0.
        """
        if not h > 0.0:
            raise ValueError(f"h must be positive, got {h}")
        B = np.asarray(B, dtype=float)
        n = B.shape[0]
        if np.linalg.det(np.eye(n) + h * B) <= 0.0:
            return np.inf
        Eh = 0.5 * h * (B + B.T) + 0.5 * h * h * (B.T @ B)
        return self.quadratic(Eh) / (h * h)


def _eigs_2x2(S):
    a, b, c = S[0, 0], S[0, 1], S[1, 1]
    half_diff = 0.5 * (a - c)
    disc = np.hypot(half_diff, b)
    mean = 0.5 * (a + c)
    lo, hi = mean - disc, mean + disc
    # eigenvector of lo from the better-conditioned row of S - lo*I
    u = np.array([b, lo - a])
    v = np.array([lo - c, b])
    vec = u if np.dot(u, u) >= np.dot(v, v) else v
    norm = np.linalg.norm(vec)
    if norm == 0.0:  # S is a multiple of I
        return np.array([lo, hi]), np.eye(2)
    vec = vec / norm
    Q = np.column_stack([vec, [-vec[1], vec[0]]])
    return np.array([lo, hi]), Q


def _null_vector_3x3(M):
    """Unit null vector of a symmetric rank-2 matrix via row cross products."""
    r0, r1, r2 = M
    cands = [np.cross(r0, r1), np.cross(r0, r2), np.cross(r1, r2)]
    norms = [np.dot(c, c) for c in cands]
    k = int(np.argmax(norms))
    if norms[k] <= 0.0:
        # rank <= 1: any vector orthogonal to the largest row
        rows = [r0, r1, r2]
        j = int(np.argmax([np.dot(r, r) for r in rows]))
        r = rows[j]
        if np.dot(r, r) == 0.0:
            return np.array([1.0, 0.0, 0.0])
        t = np.array([1.0, 0.0, 0.0]) if abs(r[0]) <= abs(r[2]) else np.array([0.0, 0.0, 1.0])
        v = np.cross(r, t)
        return v / np.linalg.norm(v)
    return cands[k] / np.sqrt(norms[k])


def _char_poly_newton(S, lam):
    """One Newton step on det(S - lam I) = 0, skipped near repeated roots."""
    i1 = np.trace(S)
    i2 = 0.5 * (i1 * i1 - np.trace(S @ S))
    i3 = np.linalg.det(S)
    p = -lam**3 + i1 * lam**2 - i2 * lam + i3
    dp = -3.0 * lam**2 + 2.0 * i1 * lam - i2
    scale = max(abs(i1), abs(lam), 1.0)
    if abs(dp) < 1e-8 * scale * scale:
        return lam
    return lam - p / dp


def _eigs_3x3(S):
    scale = np.max(np.abs(S))
    if scale == 0.0:
        return np.zeros(3), np.eye(3)
    A = S / scale
    off = A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2
    q = np.trace(A) / 3.0
    p2 = np.sum((np.diag(A) - q) ** 2) + 2.0 * off
    p = np.sqrt(p2 / 6.0)
    if p < 1e-300:  # multiple of the identity
        return scale * q * np.ones(3), np.eye(3)
    B = (A - q * np.eye(3)) / p
    r = np.clip(0.5 * np.linalg.det(B), -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    hi = q + 2.0 * p * np.cos(phi)
    lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    mid = 3.0 * q - hi - lo
    hi, mid, lo = (_char_poly_newton(A, v) for v in (hi, mid, lo))

    # Resolve eigenvectors starting from the best isolated eigenvalue,
    # then reduce the complement to a 2x2 problem (robust under near
    # double eigenvalues).
    iso = hi if (hi - mid) >= (mid - lo) else lo
    v_iso = _null_vector_3x3(A - iso * np.eye(3))
    t = np.array([1.0, 0.0, 0.0]) if abs(v_iso[0]) <= abs(v_iso[2]) else np.array([0.0, 0.0, 1.0])
    u = np.cross(v_iso, t)
    u /= np.linalg.norm(u)
    w = np.cross(v_iso, u)
    M2 = np.array(
        [[u @ A @ u, u @ A @ w], [w @ A @ u, w @ A @ w]]
    )
    vals2, Q2 = _eigs_2x2(0.5 * (M2 + M2.T))
    vecs = [v_iso, Q2[0, 0] * u + Q2[1, 0] * w, Q2[0, 1] * u + Q2[1, 1] * w]
    vals = [iso, vals2[0], vals2[1]]
    order = np.argsort(vals, kind="stable")
    Q = np.column_stack([vecs[i] for i in order])
    return scale * np.array([vals[i] for i in order]), Q


def sym_eigs(S):
    """Eigen-decomposition of a 2x2 or 3x3 symmetric matrix.

    Closed form in 2D; trigonometric formula with one Newton polish per
    eigenvalue in 3D (no external solver).

    Returns
    -------
    (vals, Q) : eigenvalues ascending and orthonormal eigenvector columns
        with S @ Q[:, i] = vals[i] * Q[:, i].
    """
    S = np.asarray(S, dtype=float)
    if S.shape == (2, 2):
        return _eigs_2x2(S)
    if S.shape == (3, 3):
        return _eigs_3x3(S)
    raise ValueError(f"expected a 2x2 or 3x3 matrix, got shape {S.shape}")
