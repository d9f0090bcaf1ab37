"""P1 vector finite elements for the pure-traction linear-elastic problem.

The pure-Neumann stiffness operator is singular with kernel equal to the
infinitesimal rigid displacements (dimension 3 in 2D).  Solves run
conjugate gradients on the rigid-mode complement: residuals are
projected every iteration and the returned field carries the gauge
P v = 0 in the L2 mass inner product.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .algebra import J2


class NotEquilibratedError(RuntimeError):
    """Loads do not vanish on rigid displacements; the singular system is unsolvable."""

    def __init__(self, force_residual, torque_residual):
        self.force_residual = force_residual
        self.torque_residual = torque_residual
        super().__init__(
            "loads are not equilibrated: "
            f"|resultant force| = {force_residual:.3e}, |skew moment| = {torque_residual:.3e}"
        )


class NoConvergenceError(RuntimeError):
    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"no convergence after {iterations} iterations (residual {residual:.3e})")


@dataclass
class DisplacementField:
    """Nodal vector field on a mesh, values of shape (n_nodes, 2)."""

    mesh: object
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=float).reshape(self.mesh.n_nodes, 2)

    def copy(self):
        return DisplacementField(self.mesh, self.values.copy())


def field_from_function(mesh, fn):
    """Interpolate a callable x -> R^2 at the mesh nodes."""
    vals = np.array([fn(x) for x in mesh.nodes], dtype=float)
    return DisplacementField(mesh, vals)


def linear_field(mesh, A, b=(0.0, 0.0)):
    """Nodal interpolant of v(x) = A x + b (exact for P1)."""
    A = np.asarray(A, dtype=float)
    return DisplacementField(mesh, mesh.nodes @ A.T + np.asarray(b, dtype=float))


def element_gradients(mesh, values):
    """Per-element displacement gradient, shape (m, 2, 2), (grad v)_ij = dv_i/dx_j."""
    v = np.asarray(values).reshape(mesh.n_nodes, 2)
    ve = v[mesh.elements]                       # (m, 3, 2) nodal values
    return np.einsum("mki,mkj->mij", ve, mesh.grads)


def element_strains(mesh, field):
    """Per-element infinitesimal strain sym(grad v), shape (m, 2, 2)."""
    G = element_gradients(mesh, field.values)
    return 0.5 * (G + np.swapaxes(G, 1, 2))


def mass_matrix(mesh):
    """Consistent P1 vector mass matrix, dofs interleaved (node-major)."""
    Me = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
    m = mesh.n_elements
    data = np.empty((m, 3, 3, 2))
    data[:] = (mesh.areas[:, None, None] * Me[None])[:, :, :, None]
    dofs = 2 * mesh.elements[:, :, None] + np.arange(2)[None, None, :]   # (m, 3, 2)
    rows = np.repeat(dofs[:, :, None, :], 3, axis=2)
    cols = np.repeat(dofs[:, None, :, :], 3, axis=1)
    n = 2 * mesh.n_nodes
    return sp.coo_matrix(
        (data.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)
    ).tocsr()


def integral_mean(mesh, values):
    """Domain mean of a nodal field, exact for P1: (1/|Omega|) int v dx."""
    v = np.asarray(values).reshape(mesh.n_nodes, 2)
    sums = v[mesh.elements].sum(axis=1)          # (m, 2)
    return (mesh.areas[:, None] * sums).sum(axis=0) / (3.0 * mesh.area)


@dataclass
class RigidBasis:
    """Mass-orthonormal basis of the rigid displacements (dimension 3 in 2D)."""

    mesh: object
    fields: list
    matrix: np.ndarray          # (2n, 3), mass-orthonormal columns
    euclid: np.ndarray          # (2n, 3), Euclidean-orthonormal columns, same span

    def project_coeffs(self, values, M):
        return self.matrix.T @ (M @ np.asarray(values).reshape(-1))


def rigid_basis(mesh, M=None):
    """Translations plus the rotation J (x - centroid), mass-orthonormalized."""
    if M is None:
        M = mass_matrix(mesh)
    n = mesh.n_nodes
    centroid = integral_mean_coords(mesh)
    raw = np.zeros((2 * n, 3))
    raw[0::2, 0] = 1.0
    raw[1::2, 1] = 1.0
    rot = (mesh.nodes - centroid) @ J2.T
    raw[:, 2] = rot.reshape(-1)

    # modified Gram-Schmidt in the mass inner product, one reorthogonalization pass
    Z = raw.copy()
    for _ in range(2):
        for k in range(3):
            for j in range(k):
                Z[:, k] -= (Z[:, j] @ (M @ Z[:, k])) * Z[:, j]
            Z[:, k] /= np.sqrt(Z[:, k] @ (M @ Z[:, k]))
    Zeu, _ = np.linalg.qr(Z)
    fields = [DisplacementField(mesh, Z[:, k].reshape(n, 2)) for k in range(3)]
    return RigidBasis(mesh, fields, Z, Zeu)


def integral_mean_coords(mesh):
    """Area centroid of the domain."""
    cent = mesh.nodes[mesh.elements].mean(axis=1)
    return (mesh.areas[:, None] * cent).sum(axis=0) / mesh.area


def _elastic_matrix(density):
    """3x3 form D with e' D e = quadratic(E) for e = (E11, E22, E12)."""
    mu, lam = density.mu, density.lam
    return np.array([
        [4.0 * mu + 2.0 * lam, 2.0 * lam, 0.0],
        [2.0 * lam, 4.0 * mu + 2.0 * lam, 0.0],
        [0.0, 0.0, 8.0 * mu],
    ])


def assemble_stiffness(mesh, density):
    """Sparse symmetric K with (1/2) v' K v = int quadratic(E(v)) dx."""
    D = _elastic_matrix(density)
    m = mesh.n_elements
    B = np.zeros((m, 3, 6))
    g = mesh.grads
    for k in range(3):
        B[:, 0, 2 * k + 0] = g[:, k, 0]
        B[:, 1, 2 * k + 1] = g[:, k, 1]
        B[:, 2, 2 * k + 0] = 0.5 * g[:, k, 1]
        B[:, 2, 2 * k + 1] = 0.5 * g[:, k, 0]
    Ke = 2.0 * mesh.areas[:, None, None] * np.einsum("mri,rs,msj->mij", B, D, B)
    Ke = 0.5 * (Ke + np.swapaxes(Ke, 1, 2))     # exactly symmetric element blocks
    dofs = (2 * mesh.elements[:, :, None] + np.arange(2)[None, None, :]).reshape(m, 6)
    rows = np.repeat(dofs[:, :, None], 6, axis=2)
    cols = np.repeat(dofs[:, None, :], 6, axis=1)
    n = 2 * mesh.n_nodes
    return sp.coo_matrix((Ke.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()


def eigenstrain_vector(mesh, density, B0):
    """Nodal vector b with b . v = int quadratic_gradient(B0) : E(v) dx."""
    G = density.quadratic_gradient(np.asarray(B0, dtype=float))
    contrib = mesh.areas[:, None, None] * np.einsum("ij,mkj->mki", G, mesh.grads)
    out = np.zeros((mesh.n_nodes, 2))
    np.add.at(out, mesh.elements.reshape(-1), contrib.reshape(-1, 2))
    return out


def elastic_energy(mesh, density, assembly, field):
    """Classical linear-elastic energy int quadratic(E(v)) dx - L(v)."""
    E = element_strains(mesh, field)
    stored = float(
        np.sum(mesh.areas * (
            4.0 * density.mu * np.einsum("mij,mij->m", E, E)
            + 2.0 * density.lam * np.einsum("mii->m", E) ** 2
        ))
    )
    return stored - float(np.sum(assembly.load_vector * field.values))


@dataclass
class LinearSolution:
    field: DisplacementField
    energy: float
    iterations: int
    residual: float


def solve_linear(mesh, density, assembly, eigenstrain=None, tol=1e-10,
                 max_iter=None, equilibrium_tol=1e-9):
    """Minimize int quadratic(E(v) - B0) dx - L(v) over the rigid-mode complement.

    Jacobi-preconditioned conjugate gradients on the singular SPD system;
    rigid components of the residual are projected out every iteration and
    the returned minimizer carries the gauge P v = 0 (mass projection).
    The reported energy includes the eigenstrain offset terms when B0 is
    nonzero.

    Raises
    ------
    NotEquilibratedError
        when the loads do not vanish on rigid displacements.
    NoConvergenceError
        when CG fails within 20 * ndof iterations.
    """
    from .loads import check_equilibrated

    eq = check_equilibrated(assembly, equilibrium_tol)
    if not eq.equilibrated:
        raise NotEquilibratedError(eq.force_residual, eq.torque_residual)

    K = assemble_stiffness(mesh, density)
    M = mass_matrix(mesh)
    rb = rigid_basis(mesh, M)

    b = assembly.load_vector.copy()
    const_term = 0.0
    if eigenstrain is not None:
        B0 = np.asarray(eigenstrain, dtype=float)
        b = b + eigenstrain_vector(mesh, density, B0)
        const_term = mesh.area * density.quadratic(B0)
    b_raw = b.reshape(-1)

    Zeu = rb.euclid
    b = b_raw - Zeu @ (Zeu.T @ b_raw)

    n = b.size
    if max_iter is None:
        max_iter = 20 * n
    diag = K.diagonal()
    inv_diag = 1.0 / diag

    x = np.zeros(n)
    r = b.copy()
    z = inv_diag * r
    rho = r @ z
    denom = np.sqrt(b @ (inv_diag * b))
    if denom == 0.0:
        sol = DisplacementField(mesh, x.reshape(-1, 2))
        return LinearSolution(sol, const_term, 0, 0.0)
    p = z.copy()
    rel = np.sqrt(rho) / denom
    it = 0
    while rel > tol:
        if it >= max_iter:
            raise NoConvergenceError(it, float(rel))
        Kp = K @ p
        alpha = rho / (p @ Kp)
        x += alpha * p
        r -= alpha * Kp
        r -= Zeu @ (Zeu.T @ r)
        z = inv_diag * r
        rho_new = r @ z
        p = z + (rho_new / rho) * p
        rho = rho_new
        rel = np.sqrt(max(rho, 0.0)) / denom
        it += 1

    x -= rb.matrix @ (rb.matrix.T @ (M @ x))
    energy = 0.5 * float(x @ (K @ x)) - float(x @ b_raw) + const_term
    sol = DisplacementField(mesh, x.reshape(-1, 2))
    return LinearSolution(sol, energy, it, float(rel))
