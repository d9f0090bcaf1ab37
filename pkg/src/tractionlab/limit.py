"""The limit energy with inner minimization over constant skew matrices.

For a displacement v the limit energy is

    F(v) = min_W int quadratic(E(v) - W^2/2) dx - L(v),

minimized over constant skew W.  In 2D, W^2 = -a^2 I reduces the inner
problem to one scalar with the closed form

    a*^2 = (int quadratic(I))^-1 * (int quadratic_gradient(I) : E(v))^-

(negative part), which for the isotropic density equals
(1/|Omega|) (int div v)^-.  The inner minimizer is unique up to sign; the
canonical representative has a* >= 0 (2D) or first nonzero axis component
positive (3D).
"""

import math
from dataclasses import dataclass

import numpy as np

from .algebra import SkewParam, skew2, skew3, skew_square
from .fem import (DisplacementField, NoConvergenceError, element_strains,
                  elastic_energy, linear_field, solve_linear)
from .loads import INCOMPATIBLE, WEAK, classify_compatibility, load_work

# dead band for the negative-part trigger, relative to the integral mass;
# keeps the alternating scheme from drifting along the flat minimizer ray
# under weakly compatible loads
_NEGATIVE_PART_SNAP = 1e-10


class IncompatibleLoadsError(RuntimeError):
    """Loads violate compatibility: the limit energy is unbounded from below."""

    def __init__(self, witness, witness_work):
        self.witness = witness
        self.witness_work = witness_work
        super().__init__(
            "incompatible loads: inf F = -infinity along the witness skew direction "
            f"(L(z_W) = {witness_work:.6g} > 0 for the unit witness, F decays like "
            "min E - tau * L(z_W) as tau -> +infinity)"
        )


@dataclass(frozen=True)
class LimitReport:
    """Limit and classical energies of one displacement field."""

    F_value: float
    E_value: float
    gap: float
    W_star: SkewParam
    a_star_sq: float
    gap_formula: float      # independent closed-form value of E - F (2D)


def inner_skew_minimum(mesh, density, strains):
    """2D inner minimization over skew offsets, by exact quadrature.

    Parameters
    ----------
    strains : (m, 2, 2) per-element symmetric strain values.

    Returns
    -------
    (W_star, offset_energy, a_star_sq) with offset_energy =
    int quadratic(E + (a*^2/2) I) dx and canonical a* >= 0.
    """
    dq_eye = density.quadratic_gradient(np.eye(2))         # constant matrix
    per_elem = np.einsum("ij,mij->m", dq_eye, strains)
    num = float(np.sum(mesh.areas * per_elem))
    den = mesh.area * density.quadratic(np.eye(2))
    snap = _NEGATIVE_PART_SNAP * (1.0 + float(np.sum(mesh.areas * np.abs(per_elem))))
    a2 = (-num / den) if num < -snap else 0.0
    offset = strains + (0.5 * a2) * np.eye(2)
    energy = float(np.sum(mesh.areas * (
        4.0 * density.mu * np.einsum("mij,mij->m", offset, offset)
        + 2.0 * density.lam * np.einsum("mii->m", offset) ** 2
    )))
    return skew2(math.sqrt(a2)), energy, a2


def _q_value_grad_hess(density, E, w, volume):
    """Value, gradient and Hessian of w -> volume * quadratic(E - W(w)^2 / 2)."""
    w = np.asarray(w, dtype=float)
    eye = np.eye(3)
    G = 0.5 * (np.outer(w, w) - float(w @ w) * eye)
    B = E - G
    val = volume * density.quadratic(B)
    D = density.quadratic_gradient(B)
    # dB/dw_k = -(e_k (x) w + w (x) e_k)/2 + w_k I =: T_k
    T = np.empty((3, 3, 3))
    for k in range(3):
        ek = eye[k]
        T[k] = -0.5 * (np.outer(ek, w) + np.outer(w, ek)) + w[k] * eye
    grad = volume * np.einsum("ij,kij->k", D, T)
    H = np.empty((3, 3))
    trD = np.trace(D)
    for k in range(3):
        d2T_k = density.quadratic_gradient(T[k])
        for l in range(3):
            # U_kl = d2B/dw_k dw_l = -(e_k (x) e_l + e_l (x) e_k)/2 + delta_kl I
            d_ukl = -D[k, l] + (trD if k == l else 0.0)
            H[k, l] = volume * (float(np.sum(d2T_k * T[l])) + d_ukl)
    return val, grad, H


def inner_skew_minimum_3d(density, strain, volume=1.0, grad_tol=1e-12, max_newton=60):
    """3D inner minimization for a constant strain (analysis path).

    Multi-start over 26 lattice directions x 5 magnitudes plus the origin,
    Newton-polished until |grad q| <= grad_tol * scale.

    Returns (W_star, offset_energy) with the canonical axis sign.
    """
    E = 0.5 * (np.asarray(strain, dtype=float) + np.asarray(strain, dtype=float).T)
    scale = max(1.0, float(np.linalg.norm(E)))
    dirs = []
    for i in (-1, 0, 1):
        for j in (-1, 0, 1):
            for k in (-1, 0, 1):
                if (i, j, k) != (0, 0, 0):
                    v = np.array([i, j, k], dtype=float)
                    dirs.append(v / np.linalg.norm(v))
    mags = np.sqrt(scale) * np.array([0.25, 0.5, 1.0, 2.0, 4.0])
    starts = [np.zeros(3)] + [m * d for d in dirs for m in mags]

    best_val, best_w = np.inf, np.zeros(3)
    for w0 in starts:
        w = w0.copy()
        val, grad, H = _q_value_grad_hess(density, E, w, volume)
        for _ in range(max_newton):
            if np.linalg.norm(grad) <= grad_tol * volume * scale * max(1.0, density.mu):
                break
            try:
                step = np.linalg.solve(H, -grad)
            except np.linalg.LinAlgError:
                step = -grad
            if step @ grad > 0.0:   # not a descent direction, fall back
                step = -grad
            t = 1.0
            for _ in range(50):
                cand = w + t * step
                cval, cgrad, cH = _q_value_grad_hess(density, E, cand, volume)
                if cval <= val + 1e-4 * t * (grad @ step):
                    w, val, grad, H = cand, cval, cgrad, cH
                    break
                t *= 0.5
            else:
                break
        if val < best_val:
            best_val, best_w = val, w
    for c in best_w:
        if c != 0.0:
            if c < 0.0:
                best_w = -best_w
            break
    return skew3(best_w), best_val


def limit_report(mesh, density, assembly, field):
    """Evaluate the limit energy F, the classical energy E and their gap.

    The 2D gap is cross-checked against its closed form
    (1/4) (int quadratic(I))^-1 [ (int quadratic_gradient(I):E)^- ]^2,
    reported in ``gap_formula``.
    """
    strains = element_strains(mesh, field)
    W_star, offset_energy, a2 = inner_skew_minimum(mesh, density, strains)
    work = load_work(assembly, field)
    F_value = offset_energy - work
    E_value = elastic_energy(mesh, density, assembly, field)
    num = float(np.sum(mesh.areas * np.einsum(
        "ij,mij->m", density.quadratic_gradient(np.eye(2)), strains
    )))
    den = mesh.area * density.quadratic(np.eye(2))
    gap_formula = 0.25 * (max(-num, 0.0) ** 2) / den
    return LimitReport(
        F_value=F_value,
        E_value=E_value,
        gap=E_value - F_value,
        W_star=W_star,
        a_star_sq=a2,
        gap_formula=gap_formula,
    )


@dataclass
class LimitMinimum:
    field: DisplacementField
    W0: SkewParam
    F_value: float
    E_value: float
    iterations: int
    trace: list                 # F values per alternating iteration


def minimize_limit(mesh, density, assembly, tol_F=1e-12, tol_W=1e-10,
                   max_iter=100, cg_tol=1e-10, classification=None):
    """Minimize the limit energy by alternating exact partial minimizations.

    v-step: linear solve with the eigenstrain offset B0 = W^2/2;
    W-step: closed-form inner minimization on the current strain.  Each
    step minimizes its block exactly so the F trace is non-increasing.
    Refuses incompatible loads (the infimum is -infinity).
    """
    if classification is None:
        classification = classify_compatibility(assembly)
    if classification.compat_class == INCOMPATIBLE:
        raise IncompatibleLoadsError(classification.witness, classification.witness_work)

    a2 = 0.0
    F_prev = None
    trace = []
    for it in range(1, max_iter + 1):
        B0 = -(0.5 * a2) * np.eye(2)
        sol = solve_linear(mesh, density, assembly, eigenstrain=B0, tol=cg_tol)
        W_new, offset_energy, a2_new = inner_skew_minimum(
            mesh, density, element_strains(mesh, sol.field)
        )
        F_value = offset_energy - load_work(assembly, sol.field)
        trace.append(F_value)
        dW = math.sqrt(2.0) * abs(math.sqrt(a2_new) - math.sqrt(a2))
        if F_prev is not None and abs(F_value - F_prev) <= tol_F * (1.0 + abs(F_value)) \
                and dW <= tol_W:
            E_value = elastic_energy(mesh, density, assembly, sol.field)
            return LimitMinimum(sol.field, W_new, F_value, E_value, it, trace)
        F_prev = F_value
        a2 = a2_new
    raise NoConvergenceError(max_iter, float("nan"))


@dataclass(frozen=True)
class ShiftRecord:
    """Verification record for one shifted minimizer candidate."""

    t: float
    F_delta: float              # F(v) - min F, expected ~ 0
    E_delta: float              # E(v) - min E, expected > 0 for t > 0
    kernel_work: float          # L(U^2 x), must vanish for a kernel direction


def shifted_minimizer(mesh, density, assembly, v_star, direction, t,
                      min_F, min_E, tol=1e-9):
    """Shift a minimizer along a kernel direction: v = v_star + t * U^2 x.

    For the canonical 2D kernel direction (|U|^2 = 2, U^2 = -I) this is
    exactly v_star - t * x.  Requires weak compatibility and
    L(U^2 x) = 0 within tolerance.

    Returns (field, ShiftRecord).
    """
    if t < 0.0:
        raise ValueError("shift parameter t must be nonnegative")
    classification = classify_compatibility(assembly, tol)
    if classification.compat_class != WEAK:
        raise ValueError(
            f"shifted minimizers require weak compatibility, got {classification.compat_class!r}"
        )
    U2 = skew_square(direction)
    kernel_work = float(np.sum(U2 * classification.moment_matrix))
    scale = 1.0 + float(np.linalg.norm(classification.moment_matrix))
    if abs(kernel_work) > tol * scale:
        raise ValueError(
            f"direction is not in the load kernel: L(U^2 x) = {kernel_work:.3e}"
        )
    shift = linear_field(mesh, t * U2)
    field = DisplacementField(mesh, v_star.values + shift.values)
    rep = limit_report(mesh, density, assembly, field)
    record = ShiftRecord(
        t=float(t),
        F_delta=rep.F_value - min_F,
        E_delta=rep.E_value - min_E,
        kernel_work=kernel_work,
    )
    return field, record
