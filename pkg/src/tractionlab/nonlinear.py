"""Rescaled nonlinear energy on the P1 space and the h-sweep experiment.

The rescaled energy of a displacement v at parameter h > 0 is

    Fh(v) = int rescaled_density(grad v) dx - L(v),

+infinity as soon as some element loses orientation
(det(I + h grad v) <= 0).  The integrand is polynomial in the constant
per-element gradient, so one-point quadrature is exact.

Minimization uses limited-memory BFGS with a backtracking line search
that enforces both the Armijo decrease and the orientation barrier
det(I + h grad v) >= delta.  Only the translation gauge is imposed
(subtract the mass-mean displacement each iteration); rotations are not
a symmetry of Fh under loads and are deliberately not gauged out, which
leaves near-flat rotational directions: expect ill-conditioning there,
handled by the curvature pairs.

Independent sweep points must not be parallelized: each h is
warm-started from the minimizer of the previous one.
"""

import math
from dataclasses import dataclass

import numpy as np

from .fem import (DisplacementField, element_gradients, element_strains,
                  integral_mean, linear_field, solve_linear)
from .limit import IncompatibleLoadsError, minimize_limit
from .loads import (INCOMPATIBLE, STRICT, assemble_loads,
                    classify_compatibility, load_work)
from .mesh import refine, tri_midpoint3

CONVERGED = "converged"
DIVERGED = "diverged"
ITER_LIMIT = "iter_limit"

_BARRIER_DELTA = 1e-8
_ARMIJO = 1e-4


class InadmissibleStateError(ValueError):
    """Gradient requested at a state with det(I + h grad v) <= 0 somewhere."""


class SweepRefusedError(RuntimeError):
    """Sweep preconditions not met (classification is not strict)."""

    def __init__(self, compat_class, reason):
        self.compat_class = compat_class
        self.reason = reason
        super().__init__(reason)


def _element_dets(mesh, values, h):
    G = element_gradients(mesh, values)
    F00 = 1.0 + h * G[:, 0, 0]
    F11 = 1.0 + h * G[:, 1, 1]
    return F00 * F11 - (h * G[:, 0, 1]) * (h * G[:, 1, 0])


def stored_rescaled(mesh, density, values, h):
    """Stored part of the rescaled energy; +inf when orientation is lost."""
    if not h > 0.0:
        raise ValueError(f"h must be positive, got {h}")
    G = element_gradients(mesh, values)
    F = h * G
    F[:, 0, 0] += 1.0
    F[:, 1, 1] += 1.0
    dets = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
    if np.any(dets <= 0.0):
        return np.inf
    Eh = h * 0.5 * (G + np.swapaxes(G, 1, 2)) \
        + (0.5 * h * h) * np.einsum("mki,mkj->mij", G, G)
    per = 4.0 * density.mu * np.einsum("mij,mij->m", Eh, Eh) \
        + 2.0 * density.lam * np.einsum("mii->m", Eh) ** 2
    return float(np.sum(mesh.areas * per)) / (h * h)


def eval_rescaled(mesh, density, assembly, field, h):
    """Rescaled total energy Fh(v); assembly may be None for zero loads."""
    stored = stored_rescaled(mesh, density, field.values, h)
    if not np.isfinite(stored):
        return np.inf
    if assembly is None:
        return stored
    return stored - load_work(assembly, field)


def rescaled_gradient(mesh, density, assembly, field, h):
    """Exact nodal gradient of the discrete rescaled energy, shape (n, 2).

    Raises InadmissibleStateError when some element has lost orientation.
    """
    if not h > 0.0:
        raise ValueError(f"h must be positive, got {h}")
    values = field.values
    dets = _element_dets(mesh, values, h)
    if np.any(dets <= 0.0):
        bad = int(np.argmin(dets))
        raise InadmissibleStateError(
            f"element {bad} has det(I + h grad v) = {dets[bad]!r} <= 0"
        )
    G = element_gradients(mesh, values)
    Eh = h * 0.5 * (G + np.swapaxes(G, 1, 2)) \
        + (0.5 * h * h) * np.einsum("mki,mkj->mij", G, G)
    D = 8.0 * density.mu * Eh \
        + 4.0 * density.lam * np.einsum("mii->m", Eh)[:, None, None] * np.eye(2)
    # d/dG of h^-2 quadratic(Eh) is (I + h G) D / h
    F = h * G
    F[:, 0, 0] += 1.0
    F[:, 1, 1] += 1.0
    dPsi = np.einsum("mik,mkj->mij", F, D) / h
    contrib = mesh.areas[:, None, None] * np.einsum("mij,mkj->mki", dPsi, mesh.grads)
    out = np.zeros((mesh.n_nodes, 2))
    np.add.at(out, mesh.elements.reshape(-1), contrib.reshape(-1, 2))
    if assembly is not None:
        out = out - assembly.load_vector
    return out


@dataclass(frozen=True)
class DivergenceCertificate:
    """Witness of unbounded descent under incompatible loads.

    ``direction`` is the explicit zero-stored-energy rotation field at
    theta = pi/3 scaled by 1/h; ``thetas``/``trace`` record Fh along the
    whole rotation path; ``witness_work`` is L(z_W) > 0 for the unit
    witness skew direction.  When divergence came from the generic
    threshold rule instead of the rotation probe, ``direction`` is the
    last iterate, ``trace`` the accepted-energy history and
    ``witness_work`` None.
    """

    direction: DisplacementField
    thetas: np.ndarray
    trace: np.ndarray
    witness_work: float


@dataclass
class NonlinearResult:
    status: str
    field: DisplacementField
    value: float
    grad_norm: float
    iterations: int
    barrier_hits: int
    energy_floor: float
    energy_trace: list = None       # accepted energies, initial state first
    certificate: DivergenceCertificate | None = None


def _gauge(mesh, values):
    return values - integral_mean(mesh, values)


def rotation_path_field(mesh, witness, theta, h):
    """The rotation-path displacement v = h^-1 (sin(t) W + (1-cos(t)) W^2) x."""
    W = witness.matrix()
    A = (math.sin(theta) * W + (1.0 - math.cos(theta)) * (W @ W)) / h
    return linear_field(mesh, A)


def _instability_probe(mesh, density, assembly, h, classification, n_theta=64):
    """Trace Fh along the witness rotation orbit; exact descent certificate."""
    thetas = np.pi * np.arange(1, n_theta + 1) / n_theta
    # pi/3 is the landmark angle where the path is an exact rotation field
    thetas = np.unique(np.concatenate([thetas, [np.pi / 3.0]]))
    trace = np.empty(len(thetas))
    for i, th in enumerate(thetas):
        fld = rotation_path_field(mesh, classification.witness, th, h)
        trace[i] = eval_rescaled(mesh, density, assembly, fld, h)
    k = int(np.argmin(trace))
    direction = rotation_path_field(mesh, classification.witness, np.pi / 3.0, h)
    cert = DivergenceCertificate(
        direction=direction,
        thetas=thetas,
        trace=trace,
        witness_work=classification.witness_work,
    )
    worst = rotation_path_field(mesh, classification.witness, thetas[k], h)
    grad = rescaled_gradient(mesh, density, assembly, worst, h)
    return NonlinearResult(
        status=DIVERGED,
        field=worst,
        value=float(trace[k]),
        grad_norm=float(np.linalg.norm(grad)),
        iterations=0,
        barrier_hits=0,
        energy_floor=float(trace[k]),
        energy_trace=[float(v) for v in trace],
        certificate=cert,
    )


def _two_loop(grad, s_list, y_list, rho_list):
    q = grad.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_list), reversed(y_list), reversed(rho_list)):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if s_list:
        s, y = s_list[-1], y_list[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(zip(s_list, y_list, rho_list), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def minimize_rescaled(mesh, density, assembly, h, init=None, grad_tol=1e-8,
                      max_iter=1000, divergence_threshold=None, memory=10,
                      probe_instability=True):
    """Quasi-Newton minimization of the rescaled energy at fixed h.

    L-BFGS (memory 10) with a backtracking line search that first halves
    the step until every element satisfies det(I + h grad v) >= 1e-8 and
    then enforces the Armijo decrease.  Converged means
    |grad| <= grad_tol * (1 + |Fh|).  Diverged is declared when the
    energy falls below -divergence_threshold (default 1e6 * (1 + |l|)),
    or immediately via the rotation-orbit certificate when the loads are
    classified incompatible (legitimate unbounded-descent regime).  The
    solver reports gradient-norm stationarity only; it never claims
    global optimality.

    ``energy_floor`` records the lowest finite energy seen across all
    accepted and trial states.
    """
    if not h > 0.0:
        raise ValueError(f"h must be positive, got {h}")
    if divergence_threshold is None:
        divergence_threshold = 1e6 * (1.0 + float(np.linalg.norm(assembly.load_vector)))

    if probe_instability:
        classification = classify_compatibility(assembly)
        if classification.compat_class == INCOMPATIBLE:
            return _instability_probe(mesh, density, assembly, h, classification)

    x = np.zeros((mesh.n_nodes, 2)) if init is None else np.asarray(init.values, dtype=float)
    x = _gauge(mesh, x)
    fld = DisplacementField(mesh, x)
    f = eval_rescaled(mesh, density, assembly, fld, h)
    if not np.isfinite(f):
        raise InadmissibleStateError("initial state has lost orientation")
    g = rescaled_gradient(mesh, density, assembly, fld, h).reshape(-1)
    floor = f
    barrier_hits = 0
    s_list, y_list, rho_list = [], [], []
    xf = x.reshape(-1)
    energy_trace = [f]

    status = ITER_LIMIT
    it = 0
    for it in range(1, max_iter + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= grad_tol * (1.0 + abs(f)) \
                and np.all(_element_dets(mesh, xf, h) >= _BARRIER_DELTA):
            status = CONVERGED
            it -= 1
            break
        if f < -divergence_threshold:
            status = DIVERGED
            break

        d = -_two_loop(g, s_list, y_list, rho_list)
        if d @ g >= 0.0:
            d = -g
        t = 1.0 if s_list else min(1.0, 1.0 / max(gnorm, 1.0))
        gd = g @ d
        accepted = False
        for _ in range(80):
            cand = xf + t * d
            if np.any(_element_dets(mesh, cand, h) < _BARRIER_DELTA):
                barrier_hits += 1
                t *= 0.5
                continue
            f_cand = eval_rescaled(
                mesh, density, assembly, DisplacementField(mesh, cand), h
            )
            if np.isfinite(f_cand):
                floor = min(floor, f_cand)
            if f_cand <= f + _ARMIJO * t * gd:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # line search exhausted at floating-point resolution
            status = ITER_LIMIT
            break

        x_new = _gauge(mesh, cand.reshape(-1, 2)).reshape(-1)
        fld = DisplacementField(mesh, x_new)
        f_new = eval_rescaled(mesh, density, assembly, fld, h)
        g_new = rescaled_gradient(mesh, density, assembly, fld, h).reshape(-1)
        s = x_new - xf
        y = g_new - g
        sy = s @ y
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            s_list.append(s)
            y_list.append(y)
            rho_list.append(1.0 / sy)
            if len(s_list) > memory:
                s_list.pop(0)
                y_list.pop(0)
                rho_list.pop(0)
        xf, f, g = x_new, f_new, g_new
        floor = min(floor, f)
        energy_trace.append(f)

    field = DisplacementField(mesh, xf.reshape(-1, 2))
    certificate = None
    if status == DIVERGED:
        certificate = DivergenceCertificate(
            direction=field,
            thetas=np.array([]),
            trace=np.asarray(energy_trace),
            witness_work=None,
        )
    return NonlinearResult(
        status=status,
        field=field,
        value=f,
        grad_norm=float(np.linalg.norm(g)),
        iterations=it,
        barrier_hits=barrier_hits,
        energy_floor=floor,
        energy_trace=energy_trace,
        certificate=certificate,
    )


# fixed panel of polynomial test tensors for the weak-convergence surrogate:
# three constant symmetric directions, each also weighted by x1 and x2
_PANEL_CONST = (
    np.array([[1.0, 0.0], [0.0, 1.0]]),
    np.array([[1.0, 0.0], [0.0, -1.0]]),
    np.array([[0.0, 1.0], [1.0, 0.0]]),
)


def strain_moments(mesh, field):
    """Strain moments int E(v) : T_k dx for the fixed 9-tensor panel."""
    E = element_strains(mesh, field)
    pts, wts, _ = tri_midpoint3(mesh)
    moments = []
    for T in _PANEL_CONST:
        base = np.einsum("mij,ij->m", E, T)
        moments.append(float(np.sum(mesh.areas * base)))
        for c in range(2):
            weight = np.sum(wts * pts[:, :, c], axis=1)    # int x_c over element
            moments.append(float(np.sum(weight * base)))
    return np.asarray(moments)


def mean_skew_gradient(mesh, field):
    """Area-averaged skew part of grad v, a 2x2 skew matrix."""
    G = element_gradients(mesh, field.values)
    Gm = np.einsum("m,mij->ij", mesh.areas, G) / mesh.area
    return 0.5 * (Gm - Gm.T)


@dataclass(frozen=True)
class SweepRecord:
    h: float
    Fh: float
    W_proxy: float
    moment_dist: float
    iters: int
    status: str
    moments: np.ndarray


@dataclass
class SweepResult:
    records: list
    limit_value: float          # min of the limit energy
    limit_W0_norm: float
    limit_moments: np.ndarray
    energy_floor: float


class SweepAbortedError(RuntimeError):
    def __init__(self, records, result):
        self.records = records
        self.result = result
        super().__init__(
            f"sweep aborted at h = {records[-1].h if records else '?'}: "
            f"minimizer status {result.status!r} (value {result.value:.6g}, "
            f"grad norm {result.grad_norm:.3e})"
        )


def h_sweep(mesh, density, spec, h_list, refinements=0, grad_tol=1e-8,
            divergence_threshold=None, max_iter=2000):
    """Minimize Fh along a descending h list and compare with the limit.

    Only strictly compatible loads are accepted.  Each h is warm-started
    from the previous minimizer (the first from the linear-elastic one),
    tracking the minimizing branch.  Returns records (h, min Fh, the
    proxy |sqrt(h) mean skew grad|, strain-moment distances to the limit
    minimizer) plus the limit comparison values.
    """
    hs = [float(h) for h in h_list]
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise ValueError("h_list must be strictly decreasing")
    for _ in range(int(refinements)):
        mesh = refine(mesh)
    assembly = assemble_loads(mesh, spec)
    classification = classify_compatibility(assembly)
    if classification.compat_class == INCOMPATIBLE:
        raise IncompatibleLoadsError(classification.witness, classification.witness_work)
    if classification.compat_class != STRICT:
        raise SweepRefusedError(
            classification.compat_class,
            "sweep requires strictly compatible loads: under weak compatibility "
            "minimizing sequences may lose compactness (extra limit minimizers "
            "with unbounded skew gradients)",
        )

    limit_min = minimize_limit(mesh, density, assembly, classification=classification)
    limit_moments = strain_moments(mesh, limit_min.field)
    limit_W0_norm = math.sqrt(limit_min.W0.norm_sq())

    linear = solve_linear(mesh, density, assembly)
    warm = linear.field
    records = []
    floor = np.inf
    for h in hs:
        res = minimize_rescaled(
            mesh, density, assembly, h, init=warm, grad_tol=grad_tol,
            divergence_threshold=divergence_threshold, max_iter=max_iter,
            probe_instability=False,
        )
        floor = min(floor, res.energy_floor)
        moments = strain_moments(mesh, res.field)
        rec = SweepRecord(
            h=h,
            Fh=res.value,
            W_proxy=math.sqrt(h) * float(np.linalg.norm(mean_skew_gradient(mesh, res.field))),
            moment_dist=float(np.linalg.norm(moments - limit_moments)),
            iters=res.iterations,
            status=res.status,
            moments=moments,
        )
        records.append(rec)
        if res.status != CONVERGED:
            raise SweepAbortedError(records, res)
        warm = res.field
    return SweepResult(
        records=records,
        limit_value=limit_min.F_value,
        limit_W0_norm=limit_W0_norm,
        limit_moments=limit_moments,
        energy_floor=float(floor),
    )
