"""Second-order analysis through pull-backs.

At a KKT point the pulled-back Lagrangian
``Lbar(v, mu) = f(R(v)) + mu(S(g(R(v))))`` has a well-defined symmetric
Hessian at ``0``, and for adapted linearizing maps its quadratic form is
invariant on the critical cone.  This module builds pull-backs, forms the
Hessian (analytic when the model supplies one, otherwise central differences
with Richardson refinement), checks the invariance numerically, and decides
second-order sufficient/necessary conditions by exact subspace eigenvalue
tests plus face enumeration with multi-start refinement on genuine cones.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg
import scipy.optimize

from .cones import (PolyhedralCone, canonicalize, extreme_rays, null_space,
                    sample_cone)
from .errors import (DimensionTooLargeError, InvalidCertificateError,
                     NotStationaryError)
from .firstorder import TOL_ACT, TOL_KKT, KKTCertificate
from .geometry import LinearizingMap, Retraction, push_covector, transition_jacobian
from .problem import ProblemInstance

FD_HESS_STEP = 1e-4
FD_LEVEL_WARN = 1e-4  # discrepancy between h and h/2 flagging ill-conditioning


@dataclass(frozen=True)
class PulledBackProblem:
    """A problem pulled back to the tangent space at a feasible point."""

    base: np.ndarray
    retraction: Retraction
    linmap: LinearizingMap
    f_bar: Callable[[np.ndarray], float]
    g_bar: Callable[[np.ndarray], np.ndarray]
    cone_bar: PolyhedralCone
    analytic_hessian: Optional[Callable] = None
    name: str = ""

    @property
    def dim(self) -> int:
        return self.retraction.chart.dim


def build_pullback(prob: ProblemInstance, p, retraction: Optional[Retraction] = None,
                   linmap: Optional[LinearizingMap] = None,
                   retraction_kind: str = "default", linmap_kind: str = "chart",
                   adapted_kind: str = "default") -> PulledBackProblem:
    """Assemble ``f_bar = f o R`` and ``g_bar = S o g o R`` at a feasible point."""
    prob.require_feasible(p)
    q = prob.constraint(p)
    if retraction is None:
        retraction = prob.domain.retraction(p, retraction_kind)
    if linmap is None:
        linmap = prob.constraint_set.linearizing_map(q, linmap_kind)
    cone = linmap.cone
    if cone is None:
        cone = prob.constraint_set.adapted_chart(q, adapted_kind).cone()

    def f_bar(v):
        return float(prob.objective(retraction(v)))

    def g_bar(v):
        return linmap(prob.constraint(retraction(v)))

    analytic = None
    hook = prob.extras.get("analytic_pullback_hessian")
    if hook is not None:
        analytic = lambda mu, r=retraction, s=linmap: hook(mu, r, s)
    return PulledBackProblem(
        base=np.asarray(p, dtype=float), retraction=retraction, linmap=linmap,
        f_bar=f_bar, g_bar=g_bar, cone_bar=cone, analytic_hessian=analytic,
        name=f"{prob.name}:{retraction.name}/{linmap.name}")


@dataclass
class CriticalCone:
    """Critical cones on both sides of the constraint map."""

    cone_m: PolyhedralCone
    cone_n: PolyhedralCone
    jacobian: np.ndarray
    mu_chart: np.ndarray


def critical_cone(prob: ProblemInstance, p, cert: KKTCertificate,
                  chart_kind: str = "default", adapted_kind: str = "default",
                  tol_act: float = TOL_ACT) -> CriticalCone:
    """Critical cones at a certified KKT point.

    ``cone_m`` collects the linearizing-cone rows plus the equality row
    ``f'(p)``; ``cone_n`` is the inner tangent cone with the strongly active
    rows (multiplier above ``tol_act``) turned into equalities, so that
    ``<mu, w> = 0`` holds throughout.  Ties at the threshold count as weakly
    active, which keeps the cone on the large (conservative) side.
    """
    chart_m, data = prob.chart_pair(p, chart_kind, adapted_kind)
    jac = prob.constraint_jacobian(p, chart_m, data.chart)
    grad = prob.objective_gradient(p, chart_m)
    resid = float(np.linalg.norm(grad + jac.T @ cert.mu_chart))
    if resid > 1e2 * TOL_KKT * (1.0 + np.linalg.norm(grad)):
        raise InvalidCertificateError(
            f"certificate stationarity residual {resid:.3e} too large at this point")
    if cert.lambda_ineq.size != data.ell:
        raise InvalidCertificateError(
            f"certificate carries {cert.lambda_ineq.size} inequality rows, "
            f"adapted chart has {data.ell}")
    rows_i = data.inequality_rows()
    rows_e = data.equality_rows()
    strong = [j for j in range(data.ell) if cert.lambda_ineq[j] > tol_act]
    weak = [j for j in range(data.ell) if j not in strong]
    cone_n = PolyhedralCone.from_rows(
        rows_i[weak],
        np.vstack([rows_e, rows_i[strong]]),
        data.n)
    cone_m = PolyhedralCone.from_rows(
        rows_i @ jac,
        np.vstack([rows_e @ jac, grad.reshape(1, -1)]),
        chart_m.dim)
    return CriticalCone(cone_m=cone_m, cone_n=cone_n, jacobian=jac,
                        mu_chart=cert.mu_chart.copy())


def lagrangian_value(pb: PulledBackProblem, v, mu) -> float:
    """``f_bar(v) + <mu, g_bar(v)>``; equals ``f(p*)`` at ``v = 0``."""
    v = np.asarray(v, dtype=float)
    return pb.f_bar(v) + float(np.asarray(mu, dtype=float) @ pb.g_bar(v))


@dataclass
class HessianForm:
    """Symmetric bilinear form of the pulled-back Lagrangian at the base point."""

    base: np.ndarray
    chart_id: str
    matrix: np.ndarray
    source: str = "fd"
    fd_discrepancy: float = 0.0

    @property
    def ill_conditioned(self) -> bool:
        return self.fd_discrepancy > FD_LEVEL_WARN

    def __call__(self, v: np.ndarray) -> float:
        v = np.asarray(v, dtype=float)
        return float(v @ self.matrix @ v)


def _fd_gradient(fn, dim, h=1e-6):
    grad = np.zeros(dim)
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = h
        grad[j] = (fn(e) - fn(-e)) / (2.0 * h)
    return grad


def _fd_hessian(fn, dim, h):
    hess = np.zeros((dim, dim))
    f0 = fn(np.zeros(dim))
    for i in range(dim):
        ei = np.zeros(dim)
        ei[i] = h
        hess[i, i] = (fn(ei) - 2.0 * f0 + fn(-ei)) / (h * h)
        for j in range(i + 1, dim):
            ej = np.zeros(dim)
            ej[j] = h
            val = (fn(ei + ej) - fn(ei - ej) - fn(-ei + ej) + fn(-ei - ej)) / (4.0 * h * h)
            hess[i, j] = val
            hess[j, i] = val
    return hess


def lagrangian_hessian(pb: PulledBackProblem, mu, h: float = FD_HESS_STEP,
                       stationarity_tol: float = 1e-6) -> HessianForm:
    """Hessian of ``v -> Lbar(v, mu)`` at 0.

    Requires stationarity (the bilinear form is only chart-independent
    there); raises :class:`NotStationaryError` otherwise.  The finite
    difference path runs at steps ``h`` and ``h/2`` and Richardson
    extrapolates; the level discrepancy is recorded and flags
    ill-conditioning when large.
    """
    mu = np.asarray(mu, dtype=float)
    fn = lambda v: lagrangian_value(pb, v, mu)
    dim = pb.dim
    grad = _fd_gradient(fn, dim)
    scale = 1.0 + abs(fn(np.zeros(dim)))
    if np.linalg.norm(grad) > stationarity_tol * scale:
        raise NotStationaryError(
            f"pulled-back Lagrangian gradient {np.linalg.norm(grad):.3e} "
            f"exceeds {stationarity_tol:g}; Hessian undefined off stationary points")
    if pb.analytic_hessian is not None:
        mat = pb.analytic_hessian(mu)
        if mat is not None:
            mat = np.asarray(mat, dtype=float)
            mat = 0.5 * (mat + mat.T)
            return HessianForm(base=pb.base, chart_id=pb.retraction.chart.chart_id,
                               matrix=mat, source="analytic", fd_discrepancy=0.0)
    coarse = _fd_hessian(fn, dim, h)
    fine = _fd_hessian(fn, dim, h / 2.0)
    mat = (4.0 * fine - coarse) / 3.0
    mat = 0.5 * (mat + mat.T)
    discrepancy = float(np.max(np.abs(fine - coarse))) if mat.size else 0.0
    return HessianForm(base=pb.base, chart_id=pb.retraction.chart.chart_id,
                       matrix=mat, source="fd", fd_discrepancy=discrepancy)


@dataclass
class InvarianceReport:
    """On-cone and off-cone quadratic-form discrepancies of two pull-backs."""

    max_on_cone: float
    max_off_cone: float
    n_on_cone: int
    tol: float
    hessian_1: HessianForm
    hessian_2: HessianForm

    @property
    def passed(self) -> bool:
        return self.max_on_cone <= self.tol


def invariance_check(prob: ProblemInstance, p, cert: KKTCertificate,
                     pb1: PulledBackProblem, pb2: PulledBackProblem,
                     tol: float = 1e-5, n_samples: int = 200,
                     seed: int = 0) -> InvarianceReport:
    """Compare two pulled-back Hessians on the critical cone.

    The multiplier is transported into each linearizing map's frame with the
    inverse-transpose transition Jacobian; sampled critical-cone directions
    are transported between the retraction frames the same way.  Off-cone
    directions are evaluated as well and their (expected, permitted)
    discrepancy is recorded without being asserted.
    """
    crit = critical_cone(prob, p, cert, adapted_kind=cert.adapted_kind)
    cert_chart = _adapted_chart(prob, p, cert)

    def mu_for(pb):
        if pb.linmap.chart is None or pb.linmap.chart.chart_id == cert_chart.chart_id:
            return cert.mu_chart
        return push_covector(cert_chart, pb.linmap.chart, cert.mu_chart)

    h1 = lagrangian_hessian(pb1, mu_for(pb1))
    h2 = lagrangian_hessian(pb2, mu_for(pb2))

    # cone_m lives in the default chart frame at p; transport sampled
    # directions into each retraction's frame when those differ.
    default_chart = prob.domain.chart(p, "default")

    def dir_map(pb):
        if pb.retraction.chart.chart_id == default_chart.chart_id:
            return None
        return transition_jacobian(default_chart, pb.retraction.chart)

    j1 = dir_map(pb1)
    j2 = dir_map(pb2)
    rng = np.random.default_rng(seed)
    vs = sample_cone(crit.cone_m, rng, n_samples)
    max_on = 0.0
    n_on = 0
    for v in vs:
        if np.linalg.norm(v) < 1e-12:
            continue
        n_on += 1
        v1 = v if j1 is None else j1 @ v
        v2 = v if j2 is None else j2 @ v
        max_on = max(max_on, abs(h1(v1) - h2(v2)))
    max_off = 0.0
    for _ in range(n_samples // 2):
        v = rng.standard_normal(default_chart.dim)
        v /= np.linalg.norm(v)
        v1 = v if j1 is None else j1 @ v
        v2 = v if j2 is None else j2 @ v
        max_off = max(max_off, abs(h1(v1) - h2(v2)))
    return InvarianceReport(max_on_cone=max_on, max_off_cone=max_off,
                            n_on_cone=n_on, tol=tol, hessian_1=h1, hessian_2=h2)


def _adapted_chart(prob, p, cert):
    q = prob.constraint(p)
    return prob.constraint_set.adapted_chart(q, kind=cert.adapted_kind).chart


def _fd_second_tensor(fn, dim, h):
    f0 = np.asarray(fn(np.zeros(dim)), dtype=float)
    tensor = np.zeros((f0.size, dim, dim))
    for i in range(dim):
        ei = np.zeros(dim)
        ei[i] = h
        tensor[:, i, i] = (np.asarray(fn(ei)) - 2.0 * f0 + np.asarray(fn(-ei))) / (h * h)
        for j in range(i + 1, dim):
            ej = np.zeros(dim)
            ej[j] = h
            val = (np.asarray(fn(ei + ej)) - np.asarray(fn(ei - ej))
                   - np.asarray(fn(-ei + ej)) + np.asarray(fn(-ei - ej))) / (4.0 * h * h)
            tensor[:, i, j] = val
            tensor[:, j, i] = val
    return tensor


def transition_second_derivative(lm1: LinearizingMap, lm2: LinearizingMap,
                                 h: float = 1e-4) -> np.ndarray:
    """Second derivative tensor of ``Theta = lm1 o lm2^{-1}`` at 0."""
    if not np.allclose(lm1.base, lm2.base, atol=1e-10):
        raise ValueError("transition needs linearizing maps with a shared base point")
    theta = lambda v: lm1(lm2.inverse(v))
    return _fd_second_tensor(theta, lm1.dim, h)


def second_order_consistent(lm1: LinearizingMap, lm2: LinearizingMap,
                            h: float = 1e-4, tol: float = 1e-6) -> bool:
    """True iff the transition ``Theta = lm1 o lm2^{-1}`` has vanishing
    second derivative at the shared base point."""
    tensor = transition_second_derivative(lm1, lm2, h)
    return float(np.max(np.abs(tensor))) <= tol


@dataclass
class SecondOrderVerdict:
    status: str  # "holds" | "fails" | "inconclusive"
    min_value: Optional[float]
    witness: Optional[np.ndarray]

    @property
    def holds(self) -> bool:
        return self.status == "holds"


def _quadratic_minimum_on_cone(matrix: np.ndarray, cone: PolyhedralCone,
                               seed: int = 0, n_starts: int = 24):
    """Minimum of ``v^T H v`` over the cone intersected with the unit sphere.

    Candidates come from eigen-decompositions of ``H`` restricted to the span
    of every face (the constrained stationary points of the quadratic form),
    cross-checked by projected multi-start minimization seeded from rays and
    random cone samples.  Returns ``(min_value, argmin)`` or ``None`` when
    the cone is ``{0}``.
    """
    canon = canonicalize(cone)
    dim = canon.dim
    best = None

    def consider(v):
        nonlocal best
        norm = np.linalg.norm(v)
        if norm < 1e-10:
            return
        v = v / norm
        if not canon.contains(v, 1e-9):
            return
        val = float(v @ matrix @ v)
        if best is None or val < best[0]:
            best = (val, v)

    if canon.n_ineq == 0:
        basis = null_space(canon.a_eq, dim)
        if basis.shape[1] == 0:
            return None
        reduced = basis.T @ matrix @ basis
        vals, vecs = np.linalg.eigh(0.5 * (reduced + reduced.T))
        return float(vals[0]), basis @ vecs[:, 0]

    # face enumeration: stationary points of the form live on face spans
    n_rows = canon.n_ineq
    if n_rows > 16:
        raise DimensionTooLargeError("face enumeration capped at 16 inequality rows")
    for r in range(n_rows + 1):
        for subset in itertools.combinations(range(n_rows), r):
            rows = np.vstack([canon.a_eq, canon.a_ineq[list(subset)]]) \
                if subset else canon.a_eq
            basis = null_space(rows, dim)
            if basis.shape[1] == 0:
                continue
            reduced = basis.T @ matrix @ basis
            vals, vecs = np.linalg.eigh(0.5 * (reduced + reduced.T))
            for i in range(vals.size):
                cand = basis @ vecs[:, i]
                consider(cand)
                consider(-cand)

    # multi-start projected refinement from rays and random cone samples
    rays, lin = extreme_rays(canon)
    for ray in rays:
        consider(ray)
    rng = np.random.default_rng(seed)
    gen_cols = []
    if rays:
        gen_cols.extend(rays)
    if lin.size:
        gen_cols.extend([lin[:, j] for j in range(lin.shape[1])])
        gen_cols.extend([-lin[:, j] for j in range(lin.shape[1])])
    gen = np.column_stack(gen_cols) if gen_cols else np.zeros((dim, 0))

    def project(v):
        if gen.shape[1] == 0:
            return np.zeros(dim)
        coef, _ = scipy.optimize.nnls(gen, v)
        return gen @ coef

    starts = sample_cone(canon, rng, n_starts, rays=rays, lineality=lin)
    for v in starts:
        if np.linalg.norm(v) < 1e-12:
            continue
        v = v / np.linalg.norm(v)
        step = 0.5
        for _ in range(120):
            grad = 2.0 * (matrix @ v - (v @ matrix @ v) * v)
            w = project(v - step * grad)
            norm = np.linalg.norm(w)
            if norm < 1e-12:
                break
            w = w / norm
            if float(w @ matrix @ w) <= float(v @ matrix @ v):
                v = w
            else:
                step *= 0.5
                if step < 1e-6:
                    break
        consider(v)
    return best


def sosc_check(hessian: HessianForm, crit: CriticalCone, tol: float = 1e-8,
               seed: int = 0) -> SecondOrderVerdict:
    """Decide ``H[v, v] > 0`` on the critical cone minus the origin."""
    cone = crit.cone_m
    if cone.dim > 12 and not cone.is_subspace():
        return SecondOrderVerdict(status="inconclusive", min_value=None, witness=None)
    result = _quadratic_minimum_on_cone(hessian.matrix, cone, seed=seed)
    if result is None:
        return SecondOrderVerdict(status="holds", min_value=None, witness=None)
    min_val, witness = result
    if min_val > tol:
        return SecondOrderVerdict(status="holds", min_value=min_val, witness=None)
    return SecondOrderVerdict(status="fails", min_value=min_val, witness=witness)


def sonc_check(hessian: HessianForm, crit: CriticalCone, tol: float = 1e-8,
               seed: int = 0) -> SecondOrderVerdict:
    """Decide ``H[v, v] >= 0`` on the critical cone (threshold ``-tol``)."""
    cone = crit.cone_m
    if cone.dim > 12 and not cone.is_subspace():
        return SecondOrderVerdict(status="inconclusive", min_value=None, witness=None)
    result = _quadratic_minimum_on_cone(hessian.matrix, cone, seed=seed)
    if result is None:
        return SecondOrderVerdict(status="holds", min_value=None, witness=None)
    min_val, witness = result
    if min_val >= -tol:
        return SecondOrderVerdict(status="holds", min_value=min_val, witness=None)
    return SecondOrderVerdict(status="fails", min_value=min_val, witness=witness)
