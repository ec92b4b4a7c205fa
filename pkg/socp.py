"""
Second-order cone programming

    minimize    c^T x
    subject to  ||A_i x + b_i||_2 <= f_i^T x + g_i,   i = 1..N
                x_j >= 0,                            j in nonneg

Solved with a homogeneous self-dual primal-dual interior-point method using
Nesterov-Todd scaling and a Mehrotra predictor-corrector step. Internally the
constraints are written G x + s = h with s in a product of the nonnegative
orthant and second-order cones; the cone i slack is s = (f^T x + g, A x + b).
Each Newton system goes through a QR factorization of the scaled matrix
W^-1 G, refined against the unscaled KKT residual.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg

from utils import InvalidArgumentError


logger = logging.getLogger(__name__)

STEP_FRACTION = 0.99
# ridge rows under W^-1 G, relative to its largest column norm
RIDGE = 1e-8
# certificates are tested once tau is this small relative to the iterates
CERTIFICATE_TAU = 1e-8
# iterates are renormalized once their norm passes this
RESCALE_LIMIT = 1e8


class SolverStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITERS = "max_iters"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class SecondOrderCone:
    """||A x + b||_2 <= f^T x + g"""
    A: np.ndarray
    b: np.ndarray
    f: np.ndarray
    g: float = 0.0


@dataclass
class ConicProgram:
    n: int
    c: np.ndarray
    cones: List[SecondOrderCone] = field(default_factory=list)
    nonneg: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """Normalize array shapes and check every dimension against n"""
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        if self.c.size != self.n:
            raise InvalidArgumentError(f"objective has length {self.c.size}, expected {self.n}")
        self.nonneg = np.unique(np.asarray(self.nonneg, dtype=int).reshape(-1))
        if self.nonneg.size and (self.nonneg[0] < 0 or self.nonneg[-1] >= self.n):
            raise InvalidArgumentError("nonneg index out of range")
        for i, cone in enumerate(self.cones):
            cone.A = np.atleast_2d(np.asarray(cone.A, dtype=float))
            cone.b = np.asarray(cone.b, dtype=float).reshape(-1)
            cone.f = np.asarray(cone.f, dtype=float).reshape(-1)
            cone.g = float(cone.g)
            rows, cols = cone.A.shape
            if rows < 1:
                raise InvalidArgumentError(f"cone {i} has no rows")
            if cols != self.n or cone.f.size != self.n:
                raise InvalidArgumentError(f"cone {i} does not match {self.n} variables")
            if cone.b.size != rows:
                raise InvalidArgumentError(f"cone {i}: b has length {cone.b.size}, expected {rows}")
        if not self.cones and not self.nonneg.size:
            raise InvalidArgumentError("program has no constraints")


@dataclass
class SolverSettings:
    max_iters: int = 200
    tol_feas: float = 1e-7
    tol_gap: float = 1e-7
    verbose: bool = False
    refinement: int = 3

    def __post_init__(self):
        if self.tol_feas <= 0 or self.tol_gap <= 0:
            raise InvalidArgumentError("solver tolerances must be positive")
        if self.max_iters < 0:
            raise InvalidArgumentError("max_iters must be non-negative")
        if self.refinement < 0:
            raise InvalidArgumentError("refinement must be non-negative")


@dataclass
class ConicSolution:
    status: SolverStatus
    x: np.ndarray
    objective: float
    primal_infeas: float
    gap_estimate: float
    iterations: int
    dual_infeas: float = float("nan")

    def summary(self) -> Dict[str, Any]:
        return {
            "status": self.status.value,
            "objective": self.objective,
            "primal_infeas": self.primal_infeas,
            "dual_infeas": self.dual_infeas,
            "gap_estimate": self.gap_estimate,
            "iterations": self.iterations,
        }


@dataclass
class FeasibilityReport:
    worst_violation: float
    per_cone: np.ndarray
    nonneg_violation: float = 0.0


def check_feasibility(p: ConicProgram, x: np.ndarray) -> FeasibilityReport:
    """Cone violations max(0, ||A x + b|| - f^T x - g) plus the nonneg violation"""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != p.n:
        raise InvalidArgumentError(f"point has length {x.size}, expected {p.n}")
    per_cone = np.array([
        max(0.0, float(np.linalg.norm(cone.A @ x + cone.b) - cone.f @ x - cone.g))
        for cone in p.cones
    ])
    nonneg = max(0.0, float(-np.min(x[p.nonneg]))) if p.nonneg.size else 0.0
    worst = max(float(per_cone.max()) if per_cone.size else 0.0, nonneg)
    return FeasibilityReport(worst_violation=worst, per_cone=per_cone, nonneg_violation=nonneg)


def dump_program(p: ConicProgram, path: str) -> None:
    """Plain-text dump of a program for offline cross-checking"""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"n {p.n}\n")
        f.write("c\n")
        np.savetxt(f, p.c[None, :], fmt="%.17g")
        f.write(f"nonneg {p.nonneg.size}\n")
        if p.nonneg.size:
            np.savetxt(f, p.nonneg[None, :], fmt="%d")
        for i, cone in enumerate(p.cones):
            f.write(f"cone {i} rows {cone.A.shape[0]} g {cone.g:.17g}\n")
            f.write("A\n")
            np.savetxt(f, cone.A, fmt="%.17g")
            f.write("b\n")
            np.savetxt(f, cone.b[None, :], fmt="%.17g")
            f.write("f\n")
            np.savetxt(f, cone.f[None, :], fmt="%.17g")


class _NumericalIssue(Exception):
    pass


@dataclass
class _SocBlock:
    cols: np.ndarray
    G: np.ndarray
    h: np.ndarray
    sl: slice


class _Layout:
    """G, h in block form: orthant rows first, then one block per cone"""

    def __init__(self, p: ConicProgram):
        self.n = p.n
        self.orthant = p.nonneg
        self.l = p.nonneg.size
        self.socs: List[_SocBlock] = []
        offset = self.l
        for cone in p.cones:
            G = np.vstack([-cone.f[None, :], -cone.A])
            cols = np.flatnonzero(np.any(G != 0.0, axis=0))
            rows = G.shape[0]
            self.socs.append(_SocBlock(cols, G[:, cols], np.concatenate([[cone.g], cone.b]),
                                       slice(offset, offset + rows)))
            offset += rows
        self.m = offset
        self.h = np.zeros(self.m)
        for blk in self.socs:
            self.h[blk.sl] = blk.h
        self.degree = self.l + len(self.socs)

    def G_mul(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(self.m)
        out[:self.l] = -x[self.orthant]
        for blk in self.socs:
            out[blk.sl] = blk.G @ x[blk.cols]
        return out

    def Gt_mul(self, z: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n)
        out[self.orthant] -= z[:self.l]
        for blk in self.socs:
            out[blk.cols] += blk.G.T @ z[blk.sl]
        return out

    def identity(self) -> np.ndarray:
        e = np.zeros(self.m)
        e[:self.l] = 1.0
        for blk in self.socs:
            e[blk.sl.start] = 1.0
        return e

    def min_eig(self, v: np.ndarray) -> float:
        """Smallest 'eigenvalue' of v in the product cone (negative outside)"""
        vals = [float(np.min(v[:self.l]))] if self.l else []
        for blk in self.socs:
            u = v[blk.sl]
            vals.append(float(u[0] - np.linalg.norm(u[1:])))
        return min(vals)

    def circ(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = np.empty(self.m)
        out[:self.l] = u[:self.l] * v[:self.l]
        for blk in self.socs:
            a, b = u[blk.sl], v[blk.sl]
            out[blk.sl.start] = a @ b
            out[blk.sl.start + 1:blk.sl.stop] = a[0] * b[1:] + b[0] * a[1:]
        return out

    def inv_circ(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """x solving u o x = v"""
        out = np.empty(self.m)
        out[:self.l] = v[:self.l] / u[:self.l]
        for blk in self.socs:
            a, b = u[blk.sl], v[blk.sl]
            x0 = (a[0] * b[0] - a[1:] @ b[1:]) / _jdet(a)
            out[blk.sl.start] = x0
            out[blk.sl.start + 1:blk.sl.stop] = (b[1:] - x0 * a[1:]) / a[0]
        return out

    def max_step(self, v: np.ndarray, dv: np.ndarray) -> float:
        """Largest alpha with v + alpha dv in the cone (v interior)"""
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(dv))):
            raise _NumericalIssue("non-finite iterate or search direction")
        step = np.inf
        if self.l:
            neg = dv[:self.l] < 0
            if np.any(neg):
                step = float(np.min(-v[:self.l][neg] / dv[:self.l][neg]))
        for blk in self.socs:
            u, d = v[blk.sl], dv[blk.sl]
            a = d[0] ** 2 - d[1:] @ d[1:]
            b = u[0] * d[0] - u[1:] @ d[1:]
            c = _jdet(u)
            disc = b * b - a * c
            if a < 0 or (b < 0 and disc >= 0):
                denom = -b + np.sqrt(max(disc, 0.0))
                step = min(step, c / denom) if denom > 0 else 0.0
        return step


def _jdet(u: np.ndarray) -> float:
    """u0^2 - ||u1||^2 computed as a product for accuracy"""
    r = np.linalg.norm(u[1:])
    return float((u[0] - r) * (u[0] + r))


class _Scaling:
    """Nesterov-Todd scaling W with W z = W^{-1} s = lambda"""

    def __init__(self, layout: _Layout, s: Optional[np.ndarray] = None, z: Optional[np.ndarray] = None):
        self.layout = layout
        if s is None:
            self.d = np.ones(layout.l)
            self.soc = []
            for blk in layout.socs:
                wbar = np.zeros(blk.sl.stop - blk.sl.start)
                wbar[0] = 1.0
                self.soc.append((1.0, wbar))
            return
        self.d = np.sqrt(s[:layout.l] / z[:layout.l])
        self.soc = []
        for blk in layout.socs:
            sb, zb = s[blk.sl], z[blk.sl]
            sdet, zdet = _jdet(sb), _jdet(zb)
            if not (sdet > 0 and zdet > 0 and sb[0] > 0 and zb[0] > 0):
                raise _NumericalIssue("iterate left the cone interior")
            sn, zn = np.sqrt(sdet), np.sqrt(zdet)
            sbar, zbar = sb / sn, zb / zn
            gamma = np.sqrt((1.0 + sbar @ zbar) / 2.0)
            jz = zbar.copy()
            jz[1:] = -jz[1:]
            wbar = (sbar + jz) / (2.0 * gamma)
            self.soc.append((float(np.sqrt(sn / zn)), wbar))

    @staticmethod
    def _boost(wbar: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Hyperbolic rotation of v; a 2-D v is mapped column by column"""
        a, u = wbar[0], wbar[1:]
        uv = u @ v[1:]
        out = np.empty_like(v)
        out[0] = a * v[0] + uv
        out[1:] = v[1:] + np.multiply.outer(u, v[0] + uv / (1.0 + a))
        return out

    def _block(self, eta: float, wbar: np.ndarray, u: np.ndarray, inverse: bool) -> np.ndarray:
        if not inverse:
            return eta * self._boost(wbar, u)
        ju = u.copy()
        ju[1:] = -ju[1:]
        r = self._boost(wbar, ju)
        r[1:] = -r[1:]
        return r / eta

    def apply(self, v: np.ndarray, inverse: bool = False) -> np.ndarray:
        out = np.empty_like(v)
        l = self.layout.l
        out[:l] = v[:l] / self.d if inverse else v[:l] * self.d
        for blk, (eta, wbar) in zip(self.layout.socs, self.soc):
            out[blk.sl] = self._block(eta, wbar, v[blk.sl], inverse)
        return out

    def scaled_G(self) -> np.ndarray:
        """W^-1 G as a dense matrix"""
        layout = self.layout
        B = np.zeros((layout.m, layout.n))
        B[np.arange(layout.l), layout.orthant] = -1.0 / self.d
        for blk, (eta, wbar) in zip(layout.socs, self.soc):
            if blk.cols.size:
                B[blk.sl, blk.cols] = self._block(eta, wbar, blk.G, inverse=True)
        return B


class _KktSolver:
    """Solves G^T dz = rx, G dx - W^2 dz = rz

    With B = W^-1 G this is B^T B dx = rx + B^T W^-1 rz and dz = W^-1 (B dx - W^-1 rz).
    Only the triangular factor of [B; ridge I] is kept; every solve is refined
    against the unscaled residual rx - G^T dz until it stops falling.
    """

    def __init__(self, layout: _Layout, scaling: _Scaling, refinement: int):
        self.layout = layout
        self.scaling = scaling
        self.refinement = refinement
        self.B = scaling.scaled_G()
        if not np.all(np.isfinite(self.B)):
            raise _NumericalIssue("non-finite scaled constraint matrix")
        scale = max(1.0, float(np.max(np.linalg.norm(self.B, axis=0)))) if layout.n else 1.0
        self.R = np.linalg.qr(np.vstack([self.B, RIDGE * scale * np.eye(layout.n)]), mode="r")
        if not np.all(np.isfinite(self.R)) or np.any(np.diag(self.R) == 0.0):
            raise _NumericalIssue("singular scaled constraint matrix")

    def _normal_solve(self, rhs: np.ndarray) -> np.ndarray:
        y = scipy.linalg.solve_triangular(self.R, rhs, trans="T")
        return scipy.linalg.solve_triangular(self.R, y)

    def _dz(self, dx: np.ndarray, rz_scaled: np.ndarray) -> np.ndarray:
        return self.scaling.apply(self.B @ dx - rz_scaled, inverse=True)

    def solve(self, rx: np.ndarray, rz: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        rz_scaled = self.scaling.apply(rz, inverse=True)
        dx = self._normal_solve(rx + self.B.T @ rz_scaled)
        dz = self._dz(dx, rz_scaled)
        residual = rx - self.layout.Gt_mul(dz)
        size = float(np.linalg.norm(residual))
        for _ in range(self.refinement):
            if size == 0.0:
                break
            trial_x = dx + self._normal_solve(residual)
            trial_z = self._dz(trial_x, rz_scaled)
            trial_residual = rx - self.layout.Gt_mul(trial_z)
            trial_size = float(np.linalg.norm(trial_residual))
            halved = trial_size < 0.5 * size
            if trial_size < size:
                dx, dz, residual, size = trial_x, trial_z, trial_residual, trial_size
            if not halved:
                break
        return dx, dz


def _shift_into_cone(layout: _Layout, v: np.ndarray) -> np.ndarray:
    margin = layout.min_eig(v)
    if margin <= 1e-8 * max(1.0, float(np.linalg.norm(v))):
        v = v + (1.0 - margin) * layout.identity()
    return v


def solve(p: ConicProgram, s: Optional[SolverSettings] = None) -> ConicSolution:
    """Minimize c^T x over the program's cones; never raises on numerical outcomes"""
    settings = s or SolverSettings()
    p.validate()
    layout = _Layout(p)
    c, h = p.c, layout.h
    level = logging.INFO if settings.verbose else logging.DEBUG
    c_norm = max(1.0, float(np.linalg.norm(c)))
    h_norm = max(1.0, float(np.linalg.norm(h)))

    x = np.zeros(p.n)
    tau = 1.0

    def finish(status: SolverStatus, iterations: int, dres: float = float("nan")) -> ConicSolution:
        xh = x / tau if tau > 0 else x
        objective = float(c @ xh)
        viol = check_feasibility(p, xh).worst_violation if np.all(np.isfinite(xh)) else float("inf")
        gap = float("inf")
        if tau > 0 and np.all(np.isfinite(z)):
            absgap = max(float((s_vec / tau) @ (z / tau)), abs(objective + float(h @ z) / tau))
            gap = absgap / max(1.0, abs(objective))
        logger.log(level, "socp finished: %s after %d iterations (objective %.9g)",
                   status.value, iterations, objective)
        return ConicSolution(status=status, x=xh, objective=objective, primal_infeas=viol,
                             gap_estimate=gap, iterations=iterations, dual_infeas=dres)

    z = np.zeros(layout.m)
    s_vec = np.ones(layout.m)
    try:
        init = _KktSolver(layout, _Scaling(layout), settings.refinement)
        x, zp = init.solve(np.zeros(p.n), h)
        s_vec = _shift_into_cone(layout, -zp)
        _, z = init.solve(-c, np.zeros(layout.m))
        z = _shift_into_cone(layout, z)
    except _NumericalIssue as e:
        logger.warning("socp initialization failed: %s", e)
        return finish(SolverStatus.NUMERICAL_FAILURE, 0)
    kappa = 1.0
    e = layout.identity()

    for iteration in range(settings.max_iters + 1):
        # homogeneous embedding: a common rescaling keeps the iterate on its path
        scale = max(1.0, float(np.linalg.norm(x)), float(np.linalg.norm(z)), float(np.linalg.norm(s_vec)))
        if scale > RESCALE_LIMIT:
            x, s_vec, z = x / scale, s_vec / scale, z / scale
            tau, kappa = tau / scale, kappa / scale
            scale = max(1.0, float(np.linalg.norm(x)), float(np.linalg.norm(z)), float(np.linalg.norm(s_vec)))

        rx = layout.Gt_mul(z) + c * tau
        rz = layout.G_mul(x) + s_vec - h * tau
        rt = kappa + c @ x + h @ z

        xh, zh, sh = x / tau, z / tau, s_vec / tau
        pcost, dcost = float(c @ xh), float(-h @ zh)
        absgap = max(float(sh @ zh), abs(pcost - dcost))
        gap = absgap / max(1.0, abs(pcost))
        viol = check_feasibility(p, xh).worst_violation if np.all(np.isfinite(xh)) else float("inf")
        dres = float(np.linalg.norm(layout.Gt_mul(zh) + c)) / c_norm
        logger.log(level, "%3d  pcost % .9e  dcost % .9e  gap %.2e  pres %.2e  dres %.2e  tau %.2e  kappa %.2e",
                   iteration, pcost, dcost, gap, viol, dres, tau, kappa)

        if viol <= settings.tol_feas and dres <= settings.tol_feas and gap <= settings.tol_gap:
            return finish(SolverStatus.OPTIMAL, iteration, dres)

        if tau < kappa or tau <= CERTIFICATE_TAU * scale:
            hz, cx = float(h @ z), float(c @ x)
            if hz < 0 and np.linalg.norm(layout.Gt_mul(z)) <= settings.tol_feas * c_norm * -hz:
                return finish(SolverStatus.INFEASIBLE, iteration, dres)
            if cx < 0 and np.linalg.norm(layout.G_mul(x) + s_vec) <= settings.tol_feas * h_norm * -cx:
                return finish(SolverStatus.UNBOUNDED, iteration, dres)

        if iteration == settings.max_iters:
            return finish(SolverStatus.MAX_ITERS, iteration, dres)

        try:
            scaling = _Scaling(layout, s_vec, z)
            kkt = _KktSolver(layout, scaling, settings.refinement)
            lam = scaling.apply(z)
            mu = (s_vec @ z + tau * kappa) / (layout.degree + 1)
            x1, z1 = kkt.solve(-c, h)
            denom = c @ x1 + h @ z1 - kappa / tau

            def direction(sigma: float, rs: np.ndarray, rk: float):
                ds_scaled = layout.inv_circ(lam, rs)
                bx = -(1.0 - sigma) * rx
                bz = -(1.0 - sigma) * rz - scaling.apply(ds_scaled)
                bt = -(1.0 - sigma) * rt - rk / tau
                x2, z2 = kkt.solve(bx, bz)
                dtau = (bt - c @ x2 - h @ z2) / denom
                dx = x2 + dtau * x1
                dz = z2 + dtau * z1
                ds = scaling.apply(ds_scaled - scaling.apply(dz))
                dkappa = (rk - kappa * dtau) / tau
                return dx, ds, dz, dtau, dkappa

            def step_length(ds, dz, dtau, dkappa) -> float:
                alpha = min(layout.max_step(s_vec, ds), layout.max_step(z, dz))
                if dtau < 0:
                    alpha = min(alpha, -tau / dtau)
                if dkappa < 0:
                    alpha = min(alpha, -kappa / dkappa)
                return alpha

            lam_sq = layout.circ(lam, lam)
            dx, ds, dz, dtau, dkappa = direction(0.0, -lam_sq, -tau * kappa)
            alpha_aff = min(1.0, step_length(ds, dz, dtau, dkappa))
            sigma = float(np.clip((1.0 - alpha_aff) ** 3, 0.0, 1.0))

            correction = layout.circ(scaling.apply(ds, inverse=True), scaling.apply(dz))
            rs = -lam_sq - correction + sigma * mu * e
            rk = -tau * kappa - dtau * dkappa + sigma * mu
            dx, ds, dz, dtau, dkappa = direction(sigma, rs, rk)
            alpha = min(1.0, STEP_FRACTION * step_length(ds, dz, dtau, dkappa))
        except (_NumericalIssue, np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError) as err:
            logger.warning("socp numerical failure at iteration %d: %s", iteration, err)
            return finish(SolverStatus.NUMERICAL_FAILURE, iteration, dres)

        if not (np.isfinite(alpha) and alpha > 1e-12) or not np.all(np.isfinite(dx)):
            logger.warning("socp stalled at iteration %d (step %.3g)", iteration, alpha)
            return finish(SolverStatus.NUMERICAL_FAILURE, iteration, dres)

        x = x + alpha * dx
        s_vec = s_vec + alpha * ds
        z = z + alpha * dz
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa

    return finish(SolverStatus.MAX_ITERS, settings.max_iters)
