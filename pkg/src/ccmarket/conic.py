"""Primal-dual interior-point solver for LP/QP/SOCP in ConicProgram form.

Algorithm: Mehrotra predictor-corrector with Nesterov-Todd scaling on the
second-order cones, dense linear algebra, static regularization on the KKT
system, and one step of iterative refinement per solve.  The internal
standard form is

    min  c'x + x' diag(q) x
    s.t. A x = b                     (duals y,  L += y'(Ax - b))
         G x + s = h,  s in K        (duals z in K*, L += z'(Gx - h))

with K a product of a nonnegative orthant (inequality rows, then finite
lower bounds, then finite upper bounds) and second-order cones.  Duals are
mapped back to the originating rows, bounds, and cones of the program.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .formulations import ConicProgram, fix_variables


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITER_LIMIT = "iter_limit"
    NUMERICAL_TROUBLE = "numerical_trouble"


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-8
    max_iterations: int = 200
    step_safeguard: float = 0.99
    regularization: float = 1e-10

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class ConicSolution:
    status: SolveStatus
    x: np.ndarray
    objective: float
    eq_duals: np.ndarray          # y: L += y'(A_eq x - b_eq)
    ub_duals: np.ndarray          # >= 0: L += z'(A_ub x - b_ub)
    lb_bound_duals: np.ndarray    # >= 0: L += eta_lo'(lb - x)
    ub_bound_duals: np.ndarray    # >= 0: L += eta_up'(x - ub)
    cone_duals: list[np.ndarray]  # kappa in Q, L -= kappa0*scale*head + kappar'tail
    primal_infeasibility: float
    dual_infeasibility: float
    complementarity_gap: float
    iterations: int
    message: str = ""
    certificate: dict | None = None

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


# ---------------------------------------------------------------------------
# composite cone helpers: vectors are stored as (linear block, soc blocks)

class _Cone:
    def __init__(self, m_lin: int, soc_dims: list[int]):
        self.m_lin = m_lin
        self.soc_dims = soc_dims
        self.starts = []
        ofs = m_lin
        for d in soc_dims:
            self.starts.append(ofs)
            ofs += d
        self.size = ofs
        self.degree = m_lin + len(soc_dims)

    def blocks(self, v):
        for st, d in zip(self.starts, self.soc_dims):
            yield v[st:st + d]

    def margin(self, v) -> float:
        """Distance-to-boundary measure: min over blocks (>0 strictly inside)."""
        m = np.inf
        if self.m_lin:
            m = float(np.min(v[:self.m_lin]))
        for b in self.blocks(v):
            m = min(m, float(b[0] - np.linalg.norm(b[1:])))
        return m

    def unit(self) -> np.ndarray:
        e = np.zeros(self.size)
        e[:self.m_lin] = 1.0
        for st in self.starts:
            e[st] = 1.0
        return e

    def shift_inside(self, v, pad=1.0) -> np.ndarray:
        v = v.copy()
        if self.m_lin:
            m = np.min(v[:self.m_lin]) if self.m_lin else np.inf
            if m <= 0:
                v[:self.m_lin] += (pad - m)
        for st, d in zip(self.starts, self.soc_dims):
            b = v[st:st + d]
            m = b[0] - np.linalg.norm(b[1:])
            if m <= 0:
                v[st] += (pad - m)
        return v

    def product(self, u, v) -> np.ndarray:
        """Jordan product u o v blockwise."""
        out = np.empty(self.size)
        if self.m_lin:
            out[:self.m_lin] = u[:self.m_lin] * v[:self.m_lin]
        for st, d in zip(self.starts, self.soc_dims):
            ub, vb = u[st:st + d], v[st:st + d]
            out[st] = ub @ vb
            out[st + 1:st + d] = ub[0] * vb[1:] + vb[0] * ub[1:]
        return out

    def solve_product(self, lam, d) -> np.ndarray:
        """x with lam o x = d."""
        out = np.empty(self.size)
        if self.m_lin:
            out[:self.m_lin] = d[:self.m_lin] / lam[:self.m_lin]
        for st, dim in zip(self.starts, self.soc_dims):
            lb, db = lam[st:st + dim], d[st:st + dim]
            nl = np.linalg.norm(lb[1:])
            a = (lb[0] - nl) * (lb[0] + nl)
            x0 = (lb[0] * db[0] - lb[1:] @ db[1:]) / a
            out[st] = x0
            out[st + 1:st + dim] = (db[1:] - x0 * lb[1:]) / lb[0]
        return out

    def max_step(self, v, dv) -> float:
        """sup {t : v + t*dv in K} for v strictly inside."""
        t = np.inf
        if self.m_lin:
            neg = dv[:self.m_lin] < 0
            if np.any(neg):
                t = float(np.min(-v[:self.m_lin][neg] / dv[:self.m_lin][neg]))
        for st, d in zip(self.starts, self.soc_dims):
            vb, db = v[st:st + d], dv[st:st + d]
            a = db[0] ** 2 - db[1:] @ db[1:]
            b = 2.0 * (vb[0] * db[0] - vb[1:] @ db[1:])
            c = vb[0] ** 2 - vb[1:] @ vb[1:]
            if abs(a) < 1e-14 * max(1.0, abs(b)):
                if b < 0:
                    t = min(t, -c / b)
                continue
            disc = b * b - 4.0 * a * c
            if a > 0:
                if disc > 0:
                    r1 = (-b - math.sqrt(disc)) / (2 * a)
                    if r1 > 0:
                        t = min(t, r1)
            else:
                disc = max(disc, 0.0)
                r2 = (-b - math.sqrt(disc)) / (2 * a)
                if r2 > 0:
                    t = min(t, r2)
        return t


class _NTScaling:
    """Nesterov-Todd scaling point for the composite cone: W z = W^{-1} s = lam."""

    def __init__(self, cone: _Cone, s, z):
        self.cone = cone
        self.w_lin = np.sqrt(s[:cone.m_lin] / z[:cone.m_lin]) if cone.m_lin else np.zeros(0)
        self.lam_lin = np.sqrt(s[:cone.m_lin] * z[:cone.m_lin]) if cone.m_lin else np.zeros(0)
        self.eta = []
        self.v = []
        self.lam_soc = []
        for st, d in zip(cone.starts, cone.soc_dims):
            sb, zb = s[st:st + d], z[st:st + d]
            # stable J-norms near the boundary: (v0 - ||v1||)(v0 + ||v1||)
            ns, nz = np.linalg.norm(sb[1:]), np.linalg.norm(zb[1:])
            a = math.sqrt(max(sb[0] - ns, 1e-300) * (sb[0] + ns))
            b = math.sqrt(max(zb[0] - nz, 1e-300) * (zb[0] + nz))
            sbar, zbar = sb / a, zb / b
            gamma = math.sqrt((1.0 + sbar @ zbar) / 2.0)
            wbar = np.empty(d)
            wbar[0] = (sbar[0] + zbar[0]) / (2 * gamma)
            wbar[1:] = (sbar[1:] - zbar[1:]) / (2 * gamma)
            eta = math.sqrt(a / b)
            v = wbar.copy()
            v[0] += 1.0
            v /= math.sqrt(2.0 * (wbar[0] + 1.0))
            self.eta.append(eta)
            self.v.append(v)
            lam = self._apply_block(v, eta, zb)
            self.lam_soc.append(lam)

    @staticmethod
    def _apply_block(v, eta, u):
        """W u = eta*(2 v (v'u) - J u)."""
        ju = u.copy()
        ju[1:] = -ju[1:]
        return eta * (2.0 * v * (v @ u) - ju)

    @staticmethod
    def _apply_inv_block(v, eta, u):
        """W^{-1} u = (1/eta)*(2 (Jv)((Jv)'u) - J u)."""
        jv = v.copy()
        jv[1:] = -jv[1:]
        ju = u.copy()
        ju[1:] = -ju[1:]
        return (2.0 * jv * (jv @ u) - ju) / eta

    def lam(self) -> np.ndarray:
        out = np.empty(self.cone.size)
        out[:self.cone.m_lin] = self.lam_lin
        for st, d, lam in zip(self.cone.starts, self.cone.soc_dims, self.lam_soc):
            out[st:st + d] = lam
        return out

    def apply(self, u) -> np.ndarray:
        out = np.empty_like(u)
        c = self.cone
        out[:c.m_lin] = self.w_lin * u[:c.m_lin]
        for st, d, v, eta in zip(c.starts, c.soc_dims, self.v, self.eta):
            out[st:st + d] = self._apply_block(v, eta, u[st:st + d])
        return out

    def apply_inv(self, u) -> np.ndarray:
        out = np.empty_like(u)
        c = self.cone
        out[:c.m_lin] = u[:c.m_lin] / self.w_lin
        for st, d, v, eta in zip(c.starts, c.soc_dims, self.v, self.eta):
            out[st:st + d] = self._apply_inv_block(v, eta, u[st:st + d])
        return out

    def apply_inv_mat(self, U) -> np.ndarray:
        """W^{-1} applied to each column of U (rows indexed by cone coords)."""
        out = np.empty_like(U)
        c = self.cone
        if c.m_lin:
            out[:c.m_lin] = U[:c.m_lin] / self.w_lin[:, None]
        for st, d, v, eta in zip(c.starts, c.soc_dims, self.v, self.eta):
            blk = U[st:st + d]
            jv = v.copy()
            jv[1:] = -jv[1:]
            jb = blk.copy()
            jb[1:] = -jb[1:]
            out[st:st + d] = (2.0 * np.outer(jv, jv @ blk) - jb) / eta
        return out


# ---------------------------------------------------------------------------

@dataclass
class _Internal:
    """ConicProgram lowered to (A, b, G, h, K) with maps back to the source."""
    prog: ConicProgram
    A: np.ndarray
    b: np.ndarray
    G: np.ndarray
    h: np.ndarray
    cone: _Cone
    lb_rows: list[tuple[int, int]]   # (var, G-row)
    ub_rows: list[tuple[int, int]]
    m_ub: int


def _lower(prog: ConicProgram) -> _Internal:
    n = prog.n
    parts, rhs = [prog.A_ub], [prog.b_ub]
    lb_rows, ub_rows = [], []
    r = len(prog.b_ub)
    for j in range(n):
        if np.isfinite(prog.lb[j]):
            e = np.zeros(n)
            e[j] = -1.0
            parts.append(e[None, :])
            rhs.append(np.array([-prog.lb[j]]))
            lb_rows.append((j, r))
            r += 1
    for j in range(n):
        if np.isfinite(prog.ub[j]):
            e = np.zeros(n)
            e[j] = 1.0
            parts.append(e[None, :])
            rhs.append(np.array([prog.ub[j]]))
            ub_rows.append((j, r))
            r += 1
    m_lin = r
    soc_dims = []
    for cone in prog.cones:
        d = 1 + cone.A_tail.shape[0]
        soc_dims.append(d)
        Gk = np.vstack([cone.scale * cone.a_head[None, :], cone.A_tail])
        parts.append(-Gk)
        rhs.append(np.concatenate([[cone.scale * cone.b_head], cone.b_tail]))
    G = np.vstack(parts) if parts else np.zeros((0, n))
    hv = np.concatenate(rhs) if rhs else np.zeros(0)
    return _Internal(prog, prog.A_eq, prog.b_eq, G, hv,
                     _Cone(m_lin, soc_dims), lb_rows, ub_rows, len(prog.b_ub))


class _KKT:
    """Factorization of [[2Q + G'W^-2 G + dI, A'], [A, -dI]] via the SPD Schur
    complement on the equality block."""

    def __init__(self, intr: _Internal, scaling, delta: float):
        n = intr.prog.n
        Gs = scaling.apply_inv_mat(intr.G) if intr.G.shape[0] else intr.G
        H = Gs.T @ Gs
        H[np.diag_indices_from(H)] += 2.0 * intr.prog.q + delta
        self.delta = delta
        self.intr = intr
        self.scaling = scaling
        self.Gs = Gs
        self.Hf = sla.cho_factor(H, lower=True, check_finite=False)
        A = intr.A
        self.meq = A.shape[0]
        if self.meq:
            HiAT = sla.cho_solve(self.Hf, A.T, check_finite=False)
            S = A @ HiAT
            S[np.diag_indices_from(S)] += delta
            self.Sf = sla.cho_factor(S, lower=True, check_finite=False)
            self.HiAT = HiAT

    def solve(self, r1: np.ndarray, r2: np.ndarray):
        """Solve [[H, A'], [A, -dI]] (dx, dy) = (r1, r2)."""
        Hir1 = sla.cho_solve(self.Hf, r1, check_finite=False)
        if not self.meq:
            return Hir1, np.zeros(0)
        rhs = self.intr.A @ Hir1 - r2
        dy = sla.cho_solve(self.Sf, rhs, check_finite=False)
        dx = Hir1 - self.HiAT @ dy
        return dx, dy

    def solve_refined(self, r1, r2):
        dx, dy = self.solve(r1, r2)
        # one iterative-refinement pass against the unregularized operator
        q2 = 2.0 * self.intr.prog.q
        res1 = r1 - (q2 * dx + self.Gs.T @ (self.Gs @ dx)) - \
            (self.intr.A.T @ dy if self.meq else 0.0)
        res2 = (r2 - self.intr.A @ dx) if self.meq else np.zeros(0)
        cx, cy = self.solve(res1, res2)
        return dx + cx, dy + cy


def _presolve_fixed(prog: ConicProgram):
    fixed = {j: float(prog.lb[j]) for j in range(prog.n)
             if np.isfinite(prog.lb[j]) and prog.lb[j] == prog.ub[j]}
    if not fixed:
        return None
    return fix_variables(prog, fixed)


def solve(prog: ConicProgram, config: SolverConfig | None = None) -> ConicSolution:
    """Solve a continuous ConicProgram to primal-dual optimality."""
    config = config or SolverConfig()
    if np.any(prog.integrality):
        raise ValueError("solve: integrality mask must be empty (relax or fix first)")

    fixres = _presolve_fixed(prog)
    if fixres is not None:
        inner = solve(fixres.program, config)
        return _lift_fixed_solution(prog, fixres, inner)

    intr = _lower(prog)
    n, meq, m = prog.n, intr.A.shape[0], intr.G.shape[0]
    cone = intr.cone
    c, q = prog.c, prog.q

    if m == 0:
        return _solve_equality_only(prog, intr, config)

    # -- initial point: one W=I KKT solve, then shift (s, z) into the cone
    scale0 = _IdentityScaling(cone)
    delta = max(config.regularization, 1e-12)
    kkt = _KKT(intr, scale0, delta)
    x, y = kkt.solve_refined(-c + intr.G.T @ intr.h, intr.b)
    s_raw = intr.h - intr.G @ x
    s = cone.shift_inside(s_raw)
    z = cone.shift_inside(-s_raw)

    resx0 = max(1.0, float(np.linalg.norm(c)))
    resy0 = max(1.0, float(np.linalg.norm(intr.b))) if meq else 1.0
    resz0 = max(1.0, float(np.linalg.norm(intr.h)))

    best = None
    status = SolveStatus.ITER_LIMIT
    message = "iteration limit reached"
    certificate = None
    small_steps = 0
    it = 0

    for it in range(1, config.max_iterations + 1):
        rx = c + 2.0 * q * x + (intr.A.T @ y if meq else 0.0) + intr.G.T @ z
        ry = (intr.A @ x - intr.b) if meq else np.zeros(0)
        rz = intr.G @ x + s - intr.h
        gap = float(s @ z)
        mu = gap / cone.degree

        pobj = prog.objective_value(x)
        xqx = float(q @ (x * x))
        dobj = prog.const - xqx - (intr.b @ y if meq else 0.0) - float(intr.h @ z)
        pres = max(float(np.linalg.norm(ry)) / resy0, float(np.linalg.norm(rz)) / resz0)
        dres = float(np.linalg.norm(rx)) / resx0
        relgap = abs(pobj - dobj) / max(1.0, abs(pobj))

        record = (pres, dres, relgap, x.copy(), y.copy(), z.copy(), s.copy(), it)
        if best is None or (pres + dres + relgap) < (best[0] + best[1] + best[2]):
            best = record

        if pres <= config.tolerance and dres <= config.tolerance and \
                relgap <= config.tolerance:
            status = SolveStatus.OPTIMAL
            message = "converged"
            best = record
            break

        cert = _infeasibility_certificate(intr, y, z, meq)
        if cert is not None:
            status = SolveStatus.INFEASIBLE
            message = "primal infeasibility certificate found"
            certificate = cert
            break
        cert = _unboundedness_certificate(intr, prog, x)
        if cert is not None:
            status = SolveStatus.UNBOUNDED
            message = "unboundedness ray found"
            certificate = cert
            break

        scaling = _NTScaling(cone, s, z)
        lam = scaling.lam()
        try:
            kkt = _KKT(intr, scaling, delta)
        except np.linalg.LinAlgError:
            status = SolveStatus.NUMERICAL_TROUBLE
            message = "KKT factorization failed"
            break

        def solve_once(bx, by, bz, bw):
            """Newton system: 2Q dx + A'dy + G'dz = bx; A dx = by;
            G dx + ds = bz; W^{-1}ds + W dz = bw."""
            r1 = bx - kkt.Gs.T @ (bw - scaling.apply_inv(bz))
            dx, dy = kkt.solve(r1, by)
            t = scaling.apply_inv(intr.G @ dx - bz) + bw
            dz = scaling.apply_inv(t)
            ds = scaling.apply(bw - t)
            return dx, dy, dz, ds

        def directions(bx, by, bz, bw):
            dx, dy, dz, ds = solve_once(bx, by, bz, bw)
            # one refinement pass on the full Newton system
            f1 = bx - (2.0 * q * dx + (intr.A.T @ dy if meq else 0.0) + intr.G.T @ dz)
            f2 = by - intr.A @ dx if meq else by
            f3 = bz - (intr.G @ dx + ds)
            f4 = bw - (scaling.apply_inv(ds) + scaling.apply(dz))
            cx, cy, cz, cs = solve_once(f1, f2, f3, f4)
            return dx + cx, dy + cy, dz + cz, ds + cs

        # predictor
        lamlam = cone.product(lam, lam)
        bw_aff = -cone.solve_product(lam, lamlam)
        dx_a, dy_a, dz_a, ds_a = directions(-rx, -ry, -rz, bw_aff)
        a_s = cone.max_step(s, ds_a)
        a_z = cone.max_step(z, dz_a)
        alpha_aff = min(1.0, a_s, a_z)
        gap_aff = float((s + alpha_aff * ds_a) @ (z + alpha_aff * dz_a))
        sigma = min(1.0, max(0.0, gap_aff / gap)) ** 3

        # corrector (combined step)
        corr = cone.product(scaling.apply_inv(ds_a), scaling.apply(dz_a))
        dcomb = lamlam + corr - sigma * mu * cone.unit()
        bw = -cone.solve_product(lam, dcomb)
        dx, dy, dz, ds = directions(-rx, -ry, -rz, bw)

        a_s = cone.max_step(s, ds)
        a_z = cone.max_step(z, dz)
        alpha = config.step_safeguard * min(1.0, a_s, a_z)
        if alpha < 1e-11:
            small_steps += 1
            if small_steps >= 3:
                status = SolveStatus.NUMERICAL_TROUBLE
                message = "step length collapsed"
                break
        else:
            small_steps = 0
        x = x + alpha * dx
        y = y + alpha * dy
        s = s + alpha * ds
        z = z + alpha * dz

    pres, dres, relgap, xb, yb, zb, sb, itb = best
    sol = _extract_solution(prog, intr, status, xb, yb, zb,
                            pres, dres, relgap, it, message, certificate)
    return sol


class _IdentityScaling:
    def __init__(self, cone: _Cone):
        self.cone = cone

    def apply(self, u):
        return u.copy()

    def apply_inv(self, u):
        return u.copy()

    def apply_inv_mat(self, U):
        return U.copy()


def _infeasibility_certificate(intr: _Internal, y, z, meq):
    """Farkas-style certificate: A'y + G'z ~ 0, z in K*, b'y + h'z < 0."""
    val = (intr.b @ y if meq else 0.0) + intr.h @ z
    if val >= 0:
        return None
    scale = max(np.max(np.abs(y)) if meq else 0.0, np.max(np.abs(z)), 1.0)
    resid = np.linalg.norm((intr.A.T @ y if meq else 0.0) + intr.G.T @ z, np.inf)
    margin = intr.cone.margin(z)
    if resid <= 1e-9 * scale and -val >= 1e-4 * scale and margin >= -1e-9 * scale:
        return {"kind": "farkas", "y": y / scale, "z": z / scale,
                "objective": val / scale, "residual": resid / scale}
    return None


def _unboundedness_certificate(intr: _Internal, prog: ConicProgram, x):
    nx = float(np.linalg.norm(x, np.inf))
    if nx < 1e6:
        return None
    xr = x / nx
    cval = prog.c @ xr
    if cval >= -1e-6:
        return None
    if np.linalg.norm(2.0 * prog.q * xr) > 1e-8:
        return None
    if intr.A.shape[0] and np.linalg.norm(intr.A @ xr, np.inf) > 1e-7:
        return None
    if intr.G.shape[0] and intr.cone.margin(-intr.G @ xr) < -1e-7:
        return None
    return {"kind": "ray", "x": xr, "objective": float(cval)}


def _solve_equality_only(prog, intr, config):
    """No inequalities or cones at all: one regularized KKT solve."""
    n = prog.n
    meq = intr.A.shape[0]
    q2 = 2.0 * prog.q + config.regularization
    M = np.zeros((n + meq, n + meq))
    M[:n, :n] = np.diag(q2)
    if meq:
        M[:n, n:] = intr.A.T
        M[n:, :n] = intr.A
        M[n:, n:] = -config.regularization * np.eye(meq)
    rhs = np.concatenate([-prog.c, intr.b])
    sol = np.linalg.solve(M, rhs)
    x, y = sol[:n], sol[n:]
    rx = prog.c + 2 * prog.q * x + (intr.A.T @ y if meq else 0.0)
    ry = intr.A @ x - intr.b if meq else np.zeros(0)
    pres = float(np.linalg.norm(ry)) / max(1.0, float(np.linalg.norm(intr.b)) if meq else 1.0)
    dres = float(np.linalg.norm(rx)) / max(1.0, float(np.linalg.norm(prog.c)))
    status = SolveStatus.OPTIMAL if max(pres, dres) <= config.tolerance * 100 \
        else SolveStatus.NUMERICAL_TROUBLE
    return _extract_solution(prog, intr, status, x, y, np.zeros(0),
                             pres, dres, 0.0, 1, "equality-only solve", None)


def _extract_solution(prog, intr, status, x, y, z, pres, dres, relgap, iters,
                      message, certificate) -> ConicSolution:
    m_ub = intr.m_ub
    ub_duals = z[:m_ub].copy() if len(z) else np.zeros(m_ub)
    lb_bd = np.zeros(prog.n)
    ub_bd = np.zeros(prog.n)
    for j, r in intr.lb_rows:
        lb_bd[j] = z[r]
    for j, r in intr.ub_rows:
        ub_bd[j] = z[r]
    cone_duals = []
    for st, d in zip(intr.cone.starts, intr.cone.soc_dims):
        cone_duals.append(z[st:st + d].copy() if len(z) else np.zeros(d))
    return ConicSolution(
        status=status, x=x, objective=prog.objective_value(x),
        eq_duals=y.copy(), ub_duals=ub_duals,
        lb_bound_duals=lb_bd, ub_bound_duals=ub_bd,
        cone_duals=cone_duals,
        primal_infeasibility=pres, dual_infeasibility=dres,
        complementarity_gap=relgap, iterations=iters,
        message=message, certificate=certificate)


def _lift_fixed_solution(prog: ConicProgram, fixres, inner: ConicSolution) -> ConicSolution:
    """Map a solution of the reduced (fixed-columns-eliminated) program back."""
    x = fixres.lift_primal(inner.x, prog.n)
    eq_duals = np.zeros(len(prog.b_eq))
    for k, i in enumerate(fixres.eq_rows):
        eq_duals[i] = inner.eq_duals[k]
    ub_duals = np.zeros(len(prog.b_ub))
    for k, i in enumerate(fixres.ub_rows):
        ub_duals[i] = inner.ub_duals[k]
    cone_duals = [np.zeros(1 + c.A_tail.shape[0]) for c in prog.cones]
    for k, i in enumerate(fixres.cone_rows):
        cone_duals[i] = inner.cone_duals[k]
    lb_bd = np.zeros(prog.n)
    ub_bd = np.zeros(prog.n)
    lb_bd[fixres.keep_cols] = inner.lb_bound_duals
    ub_bd[fixres.keep_cols] = inner.ub_bound_duals
    # reduced cost of each eliminated column becomes its bound dual
    if inner.optimal:
        grad = prog.c + 2.0 * prog.q * x
        grad += prog.A_eq.T @ eq_duals if len(eq_duals) else 0.0
        grad += prog.A_ub.T @ ub_duals if len(ub_duals) else 0.0
        for cone, kappa in zip(prog.cones, cone_duals):
            grad -= cone.scale * cone.a_head * kappa[0]
            grad -= cone.A_tail.T @ kappa[1:]
        for j in fixres.fixings:
            if grad[j] >= 0:
                lb_bd[j] = grad[j]
            else:
                ub_bd[j] = -grad[j]
    return ConicSolution(
        status=inner.status, x=x, objective=prog.objective_value(x),
        eq_duals=eq_duals, ub_duals=ub_duals,
        lb_bound_duals=lb_bd, ub_bound_duals=ub_bd, cone_duals=cone_duals,
        primal_infeasibility=inner.primal_infeasibility,
        dual_infeasibility=inner.dual_infeasibility,
        complementarity_gap=inner.complementarity_gap,
        iterations=inner.iterations, message=inner.message,
        certificate=inner.certificate)


def verify_certificate(prog: ConicProgram, sol: ConicSolution,
                       tolerance: float = 1e-6) -> dict:
    """Recompute all optimality residuals from the program data alone.

    Returns a report dict with the residuals and a list of breached checks;
    independent of the solver's internal bookkeeping.
    """
    x = sol.x
    report: dict = {"flags": []}

    def flag(name, value, bound):
        report[name] = value
        if value > bound:
            report["flags"].append(name)

    scale = max(1.0, float(np.max(np.abs(x))))
    if len(prog.b_eq):
        flag("eq_residual", float(np.max(np.abs(prog.A_eq @ x - prog.b_eq))),
             tolerance * scale)
    if len(prog.b_ub):
        flag("ub_violation", float(np.max(prog.A_ub @ x - prog.b_ub)),
             tolerance * scale)
        flag("ub_dual_sign", float(np.max(-sol.ub_duals, initial=0.0)), tolerance)
    flag("lb_violation", float(np.max(prog.lb - x, initial=0.0)), tolerance * scale)
    flag("ub_bound_violation", float(np.max(x - prog.ub, initial=0.0)),
         tolerance * scale)
    flag("bound_dual_sign",
         max(float(np.max(-sol.lb_bound_duals, initial=0.0)),
             float(np.max(-sol.ub_bound_duals, initial=0.0))), tolerance)

    cone_viol, cone_dual_viol = 0.0, 0.0
    for cone, kappa in zip(prog.cones, sol.cone_duals):
        head = cone.scale * (cone.a_head @ x + cone.b_head)
        tail = cone.A_tail @ x + cone.b_tail
        cone_viol = max(cone_viol, float(np.linalg.norm(tail) - head))
        cone_dual_viol = max(cone_dual_viol,
                             float(np.linalg.norm(kappa[1:]) - kappa[0]))
    if prog.cones:
        flag("cone_violation", cone_viol, tolerance * scale)
        flag("cone_dual_violation", cone_dual_viol, tolerance)

    grad = prog.c + 2.0 * prog.q * x
    if len(prog.b_eq):
        grad = grad + prog.A_eq.T @ sol.eq_duals
    if len(prog.b_ub):
        grad = grad + prog.A_ub.T @ sol.ub_duals
    grad = grad - sol.lb_bound_duals + sol.ub_bound_duals
    for cone, kappa in zip(prog.cones, sol.cone_duals):
        grad = grad - cone.scale * cone.a_head * kappa[0] - cone.A_tail.T @ kappa[1:]
    gscale = max(1.0, float(np.max(np.abs(prog.c))))
    flag("stationarity", float(np.max(np.abs(grad))), tolerance * gscale * 10)

    comp = 0.0
    if len(prog.b_ub):
        comp = max(comp, float(np.max(np.abs(sol.ub_duals * (prog.b_ub - prog.A_ub @ x)))))
    finite_lb = np.isfinite(prog.lb)
    finite_ub = np.isfinite(prog.ub)
    if np.any(finite_lb):
        comp = max(comp, float(np.max(np.abs(
            sol.lb_bound_duals[finite_lb] * (x - prog.lb)[finite_lb]))))
    if np.any(finite_ub):
        comp = max(comp, float(np.max(np.abs(
            sol.ub_bound_duals[finite_ub] * (prog.ub - x)[finite_ub]))))
    for cone, kappa in zip(prog.cones, sol.cone_duals):
        head = cone.scale * (cone.a_head @ x + cone.b_head)
        tail = cone.A_tail @ x + cone.b_tail
        comp = max(comp, abs(float(kappa[0] * head + kappa[1:] @ tail)))
    obj_scale = max(1.0, abs(sol.objective))
    flag("complementarity", comp, tolerance * obj_scale * 10)

    report["ok"] = not report["flags"]
    return report


def strong_duality_gap(prog: ConicProgram, sol: ConicSolution) -> float:
    """|primal - dual| objective gap recomputed from first principles."""
    x = sol.x
    pobj = prog.objective_value(x)
    xqx = float(prog.q @ (x * x))
    dobj = prog.const - xqx
    if len(prog.b_eq):
        dobj -= float(prog.b_eq @ sol.eq_duals)
    if len(prog.b_ub):
        dobj -= float(prog.b_ub @ sol.ub_duals)
    finite_lb = np.isfinite(prog.lb)
    finite_ub = np.isfinite(prog.ub)
    dobj += float(prog.lb[finite_lb] @ sol.lb_bound_duals[finite_lb])
    dobj -= float(prog.ub[finite_ub] @ sol.ub_bound_duals[finite_ub])
    for cone, kappa in zip(prog.cones, sol.cone_duals):
        dobj -= float(kappa[0] * cone.scale * cone.b_head + kappa[1:] @ cone.b_tail)
    return abs(pobj - dobj)
