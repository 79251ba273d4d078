"""Hot loops, compiled with numba when available.

Every kernel is written once as plain Python over numpy arrays. When numba is
importable and ``OSCILLAMETRIC_DISABLE_NUMBA`` is not set to a truthy value,
the public names point to ``njit`` compiled versions; otherwise they point to
the interpreted originals. Both variants stay reachable through ``PY`` and
``NB`` so the benchmark can time them side by side.
"""

from __future__ import annotations

import math
import os

import numpy as np

_FLAG = os.environ.get("OSCILLAMETRIC_DISABLE_NUMBA", "").strip().lower()
DISABLED = _FLAG in ("1", "true", "yes", "on")

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not DISABLED


# --------------------------------------------------------------------------


def _build(jit):
    """Define every kernel with ``jit`` applied; helpers are captured by closure."""

    @jit
    def newtonian_rk4(x0, xd0, m, kq, ds, steps, stride):
        """RK4 geodesic of g0 - 2 v X1 (x) X1 in the chart (t, x1, x2, x3, u, w).

        v = -m/r + 0.5 * sum(kq * x**2), X1_flat = dt + dw. The acceleration is the
        exact closed form of the Christoffel contraction for this metric.
        """
        n_rec = steps // stride + 1
        xs = np.empty((n_rec, 6))
        vs = np.empty((n_rec, 6))
        x = x0.copy()
        xd = xd0.copy()
        xs[0] = x
        vs[0] = xd
        k1x = np.empty(6)
        k1v = np.empty(6)
        k2x = np.empty(6)
        k2v = np.empty(6)
        k3x = np.empty(6)
        k3v = np.empty(6)
        k4x = np.empty(6)
        k4v = np.empty(6)
        tx = np.empty(6)
        tv = np.empty(6)
        rec = 1
        for step in range(1, steps + 1):
            _newton_acc(x, xd, m, kq, k1v)
            for i in range(6):
                k1x[i] = xd[i]
                tx[i] = x[i] + 0.5 * ds * k1x[i]
                tv[i] = xd[i] + 0.5 * ds * k1v[i]
            _newton_acc(tx, tv, m, kq, k2v)
            for i in range(6):
                k2x[i] = tv[i]
                tx[i] = x[i] + 0.5 * ds * k2x[i]
                tv[i] = xd[i] + 0.5 * ds * k2v[i]
            _newton_acc(tx, tv, m, kq, k3v)
            for i in range(6):
                k3x[i] = tv[i]
                tx[i] = x[i] + ds * k3x[i]
                tv[i] = xd[i] + ds * k3v[i]
            _newton_acc(tx, tv, m, kq, k4v)
            for i in range(6):
                k4x[i] = tv[i]
                x[i] += ds / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i])
                xd[i] += ds / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])
            if step % stride == 0:
                xs[rec] = x
                vs[rec] = xd
                rec += 1
        return xs, vs

    @jit
    def _newton_acc(x, xd, m, kq, out):
        r2 = x[1] * x[1] + x[2] * x[2] + x[3] * x[3]
        inv_r3 = 0.0
        if m != 0.0:
            r = math.sqrt(r2)
            inv_r3 = 1.0 / (r2 * r)
        g1 = m * x[1] * inv_r3 + kq[0] * x[1]
        g2 = m * x[2] * inv_r3 + kq[1] * x[2]
        g3 = m * x[3] * inv_r3 + kq[2] * x[3]
        big_k = xd[0] + xd[5]
        dv = g1 * xd[1] + g2 * xd[2] + g3 * xd[3]
        out[0] = -2.0 * big_k * dv
        out[1] = -big_k * big_k * g1
        out[2] = -big_k * big_k * g2
        out[3] = -big_k * big_k * g3
        out[4] = 0.0
        out[5] = 2.0 * big_k * dv

    @jit
    def em_uniform_rk4(x0, xd0, f_low, x_low, g0diag, ds, steps, stride):
        """RK4 geodesic of g0 + sym(U_flat (x) X2_flat) for a constant 2-form F.

        The gauge is U_j = x^i F_ij / 2, so the symmetric part of dU vanishes and
        the Christoffel correction reduces to the F terms.
        """
        d = x0.shape[0]
        n_rec = steps // stride + 1
        xs = np.empty((n_rec, d))
        vs = np.empty((n_rec, d))
        x = x0.copy()
        xd = xd0.copy()
        xs[0] = x
        vs[0] = xd
        x_up = np.empty(d)
        for k in range(d):
            x_up[k] = x_low[k] / g0diag[k]
        ks_x = np.empty((4, d))
        ks_v = np.empty((4, d))
        tx = np.empty(d)
        tv = np.empty(d)
        acc = np.empty(d)
        rec = 1
        for step in range(1, steps + 1):
            for stage in range(4):
                if stage == 0:
                    for i in range(d):
                        tx[i] = x[i]
                        tv[i] = xd[i]
                else:
                    h = 0.5 * ds if stage < 3 else ds
                    for i in range(d):
                        tx[i] = x[i] + h * ks_x[stage - 1, i]
                        tv[i] = xd[i] + h * ks_v[stage - 1, i]
                _em_acc(tx, tv, f_low, x_low, x_up, g0diag, acc)
                for i in range(d):
                    ks_x[stage, i] = tv[i]
                    ks_v[stage, i] = acc[i]
            for i in range(d):
                x[i] += ds / 6.0 * (ks_x[0, i] + 2.0 * ks_x[1, i] + 2.0 * ks_x[2, i] + ks_x[3, i])
                xd[i] += ds / 6.0 * (ks_v[0, i] + 2.0 * ks_v[1, i] + 2.0 * ks_v[2, i] + ks_v[3, i])
            if step % stride == 0:
                xs[rec] = x
                vs[rec] = xd
                rec += 1
        return xs, vs

    @jit
    def _em_acc(x, xd, f_low, x_low, x_up, g0diag, out):
        d = x.shape[0]
        big_k = 0.0
        for i in range(d):
            big_k += x_low[i] * xd[i]
        # U^l F_jl xd^j, with U_l = x^i F_il / 2 raised by the diagonal g0
        s = 0.0
        for l in range(d):
            u_l = 0.0
            for i in range(d):
                u_l += 0.5 * x[i] * f_low[i, l]
            u_up = u_l / g0diag[l]
            fx = 0.0
            for j in range(d):
                fx += f_low[j, l] * xd[j]
            s += u_up * fx
        for k in range(d):
            fk = 0.0
            for j in range(d):
                fk += f_low[j, k] * xd[j]
            out[k] = -big_k * fk / g0diag[k] + x_up[k] * big_k * s

    @jit
    def schwarzschild_rk4(y0, m, ds, steps, stride):
        """RK4 for equatorial Schwarzschild geodesics, state (t, r, phi, t', r', phi')."""
        n_rec = steps // stride + 1
        out = np.empty((n_rec, 6))
        y = y0.copy()
        out[0] = y
        k = np.empty((4, 6))
        ty = np.empty(6)
        rec = 1
        for step in range(1, steps + 1):
            for stage in range(4):
                if stage == 0:
                    for i in range(6):
                        ty[i] = y[i]
                else:
                    h = 0.5 * ds if stage < 3 else ds
                    for i in range(6):
                        ty[i] = y[i] + h * k[stage - 1, i]
                r = ty[1]
                f = 1.0 - 2.0 * m / r
                k[stage, 0] = ty[3]
                k[stage, 1] = ty[4]
                k[stage, 2] = ty[5]
                k[stage, 3] = -2.0 * m / (r * r * f) * ty[4] * ty[3]
                k[stage, 4] = (-m * f / (r * r) * ty[3] * ty[3]
                               + m / (r * r * f) * ty[4] * ty[4]
                               + (r - 2.0 * m) * ty[5] * ty[5])
                k[stage, 5] = -2.0 / r * ty[4] * ty[5]
            for i in range(6):
                y[i] += ds / 6.0 * (k[0, i] + 2.0 * k[1, i] + 2.0 * k[2, i] + k[3, i])
            if step % stride == 0:
                out[rec] = y
                rec += 1
        return out

    # --------------------------------------------------------------------------
    # 1+1 D wave solvers (periodic grids)

    @jit
    def kg_leapfrog(psi_prev, psi_cur, vpot, mass, dx, dt, steps):
        """Central-difference evolution of psi_tt = 2iM psi_t + (psi_xx - 2 v M^2 psi)/(1 - 2v).

        Returns the last two time levels.
        """
        n = psi_cur.shape[0]
        a = psi_prev.copy()
        b = psi_cur.copy()
        c = np.empty(n, dtype=np.complex128)
        inv_dx2 = 1.0 / (dx * dx)
        lhs = 1.0 - 1j * mass * dt
        back = 1.0 + 1j * mass * dt
        for _ in range(steps):
            for i in range(n):
                im = i - 1 if i > 0 else n - 1
                ip = i + 1 if i < n - 1 else 0
                lap = (b[ip] - 2.0 * b[i] + b[im]) * inv_dx2
                rhs = (lap - 2.0 * vpot[i] * mass * mass * b[i]) / (1.0 - 2.0 * vpot[i])
                c[i] = (2.0 * b[i] - back * a[i] + dt * dt * rhs) / lhs
            for i in range(n):
                a[i] = b[i]
                b[i] = c[i]
        return a, b

    @jit
    def cyclic_tridiag_solve(lower, diag, upper, rhs):
        """Solve a periodic tridiagonal system by Thomas + Sherman-Morrison.

        ``lower[i]`` couples row i to i-1 (row 0 to n-1), ``upper[i]`` couples row i
        to i+1 (row n-1 to 0).
        """
        n = diag.shape[0]
        gamma = -diag[0]
        bb = diag.copy()
        bb[0] = diag[0] - gamma
        bb[n - 1] = diag[n - 1] - upper[n - 1] * lower[0] / gamma
        u = np.zeros(n, dtype=np.complex128)
        u[0] = gamma
        u[n - 1] = upper[n - 1]
        x = _thomas(lower, bb, upper, rhs)
        z = _thomas(lower, bb, upper, u)
        fact = (x[0] + lower[0] * x[n - 1] / gamma) / (1.0 + z[0] + lower[0] * z[n - 1] / gamma)
        out = np.empty(n, dtype=np.complex128)
        for i in range(n):
            out[i] = x[i] - fact * z[i]
        return out

    @jit
    def _thomas(lower, diag, upper, rhs):
        n = diag.shape[0]
        cp = np.empty(n, dtype=np.complex128)
        dp = np.empty(n, dtype=np.complex128)
        cp[0] = upper[0] / diag[0]
        dp[0] = rhs[0] / diag[0]
        for i in range(1, n):
            den = diag[i] - lower[i] * cp[i - 1]
            cp[i] = upper[i] / den
            dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / den
        x = np.empty(n, dtype=np.complex128)
        x[n - 1] = dp[n - 1]
        for i in range(n - 2, -1, -1):
            x[i] = dp[i] - cp[i] * x[i + 1]
        return x

    @jit
    def cn_schrodinger(psi0, vpot, mass, dx, dt, steps):
        """Crank-Nicolson for 2iM psi_t = -psi_xx + 2 v M^2 psi on a periodic grid."""
        n = psi0.shape[0]
        # psi_t = -i H psi with H = -(1/2M) D2 + v M
        off = -1.0 / (2.0 * mass * dx * dx)
        lower = np.empty(n, dtype=np.complex128)
        upper = np.empty(n, dtype=np.complex128)
        diag = np.empty(n, dtype=np.complex128)
        hdiag = np.empty(n)
        for i in range(n):
            hdiag[i] = 1.0 / (mass * dx * dx) + vpot[i] * mass
            lower[i] = 0.5j * dt * off
            upper[i] = 0.5j * dt * off
            diag[i] = 1.0 + 0.5j * dt * hdiag[i]
        psi = psi0.copy()
        rhs = np.empty(n, dtype=np.complex128)
        for _ in range(steps):
            for i in range(n):
                im = i - 1 if i > 0 else n - 1
                ip = i + 1 if i < n - 1 else 0
                hpsi = hdiag[i] * psi[i] + off * (psi[im] + psi[ip])
                rhs[i] = psi[i] - 0.5j * dt * hpsi
            psi = cyclic_tridiag_solve(lower, diag, upper, rhs)
        return psi

    # --------------------------------------------------------------------------
    # Monte Carlo

    @jit
    def lhv_products(lam, angles_g, angles_d):
        """Sum of response products sign(cos(a - lam)) * sign(cos(b - lam)).

        Each product is +-1, so the sums alone fix both mean and variance.
        """
        out = np.zeros((2, 2))
        for k in range(lam.shape[0]):
            for i in range(2):
                ra = 1.0 if math.cos(angles_g[i] - lam[k]) >= 0.0 else -1.0
                for j in range(2):
                    rb = 1.0 if math.cos(angles_d[j] - lam[k]) >= 0.0 else -1.0
                    out[i, j] += ra * rb
        return out

    @jit
    def accept_mask(u, dens, envelope):
        n = u.shape[0]
        out = np.empty(n, dtype=np.bool_)
        for i in range(n):
            out[i] = u[i] * envelope <= dens[i]
        return out


    return _Namespace(
        newtonian_rk4=newtonian_rk4,
        em_uniform_rk4=em_uniform_rk4,
        schwarzschild_rk4=schwarzschild_rk4,
        kg_leapfrog=kg_leapfrog,
        cn_schrodinger=cn_schrodinger,
        cyclic_tridiag_solve=cyclic_tridiag_solve,
        lhv_products=lhv_products,
        accept_mask=accept_mask,
    )


class _Namespace:
    def __init__(self, **kw):
        self.__dict__.update(kw)


def _identity(fn):
    return fn


PY = _build(_identity)
NB = _build(njit(cache=False, nogil=True)) if HAVE_NUMBA else None
ACTIVE = NB if USE_NUMBA else PY

newtonian_rk4 = ACTIVE.newtonian_rk4
em_uniform_rk4 = ACTIVE.em_uniform_rk4
schwarzschild_rk4 = ACTIVE.schwarzschild_rk4
kg_leapfrog = ACTIVE.kg_leapfrog
cn_schrodinger = ACTIVE.cn_schrodinger
cyclic_tridiag_solve = ACTIVE.cyclic_tridiag_solve
lhv_products = ACTIVE.lhv_products
accept_mask = ACTIVE.accept_mask


def backend_name() -> str:
    return "numba" if USE_NUMBA else "python"
