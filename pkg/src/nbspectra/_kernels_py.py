"""Pure-Python/numpy versions of the solver kernels.

Array conventions shared with the compiled module, per directed edge e:
``hd[e]`` is the diagonal entry at head(e), ``minv[e]`` is m_{inv(e)},
``moff[e]`` is m_e, and the followers of e are
``fidx[fptr[e]:fptr[e + 1]]``.

Status codes: 0 converged, 1 iteration limit, 2 diverged, 3 pole or
singular Jacobian.
"""
import numpy as np

CONVERGED, MAX_ITER, DIVERGED, POLE = 0, 1, 2, 3


def fixed_point(hd, minv, moff, fptr, fidx, r0, damping, max_iter, tol, blowup=1e8):
    """Damped Jacobi iteration ``r_e <- -m_inv / (m_vv + sum m_f r_f)``.

    Returns ``(r, iterations, status, last_step)``.
    """
    r = np.array(r0, dtype=complex)
    n = len(r)
    rows = np.repeat(np.arange(n), np.diff(fptr))
    step = np.inf
    for it in range(1, max_iter + 1):
        den = hd.copy()
        np.add.at(den, rows, moff[fidx] * r[fidx])
        if np.min(np.abs(den)) < 1e-14:
            return r, it, POLE, step
        new = (1.0 - damping) * r + damping * (-minv / den)
        step = float(np.max(np.abs(new - r)))
        r = new
        if not np.all(np.isfinite(r)) or np.max(np.abs(r)) > blowup:
            return r, it, DIVERGED, step
        if step <= tol:
            return r, it, CONVERGED, step
    return r, max_iter, MAX_ITER, step


def _products(ws):
    """Product of all entries, products leaving one out, and the
    elementary symmetric sum of degree k-1 leaving one out, for small k."""
    k = len(ws)
    P = complex(np.prod(ws)) if k else 1.0 + 0j
    leave1 = np.empty(k, dtype=complex)
    for i in range(k):
        leave1[i] = np.prod(np.delete(ws, i)) if k > 1 else 1.0
    return P, leave1


def _charted_system(hd, minv, moff, fptr, fidx, w, chart):
    """Residual and Jacobian of the cleared local equations in mixed charts.

    Chart 0 stores ``w = r``; chart 1 stores ``w = 1/r``.  With ``P`` the
    product of the chart-1 follower variables, ``T`` the sum over chart-1
    followers of ``m_f`` times the product of the other chart-1 followers,
    and ``S`` the sum of ``m_f w_f`` over chart-0 followers, the equations are

    * chart 0: ``m_inv P + w_e (hd P + S P + T) = 0``
    * chart 1: ``(hd + m_inv w_e + S) P + T = 0``
    """
    n = len(w)
    F = np.empty(n, dtype=complex)
    J = np.zeros((n, n), dtype=complex)
    for e in range(n):
        fol = fidx[fptr[e]:fptr[e + 1]]
        sch = fol[chart[fol] == 1]
        rch = fol[chart[fol] == 0]
        ws = w[sch]
        P, P_f = _products(ws)
        # T = sum_f m_f P_f ; its derivative in w_g is sum_{f != g} m_f P_{f,g}
        T = complex(np.sum(moff[sch] * P_f))
        T_f = np.zeros(len(sch), dtype=complex)
        for a in range(len(sch)):
            for b in range(len(sch)):
                if a != b:
                    others = [w[sch[c]] for c in range(len(sch)) if c != a and c != b]
                    T_f[a] += moff[sch[b]] * (np.prod(others) if others else 1.0)
        S = complex(np.sum(moff[rch] * w[rch]))
        if chart[e] == 0:
            K = hd[e] * P + S * P + T
            F[e] = minv[e] * P + w[e] * K
            J[e, e] += K
            J[e, rch] += w[e] * moff[rch] * P
            J[e, sch] += minv[e] * P_f + w[e] * ((hd[e] + S) * P_f + T_f)
        else:
            base = hd[e] + minv[e] * w[e] + S
            F[e] = base * P + T
            J[e, e] += minv[e] * P
            J[e, rch] += moff[rch] * P
            J[e, sch] += base * P_f + T_f
    return F, J


def newton_charts(hd, minv, moff, fptr, fidx, w0, chart0, max_iter, tol, switch=2.0,
                  blowup=1e12):
    """Newton's method on the cleared equations with per-variable charts.

    A variable whose modulus exceeds ``switch`` is replaced by its
    reciprocal and its chart flipped.  Returns
    ``(w, chart, iterations, status, residual)``.
    """
    w = np.array(w0, dtype=complex)
    chart = np.array(chart0, dtype=np.int8)
    res = np.inf
    for it in range(1, max_iter + 1):
        F, J = _charted_system(hd, minv, moff, fptr, fidx, w, chart)
        try:
            dw = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return w, chart, it, POLE, float(np.max(np.abs(F)))
        if not np.all(np.isfinite(dw)):
            return w, chart, it, POLE, float(np.max(np.abs(F)))
        w = w + dw
        step = float(np.max(np.abs(dw)))
        big = np.abs(w) > switch
        if np.any(big):
            w[big] = 1.0 / w[big]
            chart[big] ^= 1
        if not np.all(np.isfinite(w)) or np.max(np.abs(w)) > blowup:
            return w, chart, it, DIVERGED, np.inf
        if step <= tol:
            F, _ = _charted_system(hd, minv, moff, fptr, fidx, w, chart)
            res = float(np.max(np.abs(F)))
            return w, chart, it, CONVERGED, res
    F, _ = _charted_system(hd, minv, moff, fptr, fidx, w, chart)
    return w, chart, max_iter, MAX_ITER, float(np.max(np.abs(F)))
