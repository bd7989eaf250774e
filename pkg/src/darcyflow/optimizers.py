"""Training optimizers: full-batch Adam and two-loop L-BFGS.

Both operate on a callable ``fun_grad(theta) -> (value, grad, extras)`` over
a fixed batch.  The L-BFGS line search enforces the strong Wolfe conditions
(c1 = 1e-4, c2 = 0.9) with the number of trial evaluations capped by
``maxls``; a failed search ends the run gracefully with the best iterate
seen so far rather than raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_C1 = 1e-4
_C2 = 0.9


@dataclass
class OptimizerTrace:
    losses: list = field(default_factory=list)
    extras: list = field(default_factory=list)
    status: str = "max_iters"

    def record(self, loss, extra):
        self.losses.append(float(loss))
        self.extras.append(extra)


def adam(fun_grad, theta0, iters, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """Run `iters` Adam steps; the trace holds the loss at each visited iterate."""
    theta = np.array(theta0, dtype=float)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    trace = OptimizerTrace(status="completed")
    for t in range(1, iters + 1):
        f, g, extra = fun_grad(theta)
        trace.record(f, extra)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        theta -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return theta, trace


class _LineSearchBudget(Exception):
    pass


def _wolfe_line_search(fun_grad, x, f0, g0, direction, maxls):
    """Strong Wolfe search along `direction`.

    Returns (alpha, f, g, extra) or None when no acceptable step was found
    within `maxls` trial evaluations.
    """
    dphi0 = float(g0 @ direction)
    if dphi0 >= 0.0:
        return None
    evals = [0]

    def phi(alpha):
        if evals[0] >= maxls:
            raise _LineSearchBudget
        evals[0] += 1
        f, g, extra = fun_grad(x + alpha * direction)
        return f, float(g @ direction), g, extra

    def zoom(a_lo, f_lo, d_lo, a_hi, f_hi):
        # a_lo always satisfies Armijo with the lowest f seen; a_hi brackets.
        while True:
            span = a_hi - a_lo
            denom = f_hi - f_lo - d_lo * span
            if denom > 0.0:
                u = -0.5 * d_lo * span / denom  # quadratic minimizer, unit coords
                a = a_lo + (u if 0.1 <= u <= 0.9 else 0.5) * span
            else:
                a = a_lo + 0.5 * span
            f, d, g, extra = phi(a)
            if f > f0 + _C1 * a * dphi0 or f >= f_lo:
                a_hi, f_hi = a, f
            else:
                if abs(d) <= -_C2 * dphi0:
                    return a, f, g, extra
                if d * span >= 0.0:
                    a_hi, f_hi = a_lo, f_lo
                a_lo, f_lo, d_lo = a, f, d
            if abs(a_hi - a_lo) < 1e-16 * max(1.0, abs(a_lo)):
                return None

    a_prev, f_prev, d_prev = 0.0, f0, dphi0
    alpha = 1.0
    try:
        for it in range(maxls):
            f, d, g, extra = phi(alpha)
            if f > f0 + _C1 * alpha * dphi0 or (it > 0 and f >= f_prev):
                return zoom(a_prev, f_prev, d_prev, alpha, f)
            if abs(d) <= -_C2 * dphi0:
                return alpha, f, g, extra
            if d >= 0.0:
                return zoom(alpha, f, d, a_prev, f_prev)
            a_prev, f_prev, d_prev = alpha, f, d
            alpha = min(2.0 * alpha, 1e10)
    except _LineSearchBudget:
        return None
    return None


def lbfgs(fun_grad, theta0, max_iters, maxls=50, tol=1e-9, memory=10):
    """Two-loop L-BFGS; stops on iteration budget, loss-decrease < tol,
    a vanished gradient, or line-search failure (graceful, best-so-far)."""
    x = np.array(theta0, dtype=float)
    f, g, extra = fun_grad(x)
    best_x, best_f = x.copy(), f
    trace = OptimizerTrace()
    s_hist, y_hist, rho_hist = [], [], []

    for _ in range(max_iters):
        if not np.any(g):
            trace.status = "gradient_zero"
            break
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        if y_hist:
            q *= (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])
        for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            b = rho * (y @ q)
            q += (a - b) * s
        direction = -q
        if direction @ g >= 0.0:
            # Curvature history went bad; restart from steepest descent.
            s_hist, y_hist, rho_hist = [], [], []
            direction = -g
        result = _wolfe_line_search(fun_grad, x, f, g, direction, maxls)
        if result is None:
            trace.status = "line_search_failure"
            break
        alpha, f_new, g_new, extra_new = result
        step = alpha * direction
        y_vec = g_new - g
        sy = step @ y_vec
        if sy > 1e-10 * np.linalg.norm(step) * np.linalg.norm(y_vec):
            s_hist.append(step)
            y_hist.append(y_vec)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        x = x + step
        decrease = f - f_new
        f, g, extra = f_new, g_new, extra_new
        trace.record(f, extra)
        if f < best_f:
            best_f, best_x = f, x.copy()
        if decrease < tol:
            trace.status = "converged"
            break

    return best_x, best_f, trace
