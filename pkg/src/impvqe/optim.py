"""Classical optimizers for single-Pauli-rotation circuits.

Angles follow the ``exp(-i theta P)`` convention, so energies are
``pi``-periodic sinusoids in each angle: ``E = a cos(2 theta - b) + c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy.optimize import minimize

EnergyFn = Callable[[np.ndarray], float]

SHIFT = np.pi / 4
SMO_MESH = -np.pi / 2 + np.pi / 8 * np.arange(8)


def parameter_shift_gradient(energy: EnergyFn, theta: np.ndarray, j: int) -> float:
    """``E(theta_j + pi/4) - E(theta_j - pi/4)``, the exact ``dE/dtheta_j``."""
    plus = np.array(theta, dtype=float)
    minus = plus.copy()
    plus[j] += SHIFT
    minus[j] -= SHIFT
    return float(energy(plus) - energy(minus))


def parameter_shift_vector(energy: EnergyFn, theta: np.ndarray) -> np.ndarray:
    return np.array([parameter_shift_gradient(energy, theta, j) for j in range(len(theta))])


def fit_sinusoid(angles: np.ndarray, values: np.ndarray):
    """Least-squares ``(a, b, c)`` for ``values ~ a cos(2 angle - b) + c`` with ``a >= 0``."""
    X = np.column_stack([np.cos(2 * angles), np.sin(2 * angles), np.ones_like(angles)])
    (A, B, c), *_ = np.linalg.lstsq(X, values, rcond=None)
    return float(np.hypot(A, B)), float(np.arctan2(B, A)), float(c)


def sinusoid_argmin(a: float, b: float) -> float:
    return b / 2 if a < 0 else (b + np.pi) / 2


@dataclass
class SmoTrace:
    energies: List[float] = field(default_factory=list)  # fitted minimum after each update
    n_evaluations: int = 0


def smo_sweep(energy: EnergyFn, theta: np.ndarray, sweeps: int = 40, trace: Optional[SmoTrace] = None,
              mesh: np.ndarray = SMO_MESH, tol: float = 1e-12) -> np.ndarray:
    """Sequential single-angle minimization with 8-point sinusoid fits.

    ``energy`` may be noisy.  Parameters with a vanishing fitted amplitude
    are left unchanged.
    """
    theta = np.array(theta, dtype=float)
    for _ in range(sweeps):
        for j in range(theta.size):
            vals = []
            for x in mesh:
                t = theta.copy()
                t[j] = x
                vals.append(energy(t))
            a, b, c = fit_sinusoid(mesh, np.asarray(vals))
            if trace is not None:
                trace.n_evaluations += len(mesh)
            if a <= tol:
                continue
            theta[j] = _wrap(sinusoid_argmin(a, b))
            if trace is not None:
                trace.energies.append(c - a)
    return theta


def _wrap(x: float) -> float:
    """Map into ``[-pi/2, pi/2)``; the energy has period ``pi``."""
    return float((x + np.pi / 2) % np.pi - np.pi / 2)


@dataclass
class AdadeltaState:
    theta: np.ndarray
    s: np.ndarray
    delta: np.ndarray
    step: int = 0


def adadelta_run(gradient: Callable[[np.ndarray], np.ndarray], theta0: np.ndarray, steps: int = 250,
                 beta: float = 0.9, eps: float = 1e-8,
                 callback: Optional[Callable[[AdadeltaState], None]] = None) -> np.ndarray:
    """Adadelta with leaked averages started at zero.

    ``s_t = b s_{t-1} + (1-b) g_t^2``, ``w_t = sqrt(D_{t-1} + eps) / sqrt(s_t + eps)``,
    ``theta_t = theta_{t-1} - w_t g_t``, ``D_t = b D_{t-1} + (1-b) (w_t g_t)^2``.
    """
    theta = np.array(theta0, dtype=float)
    st = AdadeltaState(theta, np.zeros_like(theta), np.zeros_like(theta))
    for t in range(steps):
        g = np.asarray(gradient(st.theta), dtype=float)
        st.s = beta * st.s + (1 - beta) * g * g
        w = np.sqrt(st.delta + eps) / np.sqrt(st.s + eps)
        update = w * g
        st.theta = st.theta - update
        st.delta = beta * st.delta + (1 - beta) * update * update
        st.step = t + 1
        if callback is not None:
            callback(st)
    return st.theta


@dataclass
class BfgsResult:
    theta: np.ndarray
    energy: float
    converged: bool
    line_search_failed: bool
    n_iterations: int
    message: str


def bfgs_minimize(fun_and_grad: Callable[[np.ndarray], tuple], theta0: np.ndarray, gtol: float = 1e-8,
                  max_iter: int = 10_000) -> BfgsResult:
    """BFGS (strong-Wolfe line search) on an exact energy and gradient."""
    res = minimize(fun_and_grad, np.asarray(theta0, dtype=float), jac=True, method="BFGS",
                   options=dict(gtol=gtol, maxiter=max_iter, norm=np.inf))
    _, g = fun_and_grad(res.x)
    gmax = float(np.max(np.abs(g), initial=0.0))
    # status 2 is precision loss; near an optimum that is round-off, not failure
    converged = gmax < gtol or res.status == 0 or (res.status == 2 and gmax < 100 * gtol)
    ls_failed = res.status == 2 and not converged
    return BfgsResult(res.x, float(res.fun), converged, ls_failed, int(res.nit), str(res.message))
