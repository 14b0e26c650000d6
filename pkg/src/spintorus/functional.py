"""The conformally tuned Rayleigh-type functional and its maximization.

F_q(phi) = integral <D phi, phi> / ||D phi||_q^2 for q in [4/3, 2].  The
functional is real, degree-0 homogeneous, invariant under adding kernel
spinors, and conformally invariant exactly at the critical exponent
q = 4/3 (dual to p = 4).  Its supremum mu_q ties to the spectrum through
mu_2 = 1/lambda_1^+ and, at q = 4/3, to the infimum of
lambda_1^+ * area^(1/2) over the conformal class.

Maximization is projected gradient ascent with Armijo backtracking:
iterates are kept orthogonal to ker D and renormalized to ||D phi||_q = 1
(free, by homogeneity).  The ascent direction is the gradient
preconditioned by the inverse squared symbol (steepest ascent in the
metric where u = D phi is the unknown); this keeps the iteration
conditioning independent of the grid Nyquist scale while remaining a
plain ascent scheme.  Outputs are stationary / locally maximal
candidates; global maximality is never claimed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dirac import apply_dirac, project_out_kernel
from .fields import (
    SpinorField,
    first_positive_eigenspinor,
    l2_inner,
    l2_norm,
    lp_norm,
    mode_vectors,
    pointwise_power,
    random_band_limited,
)
from .lattice import Lattice, SpinStructure
from .solver import Solution, residual_field

Q_CRITICAL = 4.0 / 3.0
P_CRITICAL = 4.0

#: ||D phi||_q below this is treated as a kernel element.
TOL_DEGENERATE = 1e-12


class DegenerateFieldError(ValueError):
    """D phi vanishes (up to tolerance): F_q is undefined."""


class IterationLimitError(RuntimeError):
    """Ascent did not reach the gradient tolerance; carries the best iterate."""

    def __init__(self, message, best):
        super().__init__(message)
        self.best = best


def conjugate_exponent(q: float) -> float:
    if not 1.0 < q:
        raise ValueError("q must exceed 1")
    return q / (q - 1.0)


def _checked_numerator(dphi: SpinorField, phi: SpinorField) -> float:
    num = l2_inner(dphi, phi)
    scale = abs(num) + 1e-300
    if abs(num.imag) > 1e-9 * max(1.0, scale):
        raise FloatingPointError(
            f"numerator lost self-adjointness: imag/abs = {num.imag / scale:.3e}"
        )
    return num.real


@dataclass(frozen=True)
class FqState:
    """Cached evaluation data of F_q at one field."""

    q: float
    p: float
    value: float
    rho: float
    dphi_norm_q: float


def fq_state(phi: SpinorField, q: float) -> FqState:
    if q < Q_CRITICAL - 1e-12 or q > 2.0 + 1e-12:
        raise ValueError("q must lie in [4/3, 2]")
    dphi = apply_dirac(phi)
    den = lp_norm(dphi, q)
    if den <= TOL_DEGENERATE:
        raise DegenerateFieldError("||D phi||_q vanishes")
    value = _checked_numerator(dphi, phi) / den**2
    return FqState(q, conjugate_exponent(q), value, value * den ** (2.0 - q), den)


def functional_Fq(phi: SpinorField, q: float) -> float:
    return fq_state(phi, q).value


def grad_Fq(phi: SpinorField, q: float) -> SpinorField:
    """L^2-gradient representative G with Re<G, psi> = dF_q(phi)(psi)."""
    dphi = apply_dirac(phi)
    den = lp_norm(dphi, q)
    if den <= TOL_DEGENERATE:
        raise DegenerateFieldError("||D phi||_q vanishes")
    value = _checked_numerator(dphi, phi) / den**2
    rho = value * den ** (2.0 - q)
    w = dphi.pointwise_norm()
    factor = rho * pointwise_power(w, q - 2.0)
    inner = phi.like(phi.plus - factor * dphi.plus, phi.minus - factor * dphi.minus)
    return (2.0 / den**2) * apply_dirac(inner)


def _precondition(grad: SpinorField) -> SpinorField:
    """Apply the inverse squared Dirac symbol modewise (kernel mode dropped).

    The result is an ascent direction: the multiplier is positive definite
    on the kernel complement, so Re<G, P G> > 0 unless P G = 0.
    """
    xi_x, xi_y = mode_vectors(grad.lat, grad.spin, grad.n_grid)
    mult = (2.0 * np.pi * np.hypot(xi_x, xi_y)) ** 2
    inv = np.zeros_like(mult)
    nz = mult > 0.0
    inv[nz] = 1.0 / mult[nz]
    return grad.like(
        np.fft.ifft2(inv * np.fft.fft2(grad.plus)),
        np.fft.ifft2(inv * np.fft.fft2(grad.minus)),
    )


@dataclass
class MaximizeOptions:
    tol_grad: float | None = None  # default 1e-8 * N
    max_iter: int = 5000
    armijo: float = 1e-4
    step_init: float = 1.0
    step_growth: float = 1.5
    max_backtracks: int = 45


@dataclass
class MaximizeResult:
    phi: SpinorField
    mu: float
    iterations: int
    grad_norm: float
    converged: bool
    history: list = field(default_factory=list)


def maximize_Fq(
    lat: Lattice,
    spin: SpinStructure,
    q: float,
    init: SpinorField,
    opts: MaximizeOptions | None = None,
) -> MaximizeResult:
    """Ascend F_q from init; monotone in F_q across accepted steps."""
    opts = opts or MaximizeOptions()
    tol_grad = opts.tol_grad if opts.tol_grad is not None else 1e-8 * init.n_grid

    def normalize(f: SpinorField) -> SpinorField:
        f = project_out_kernel(f)
        den = lp_norm(apply_dirac(f), q)
        if den <= TOL_DEGENERATE:
            raise DegenerateFieldError("iterate collapsed into ker D")
        return (1.0 / den) * f

    phi = normalize(init)
    value = functional_Fq(phi, q)
    step = opts.step_init
    history = [value]
    grad_norm = math.inf
    for it in range(opts.max_iter):
        grad = grad_Fq(phi, q)
        grad_norm = l2_norm(grad)
        if grad_norm < tol_grad:
            return MaximizeResult(phi, value, it, grad_norm, True, history)
        direction = _precondition(grad)
        slope = l2_inner(grad, direction).real
        if slope <= 0.0:
            break
        accepted = False
        for _ in range(opts.max_backtracks):
            trial = normalize(phi + step * direction)
            trial_value = functional_Fq(trial, q)
            if trial_value >= value + opts.armijo * step * slope:
                phi, value = trial, trial_value
                history.append(value)
                step *= opts.step_growth
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # No admissible increase above roundoff: stationary on this grid.
            break
    grad_norm = l2_norm(grad_Fq(phi, q))
    if grad_norm < tol_grad:
        return MaximizeResult(phi, value, opts.max_iter, grad_norm, True, history)
    raise IterationLimitError(
        f"no convergence (|grad| = {grad_norm:.3e}, tol {tol_grad:.3e})",
        MaximizeResult(phi, value, opts.max_iter, grad_norm, False, history),
    )


def normalize_euler_lagrange(
    phi_max: SpinorField, q: float, mu_q: float
) -> Solution:
    """Turn a maximizer of F_q into a solution of D phi = mu_q^-1 |phi|^{p-2} phi.

    With ||D phi_1||_q = 1 the normalized solution is phi = |D phi_1|^{q-2} D phi_1
    (the pointwise algebra makes ||phi||_p = 1 exact); lambda = 1/mu_q.  Zeros of
    D phi_1 map to zeros of phi.
    """
    p = conjugate_exponent(q)
    dphi = apply_dirac(phi_max)
    den = lp_norm(dphi, q)
    if den <= TOL_DEGENERATE:
        raise DegenerateFieldError("maximizer has D phi = 0")
    dphi = (1.0 / den) * dphi
    w = dphi.pointwise_norm()
    factor = pointwise_power(w, q - 2.0)
    zero_count = int(np.count_nonzero(w == 0.0))
    phi = phi_max.like(factor * dphi.plus, factor * dphi.minus)
    lam = 1.0 / mu_q
    res = l2_norm(residual_field(phi, lam, p))
    return Solution(
        phi=phi,
        lam=lam,
        p=p,
        residual=res,
        norm_p=lp_norm(phi, p),
        trace=[],
        meta={"dphi_zero_points": zero_count, "source": "euler-lagrange"},
    )


@dataclass
class MuPoint:
    q: float
    mu: float
    grad_norm: float
    converged: bool
    error: str | None = None


def mu_curve(
    lat: Lattice,
    spin: SpinStructure,
    q_values,
    n_grid: int = 16,
    opts: MaximizeOptions | None = None,
    seed: int = 0,
    perturbation: float = 1e-2,
) -> list[MuPoint]:
    """mu_q estimates on the area-1 rescaled torus, warm-started downward in q.

    The sweep continues past failed entries; the table is sorted by q.
    """
    qs = sorted(set(float(q) for q in q_values), reverse=True)
    if not qs:
        return []
    for q in qs:
        if q <= Q_CRITICAL or q > 2.0 + 1e-12:
            raise ValueError(f"q={q} outside ({Q_CRITICAL:.6f}, 2]")
    lat1 = lat.unit_area()
    rng = np.random.default_rng(seed)
    init = first_positive_eigenspinor(lat1, spin, n_grid)
    init = init + perturbation * random_band_limited(lat1, spin, n_grid, rng)
    points: list[MuPoint] = []
    warm = init
    for q in qs:
        try:
            result = maximize_Fq(lat1, spin, q, warm, opts)
            warm = result.phi
            points.append(MuPoint(q, result.mu, result.grad_norm, result.converged))
        except (DegenerateFieldError, IterationLimitError) as exc:
            best = getattr(exc, "best", None)
            if best is not None:
                warm = best.phi
                points.append(MuPoint(q, best.mu, best.grad_norm, False, str(exc)))
            else:
                points.append(MuPoint(q, math.nan, math.nan, False, str(exc)))
    points.sort(key=lambda pt: pt.q)
    return points
