"""Critical nonlinear Dirac equation by subcritical continuation.

Target problem on the torus: D phi = lambda |phi|^2 phi with ||phi||_4 = 1.
The solver walks an increasing exponent schedule p: 2 -> 4, warm-starting
each stage, and solves every stage with a damped Newton iteration on the
bordered system

    D phi - lambda |phi|^{p-2} phi = 0,      ||phi||_p = 1,

with lambda an unknown.  The nonlinearity is not complex-differentiable, so
the Jacobian is assembled as a real-linear operator over (Re, Im) parts; it
is symmetric, the normalization row is scaled to match the lambda column,
and the linear solves use MINRES with a Fourier-diagonal preconditioner.
The equation is U(1)-equivariant, so i*phi would be an exact null vector of
the plain Jacobian; one more symmetric bordering row/column anchors the
phase of the step and keeps the Krylov solves well posed.

Continuation in p is equivalent to the exponent-q continuation on the
functional side (1/p + 1/q = 1) and is the friendlier parametrization for
Newton.  Lattices are rescaled to unit area up front: the solved lambda is
scale invariant and then coincides with lambda * sqrt(area).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg

from .dirac import apply_dirac, apply_dirac_arrays, project_out_kernel
from .fields import (
    SpinorField,
    eigenvector_at_mode,
    first_positive_eigenspinor,
    l2_inner,
    l2_norm,
    lp_norm,
    mode_vectors,
    pointwise_power,
    pure_mode_field,
    spinor_from_dict,
    spinor_to_dict,
)
from .lattice import Lattice, SpinStructure, first_eigenmode


class ContinuationError(RuntimeError):
    """A continuation stage failed; carries the partial trace."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass
class Solution:
    """Solved pair (phi, lambda) of D phi = lambda |phi|^{p-2} phi, ||phi||_p = 1."""

    phi: SpinorField
    lam: float
    p: float
    residual: float
    norm_p: float
    trace: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def min_abs(self) -> float:
        return float(self.phi.pointwise_norm().min())

    def max_abs(self) -> float:
        return float(self.phi.pointwise_norm().max())

    def lambda_invariant(self) -> float:
        """lambda * sqrt(area of the solution metric) = lambda * ||phi||_p^2."""
        return self.lam * self.norm_p**2

    def to_dict(self) -> dict:
        data = spinor_to_dict(self.phi)
        data["format"] = "spintorus-solution"
        data["lambda"] = self.lam
        data["p"] = self.p
        data["residual"] = self.residual
        data["norm_p"] = self.norm_p
        data["trace"] = self.trace
        data["meta"] = self.meta
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Solution":
        return cls(
            phi=spinor_from_dict(data),
            lam=float(data["lambda"]),
            p=float(data["p"]),
            residual=float(data["residual"]),
            norm_p=float(data["norm_p"]),
            trace=list(data.get("trace", [])),
            meta=dict(data.get("meta", {})),
        )


@dataclass(frozen=True)
class ContinuationSchedule:
    p_values: tuple = (2.0, 2.5, 3.0, 3.5, 3.8, 3.95, 4.0)
    tol_solve: float | None = None  # default 1e-9 * N
    tol_norm: float = 1e-10
    max_newton: int = 40
    minres_maxiter: int = 4000
    damping_min: float = 1e-4

    def __post_init__(self):
        ps = self.p_values
        if len(ps) < 1 or abs(ps[0] - 2.0) > 1e-12 or abs(ps[-1] - 4.0) > 1e-12:
            raise ValueError("schedule must start at p=2 and end at p=4")
        if any(b <= a for a, b in zip(ps, ps[1:])):
            raise ValueError("schedule must be strictly increasing")


def residual_field(phi: SpinorField, lam: float, p: float) -> SpinorField:
    """D phi - lambda |phi|^{p-2} phi, pointwise."""
    if not 2.0 - 1e-12 <= p <= 4.0 + 1e-12:
        raise ValueError("p must lie in [2, 4]")
    dphi = apply_dirac(phi)
    w = pointwise_power(phi.pointwise_norm(), p - 2.0)
    return phi.like(dphi.plus - lam * w * phi.plus, dphi.minus - lam * w * phi.minus)


def _pack(plus, minus, extra=None):
    parts = [plus.real.ravel(), plus.imag.ravel(), minus.real.ravel(), minus.imag.ravel()]
    if extra is not None:
        parts.append(np.atleast_1d(extra))
    return np.concatenate(parts)


def _unpack(x, n):
    sz = n * n
    plus = (x[:sz] + 1j * x[sz : 2 * sz]).reshape(n, n)
    minus = (x[2 * sz : 3 * sz] + 1j * x[3 * sz : 4 * sz]).reshape(n, n)
    extra = x[4 * sz :]
    return plus, minus, extra


def _minres(op, b, rtol, maxiter, M=None):
    kwargs = {"maxiter": maxiter, "M": M}
    try:
        x, _ = scipy.sparse.linalg.minres(op, b, rtol=rtol, **kwargs)
    except TypeError:  # scipy < 1.12 spells the tolerance 'tol'
        x, _ = scipy.sparse.linalg.minres(op, b, tol=rtol, **kwargs)
    return x


def _fourier_preconditioner(lat, spin, n, shift, n_extra):
    """SPD approximate inverse: modewise 1/(2 pi |xi| + shift) on both components."""
    xi_x, xi_y = mode_vectors(lat, spin, n)
    inv = 1.0 / (2.0 * np.pi * np.hypot(xi_x, xi_y) + shift)

    def apply_inv(arr):
        return np.fft.ifft2(inv * np.fft.fft2(arr))

    dim = 4 * n * n + n_extra

    def mv(x):
        plus, minus, extra = _unpack(x, n)
        return _pack(apply_inv(plus), apply_inv(minus), extra if n_extra else None)

    return scipy.sparse.linalg.LinearOperator((dim, dim), matvec=mv, dtype=float)


def solve_at_exponent(
    p: float,
    init: SpinorField | Solution,
    lambda_mode: str = "normalized",
    lam_fixed: float | None = None,
    tol_solve: float | None = None,
    tol_norm: float = 1e-10,
    max_newton: int = 40,
    minres_maxiter: int = 4000,
    damping_min: float = 1e-4,
) -> Solution:
    """Damped Newton for one exponent; matrix-free Jacobian, MINRES linear solves.

    lambda_mode 'normalized' enforces ||phi||_p = 1 with lambda unknown;
    'fixed' solves at lam_fixed with phi alone unknown.
    """
    if not 2.0 - 1e-12 <= p <= 4.0 + 1e-12:
        raise ValueError("p must lie in [2, 4]")
    if lambda_mode not in ("normalized", "fixed"):
        raise ValueError("lambda_mode must be 'normalized' or 'fixed'")
    phi0 = init.phi if isinstance(init, Solution) else init
    lat, spin, n = phi0.lat, phi0.spin, phi0.n_grid
    if tol_solve is None:
        tol_solve = 1e-9 * n
    kappa = lat.area / n**2
    bordered = lambda_mode == "normalized"

    plus, minus = phi0.plus.copy(), phi0.minus.copy()
    if l2_norm(phi0) == 0.0:
        raise ValueError("init field is identically zero")
    if bordered:
        nrm = lp_norm(phi0, p)
        plus, minus = plus / nrm, minus / nrm
        dphi = apply_dirac_arrays(lat, spin, plus, minus)
        num = kappa * float(
            np.sum((np.conj(dphi[0]) * plus + np.conj(dphi[1]) * minus).real)
        )
        den = kappa * float(np.sum((np.abs(plus) ** 2 + np.abs(minus) ** 2) ** (p / 2.0)))
        lam = num / den
    else:
        lam = float(lam_fixed)

    def field_residual(pl, mi, lm):
        dp, dm = apply_dirac_arrays(lat, spin, pl, mi)
        w = pointwise_power(np.sqrt(np.abs(pl) ** 2 + np.abs(mi) ** 2), p - 2.0)
        return dp - lm * w * pl, dm - lm * w * mi

    def norm_gap(pl, mi):
        return (kappa * np.sum((np.abs(pl) ** 2 + np.abs(mi) ** 2) ** (p / 2.0))) ** (
            1.0 / p
        ) - 1.0

    def merit(pl, mi, lm):
        rp, rm = field_residual(pl, mi, lm)
        res = math.sqrt(
            kappa * float(np.sum(np.abs(rp) ** 2) + np.sum(np.abs(rm) ** 2))
        )
        gap = norm_gap(pl, mi) if bordered else 0.0
        return res, gap, math.hypot(res, gap)

    # Unknowns: phi, (lambda in normalized mode), and one Lagrange multiplier
    # anchoring the U(1) phase; the multiplier row/column keeps the bordered
    # operator symmetric and removes the exact gauge null vector (i phi, 0).
    n_extra = (1 if bordered else 0) + 1
    newton_iters = 0
    res, gap, total = merit(plus, minus, lam)
    for newton_iters in range(1, max_newton + 1):
        if res < tol_solve and abs(gap) < tol_norm:
            newton_iters -= 1
            break
        absphi = np.sqrt(np.abs(plus) ** 2 + np.abs(minus) ** 2)
        w2 = pointwise_power(absphi, p - 2.0)
        inv_abs = np.zeros_like(absphi)
        mask = absphi > 0.0
        inv_abs[mask] = 1.0 / absphi[mask]
        hat_p, hat_m = plus * inv_abs, minus * inv_abs
        g_p, g_m = w2 * plus, w2 * minus
        c_p, c_m = 1j * plus, 1j * minus  # phase anchor d/dtheta e^{i theta} phi

        def jac_mv(x):
            psi_p, psi_m, extra = _unpack(x, n)
            dp, dm = apply_dirac_arrays(lat, spin, psi_p, psi_m)
            cross = (np.conj(hat_p) * psi_p + np.conj(hat_m) * psi_m).real
            mp = w2 * psi_p + (p - 2.0) * w2 * cross * hat_p
            mm = w2 * psi_m + (p - 2.0) * w2 * cross * hat_m
            out_p = dp - lam * mp
            out_m = dm - lam * mm
            rows = []
            if bordered:
                dlam = extra[0]
                out_p -= dlam * g_p
                out_m -= dlam * g_m
                rows.append(
                    -float(np.sum((np.conj(g_p) * psi_p + np.conj(g_m) * psi_m).real))
                )
            dmu = extra[-1]
            out_p += dmu * c_p
            out_m += dmu * c_m
            rows.append(
                float(np.sum((np.conj(c_p) * psi_p + np.conj(c_m) * psi_m).real))
            )
            return _pack(out_p, out_m, np.array(rows))

        dim = 4 * n * n + n_extra
        op = scipy.sparse.linalg.LinearOperator((dim, dim), matvec=jac_mv, dtype=float)
        rp, rm = field_residual(plus, minus, lam)
        rows_rhs = []
        if bordered:
            rows_rhs.append(-(kappa / p * float(np.sum(absphi**p)) - 1.0 / p) / kappa)
        rows_rhs.append(0.0)  # the step must not rotate the phase
        b = -_pack(rp, rm, np.array(rows_rhs))
        prec = _fourier_preconditioner(
            lat, spin, n, shift=1.0 + abs(lam) * float(w2.max(initial=0.0)), n_extra=n_extra
        )
        eta = max(min(1e-4, 0.1 * res), 1e-12)
        step = _minres(op, b, rtol=eta, maxiter=minres_maxiter, M=prec)
        sp, sm, extra = _unpack(step, n)

        t = 1.0
        while t >= damping_min:
            trial_p = plus + t * sp
            trial_m = minus + t * sm
            trial_lam = lam + t * float(extra[0]) if bordered else lam
            t_res, t_gap, t_total = merit(trial_p, trial_m, trial_lam)
            if t_total <= (1.0 - 1e-4 * t) * total or t_total < 1e-15:
                plus, minus, lam = trial_p, trial_m, trial_lam
                res, gap, total = t_res, t_gap, t_total
                break
            t *= 0.5
        else:
            raise ContinuationError(
                f"Newton stalled at p={p}: residual={res:.3e}, damping exhausted "
                "(singular Jacobian near kernel directions: perturb the init)",
                trace=[],
            )
    else:
        raise ContinuationError(
            f"Newton did not converge at p={p}: residual={res:.3e} after "
            f"{max_newton} iterations",
            trace=[],
        )

    phi = SpinorField(lat, spin, plus, minus)
    if spin.is_trivial and abs(p - 2.0) < 1e-12:
        phi = project_out_kernel(phi)
    sol = Solution(
        phi=phi,
        lam=lam,
        p=p,
        residual=l2_norm(residual_field(phi, lam, p)),
        norm_p=lp_norm(phi, p),
        meta={"newton_iters": newton_iters},
    )
    if sol.lam <= 0.0:
        raise ContinuationError(
            f"converged to a non-positive branch lambda={sol.lam:.3e} at p={p}", []
        )
    return sol


def solve_critical(
    lat: Lattice,
    spin: SpinStructure,
    schedule: ContinuationSchedule | None = None,
    init: SpinorField | Solution | None = None,
    n_grid: int = 32,
    rescale_area: bool = True,
    seed: int = 0,
    perturbation: float = 0.0,
) -> Solution:
    """Chain solve_at_exponent over the schedule; returns the p = 4 Solution.

    The lattice is rescaled to unit area first (lambda is invariant under
    the joint rescaling, and the reported lambda then equals
    lambda * sqrt(area)).  The full (p, lambda_p, extrema) trace is attached.
    """
    schedule = schedule or ContinuationSchedule()
    work_lat = lat.unit_area() if rescale_area else lat
    if init is None:
        phi = first_positive_eigenspinor(work_lat, spin, n_grid)
        if perturbation > 0.0:
            from .fields import random_band_limited

            rng = np.random.default_rng(seed)
            phi = phi + perturbation * random_band_limited(work_lat, spin, n_grid, rng)
    else:
        phi = init.phi if isinstance(init, Solution) else init
        if phi.lat != work_lat:
            raise ValueError(
                "init lattice does not match the (rescaled) target lattice; "
                "pass rescale_area=False or rebuild the init"
            )
    trace = []
    sol = None
    for p in schedule.p_values:
        try:
            sol = solve_at_exponent(
                p,
                sol if sol is not None else phi,
                tol_solve=schedule.tol_solve,
                tol_norm=schedule.tol_norm,
                max_newton=schedule.max_newton,
                minres_maxiter=schedule.minres_maxiter,
                damping_min=schedule.damping_min,
            )
        except ContinuationError as exc:
            raise ContinuationError(
                f"continuation aborted at p={p}: {exc}", trace
            ) from exc
        trace.append(
            {
                "p": p,
                "lambda": sol.lam,
                "residual": sol.residual,
                "min_abs": sol.min_abs(),
                "max_abs": sol.max_abs(),
                "newton_iters": sol.meta.get("newton_iters", 0),
            }
        )
    sol.trace = trace
    sol.meta["rescaled_area"] = rescale_area
    return sol


def constant_solution(
    lat: Lattice, spin: SpinStructure, n_grid: int, mode: tuple[int, int] | None = None
) -> Solution:
    """Exact constant-length critical solution built on one eigenmode.

    Any single-mode eigenspinor has constant |phi|; scaling it to
    ||phi||_4 = 1 solves D phi = lambda |phi|^2 phi with
    lambda = lambda_1^+ * sqrt(area) (for the default shortest mode).
    """
    m, k = mode if mode is not None else first_eigenmode(lat, spin)
    lam1, vp, vm = eigenvector_at_mode(lat, spin, m, k)
    area = lat.area
    c = area ** (-0.25)
    phi = pure_mode_field(lat, spin, n_grid, m, k, c * vp, c * vm)
    lam = lam1 * math.sqrt(area)
    res = l2_norm(residual_field(phi, lam, 4.0))
    return Solution(
        phi=phi,
        lam=lam,
        p=4.0,
        residual=res,
        norm_p=lp_norm(phi, 4.0),
        meta={"source": "constant-branch", "mode": [m, k]},
    )


def lambda_consistency(sol: Solution) -> float:
    """Rayleigh-type lambda estimate integral <D phi, phi> / integral |phi|^p."""
    dphi = apply_dirac(sol.phi)
    num = l2_inner(dphi, sol.phi).real
    den = lp_norm(sol.phi, sol.p) ** sol.p
    return num / den
