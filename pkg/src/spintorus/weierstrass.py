"""Spinorial Weierstrass representation on the flat torus.

A solution phi = (phi_plus, phi_minus) of D phi = H |phi|^2 phi encodes a
periodic branched conformal immersion F of the universal cover into R^3
with constant mean curvature H.  The R^3-valued (0,1)-form is built from
the squares

    a1 = phi_plus^2 + conj(phi_minus)^2
    a2 = i (phi_plus^2 - conj(phi_minus)^2)
    a3 = 2 i phi_plus conj(phi_minus)

(coefficient functions of alpha = (a1, a2, a3) dzbar in the flat
trivialization; they are honestly lattice periodic because the holonomy
twist cancels in quadratic expressions).  The closed real 1-form is

    dF_k = -Im(a_k) dx1 + Re(a_k) dx2.

The phase and scale of this realization are frozen by one calibration: for
the explicit constant solution on the rectangle (1,0),(0,y) with holonomy
signs (+1,-1) the integral must reproduce the reference cylinder of radius
sqrt(y)/(2 pi), axis period of norm 1/sqrt(y), and mean curvature
+pi/sqrt(y); the conformal factor then satisfies |dF| = |phi|^2 exactly.

F splits into a linear part (whose evaluation on the generators gives the
period homomorphism) plus a lattice-periodic part integrated spectrally.
Mean curvature of exported meshes is measured with the cotangent formula;
the sign convention is H = -(Laplace F . n)/2 with the outward normal of
the counterclockwise parameter orientation, which makes the calibration
cylinder come out positive.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .fields import SpinorField, squared_twist_grid
from .lattice import Lattice, SpinStructure
from .report import CheckItem, CheckReport


class ClosednessError(RuntimeError):
    """d(Re alpha) too large: the 1-form does not integrate to a surface."""


@dataclass(frozen=True, eq=False)
class OneFormField:
    """Coefficients of the R^3-valued (0,1)-form alpha = (a1, a2, a3) dzbar."""

    lat: Lattice
    spin: SpinStructure
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray

    @property
    def n_grid(self) -> int:
        return self.a1.shape[0]

    def components(self):
        return (self.a1, self.a2, self.a3)

    def conformal_factor(self) -> np.ndarray:
        """Pointwise |dF| = sqrt(sum |a_k|^2 / 2); equals |phi|^2 by construction."""
        total = sum(np.abs(a) ** 2 for a in self.components())
        return np.sqrt(total / 2.0)


@dataclass
class Immersion:
    """Grid immersion values of one fundamental domain plus its periods."""

    lat: Lattice
    spin: SpinStructure
    F: np.ndarray  # (N, N, 3), F at x = (j/N) gamma1 + (l/N) gamma2, F(0) = 0
    V1: np.ndarray  # period over gamma1
    V2: np.ndarray  # period over gamma2
    H: float | None = None
    branch_points: list = field(default_factory=list)  # (j, l, order)
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_grid(self) -> int:
        return self.F.shape[0]

    def period(self, n1: int, n2: int) -> np.ndarray:
        """Period homomorphism on n1 gamma1 + n2 gamma2 (additive by construction)."""
        return n1 * self.V1 + n2 * self.V2


def build_alpha(phi: SpinorField) -> OneFormField:
    tw = squared_twist_grid(phi.lat, phi.spin, phi.n_grid)
    p2 = phi.plus**2 * tw
    m2 = np.conj(phi.minus) ** 2 * np.conj(tw)
    return OneFormField(
        phi.lat,
        phi.spin,
        p2 + m2,
        1j * (p2 - m2),
        2j * phi.plus * np.conj(phi.minus),
    )


def _lattice_components(alpha: OneFormField):
    """dF pulled back to lattice coordinates: dF_k = U_k ds + V_k dt."""
    g1, g2 = alpha.lat.gamma1, alpha.lat.gamma2
    out = []
    for a in alpha.components():
        u = -a.imag  # dx1 coefficient
        v = a.real  # dx2 coefficient
        out.append((u * g1[0] + v * g1[1], u * g2[0] + v * g2[1]))
    return out


def _mode_indices(n: int):
    idx = np.fft.fftfreq(n, d=1.0 / n)
    return np.meshgrid(idx, idx, indexing="ij")


def closedness_residual(alpha: OneFormField) -> float:
    """L^2 norm of d(Re alpha), measured as a Euclidean-coordinate density.

    Zero analytically for exact solutions of D phi = H |phi|^2 phi, so the
    reported value is the discretization / solver residual.
    """
    n = alpha.n_grid
    mm, kk = _mode_indices(n)
    det = alpha.lat.det()
    w = alpha.lat.area / n**2
    total = 0.0
    for u_s, v_t in _lattice_components(alpha):
        r_hat = 2j * np.pi * (mm * np.fft.fft2(v_t) - kk * np.fft.fft2(u_s))
        r = np.fft.ifft2(r_hat).real / det
        total += float(np.sum(r**2))
    return math.sqrt(w * total)


def integrate_immersion(
    alpha: OneFormField, H: float | None = None, tol_closed: float = 1e-5,
    zero_tol: float = 1e-6,
) -> Immersion:
    """Integrate dF = Re alpha into F with F(0) = 0 and period vectors.

    The lattice-periodic coefficient functions split into mean plus
    oscillation; the oscillation integrates spectrally (mode division), the
    mean gives the linear part whose values on gamma1, gamma2 are the
    periods.  Refuses to integrate when the closedness residual exceeds
    tol_closed.
    """
    res_closed = closedness_residual(alpha)
    if not res_closed <= tol_closed:
        raise ClosednessError(
            f"closedness residual {res_closed:.3e} exceeds tol_closed={tol_closed:.3e}"
        )
    n = alpha.n_grid
    mm, kk = _mode_indices(n)
    denom = mm**2 + kk**2
    denom[0, 0] = 1.0
    F = np.zeros((n, n, 3))
    lin = np.zeros((3, 2))
    for comp, (u_s, v_t) in enumerate(_lattice_components(alpha)):
        u_hat = np.fft.fft2(u_s)
        v_hat = np.fft.fft2(v_t)
        lin[comp, 0] = u_hat[0, 0].real / n**2
        lin[comp, 1] = v_hat[0, 0].real / n**2
        f_hat = (mm * u_hat + kk * v_hat) / (2j * np.pi * denom)
        f_hat[0, 0] = 0.0
        per = np.fft.ifft2(f_hat).real
        F[:, :, comp] = per - per[0, 0]
    ss = np.arange(n)[:, None] / n
    tt = np.arange(n)[None, :] / n
    F += ss[..., None] * lin[:, 0] + tt[..., None] * lin[:, 1]
    mu = alpha.conformal_factor()
    imm = Immersion(
        lat=alpha.lat,
        spin=alpha.spin,
        F=F,
        V1=lin[:, 0].copy(),
        V2=lin[:, 1].copy(),
        H=H,
        branch_points=_detect_branch_points(mu, zero_tol),
        diagnostics={"closedness": res_closed},
    )
    return imm


# ---------------------------------------------------------------------------
# Branch points and spinor zeros


def _periodic_clusters(mask: np.ndarray) -> list[list[tuple[int, int]]]:
    """Connected components of a boolean grid with periodic wrap (8-neighbor)."""
    n0, n1 = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    clusters = []
    for j0 in range(n0):
        for l0 in range(n1):
            if not mask[j0, l0] or seen[j0, l0]:
                continue
            stack = [(j0, l0)]
            seen[j0, l0] = True
            comp = []
            while stack:
                j, l = stack.pop()
                comp.append((j, l))
                for dj in (-1, 0, 1):
                    for dl in (-1, 0, 1):
                        jj, ll = (j + dj) % n0, (l + dl) % n1
                        if mask[jj, ll] and not seen[jj, ll]:
                            seen[jj, ll] = True
                            stack.append((jj, ll))
            clusters.append(comp)
    return clusters


def _ring(center: tuple[int, int], radius: int, n: int):
    """Cells at Chebyshev distance `radius`, counterclockwise, wrapped."""
    cj, cl = center
    cells = []
    for dl in range(-radius, radius):
        cells.append((cj + radius, cl + dl))
    for dj in range(radius, -radius, -1):
        cells.append((cj + dj, cl + radius))
    for dl in range(radius, -radius, -1):
        cells.append((cj - radius, cl + dl))
    for dj in range(-radius, radius):
        cells.append((cj + dj, cl - radius))
    return [(j % n, l % n) for j, l in cells]


def _ring_mean(arr: np.ndarray, center, radius: int) -> float:
    vals = [arr[j, l] for j, l in _ring(center, radius, arr.shape[0])]
    return float(np.mean(vals))


def _detect_branch_points(mu: np.ndarray, zero_tol: float) -> list:
    """Zeros of the conformal factor with vanishing order from a 5x5 fit."""
    top = float(mu.max())
    if top <= 0.0:
        return []
    pts = []
    for comp in _periodic_clusters(mu < zero_tol * top):
        center = min(comp, key=lambda c: mu[c])
        s1 = _ring_mean(mu, center, 1)
        s2 = _ring_mean(mu, center, 2)
        if s1 <= 0.0 or s2 <= 0.0:
            order = 0
        else:
            order = int(round(math.log(s2 / s1) / math.log(2.0)))
        pts.append((center[0], center[1], order))
    return pts


def _winding(values: np.ndarray) -> int:
    """Winding number of a complex loop sample; 0 when the loop is unreliable."""
    mags = np.abs(values)
    if mags.min() <= 1e-3 * mags.max() or mags.max() == 0.0:
        return 0
    args = np.angle(values)
    diffs = np.diff(np.append(args, args[0]))
    diffs = (diffs + np.pi) % (2.0 * np.pi) - np.pi
    return int(round(diffs.sum() / (2.0 * np.pi)))


@dataclass
class ZeroCount:
    zeros: list  # (j, l, order)
    bound: float
    ok: bool


def count_zeros(
    phi: SpinorField, lam: float, genus: int = 1, zero_tol: float = 1e-6
) -> ZeroCount:
    """Detected spinor zeros against the Gauss-Bonnet bound genus-1+lambda^2/(4 pi).

    A grid cluster below zero_tol * max|phi| counts as a zero when either
    half-spinor component has nonzero winding around it.
    """
    if genus != 1:
        raise ValueError("only the torus (genus 1) is covered")
    mu = phi.pointwise_norm()
    top = float(mu.max())
    zeros = []
    if top > 0.0:
        n = phi.n_grid
        for comp in _periodic_clusters(mu < zero_tol * top):
            center = min(comp, key=lambda c: mu[c])
            extent = max(
                max(abs(j - center[0]), abs(l - center[1])) for j, l in comp
            )
            radius = min(max(2, extent + 2), n // 2 - 1)
            ring = _ring(center, radius, n)
            w_plus = _winding(np.array([phi.plus[c] for c in ring]))
            w_minus = _winding(np.array([phi.minus[c] for c in ring]))
            order = max(abs(w_plus), abs(w_minus))
            if order >= 1:
                zeros.append((center[0], center[1], order))
    bound = genus - 1 + lam**2 / (4.0 * np.pi)
    return ZeroCount(zeros, bound, ok=len(zeros) <= bound)


# ---------------------------------------------------------------------------
# Discrete mean curvature on the periodic grid mesh

_NEIGHBOR_CYCLE = [(1, 0), (1, 1), (0, 1), (-1, 0), (-1, -1), (0, -1)]


def _shifted_positions(imm: Immersion, dj: int, dl: int) -> np.ndarray:
    """F at grid point (j+dj, l+dl) with the period offsets across wraps."""
    out = np.roll(imm.F, (-dj, -dl), axis=(0, 1)).copy()
    if dj == 1:
        out[-1, :, :] += imm.V1
    elif dj == -1:
        out[0, :, :] -= imm.V1
    if dl == 1:
        out[:, -1, :] += imm.V2
    elif dl == -1:
        out[:, 0, :] -= imm.V2
    return out


def _cot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """cot of the angle between vector fields a, b (last axis 3)."""
    dots = np.sum(a * b, axis=-1)
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    return dots / np.maximum(cross, 1e-300)


def discrete_mean_curvature(imm: Immersion):
    """Signed cotangent-formula mean curvature at every grid vertex.

    Returns (h_signed, normals); sign convention H = -(Lap F . n)/2 with the
    counterclockwise parameter normal (calibration cylinder is positive).
    """
    v = imm.F
    nbrs = [_shifted_positions(imm, dj, dl) for dj, dl in _NEIGHBOR_CYCLE]
    shape = v.shape[:2]
    lap = np.zeros_like(v)
    area = np.zeros(shape)
    normal = np.zeros_like(v)
    k = len(nbrs)
    for i in range(k):
        p_prev = nbrs[(i - 1) % k]
        p_i = nbrs[i]
        p_next = nbrs[(i + 1) % k]
        cot_a = _cot(v - p_prev, p_i - p_prev)
        cot_b = _cot(v - p_next, p_i - p_next)
        lap += ((cot_a + cot_b)[..., None]) * (p_i - v)
        tri_cross = np.cross(p_i - v, p_next - v)
        area += 0.5 * np.linalg.norm(tri_cross, axis=-1)
        normal += tri_cross
    vertex_area = area / 3.0
    lap /= np.maximum(2.0 * vertex_area, 1e-300)[..., None]
    norm_len = np.linalg.norm(normal, axis=-1, keepdims=True)
    normal = normal / np.maximum(norm_len, 1e-300)
    h_signed = -0.5 * np.sum(lap * normal, axis=-1)
    return h_signed, normal


def _branch_mask(imm: Immersion, margin: int = 3) -> np.ndarray:
    """True on vertices within `margin` cells of a branch point."""
    n = imm.n_grid
    mask = np.zeros((n, n), dtype=bool)
    for j, l, _ in imm.branch_points:
        for dj in range(-margin, margin + 1):
            for dl in range(-margin, margin + 1):
                mask[(j + dj) % n, (l + dl) % n] = True
    return mask


# ---------------------------------------------------------------------------
# Verification


def _spectral_jacobian(imm: Immersion):
    """Euclidean-coordinate derivative matrices d F / d x (N, N, 3, 2)."""
    n = imm.n_grid
    mm, kk = _mode_indices(n)
    # subtract the linear part, differentiate the periodic part spectrally
    ss = np.arange(n)[:, None] / n
    tt = np.arange(n)[None, :] / n
    lin = np.stack([imm.V1, imm.V2], axis=1)  # (3, 2) in (s, t) coords
    per = imm.F - ss[..., None] * lin[:, 0] - tt[..., None] * lin[:, 1]
    d_s = np.empty((n, n, 3))
    d_t = np.empty((n, n, 3))
    for comp in range(3):
        f_hat = np.fft.fft2(per[:, :, comp])
        d_s[:, :, comp] = np.fft.ifft2(2j * np.pi * mm * f_hat).real + lin[comp, 0]
        d_t[:, :, comp] = np.fft.ifft2(2j * np.pi * kk * f_hat).real + lin[comp, 1]
    # x = G^T (s, t), G rows = generators, so dF/dx = [d_s F, d_t F] (G^T)^{-1}
    g_inv_t = np.linalg.inv(imm.lat.generator_matrix()).T
    return np.stack([d_s, d_t], axis=-1) @ g_inv_t


def verify_immersion(
    imm: Immersion,
    phi: SpinorField,
    H: float | None = None,
    conformality_tol: float = 1e-8,
    cmc_tol: float = 0.01,
    period_tol: float = 1e-10,
) -> CheckReport:
    """Check conformality, CMC, branch orders, and period additivity."""
    if phi.n_grid != imm.n_grid:
        raise ValueError("grid mismatch between immersion and spinor field")
    if H is None:
        H = imm.H
    items = []

    jac = _spectral_jacobian(imm)
    target = phi.pointwise_norm() ** 2
    top = float(target.max())
    s1 = np.linalg.norm(jac[..., 0], axis=-1)
    s2 = np.linalg.norm(jac[..., 1], axis=-1)
    ortho = np.sum(jac[..., 0] * jac[..., 1], axis=-1)
    dev = max(
        float(np.max(np.abs(s1 - target))),
        float(np.max(np.abs(s2 - target))),
        float(np.max(np.abs(ortho))) / max(top, 1e-300),
    )
    conf = dev / max(top, 1e-300)
    items.append(
        CheckItem("conformality |dF|=|phi|^2", conf, conformality_tol, conf < conformality_tol)
    )

    closed = imm.diagnostics.get("closedness")
    if closed is None:
        closed = closedness_residual(build_alpha(phi))
    items.append(CheckItem("closedness residual", closed, 1e-5, closed < 1e-5))

    h_signed, _ = discrete_mean_curvature(imm)
    good = ~_branch_mask(imm)
    if H is not None and np.any(good):
        scale = max(abs(H), 1e-300)
        rel = np.abs(h_signed[good] - H) / scale if H != 0 else np.abs(h_signed[good])
        cmc_err = float(np.median(rel))
        items.append(CheckItem("cmc median relative error", cmc_err, cmc_tol, cmc_err < cmc_tol))
    else:  # pragma: no cover - no target curvature supplied
        cmc_err = math.nan
        items.append(CheckItem("cmc median relative error", cmc_err, cmc_tol, False, "no H"))

    orders_even = all(order % 2 == 0 and order > 0 for _, _, order in imm.branch_points)
    items.append(
        CheckItem(
            "branch orders even",
            float(len(imm.branch_points)),
            math.inf,
            orders_even or not imm.branch_points,
            f"orders={[o for _, _, o in imm.branch_points]}",
        )
    )

    diag = _diagonal_period(imm)
    add_err = float(np.linalg.norm(diag - (imm.V1 + imm.V2)))
    scale = max(np.linalg.norm(imm.V1) + np.linalg.norm(imm.V2), 1.0)
    items.append(
        CheckItem("period additivity", add_err / scale, period_tol, add_err / scale < period_tol)
    )

    imm.diagnostics.update(
        {"conformality": conf, "cmc_median_err": cmc_err, "closedness": closed}
    )
    return CheckReport(items)


def _diagonal_period(imm: Immersion) -> np.ndarray:
    """Period over the diagonal loop gamma1 + gamma2 by direct line quadrature."""
    jac = _spectral_jacobian(imm)
    n = imm.n_grid
    gamma = np.array(imm.lat.gamma1) + np.array(imm.lat.gamma2)
    idx = np.arange(n)
    samples = jac[idx, idx] @ gamma  # dF(gamma) along the diagonal
    return samples.sum(axis=0) / n


# ---------------------------------------------------------------------------
# Mesh export


def export_mesh(imm: Immersion, copies: tuple[int, int], path, lam: float | None = None):
    """Write a triangulated OBJ tiling plus a JSON sidecar.

    Vertices are F(x) + m V1 + l V2 on a (k1 N + 1) x (k2 N + 1) grid (the +1
    closes the seams), two counterclockwise triangles per grid cell, 1-based
    OBJ indices.  The sidecar records periods, H, lambda, diagnostics, and
    branch points.  Returns (obj_path, sidecar_path).
    """
    k1, k2 = copies
    if k1 < 1 or k2 < 1:
        raise ValueError("tiling counts must be >= 1")
    n = imm.n_grid
    rows = k1 * n + 1
    cols = k2 * n + 1
    jj = np.arange(rows)
    ll = np.arange(cols)
    jg, lg = np.meshgrid(jj, ll, indexing="ij")
    base = imm.F[jg % n, lg % n]
    verts = (
        base
        + (jg // n)[..., None] * imm.V1[None, None, :]
        + (lg // n)[..., None] * imm.V2[None, None, :]
    ).reshape(-1, 3)

    def vid(a, b):
        return a * cols + b + 1

    lines = ["# spintorus periodic immersion mesh"]
    lines += [
        f"v {float(p[0])!r} {float(p[1])!r} {float(p[2])!r}" for p in verts
    ]
    for a in range(rows - 1):
        for b in range(cols - 1):
            lines.append(f"f {vid(a, b)} {vid(a + 1, b)} {vid(a + 1, b + 1)}")
            lines.append(f"f {vid(a, b)} {vid(a + 1, b + 1)} {vid(a, b + 1)}")
    obj_path = str(path)
    try:
        with open(obj_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        sidecar_path = obj_path.rsplit(".", 1)[0] + ".json"
        sidecar = {
            "periods": [list(map(float, imm.V1)), list(map(float, imm.V2))],
            "H": imm.H,
            "lambda": lam if lam is not None else imm.H,
            "diagnostics": imm.diagnostics,
            "branch_points": [
                {"u": j / n, "v": l / n, "order": order}
                for j, l, order in imm.branch_points
            ],
            "copies": [k1, k2],
            "n_grid": n,
        }
        with open(sidecar_path, "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, sort_keys=True, indent=1)
    except OSError as exc:
        raise OSError(f"mesh export to {obj_path} failed: {exc}") from exc
    return obj_path, sidecar_path


def load_obj_vertices(path) -> np.ndarray:
    """Vertex array of an ASCII OBJ file (for round-trip checks)."""
    verts = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("v "):
                verts.append([float(tok) for tok in line.split()[1:4]])
    return np.array(verts)


def rigid_align(src: np.ndarray, dst: np.ndarray):
    """Best O(3)+translation alignment of src onto dst (points in rows).

    Returns (aligned_src, max_deviation).  Reflections are allowed because
    the reference immersions are defined up to P in O(3).
    """
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    h = (src - mu_s).T @ (dst - mu_d)
    u, _, vt = np.linalg.svd(h)
    rot = (u @ vt).T
    aligned = (src - mu_s) @ rot.T + mu_d
    dev = float(np.max(np.linalg.norm(aligned - dst, axis=1)))
    return aligned, dev
