"""Spinor fields sampled on an N x N grid over one fundamental domain.

Storage convention
------------------
A half-spinor pair phi = (phi_plus, phi_minus) twisted by the holonomy chi
is stored through its untwisted coefficient functions

    u_pm(x) = exp(-2 pi i <delta, x>) phi_pm(x),

which are honestly Gamma-periodic; the twist lives entirely in the Fourier
shift delta (see lattice.spin_shift).  Pointwise norms are unaffected:
|phi| = |u|.  Grid point (j, l) sits at x = (j/N) gamma1 + (l/N) gamma2.

Fourier convention: numpy fft2, so u[j, l] = sum_{m,k} d[m,k]
exp(2 pi i (m j + k l)/N) with d = fft2(u)/N^2 and integer modes
m, k = N * fftfreq(N).  The physical mode vector of index (m, k) is
xi = (m + t1) gamma1* + (k + t2) gamma2* with t_i the shift pairings.

Quadrature: integrals over the torus are uniform Riemann sums,
integral f dvol ~= (area/N^2) sum_grid f, spectrally accurate for smooth
periodic integrands and exact for band-limited ones.

Serialization: one JSON object with a header {lattice, spin, n_grid} and
the two coefficient arrays as base64 raw bytes, little-endian complex128,
row-major, plus component first.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .lattice import DualModeSet, Lattice, SpinStructure, first_eigenmode


@dataclass(frozen=True, eq=False)
class SpinorField:
    lat: Lattice
    spin: SpinStructure
    plus: np.ndarray
    minus: np.ndarray

    def __post_init__(self):
        p, m = self.plus, self.minus
        if p.shape != m.shape or p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("components must be square arrays of equal shape")
        n = p.shape[0]
        if n < 4 or n % 2 != 0:
            raise ValueError(f"grid size must be even and >= 4, got {n}")
        object.__setattr__(self, "plus", np.ascontiguousarray(p, dtype=complex))
        object.__setattr__(self, "minus", np.ascontiguousarray(m, dtype=complex))

    @property
    def n_grid(self) -> int:
        return self.plus.shape[0]

    def like(self, plus: np.ndarray, minus: np.ndarray) -> "SpinorField":
        return SpinorField(self.lat, self.spin, plus, minus)

    def __add__(self, other: "SpinorField") -> "SpinorField":
        return self.like(self.plus + other.plus, self.minus + other.minus)

    def __sub__(self, other: "SpinorField") -> "SpinorField":
        return self.like(self.plus - other.plus, self.minus - other.minus)

    def __mul__(self, c) -> "SpinorField":
        return self.like(c * self.plus, c * self.minus)

    __rmul__ = __mul__

    def pointwise_norm(self) -> np.ndarray:
        """|phi| on the grid (twist-independent)."""
        return np.sqrt(np.abs(self.plus) ** 2 + np.abs(self.minus) ** 2)


def quadrature_weight(phi: SpinorField) -> float:
    return phi.lat.area / phi.n_grid**2


def pointwise_power(w: np.ndarray, expo: float) -> np.ndarray:
    """w^expo on nonnegative arrays with the 0 -> 0 convention (0^0 = 1)."""
    if expo == 0.0:
        return np.ones_like(w)
    out = np.zeros_like(w)
    mask = w > 0.0
    out[mask] = w[mask] ** expo
    return out


def lp_norm(phi: SpinorField, p: float) -> float:
    if p < 1.0:
        raise ValueError("p must be >= 1")
    w = quadrature_weight(phi)
    dens = phi.pointwise_norm() ** p
    return float((w * dens.sum()) ** (1.0 / p))


def l2_inner(a: SpinorField, b: SpinorField) -> complex:
    """<a, b>_{L^2}, antilinear in the first slot."""
    w = quadrature_weight(a)
    return complex(w * (np.vdot(a.plus, b.plus) + np.vdot(a.minus, b.minus)))


def l2_norm(phi: SpinorField) -> float:
    return lp_norm(phi, 2.0)


@lru_cache(maxsize=64)
def _mode_data(lat: Lattice, spin: SpinStructure, n: int):
    """Per-(lattice, spin, N) cache: mode vectors and twist grids."""
    modes = DualModeSet(lat, spin)
    idx = np.fft.fftfreq(n, d=1.0 / n)
    mm, kk = np.meshgrid(idx, idx, indexing="ij")
    xi = modes.mode_vectors(mm, kk)
    xi_x = np.ascontiguousarray(xi[..., 0])
    xi_y = np.ascontiguousarray(xi[..., 1])
    t1, t2 = modes.pairings()
    j = np.arange(n)
    # exp(2 pi i <2 delta, x>) on the grid; 2 delta is in Gamma*, so this is
    # the plain Fourier mode with integer pairings (2 t1, 2 t2).
    twist_sq = np.exp(
        2j * np.pi * (np.add.outer(2.0 * t1 * j, 2.0 * t2 * j)) / n
    )
    return xi_x, xi_y, twist_sq


def mode_vectors(lat: Lattice, spin: SpinStructure, n: int):
    """Shifted mode component arrays (xi_x, xi_y), fft2 index order."""
    xi_x, xi_y, _ = _mode_data(lat, spin, n)
    return xi_x, xi_y


def squared_twist_grid(lat: Lattice, spin: SpinStructure, n: int) -> np.ndarray:
    """exp(2 pi i <2 delta, x>) sampled on the grid (for quadratic expressions)."""
    return _mode_data(lat, spin, n)[2]


def zero_field(lat: Lattice, spin: SpinStructure, n: int) -> SpinorField:
    z = np.zeros((n, n), dtype=complex)
    return SpinorField(lat, spin, z, z.copy())


def pure_mode_field(
    lat: Lattice,
    spin: SpinStructure,
    n: int,
    m: int,
    k: int,
    a_plus: complex,
    a_minus: complex,
) -> SpinorField:
    """Single Fourier mode (m, k) with the given component amplitudes."""
    j = np.arange(n)
    wave = np.exp(2j * np.pi * (np.add.outer(m * j, k * j)) / n)
    return SpinorField(lat, spin, a_plus * wave, a_minus * wave)


def eigenvector_at_mode(
    lat: Lattice, spin: SpinStructure, m: int, k: int
) -> tuple[float, complex, complex]:
    """(2 pi |xi|, v_plus, v_minus) for the positive symbol eigenvalue at (m, k)."""
    modes = DualModeSet(lat, spin)
    xi = modes.mode_vectors(np.array(m), np.array(k))
    xc = complex(xi[0], xi[1])
    r = abs(xc)
    if r < 1e-14:
        raise ValueError("zero mode has no positive eigenvalue")
    # Symbol [[0, 2 pi i xc], [-2 pi i conj(xc), 0]]; (1, -i conj(xc)/r) is the
    # +2 pi r eigenvector.
    return 2.0 * np.pi * r, 1.0 / np.sqrt(2.0), -1j * np.conj(xc) / (r * np.sqrt(2.0))


def first_positive_eigenspinor(
    lat: Lattice, spin: SpinStructure, n: int
) -> SpinorField:
    """Unit-L^2 eigenspinor to lambda_1^+, built from the shortest nonzero mode."""
    m, k = first_eigenmode(lat, spin)
    _, vp, vm = eigenvector_at_mode(lat, spin, m, k)
    phi = pure_mode_field(lat, spin, n, m, k, vp, vm)
    return (1.0 / l2_norm(phi)) * phi


def random_band_limited(
    lat: Lattice,
    spin: SpinStructure,
    n: int,
    rng: np.random.Generator,
    max_mode: int | None = None,
) -> SpinorField:
    """Gaussian random field supported on modes |m|, |k| <= max_mode."""
    if max_mode is None:
        max_mode = max(1, n // 4)
    max_mode = min(max_mode, n // 2 - 1)
    coeffs = np.zeros((2, n, n), dtype=complex)
    span = np.r_[0 : max_mode + 1, n - max_mode : n]
    block = rng.standard_normal((2, len(span), len(span))) + 1j * rng.standard_normal(
        (2, len(span), len(span))
    )
    coeffs[np.ix_([0, 1], span, span)] = block
    plus = np.fft.ifft2(coeffs[0]) * n**2
    minus = np.fft.ifft2(coeffs[1]) * n**2
    phi = SpinorField(lat, spin, plus, minus)
    return (1.0 / l2_norm(phi)) * phi


# ---------------------------------------------------------------------------
# Serialization


def _encode(arr: np.ndarray) -> str:
    buf = np.ascontiguousarray(arr, dtype="<c16").tobytes()
    return base64.b64encode(buf).decode("ascii")


def _decode(text: str, n: int) -> np.ndarray:
    raw = base64.b64decode(text.encode("ascii"))
    return np.frombuffer(raw, dtype="<c16").reshape(n, n).astype(complex)


def spinor_to_dict(phi: SpinorField) -> dict:
    return {
        "format": "spintorus-spinor",
        "byte_order": "little-endian complex128, row-major",
        "lattice": {"gamma1": list(phi.lat.gamma1), "gamma2": list(phi.lat.gamma2)},
        "spin": {"eps1": phi.spin.eps1, "eps2": phi.spin.eps2},
        "n_grid": phi.n_grid,
        "plus": _encode(phi.plus),
        "minus": _encode(phi.minus),
    }


def spinor_from_dict(data: dict) -> SpinorField:
    lat = Lattice(
        tuple(data["lattice"]["gamma1"]), tuple(data["lattice"]["gamma2"])
    )
    spin = SpinStructure(data["spin"]["eps1"], data["spin"]["eps2"])
    n = int(data["n_grid"])
    return SpinorField(lat, spin, _decode(data["plus"], n), _decode(data["minus"], n))


def save_spinor(phi: SpinorField, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spinor_to_dict(phi), fh, sort_keys=True, indent=1)


def load_spinor(path) -> SpinorField:
    with open(path, "r", encoding="utf-8") as fh:
        return spinor_from_dict(json.load(fh))
