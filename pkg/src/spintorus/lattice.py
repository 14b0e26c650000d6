"""Flat 2-tori R^2/Gamma, spin structures, and closed-form Dirac spectra.

Conventions used throughout the package:

- A lattice is spanned by generators gamma1, gamma2 in R^2 with
  det(gamma1, gamma2) > 0; the torus R^2/Gamma carries the Euclidean metric.
- A spin structure is encoded by its holonomy signs (eps1, eps2) with
  eps_i = chi(gamma_i) in {+1, -1}; (+1, +1) is the trivial structure.
- Sections twisted by chi expand in Fourier modes over the shifted dual
  lattice Gamma* + delta where the shift delta pairs to 0 with generators
  carrying eps = +1 and to 1/2 with eps = -1 (canonical representative).
- The flat Dirac operator has eigenvalues +-2*pi*|xi| for xi in Gamma* + delta,
  each with complex multiplicity 1 per mode; xi = 0 (trivial structure only)
  contributes the eigenvalue 0 with complex multiplicity 2.  Real
  multiplicities are twice the complex ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class InvalidLatticeError(ValueError):
    """Degenerate lattice generators (zero determinant)."""


@dataclass(frozen=True)
class Lattice:
    """Lattice Gamma = span_Z{gamma1, gamma2} with positive orientation."""

    gamma1: tuple[float, float]
    gamma2: tuple[float, float]

    def __post_init__(self):
        if self.det() <= 0.0:
            raise InvalidLatticeError(
                f"generators must be positively oriented, det={self.det()}"
            )

    def det(self) -> float:
        g1, g2 = self.gamma1, self.gamma2
        return g1[0] * g2[1] - g1[1] * g2[0]

    @property
    def area(self) -> float:
        return self.det()

    def generator_matrix(self) -> np.ndarray:
        """Rows are gamma1, gamma2."""
        return np.array([self.gamma1, self.gamma2], dtype=float)

    def dual_basis(self) -> tuple[np.ndarray, np.ndarray]:
        """(gamma1*, gamma2*) with <gamma_i*, gamma_j> = delta_ij."""
        g = self.generator_matrix()
        dual = np.linalg.inv(g).T
        return dual[0], dual[1]

    def scaled(self, c: float) -> "Lattice":
        if c <= 0.0:
            raise InvalidLatticeError("scale factor must be positive")
        g1, g2 = self.gamma1, self.gamma2
        return Lattice((c * g1[0], c * g1[1]), (c * g2[0], c * g2[1]))

    def unit_area(self) -> "Lattice":
        """Homothety of the lattice with area 1."""
        return self.scaled(1.0 / math.sqrt(self.area))


@dataclass(frozen=True)
class SpinStructure:
    """Holonomy signs chi(gamma1), chi(gamma2) of one of the 4 spin structures."""

    eps1: int
    eps2: int

    def __post_init__(self):
        if self.eps1 not in (-1, 1) or self.eps2 not in (-1, 1):
            raise ValueError("holonomy signs must be +1 or -1")

    @property
    def is_trivial(self) -> bool:
        return self.eps1 == 1 and self.eps2 == 1

    @classmethod
    def trivial(cls) -> "SpinStructure":
        return cls(1, 1)

    @classmethod
    def all_four(cls) -> list["SpinStructure"]:
        return [cls(e1, e2) for e1 in (1, -1) for e2 in (1, -1)]

    def pairing_fractions(self) -> tuple[Fraction, Fraction]:
        """Exact pairings <delta, gamma_i> mod 1, in {0, 1/2}."""
        return (Fraction(1 - self.eps1, 4), Fraction(1 - self.eps2, 4))


def make_lattice(v1, v2) -> Lattice:
    """Build a positively oriented lattice, swapping generators if needed."""
    v1 = (float(v1[0]), float(v1[1]))
    v2 = (float(v2[0]), float(v2[1]))
    det = v1[0] * v2[1] - v1[1] * v2[0]
    if det == 0.0:
        raise InvalidLatticeError(f"degenerate generators {v1}, {v2}")
    if det < 0.0:
        v1, v2 = v2, v1
    return Lattice(v1, v2)


def spin_shift(lat: Lattice, spin: SpinStructure) -> np.ndarray:
    """Dual shift delta with <delta, gamma_i> = 0 for eps_i = +1 and 1/2 for -1."""
    t1, t2 = spin.pairing_fractions()
    d1, d2 = lat.dual_basis()
    return float(t1) * d1 + float(t2) * d2


@dataclass(frozen=True)
class DualModeSet:
    """Shifted dual modes xi = (m + t1) gamma1* + (k + t2) gamma2*.

    t_i in {0, 1/2} is the canonical pairing of the shift with gamma_i, so
    exp(2 pi i <xi, gamma_i>) = eps_i holds exactly for every integer (m, k).
    """

    lat: Lattice
    spin: SpinStructure

    def pairings(self) -> tuple[float, float]:
        t1, t2 = self.spin.pairing_fractions()
        return float(t1), float(t2)

    def mode_vectors(self, ms: np.ndarray, ks: np.ndarray) -> np.ndarray:
        """R^2 vectors xi for integer index arrays ms, ks (broadcast together)."""
        t1, t2 = self.pairings()
        d1, d2 = self.lat.dual_basis()
        a1 = np.asarray(ms, dtype=float) + t1
        a2 = np.asarray(ks, dtype=float) + t2
        return np.stack(
            [a1 * d1[0] + a2 * d2[0], a1 * d1[1] + a2 * d2[1]], axis=-1
        )

    def pairing_exact(self, m: int, k: int, generator: int) -> Fraction:
        """<xi_{m,k}, gamma_i> as an exact rational number."""
        t1, t2 = self.spin.pairing_fractions()
        if generator == 1:
            return m + t1
        if generator == 2:
            return k + t2
        raise ValueError("generator index must be 1 or 2")

    def window(self, half_width: int) -> tuple[np.ndarray, np.ndarray]:
        """Centered integer index grids (m, k), |m|, |k| <= half_width."""
        r = np.arange(-half_width, half_width + 1)
        return np.meshgrid(r, r, indexing="ij")


def closed_form_spectrum(
    lat: Lattice, spin: SpinStructure, count: int
) -> list[tuple[float, int]]:
    """The `count` aggregated eigenvalues of smallest |value|.

    Returns (eigenvalue, complex multiplicity) pairs sorted by value then
    multiplicity.  Aggregation merges modes of equal |xi| (relative radius
    tolerance 1e-12), so a +-xi pair at radius r yields entries
    (-2 pi r, 2) and (+2 pi r, 2).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    modes = DualModeSet(lat, spin)
    gen_norm = max(
        math.hypot(*lat.gamma1),
        math.hypot(*lat.gamma2),
        math.hypot(lat.gamma1[0] + lat.gamma2[0], lat.gamma1[1] + lat.gamma2[1]),
    )
    half_width = 4
    while True:
        mm, kk = modes.window(half_width)
        xi = modes.mode_vectors(mm, kk)
        radii = np.hypot(xi[..., 0], xi[..., 1]).ravel()
        entries = _aggregate_levels(radii)
        # Candidate order: by |value|, negatives first on ties.
        entries.sort(key=lambda e: (abs(e[0]), e[0]))
        if len(entries) >= count:
            selected = entries[:count]
            needed_radius = max(abs(v) for v, _ in selected) / (2.0 * math.pi)
            # Every mode with |xi| <= half_width / max|gamma| lies in the window,
            # so the selection is certified complete below that radius.
            if needed_radius < half_width / gen_norm:
                selected.sort(key=lambda e: (e[0], e[1]))
                return selected
        half_width *= 2


def _aggregate_levels(radii: np.ndarray) -> list[tuple[float, int]]:
    radii = np.sort(radii)
    entries: list[tuple[float, int]] = []
    i = 0
    n = len(radii)
    while i < n:
        r = radii[i]
        j = i
        while j < n and radii[j] <= r + 1e-12 * max(1.0, r):
            j += 1
        mult = j - i
        if r < 1e-14:
            entries.append((0.0, 2 * mult))
        else:
            val = 2.0 * math.pi * float(r)
            entries.append((-val, mult))
            entries.append((val, mult))
        i = j
    return entries


def first_positive_eigenvalue(lat: Lattice, spin: SpinStructure) -> float:
    """lambda_1^+ = 2 pi |xi| over the shortest nonzero shifted dual mode."""
    for value, _ in closed_form_spectrum(lat, spin, 3):
        if value > 1e-14:
            return value
    raise RuntimeError("no positive eigenvalue found")  # pragma: no cover


def first_eigenmode(lat: Lattice, spin: SpinStructure) -> tuple[int, int]:
    """Integer index (m, k) of a shortest nonzero mode, deterministic tie-break."""
    modes = DualModeSet(lat, spin)
    gen_norm = max(math.hypot(*lat.gamma1), math.hypot(*lat.gamma2))
    half_width = 4
    while True:
        mm, kk = modes.window(half_width)
        xi = modes.mode_vectors(mm, kk)
        radii = np.hypot(xi[..., 0], xi[..., 1])
        flat = [
            (radii[i, j], int(mm[i, j]), int(kk[i, j]))
            for i in range(mm.shape[0])
            for j in range(mm.shape[1])
            if radii[i, j] > 1e-14
        ]
        flat.sort()
        r_min = flat[0][0]
        if r_min < half_width / gen_norm:
            return flat[0][1], flat[0][2]
        half_width *= 2  # pragma: no cover


def sphere_lambda_min(n: int) -> float:
    """(n/2) omega_n^{1/n} with omega_n the volume of the round n-sphere."""
    if n < 2:
        raise ValueError("dimension must be >= 2")
    omega = 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)
    return 0.5 * n * omega ** (1.0 / n)


#: Threshold constant lambda_min^+(S^2) = 2 sqrt(pi) entering every verdict.
SPHERE_CONSTANT_2D = sphere_lambda_min(2)
