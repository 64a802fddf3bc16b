"""Periodic spectral Poisson solves and electric-field assembly.

Solves ``-lap(phi) = rho - rho0`` with ``rho0`` the mean density (neutralising
ion background) and returns ``E = -grad(phi)``.  The Nyquist mode of each
derivative is dropped so ``E`` is real and ``sum(rho * E) = 0`` holds to
round-off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lowrank as lr
from .grid import AxisGrid

FIELD_SPLIT_EPS = 1e-12


def _wavenumbers(axis: AxisGrid) -> tuple[np.ndarray, np.ndarray]:
    """Wavenumbers for the Laplacian and for the first derivative (Nyquist dropped)."""
    k = 2.0 * np.pi * np.fft.fftfreq(axis.n, d=axis.h)
    kd = k.copy()
    if axis.n % 2 == 0:
        kd[axis.n // 2] = 0.0
    return k, kd


def sign_split(E: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.maximum(E, 0.0), np.minimum(E, 0.0)


@dataclass(frozen=True, eq=False)
class Field1D:
    E: np.ndarray
    Eplus: np.ndarray
    Eminus: np.ndarray
    phi: np.ndarray
    rho0: float


def solve_poisson_1d(rho, axis: AxisGrid) -> Field1D:
    if not axis.periodic:
        raise ValueError("Poisson solve needs a periodic axis")
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (axis.n,):
        raise ValueError(f"density shape {rho.shape} does not match grid ({axis.n},)")
    rho0 = float(rho.mean())
    rhat = np.fft.fft(rho - rho0)
    k, kd = _wavenumbers(axis)
    phihat = np.zeros_like(rhat)
    nz = k != 0
    phihat[nz] = rhat[nz] / k[nz] ** 2
    Ehat = -1j * kd * phihat
    E = np.fft.ifft(Ehat).real
    phi = np.fft.ifft(phihat).real
    Ep, Em = sign_split(E)
    return Field1D(E, Ep, Em, phi, rho0)


@dataclass(frozen=True, eq=False)
class Field2D:
    E1: np.ndarray
    E2: np.ndarray
    phi: np.ndarray
    rho0: float
    E1plus: lr.LowRankMatrix
    E1minus: lr.LowRankMatrix
    E2plus: lr.LowRankMatrix
    E2minus: lr.LowRankMatrix

    def splits(self):
        """``(component, sign, compressed split)`` for the four transport terms."""
        return ((1, +1, self.E1plus), (1, -1, self.E1minus),
                (2, +1, self.E2plus), (2, -1, self.E2minus))


def solve_poisson_2d(rho, axis1: AxisGrid, axis2: AxisGrid,
                     split_eps: float = FIELD_SPLIT_EPS) -> Field2D:
    if not (axis1.periodic and axis2.periodic):
        raise ValueError("Poisson solve needs periodic axes")
    if isinstance(rho, lr.LowRankMatrix):
        rho = rho.dense()
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (axis1.n, axis2.n):
        raise ValueError(f"density shape {rho.shape} does not match grid "
                         f"({axis1.n}, {axis2.n})")
    rho0 = float(rho.mean())
    rhat = np.fft.fft2(rho - rho0)
    k1, kd1 = _wavenumbers(axis1)
    k2, kd2 = _wavenumbers(axis2)
    K2 = k1[:, None] ** 2 + k2[None, :] ** 2
    phihat = np.zeros_like(rhat)
    nz = K2 != 0
    phihat[nz] = rhat[nz] / K2[nz]
    E1 = np.fft.ifft2(-1j * kd1[:, None] * phihat).real
    E2 = np.fft.ifft2(-1j * kd2[None, :] * phihat).real
    phi = np.fft.ifft2(phihat).real
    comp = [lr.from_dense(part, split_eps) for E in (E1, E2) for part in sign_split(E)]
    return Field2D(E1, E2, phi, rho0, *comp)


def electric_energy(field, axes) -> float:
    """``0.5 * sum |E|^2`` times the cell volume."""
    if isinstance(field, Field1D):
        (ax,) = axes if isinstance(axes, (tuple, list)) else (axes,)
        return float(0.5 * ax.h * np.sum(field.E**2))
    a1, a2 = axes
    return float(0.5 * a1.h * a2.h * (np.sum(field.E1**2) + np.sum(field.E2**2)))
