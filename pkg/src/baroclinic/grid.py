"""Doubly periodic Fourier x Chebyshev-Lobatto grid on T^2 x [0, 1].

Fields are stored in physical space as arrays of shape (Nz, Ny, Nx) (index
order i + Nx (j + Ny k) in C layout); boundary fields have shape (Ny, Nx).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft
from numpy.polynomial import chebyshev as C

from .dispersion import DomainError

__all__ = ["Grid", "chebyshev_lobatto"]


def chebyshev_lobatto(n: int):
    """Nodes z_k = (1 - cos(pi k / (n-1))) / 2 on [0, 1] and d/dz there.

    Returns ``(z, D)`` with z ascending; D is the Trefethen differentiation
    matrix with the negative-sum diagonal, rescaled from [-1, 1].
    """
    N = n - 1
    j = np.arange(n)
    x = np.sin(np.pi * (N - 2 * j) / (2 * N))  # cos(pi j / N), symmetric rounding
    c = np.ones(n)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    X = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (X + np.eye(n))
    D -= np.diag(D.sum(axis=1))
    # z = (1 - x)/2  =>  d/dz = -2 d/dx
    return (1.0 - x) / 2.0, -2.0 * D


@dataclass(frozen=True)
class Grid:
    Nx: int
    Ny: int
    Nz: int
    Lx: float = 2 * math.pi
    Ly: float = 2 * math.pi

    def __post_init__(self):
        for name in ("Nx", "Ny"):
            n = getattr(self, name)
            if n < 4 or n & (n - 1):
                raise DomainError(f"{name} must be a power of two >= 4, got {n}")
        if self.Nz < 8:
            raise DomainError(f"Nz must be >= 8, got {self.Nz}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise DomainError("Lx and Ly must be positive")

    # -- geometry ---------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.Nz, self.Ny, self.Nx)

    @property
    def hshape(self) -> tuple[int, int]:
        return (self.Ny, self.Nx)

    @property
    def dx(self) -> float:
        return self.Lx / self.Nx

    @property
    def dy(self) -> float:
        return self.Ly / self.Ny

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.Nx) * self.dx

    @cached_property
    def y(self) -> np.ndarray:
        return np.arange(self.Ny) * self.dy

    @cached_property
    def _cheb(self):
        return chebyshev_lobatto(self.Nz)

    @property
    def z(self) -> np.ndarray:
        return self._cheb[0]

    @property
    def Dz(self) -> np.ndarray:
        return self._cheb[1]

    @cached_property
    def D2z(self) -> np.ndarray:
        return self.Dz @ self.Dz

    @cached_property
    def zcol(self) -> np.ndarray:
        return self.z[:, None, None]

    @cached_property
    def _vander_inv(self) -> np.ndarray:
        xs = 1.0 - 2.0 * self.z
        return np.linalg.inv(C.chebvander(xs, self.Nz - 1))

    @staticmethod
    def _cheb_integrals(deg: int) -> np.ndarray:
        k = np.arange(deg + 1)
        out = np.zeros(deg + 1)
        even = k % 2 == 0
        out[even] = 2.0 / (1.0 - k[even] ** 2)
        return out

    @cached_property
    def weights(self) -> np.ndarray:
        """Clenshaw-Curtis weights on [0, 1] at the collocation nodes."""
        return 0.5 * self._cheb_integrals(self.Nz - 1) @ self._vander_inv

    @cached_property
    def interior_weights(self) -> np.ndarray:
        """Exact integral over [0, 1] of the interpolant through the interior nodes.

        This is the quadrature implied by the collocation Neumann problem:
        p'(1) - p'(0) equals it applied to the interior values of p''.
        """
        zi = self.z[1:-1]
        V = C.chebvander(1.0 - 2.0 * zi, self.Nz - 3)
        return 0.5 * self._cheb_integrals(self.Nz - 3) @ np.linalg.inv(V)

    @cached_property
    def cumint(self) -> np.ndarray:
        """Matrix of f -> int_0^z f(s) ds at the nodes."""
        xs = 1.0 - 2.0 * self.z
        coef = self._vander_inv  # columns: coefficients of each cardinal function
        anti = C.chebint(coef, lbnd=1.0, axis=0)  # F(x) with F(1) = 0
        vals = C.chebvander(xs, self.Nz) @ anti
        # int_0^z f dz' = int_x^1 f dx'/2 = -F(x)/2
        out = -0.5 * vals
        out[0] = 0.0
        return out

    # -- spectral ---------------------------------------------------------

    @cached_property
    def kx(self) -> np.ndarray:
        m = np.arange(self.Nx // 2 + 1)
        return (2 * math.pi / self.Lx) * m[None, :]

    @cached_property
    def ky(self) -> np.ndarray:
        n = np.fft.fftfreq(self.Ny, 1.0 / self.Ny)
        return (2 * math.pi / self.Ly) * n[:, None]

    @cached_property
    def mode_index(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer (m, n) of each rfft2 coefficient, shapes (1, Nx//2+1) and (Ny, 1)."""
        m = np.arange(self.Nx // 2 + 1)[None, :]
        n = np.fft.fftfreq(self.Ny, 1.0 / self.Ny).astype(int)[:, None]
        return m, n

    @cached_property
    def k2(self) -> np.ndarray:
        return self.kx**2 + self.ky**2

    @cached_property
    def mask(self) -> np.ndarray:
        """2/3-rule dealiasing mask (also removes the Nyquist rows/columns)."""
        m, n = self.mode_index
        return ((np.abs(m) < self.Nx / 3) & (np.abs(n) < self.Ny / 3)).astype(float)

    @cached_property
    def hermitian_weight(self) -> np.ndarray:
        """Multiplicity of each rfft2 column in the full spectrum (1 or 2)."""
        w = np.full(self.Nx // 2 + 1, 2.0)
        w[0] = 1.0
        if self.Nx % 2 == 0:
            w[-1] = 1.0
        return w[None, :]

    def fft(self, f):
        return sfft.rfft2(f, axes=(-2, -1), workers=-1)

    def ifft(self, fh):
        return sfft.irfft2(fh, s=self.hshape, axes=(-2, -1), workers=-1)

    # -- physical-space operators (used by diagnostics and the expansion) --

    def check(self, *fields) -> None:
        for f in fields:
            if np.shape(f)[-2:] != self.hshape:
                raise DomainError(f"field shape {np.shape(f)} does not match grid {self.shape}")

    def truncate(self, f):
        return self.ifft(self.fft(f) * self.mask)

    def ddx(self, f):
        return self.ifft(1j * self.kx * self.fft(f))

    def ddy(self, f):
        return self.ifft(1j * self.ky * self.fft(f))

    def lap_h(self, f):
        return self.ifft(-self.k2 * self.fft(f))

    def ddz(self, f):
        return np.tensordot(self.Dz, f, axes=(1, 0))

    def d2dz(self, f):
        return np.tensordot(self.D2z, f, axes=(1, 0))

    def int_z(self, f):
        """int_0^z f at every node (w(0) = 0)."""
        return np.tensordot(self.cumint, f, axes=(1, 0))

    def prod(self, a, b):
        """Dealiased product: both factors and the result truncated by the 2/3 rule."""
        fa = self.ifft(self.fft(a) * self.mask)
        fb = self.ifft(self.fft(b) * self.mask)
        return self.ifft(self.fft(fa * fb) * self.mask)

    def jac(self, psi, f):
        """J(psi, f) = psi_x f_y - psi_y f_x with 2/3 dealiasing."""
        self.check(psi, f)
        ph = self.fft(psi) * self.mask
        fh = self.fft(f) * self.mask
        px, py = self.ifft(1j * self.kx * ph), self.ifft(1j * self.ky * ph)
        fx, fy = self.ifft(1j * self.kx * fh), self.ifft(1j * self.ky * fh)
        return self.ifft(self.fft(px * fy - py * fx) * self.mask)

    def integrate(self, f) -> float:
        """Integral over the torus (2-D field) or T^2 x [0, 1] (3-D field)."""
        area = self.dx * self.dy
        if np.ndim(f) == 2:
            return float(np.sum(f) * area)
        return float(self.weights @ np.sum(f, axis=(1, 2)) * area)

    def l2(self, f) -> float:
        return math.sqrt(max(self.integrate(np.asarray(f) ** 2), 0.0))

    def mesh(self):
        """Broadcastable (x, y) coordinate arrays of shape (Ny, Nx)."""
        return self.x[None, :], self.y[:, None]
