"""Periodic box discretization, spectral transforms and discrete norms.

Transform convention: ``numpy.fft`` with ``norm="ortho"`` over all spatial
axes and angular wavenumbers k = 2*pi*m/L. Under this convention the discrete
L² norm is ``sqrt(h**d * sum |u|**2) == sqrt(h**d * sum |u_hat|**2)``.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .exponents import Exponent


@dataclass(frozen=True)
class Grid:
    dim: int
    n: int
    length: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"points per axis must be a power of two >= 8, got {self.n}")
        if not self.length > 0:
            raise ValueError(f"box length must be positive, got {self.length}")
        object.__setattr__(self, "length", float(self.length))

    # geometry -------------------------------------------------------------
    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n ** self.dim

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def volume(self) -> float:
        return self.length ** self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        """Cell-centred sample positions on [-L/2, L/2)."""
        return -self.length / 2 + self.spacing * np.arange(self.n)

    @cached_property
    def coords(self) -> tuple:
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def axis_wavenumbers(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.n, d=self.spacing)

    @cached_property
    def wavenumbers(self) -> tuple:
        return tuple(np.meshgrid(*([self.axis_wavenumbers] * self.dim), indexing="ij"))

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(k * k for k in self.wavenumbers)

    # transforms -------------------------------------------------------------
    def _check(self, u: np.ndarray, vector: bool = False) -> None:
        expected = ((self.dim,) if vector else ()) + self.shape
        if np.shape(u) != expected:
            raise ValueError(f"array shape {np.shape(u)} does not match grid shape {expected}")

    def fft(self, u: np.ndarray) -> np.ndarray:
        self._check(u)
        return np.fft.fftn(u, norm="ortho")

    def ifft(self, c: np.ndarray) -> np.ndarray:
        self._check(c)
        return np.fft.ifftn(c, norm="ortho")

    def apply_multiplier(self, m: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.ifft(m * self.fft(u))

    # calculus ---------------------------------------------------------------
    def gradient(self, u: np.ndarray) -> np.ndarray:
        uh = self.fft(u)
        return np.stack([self.ifft(1j * k * uh) for k in self.wavenumbers])

    def divergence(self, v: np.ndarray) -> np.ndarray:
        self._check(v, vector=True)
        acc = np.zeros(self.shape, dtype=complex)
        for k, comp in zip(self.wavenumbers, v):
            acc += 1j * k * self.fft(comp)
        return self.ifft(acc)

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        return self.apply_multiplier(-self.k2, u)

    def project_div_free(self, v: np.ndarray) -> np.ndarray:
        """Leray projection; the mean mode is left untouched.

        Modes on a Nyquist plane have no conjugate partner with the negated
        wavevector, so they are dropped; this keeps real fields real and the
        projector orthogonal.
        """
        self._check(v, vector=True)
        vh = np.stack([self.fft(c) for c in v])
        k2 = self.k2.copy()
        k2.flat[0] = 1.0
        kdotv = sum(k * c for k, c in zip(self.wavenumbers, vh)) / k2
        out = np.stack([c - k * kdotv for k, c in zip(self.wavenumbers, vh)])
        out[(slice(None),) + (0,) * self.dim] = vh[(slice(None),) + (0,) * self.dim]
        for ax in range(self.dim):
            idx = [slice(None)] * (self.dim + 1)
            idx[ax + 1] = self.n // 2
            out[tuple(idx)] = 0.0
        res = np.stack([self.ifft(c) for c in out])
        return res.real if np.isrealobj(v) else res

    # norms -------------------------------------------------------------------
    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        return self.cell_volume * np.vdot(u, v)

    def lp_norm(self, u: np.ndarray, p) -> float:
        """Rectangle-rule L^p norm; vector fields use the pointwise Euclidean modulus."""
        a = np.abs(u)
        if a.ndim == self.dim + 1:
            a = np.sqrt(np.sum(a * a, axis=0))
        p = Exponent.of(p)
        if p.recip == 0:
            return float(a.max())
        if p.recip > 1:
            raise ValueError(f"L^p norm needs p >= 1, got p = {p}")
        pv = float(p.value)
        return float((self.cell_volume * np.sum(a ** pv)) ** (1.0 / pv))

    def l2_norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(self.cell_volume * np.sum(np.abs(u) ** 2)))

    def sobolev_norm(self, u: np.ndarray, order: int = 1) -> float:
        if order not in (1, -1):
            raise ValueError("order must be +1 or -1")
        w = (1.0 + self.k2) ** order
        uh = self.fft(u)
        return float(np.sqrt(self.cell_volume * np.sum(w * np.abs(uh) ** 2)))

    def plane_wave(self, mode, amplitude: complex = 1.0) -> np.ndarray:
        """Sample ``amplitude * exp(i k·x)`` for the integer mode vector ``mode``."""
        mode = np.broadcast_to(np.asarray(mode), (self.dim,))
        phase = sum(2 * np.pi * m / self.length * x for m, x in zip(mode, self.coords))
        return amplitude * np.exp(1j * phase)


@dataclass(frozen=True, eq=False)
class Field:
    """An immutable complex state on a grid with a lazily cached spectrum."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        if vals.shape != self.grid.shape:
            raise ValueError(f"field shape {vals.shape} does not match grid {self.grid.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @cached_property
    def spectral(self) -> np.ndarray:
        c = self.grid.fft(self.values)
        c.setflags(write=False)
        return c


def transform(f: Field) -> np.ndarray:
    return f.spectral


def inverse_transform(grid: Grid, coefficients: np.ndarray) -> Field:
    return Field(grid, grid.ifft(np.asarray(coefficients)))


# --- serialization ------------------------------------------------------------

_HEADER = struct.Struct("<iid")


def save_field(path, grid: Grid, values: np.ndarray, metadata: dict | None = None) -> Path:
    """Write the flat binary layout plus a JSON sidecar next to it."""
    path = Path(path)
    vals = np.ascontiguousarray(np.asarray(values, dtype=np.complex128))
    if vals.shape != grid.shape:
        raise ValueError(f"field shape {vals.shape} does not match grid {grid.shape}")
    inter = np.empty(vals.shape + (2,), dtype="<f8")
    inter[..., 0] = vals.real
    inter[..., 1] = vals.imag
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(grid.dim, grid.n, grid.length))
        fh.write(inter.tobytes(order="C"))
    sidecar = {
        "format": "magnls-field",
        "version": 1,
        "dim": grid.dim,
        "n": grid.n,
        "length": grid.length,
        "header": "<int32 dim><int32 n><float64 length>, little-endian",
        "layout": "interleaved re/im float64, row-major",
    }
    sidecar.update(metadata or {})
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return path


def load_field(path) -> tuple:
    data = Path(path).read_bytes()
    dim, n, length = _HEADER.unpack_from(data)
    grid = Grid(dim, n, length)
    arr = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(grid.shape + (2,))
    return grid, arr[..., 0] + 1j * arr[..., 1]


def save_slice_csv(path, grid: Grid, values: np.ndarray) -> Path:
    """CSV of the x-axis line through the box centre (x, Re u, Im u, |u|)."""
    vals = np.asarray(values)
    idx = (slice(None),) + (grid.n // 2,) * (grid.dim - 1)
    line = vals[idx]
    rows = ["x,re,im,abs"]
    for x, z in zip(grid.axis, line):
        rows.append(",".join(f"{v:.17g}" for v in (x, z.real, z.imag, abs(z))))
    path = Path(path)
    path.write_text("\n".join(rows) + "\n")
    return path
