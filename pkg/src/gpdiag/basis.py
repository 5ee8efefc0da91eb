"""Orthogonal sinusoid bases for integer lattices and projection onto them.

For an even M, the 1-D basis matrix Z is M x (M-1) with column pairs
(2 cos(2*pi*w*k), -2 sin(2*pi*w*k)) at frequencies w = m/M, m = 1..M/2-1,
k = 1..M, plus a final half-frequency column cos(pi*k).  Its Gram matrix
is Diag(2M, ..., 2M, M) and every column is orthogonal to the ones
vector, so v = (Z'Z)^{-1/2} Z' y decomposes the centered data into
uncorrelated frequency components.

The 2-D basis on an M1 x M2 lattice (rows ordered with the second
coordinate varying fastest) interleaves cos/sin pairs over the frequency
pairs (m1/M1, m2/M2) in four index blocks (positive-positive,
positive-negative, axis-aligned in each dimension) and ends with three
amplitude-1 half-frequency columns; the Gram matrix is
M1*M2 * Diag(2, ..., 2, 1, 1, 1).

Columns are returned in canonical order: non-increasing spectral density,
which for every isotropic Matern-family density means non-decreasing
squared frequency norm; ties are broken by (w1, w2, cos-before-sin) so
the order is deterministic and independent of the range parameter.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError

_CACHE_MAGIC = b"GPDZ"
_CACHE_VERSION = 1


@dataclass(frozen=True)
class SpectralBasis:
    Z: np.ndarray             # (M_tot, M_tot-1)
    ztz_diag: np.ndarray      # exact integers: 2*M_tot or M_tot
    freq: np.ndarray          # (M_tot-1, dim) frequency per column, cycles/unit
    m_of_j: np.ndarray        # (M_tot-1, dim) integer frequency index per column
    is_sin: np.ndarray        # (M_tot-1,) bool, sin columns
    dims: tuple[int, ...]     # (M,) or (M1, M2)

    def __post_init__(self):
        for arr in (self.Z, self.ztz_diag, self.freq, self.m_of_j, self.is_sin):
            arr.flags.writeable = False

    @property
    def n_points(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_columns(self) -> int:
        return self.Z.shape[1]

    @property
    def freq_norm_sq(self) -> np.ndarray:
        return np.sum(self.freq**2, axis=1)


@dataclass(frozen=True)
class SpectralProjection:
    v: np.ndarray
    basis_ref: tuple[int, ...]

    @property
    def v_sq(self) -> np.ndarray:
        return self.v**2


def build_basis_1d(m: int) -> SpectralBasis:
    """Spectral basis for the 1-D integer lattice {1..M}, M even >= 4."""
    if m < 4 or m % 2 != 0:
        raise DimensionError(f"basis needs an even M >= 4, got {m}")
    k = np.arange(1, m + 1, dtype=float)
    z = np.empty((m, m - 1))
    freq = np.empty(m - 1)
    m_idx = np.empty(m - 1, dtype=np.int64)
    is_sin = np.zeros(m - 1, dtype=bool)
    for mm in range(1, m // 2):
        w = mm / m
        arg = 2.0 * np.pi * w * k
        z[:, 2 * mm - 2] = 2.0 * np.cos(arg)
        z[:, 2 * mm - 1] = -2.0 * np.sin(arg)
        freq[2 * mm - 2 : 2 * mm] = w
        m_idx[2 * mm - 2 : 2 * mm] = mm
        is_sin[2 * mm - 1] = True
    z[:, m - 2] = np.cos(np.pi * k)
    freq[m - 2] = 0.5
    m_idx[m - 2] = m // 2
    ztz = np.full(m - 1, 2 * m, dtype=float)
    ztz[-1] = m
    return SpectralBasis(
        Z=z,
        ztz_diag=ztz,
        freq=freq[:, None],
        m_of_j=m_idx[:, None],
        is_sin=is_sin,
        dims=(m,),
    )


def _axis_frequency(m_idx: int, m: int) -> float:
    """Frequency for index m_idx on an axis of size m; indices above m/2
    alias to negative frequencies."""
    return m_idx / m if m_idx <= m // 2 else (m_idx - m) / m


def build_basis_2d(m1: int, m2: int) -> SpectralBasis:
    """Spectral basis for the M1 x M2 integer lattice, both even >= 4.

    Rows are lattice points (s1, s2) with s2 varying fastest.  Block
    layout before canonical reordering:

      block 1: m1 in 1..M1/2-1, m2 in 1..M2/2   cos/sin pairs
      block 2: m1 in 1..M1/2, m2 in M2/2+1..M2-1 (negative w2) pairs
      block 3: m1 = 0, m2 in 1..M2/2-1            pairs
      block 4: m2 = 0, m1 in 1..M1/2-1            pairs
      last 3:  (0, M2/2), (M1/2, 0), (M1/2, M2/2) single cos, amplitude 1
    """
    if m1 < 4 or m1 % 2 != 0 or m2 < 4 or m2 % 2 != 0:
        raise DimensionError(f"basis needs even M1, M2 >= 4, got {m1} x {m2}")
    n = m1 * m2
    s1 = np.repeat(np.arange(1, m1 + 1, dtype=float), m2)
    s2 = np.tile(np.arange(1, m2 + 1, dtype=float), m1)

    pairs: list[tuple[int, int]] = []
    pairs += [(a, b) for a in range(1, m1 // 2) for b in range(1, m2 // 2 + 1)]
    pairs += [(a, b) for a in range(1, m1 // 2 + 1) for b in range(m2 // 2 + 1, m2)]
    pairs += [(0, b) for b in range(1, m2 // 2)]
    pairs += [(a, 0) for a in range(1, m1 // 2)]
    singles = [(0, m2 // 2), (m1 // 2, 0), (m1 // 2, m2 // 2)]
    assert 2 * len(pairs) + 3 == n - 1

    z = np.empty((n, n - 1))
    freq = np.empty((n - 1, 2))
    m_idx = np.empty((n - 1, 2), dtype=np.int64)
    is_sin = np.zeros(n - 1, dtype=bool)
    col = 0
    for a, b in pairs:
        w1, w2 = _axis_frequency(a, m1), _axis_frequency(b, m2)
        arg = 2.0 * np.pi * (w1 * s1 + w2 * s2)
        z[:, col] = 2.0 * np.cos(arg)
        z[:, col + 1] = -2.0 * np.sin(arg)
        freq[col] = freq[col + 1] = (w1, w2)
        m_idx[col] = m_idx[col + 1] = (a, b)
        is_sin[col + 1] = True
        col += 2
    for a, b in singles:
        w1, w2 = _axis_frequency(a, m1), _axis_frequency(b, m2)
        z[:, col] = np.cos(2.0 * np.pi * (w1 * s1 + w2 * s2))
        freq[col] = (w1, w2)
        m_idx[col] = (a, b)
        col += 1

    ztz = np.full(n - 1, 2 * n, dtype=float)
    ztz[-3:] = n

    # canonical order: squared frequency norm ascending, then w1, w2,
    # cos before sin (spectral density is radially non-increasing, so
    # this is non-increasing density for every range value)
    wtw = np.sum(freq**2, axis=1)
    perm = np.lexsort((is_sin, freq[:, 1], freq[:, 0], wtw))
    return SpectralBasis(
        Z=z[:, perm],
        ztz_diag=ztz[perm],
        freq=freq[perm],
        m_of_j=m_idx[perm],
        is_sin=is_sin[perm],
        dims=(m1, m2),
    )


def order_columns(basis: SpectralBasis, density) -> SpectralBasis:
    """Permute columns so the spectral density is non-increasing in j.

    `density` maps (freq row vector, rho) -> positive value.  The implied
    permutation is computed at rho in {1, 5, 20} and must agree (the
    canonical order is invariant to the range parameter); a stable sort
    keyed by (w'w, w1, w2, sin-last) breaks density ties.
    """
    perms = []
    for rho in (1.0, 5.0, 20.0):
        a = np.array([density(w, rho) for w in basis.freq])
        keys = [basis.is_sin]
        for d in range(basis.freq.shape[1] - 1, -1, -1):
            keys.append(basis.freq[:, d])
        keys.append(-a)
        perms.append(np.lexsort(tuple(keys)))
    if not (np.array_equal(perms[0], perms[1]) and np.array_equal(perms[1], perms[2])):
        raise ValidationError("column order is not invariant to the range parameter")
    p = perms[0]
    return SpectralBasis(
        Z=basis.Z[:, p].copy(),
        ztz_diag=basis.ztz_diag[p].copy(),
        freq=basis.freq[p].copy(),
        m_of_j=basis.m_of_j[p].copy(),
        is_sin=basis.is_sin[p].copy(),
        dims=basis.dims,
    )


def project(basis: SpectralBasis, data: np.ndarray) -> SpectralProjection:
    """v = (Z'Z)^{-1/2} Z' data, using the analytic diagonal of Z'Z."""
    x = np.asarray(data, dtype=float).ravel()
    if len(x) != basis.n_points:
        raise DimensionError(
            f"data length {len(x)} != basis rows {basis.n_points}"
        )
    v = (basis.Z.T @ x) / np.sqrt(basis.ztz_diag)
    return SpectralProjection(v=v, basis_ref=basis.dims)


def save_basis_cache(basis: SpectralBasis, path) -> None:
    """Binary Z cache: 16-byte header (magic, version, M1, M2) then
    row-major float64 entries.  M2 = 0 marks a 1-D basis."""
    dims = basis.dims
    m1 = dims[0]
    m2 = dims[1] if len(dims) == 2 else 0
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIII", _CACHE_MAGIC, _CACHE_VERSION, m1, m2))
        fh.write(np.ascontiguousarray(basis.Z, dtype="<f8").tobytes())


def load_basis_cache(path) -> SpectralBasis:
    """Read a cached basis and verify it is bit-identical to recomputation."""
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16:
            raise ValidationError("truncated basis cache header")
        magic, version, m1, m2 = struct.unpack("<4sIII", header)
        if magic != _CACHE_MAGIC or version != _CACHE_VERSION:
            raise ValidationError("unrecognized basis cache format")
        fresh = build_basis_1d(m1) if m2 == 0 else build_basis_2d(m1, m2)
        raw = np.frombuffer(fh.read(), dtype="<f8")
        if raw.size != fresh.Z.size:
            raise ValidationError("basis cache payload size mismatch")
        z = raw.reshape(fresh.Z.shape)
        if not np.array_equal(z, fresh.Z):
            raise ValidationError("basis cache does not match recomputation")
        return fresh
