"""Dense complex three-way tensors: unfoldings, Khatri-Rao products, CTNS files.

Index order is fixed for every mode so that the PCA and CP code paths agree:

* mode 1: ``n_dly x (n_dir * n_scan)``, column ``j + k * n_dir``
* mode 2: ``n_dir x (n_dly * n_scan)``, column ``t + k * n_dly``
* mode 3: ``n_scan x (n_dly * n_dir)``, column ``t + j * n_dly``

(all indices zero-based). With this order the mode-1 unfolding of a CP model
``[D, S, G]`` is ``D @ khatri_rao(G, S).T``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CTNS_MAGIC = b"CTNS"
CTNS_VERSION = 1
_HEADER = struct.Struct("<4sI3Q")

# axis permutation that brings the requested mode to the front
_MODE_AXES = {1: (0, 1, 2), 2: (1, 0, 2), 3: (2, 0, 1)}


@dataclass(frozen=True)
class ChannelTensor:
    """Complex measurement tensor ``x[tau, j, k]`` (delay, direction, scan).

    The backing array is copied to complex128 and made read-only.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.complex128, copy=True)
        if arr.ndim != 3:
            raise ValueError(f"ChannelTensor needs 3 dims, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"all dims must be >= 1, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def n_dly(self) -> int:
        return self.data.shape[0]

    @property
    def n_dir(self) -> int:
        return self.data.shape[1]

    @property
    def n_scan(self) -> int:
        return self.data.shape[2]

    def __getitem__(self, idx):
        return self.data[idx]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


def as_array(t) -> np.ndarray:
    """Return the complex ndarray behind a ChannelTensor or array-like."""
    if isinstance(t, ChannelTensor):
        return t.data
    arr = np.asarray(t, dtype=np.complex128)
    if arr.ndim != 3:
        raise ValueError(f"expected a 3-way tensor, got shape {arr.shape}")
    return arr


def _check_mode(mode) -> None:
    if mode not in _MODE_AXES:
        raise ValueError(f"mode must be 1, 2 or 3, got {mode!r}")


def unfold(t, mode: int) -> np.ndarray:
    """Matricize ``t`` along ``mode`` (1, 2 or 3)."""
    _check_mode(mode)
    x = as_array(t)
    moved = np.transpose(x, _MODE_AXES[mode])
    return moved.reshape(moved.shape[0], -1, order="F")


def refold(mat: np.ndarray, mode: int, shape: tuple[int, int, int]) -> ChannelTensor:
    """Inverse of :func:`unfold` for a tensor of the given ``shape``."""
    _check_mode(mode)
    axes = _MODE_AXES[mode]
    moved_shape = tuple(shape[a] for a in axes)
    mat = np.asarray(mat)
    if mat.shape != (moved_shape[0], moved_shape[1] * moved_shape[2]):
        raise ValueError(f"matrix of shape {mat.shape} does not unfold shape {shape}")
    moved = mat.reshape(moved_shape, order="F")
    return ChannelTensor(np.transpose(moved, np.argsort(axes)))


def khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product; column ``l`` is ``kron(a[:, l], b[:, l])``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("khatri_rao expects two matrices")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"column counts differ: {a.shape[1]} vs {b.shape[1]}")
    return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], a.shape[1])


def frobenius_norm(t) -> float:
    flat = np.asarray(t.data if isinstance(t, ChannelTensor) else t).ravel()
    if flat.size == 0:
        return 0.0
    # scale first so squares neither underflow nor overflow
    peak = float(np.max(np.abs(flat)))
    if peak == 0.0 or not np.isfinite(peak):
        return peak
    flat = flat / peak
    return peak * float(np.sqrt(np.vdot(flat, flat).real))


def cp_reconstruct(d: np.ndarray, s: np.ndarray, g: np.ndarray) -> ChannelTensor:
    """Sum of rank-one tensors ``sum_l d_l o s_l o g_l``."""
    d, s, g = (np.atleast_2d(np.asarray(f, dtype=np.complex128)) for f in (d, s, g))
    if not d.shape[1] == s.shape[1] == g.shape[1]:
        raise ValueError(
            f"factor ranks differ: {d.shape[1]}, {s.shape[1]}, {g.shape[1]}"
        )
    mat = d @ khatri_rao(g, s).T
    return refold(mat, 1, (d.shape[0], s.shape[0], g.shape[0]))


def write_ctns(path, t) -> None:
    """Write a tensor in the little-endian CTNS binary format."""
    x = as_array(t)
    n_dly, n_dir, n_scan = x.shape
    payload = np.asarray(x.ravel(order="F"), dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CTNS_MAGIC, CTNS_VERSION, n_dly, n_dir, n_scan))
        fh.write(payload.tobytes())


def read_ctns_header(path) -> dict:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated CTNS header")
    magic, version, n_dly, n_dir, n_scan = _HEADER.unpack(raw)
    if magic != CTNS_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {CTNS_MAGIC!r}")
    if version != CTNS_VERSION:
        raise ValueError(f"{path}: unsupported CTNS version {version}")
    if min(n_dly, n_dir, n_scan) < 1:
        raise ValueError(f"{path}: invalid dims {(n_dly, n_dir, n_scan)}")
    return {"version": version, "n_dly": n_dly, "n_dir": n_dir, "n_scan": n_scan}


def read_ctns(path) -> ChannelTensor:
    """Load a CTNS file, validating magic, version and payload size."""
    header = read_ctns_header(path)
    shape = (header["n_dly"], header["n_dir"], header["n_scan"])
    count = shape[0] * shape[1] * shape[2]
    expected = _HEADER.size + 16 * count
    actual = Path(path).stat().st_size
    if actual != expected:
        raise ValueError(
            f"{path}: payload size {actual} bytes does not match dims {shape} "
            f"({expected} bytes expected)"
        )
    flat = np.fromfile(path, dtype="<c16", count=count, offset=_HEADER.size)
    return ChannelTensor(flat.reshape(shape, order="F"))
