"""Dense complex linear algebra used by every other module.

Subsystem ordering convention: in a composite of labeled factors, the leftmost
label is the slowest-varying index (row-major, matching ``np.kron``).
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DEFAULT_TOL = 1e-9
DEFAULT_MAX_DIM = 4096
HERMITIAN_TOL = 1e-8

Dims = tuple[tuple[str, int], ...]


class SizeError(ValueError):
    pass


class LabelError(KeyError):
    pass


class NotPSDError(ValueError):
    pass


class ShapeError(ValueError):
    pass


class NormalizationError(ValueError):
    pass


def max_dim() -> int:
    """Dimension cap, overridable through ``COMPLOBS_MAX_DIM``."""
    raw = os.environ.get("COMPLOBS_MAX_DIM")
    if raw is None:
        return DEFAULT_MAX_DIM
    try:
        value = int(raw)
    except ValueError as exc:
        raise SizeError(f"COMPLOBS_MAX_DIM must be an integer, got {raw!r}") from exc
    if value < 1:
        raise SizeError(f"COMPLOBS_MAX_DIM must be positive, got {value}")
    return value


def check_size(n: int) -> None:
    limit = max_dim()
    if n > limit:
        raise SizeError(f"dimension {n} exceeds the configured maximum {limit}")


def normalize_dims(dims: Iterable[Sequence]) -> Dims:
    out = tuple((str(label), int(d)) for label, d in dims)
    labels = [label for label, _ in out]
    if len(set(labels)) != len(labels):
        raise LabelError(f"duplicate labels in {labels}")
    for label, d in out:
        if d < 1:
            raise ShapeError(f"subsystem {label!r} has dimension {d}")
    return out


def total_dim(dims: Dims) -> int:
    return int(np.prod([d for _, d in dims], dtype=np.int64)) if dims else 1


@dataclass(frozen=True)
class LabeledOperator:
    """A square matrix acting on an ordered composite of labeled subsystems."""

    matrix: np.ndarray
    dims: Dims

    def __post_init__(self):
        dims = normalize_dims(self.dims)
        m = np.asarray(self.matrix, dtype=complex)
        n = total_dim(dims)
        if m.shape != (n, n):
            raise ShapeError(f"matrix shape {m.shape} does not match dims {dims}")
        if not np.all(np.isfinite(m)):
            raise ValueError("operator has non-finite entries")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", m)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def relabel(self, mapping: dict[str, str]) -> "LabeledOperator":
        return LabeledOperator(self.matrix, tuple((mapping.get(l, l), d) for l, d in self.dims))


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    check_size(a.shape[0] * b.shape[0])
    check_size(a.shape[1] * b.shape[1])
    return np.kron(a, b)


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = kron(out, m)
    return out


def tensor_ops(*ops: LabeledOperator) -> LabeledOperator:
    """Tensor product of labeled operators, labels concatenated in order."""
    matrix = kron_all([op.matrix for op in ops])
    dims = tuple(pair for op in ops for pair in op.dims)
    return LabeledOperator(matrix, dims)


def _axes(dims: Dims, keep: Iterable[str]) -> tuple[list[int], list[int]]:
    labels = [label for label, _ in dims]
    keep = set(keep)
    unknown = keep - set(labels)
    if unknown:
        raise LabelError(f"unknown labels {sorted(unknown)}; available {labels}")
    kept = [i for i, label in enumerate(labels) if label in keep]
    traced = [i for i, label in enumerate(labels) if label not in keep]
    return kept, traced


def partial_trace(op: LabeledOperator, keep: Iterable[str]) -> LabeledOperator:
    """Trace out every subsystem not in ``keep``; kept labels stay in original order."""
    kept, traced = _axes(op.dims, keep)
    shape = [d for _, d in op.dims]
    n = len(shape)
    t = op.matrix.reshape(shape + shape)
    dk = int(np.prod([shape[i] for i in kept], dtype=np.int64))
    dt = int(np.prod([shape[i] for i in traced], dtype=np.int64))
    t = t.transpose(kept + traced + [n + i for i in kept] + [n + i for i in traced])
    t = t.reshape(dk, dt, dk, dt)
    reduced = np.einsum("ajbj->ab", t)
    return LabeledOperator(reduced, tuple(op.dims[i] for i in kept))


def reduced_from_vector(vec: np.ndarray, dims: Dims, keep: Iterable[str]) -> LabeledOperator:
    """Marginal of the (possibly unnormalized) pure state ``vec`` on ``keep``.

    Equivalent to ``partial_trace`` of ``|vec><vec|`` but never forms the full
    density matrix.
    """
    kept, traced = _axes(dims, keep)
    shape = [d for _, d in dims]
    dk = int(np.prod([shape[i] for i in kept], dtype=np.int64))
    m = np.asarray(vec).reshape(shape).transpose(kept + traced).reshape(dk, -1)
    return LabeledOperator(m @ m.conj().T, tuple(dims[i] for i in kept))


def hermitize(m: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    asym = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if asym > tol:
        raise ValueError(f"matrix is not Hermitian (asymmetry {asym:.3g} > {tol:g})")
    return 0.5 * (m + m.conj().T)


def eigh_psd(m: np.ndarray, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a PSD matrix with small negative eigenvalues clipped."""
    vals, vecs = np.linalg.eigh(hermitize(m))
    if vals.size and vals[0] < -tol:
        raise NotPSDError(f"minimum eigenvalue {vals[0]:.3g} is below -{tol:g}")
    return np.clip(vals, 0.0, None), vecs


def matrix_sqrt_psd(m: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """PSD square root. Eigenvalues below the eigensolver's resolution
    (``10 n eps ||m||``) are treated as exact zeros, since their roots would be
    pure noise of order ``sqrt(eps)``."""
    vals, vecs = eigh_psd(m, tol)
    if vals.size:
        noise = 10 * vals.size * np.finfo(float).eps * max(vals[-1], 0.0)
        vals = np.where(vals <= noise, 0.0, vals)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def matrix_function(m: np.ndarray, fn, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Apply ``fn`` to the spectrum of a Hermitian matrix."""
    vals, vecs = np.linalg.eigh(hermitize(m, tol=max(tol, HERMITIAN_TOL)))
    return (vecs * fn(vals)) @ vecs.conj().T


def inv_sqrt_on_support(m: np.ndarray, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(m^{-1/2} on the support, projector onto the kernel)`` for PSD ``m``."""
    vals, vecs = eigh_psd(m, tol)
    support = vals > tol
    inv = np.zeros_like(vals)
    inv[support] = 1.0 / np.sqrt(vals[support])
    root = (vecs * inv) @ vecs.conj().T
    kv = vecs[:, ~support]
    return root, kv @ kv.conj().T


def is_psd(m: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    m = np.asarray(m)
    if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL:
        return False
    return bool(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0] >= -tol)


def trace_norm(m: np.ndarray) -> float:
    """Sum of singular values, i.e. Tr sqrt(M^dagger M)."""
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def _as_density(x) -> tuple[np.ndarray, Dims | None]:
    if isinstance(x, LabeledOperator):
        return x.matrix, x.dims
    return np.asarray(x, dtype=complex), None


def check_density(m: np.ndarray, tol: float = DEFAULT_TOL) -> None:
    tr = np.trace(m)
    if abs(tr - 1) > max(tol, 1e-9) * 10 * max(1, m.shape[0]):
        raise NormalizationError(f"density operator has trace {tr.real:.6g}")
    eigh_psd(m, tol=max(tol, 1e-9) * 10)


def _same_shape(rho, sigma) -> tuple[np.ndarray, np.ndarray]:
    a, da = _as_density(rho)
    b, db = _as_density(sigma)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    if da is not None and db is not None and tuple(d for _, d in da) != tuple(d for _, d in db):
        raise ShapeError(f"dims mismatch {da} vs {db}")
    return a, b


def fidelity(rho, sigma, tol: float = DEFAULT_TOL) -> float:
    """Root fidelity ``||sqrt(rho) sqrt(sigma)||_1`` (not squared)."""
    a, b = _same_shape(rho, sigma)
    check_density(a, tol)
    check_density(b, tol)
    return trace_norm(matrix_sqrt_psd(a, tol * 10) @ matrix_sqrt_psd(b, tol * 10))


def trace_distance(rho, sigma) -> float:
    """Normalized trace distance ``0.5 * ||rho - sigma||_1``, in [0, 1]."""
    a, b = _same_shape(rho, sigma)
    return 0.5 * trace_norm(hermitize(a - b))


def _unit(v: np.ndarray, tol: float) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    n = np.linalg.norm(v)
    if abs(n - 1) > tol:
        raise NormalizationError(f"vector has norm {n:.12g}, expected 1")
    return v


def pure_distance(a, b, tol: float = 1e-8) -> float:
    """Trace distance between pure states, ``sqrt(1 - |<a|b>|^2)``.

    Evaluated as ``sqrt(m (2 - m))`` with ``m = 1 - |<a|b>| = ||a - e^{i t} b||^2 / 2``
    for the optimal phase, which avoids cancellation for nearly equal states.
    """
    va = _unit(getattr(a, "amplitudes", a), tol)
    vb = _unit(getattr(b, "amplitudes", b), tol)
    if va.shape != vb.shape:
        raise ShapeError(f"shape mismatch {va.shape} vs {vb.shape}")
    va = va / np.linalg.norm(va)
    vb = vb / np.linalg.norm(vb)
    ip = np.vdot(vb, va)
    phase = ip / abs(ip) if abs(ip) > 0 else 1.0
    m = 0.5 * float(np.linalg.norm(va - phase * vb) ** 2)
    m = min(max(m, 0.0), 1.0)
    return float(np.sqrt(m * (2.0 - m)))


def von_neumann_entropy(rho, tol: float = DEFAULT_TOL) -> float:
    """Entropy in bits."""
    m, _ = _as_density(rho)
    vals = np.linalg.eigvalsh(hermitize(m))
    vals = vals[vals > tol]
    return float(-np.sum(vals * np.log2(vals))) + 0.0
