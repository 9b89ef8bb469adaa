"""Recovery isometry built from an amplitude (Z) and a phase (X) measurement.

Bob first measures Z coherently into a fresh register C, then measures X on
B and C coherently into D, and finally applies a controlled phase between C
and D. On exact premises this leaves a maximally entangled pair on AD and a
relabeled copy of the input on CB.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .numerics import (
    Dims,
    LabelError,
    ShapeError,
    matrix_sqrt_psd,
    normalize_dims,
    pure_distance,
    total_dim,
)
from .measurements import Povm
from .states import (
    PureState,
    fourier_matrix,
    fourier_vector,
    phi_d,
    product,
    weyl_z_matrix,
    z_extension,
)

ISOMETRY_TOL = 1e-10


class BasisError(ValueError):
    pass


@dataclass(frozen=True)
class Isometry:
    """Linear map with ``matrix`` of shape ``(out_dim, in_dim)``."""

    matrix: np.ndarray
    in_dims: Dims
    out_dims: Dims

    def __post_init__(self):
        in_dims = normalize_dims(self.in_dims)
        out_dims = normalize_dims(self.out_dims)
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (total_dim(out_dims), total_dim(in_dims)):
            raise ShapeError(f"matrix shape {m.shape} does not match {in_dims} -> {out_dims}")
        if m.shape[0] < m.shape[1]:
            raise ShapeError("an isometry cannot map into a smaller space")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "in_dims", in_dims)
        object.__setattr__(self, "out_dims", out_dims)

    @property
    def in_labels(self) -> tuple[str, ...]:
        return tuple(l for l, _ in self.in_dims)

    @property
    def out_labels(self) -> tuple[str, ...]:
        return tuple(l for l, _ in self.out_dims)

    def isometry_error(self) -> float:
        """Max-entry deviation of ``U^dagger U`` from the identity."""
        g = self.matrix.conj().T @ self.matrix
        return float(np.max(np.abs(g - np.eye(g.shape[0]))))

    def is_isometry(self, tol: float = ISOMETRY_TOL) -> bool:
        return self.isometry_error() <= tol

    def tensor_identity(self, dims: Dims) -> "Isometry":
        """``self (x) identity`` on extra subsystems appended to both sides."""
        dims = normalize_dims(dims)
        eye = np.eye(total_dim(dims))
        return Isometry(np.kron(self.matrix, eye), self.in_dims + dims, self.out_dims + dims)

    def then(self, other: "Isometry") -> "Isometry":
        """Composition ``other @ self``; ``other`` may act on a subset of outputs."""
        extra = tuple(p for p in self.out_dims if p[0] not in other.in_labels)
        if set(other.in_labels) - set(self.out_labels):
            raise LabelError(f"{other.in_labels} not produced by {self.out_labels}")
        lifted = other.tensor_identity(extra)
        order = [self.out_labels.index(l) for l in lifted.in_labels]
        shape = [d for _, d in self.out_dims]
        m = self.matrix.reshape(shape + [-1]).transpose(order + [len(shape)])
        m = m.reshape(lifted.matrix.shape[1], -1)
        return Isometry(lifted.matrix @ m, self.in_dims, lifted.out_dims)

    def to_dict(self) -> dict:
        return {
            "in_dims": [[l, d] for l, d in self.in_dims],
            "dims": [[l, d] for l, d in self.out_dims],
            "re": self.matrix.real.tolist(),
            "im": self.matrix.imag.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "Isometry":
        m = np.asarray(doc["re"], dtype=float) + 1j * np.asarray(doc["im"], dtype=float)
        return cls(m, tuple(map(tuple, doc["in_dims"])), tuple(map(tuple, doc["dims"])))


def apply_isometry(state: PureState, iso: Isometry) -> PureState:
    """Apply ``iso`` to the matching subsystems of ``state``.

    The output lists ``iso``'s output labels first, then the untouched
    subsystems in their original order.
    """
    missing = set(iso.in_labels) - set(state.labels)
    if missing:
        raise LabelError(f"state lacks subsystems {sorted(missing)}")
    for label, d in iso.in_dims:
        if state.dim_of(label) != d:
            raise ShapeError(f"subsystem {label!r} has dimension {state.dim_of(label)}, map expects {d}")
    rest = [l for l in state.labels if l not in iso.in_labels]
    perm = [state.labels.index(l) for l in iso.in_labels + tuple(rest)]
    t = state.tensor().transpose(perm).reshape(iso.matrix.shape[1], -1)
    out = iso.matrix @ t
    dims = iso.out_dims + tuple((l, state.dim_of(l)) for l in rest)
    return PureState(out.ravel(), dims)


def coherent_measurement(povm: Povm, store_label: str, store_basis: Sequence) -> Isometry:
    """``|phi> -> sum_k |s_k>^{store} (x) sqrt(Lambda_k) |phi>``."""
    vecs = [np.asarray(getattr(s, "amplitudes", s), dtype=complex).ravel() for s in store_basis]
    if len(vecs) != len(povm):
        raise BasisError(f"{len(vecs)} storage states for {len(povm)} outcomes")
    basis = np.stack(vecs, axis=1)
    if np.max(np.abs(basis.conj().T @ basis - np.eye(len(vecs)))) > 1e-10:
        raise BasisError("storage states are not orthonormal")
    roots = [matrix_sqrt_psd(e.matrix, tol=1e-8) for e in povm.elements]
    m = sum(np.kron(basis[:, k][:, None], roots[k]) for k in range(len(roots)))
    return Isometry(m, povm.dims, ((store_label, basis.shape[0]),) + povm.dims)


def build_u1(lambda_z: Povm, d: int | None = None, store_label: str = "C") -> Isometry:
    """Coherent Z-guessing measurement on B, outcome stored in C computationally."""
    d = len(lambda_z) if d is None else d
    if len(lambda_z) != d:
        raise ShapeError(f"Z measurement has {len(lambda_z)} outcomes, expected {d}")
    return coherent_measurement(lambda_z, store_label, list(np.eye(d, dtype=complex)))


def build_u2(gamma_x: Povm, d: int | None = None, store_label: str = "D") -> Isometry:
    """Coherent X-guessing measurement on CB; outcome ``x`` stored as ``|-x~>``."""
    d = len(gamma_x) if d is None else d
    if len(gamma_x) != d:
        raise ShapeError(f"X measurement has {len(gamma_x)} outcomes, expected {d}")
    return coherent_measurement(gamma_x, store_label, [fourier_vector(d, (-x) % d) for x in range(d)])


def build_u3(d: int, d_label: str = "D", c_label: str = "C") -> Isometry:
    """Controlled phase ``sum_x |x~><x~|^D (x) (Z^{-x})^C``."""
    f = fourier_matrix(d)
    z = weyl_z_matrix(d)
    m = sum(
        np.kron(np.outer(f[:, x], f[:, x].conj()), np.linalg.matrix_power(z, (-x) % d)) for x in range(d)
    )
    dims = ((d_label, d), (c_label, d))
    return Isometry(m, dims, dims)


def compose_recovery(lambda_z: Povm, gamma_x: Povm) -> Isometry:
    """``U3 U2 U1`` as a single map ``B -> DCB``."""
    d = len(lambda_z)
    u1 = build_u1(lambda_z, d)
    u2 = build_u2(gamma_x, d)
    if tuple(l for l, _ in gamma_x.dims) != u1.out_labels:
        gamma_labels = tuple(l for l, _ in gamma_x.dims)
        raise ShapeError(f"X measurement acts on {gamma_labels}, expected {u1.out_labels}")
    return u1.then(u2).then(build_u3(d))


def apply_recovery(u: Isometry, psi: PureState, a_label: str = "A") -> PureState:
    """Output ordered as A, then the map's outputs (D, C, B), then the rest (R)."""
    out = apply_isometry(psi, u)
    rest = [l for l in out.labels if l != a_label and l not in u.out_labels]
    return out.reorder((a_label,) + u.out_labels + tuple(rest))


def recovery_target(psi: PureState, a_label: str = "A", d_label: str = "D", c_label: str = "C") -> PureState:
    """``|Phi_d>^{AD} |psi>^{C...}``: the input with A renamed C, after a fresh pair."""
    d = psi.dim_of(a_label)
    moved = psi.reorder((a_label,) + tuple(l for l in psi.labels if l != a_label)).relabel({a_label: c_label})
    return product(phi_d(d, (a_label, d_label)), moved)


def recovery_error(psi: PureState, u: Isometry, a_label: str = "A") -> float:
    out = apply_recovery(u, psi, a_label)
    target = recovery_target(psi, a_label)
    return pure_distance(target.reorder(out.labels), out)


def overlap(a: PureState, b: PureState) -> complex:
    if a.labels != b.labels:
        b = b.reorder(a.labels)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def ideal_xi(psi: PureState, a_label: str = "A") -> PureState:
    """Ideal output of the second step: ``U2`` with a perfect X measurement on
    the Z-extension; labels ordered (D, C, B, A, rest)."""
    d = psi.dim_of(a_label)
    ext = z_extension(psi, a_label)
    # X-basis projectors on A, each paired with storage |-x~> on D
    f = fourier_matrix(d)
    t = ext.tensor()
    t = np.moveaxis(t, 0, -1)  # (C, B, R.., A)
    coeffs = t @ f.conj()  # component on |x~>^A, indexed by x
    out = np.zeros((d,) + coeffs.shape, dtype=complex)
    for x in range(d):
        comp = np.zeros_like(coeffs)
        comp[..., x] = coeffs[..., x]
        amp_a = comp @ f.T  # back to computational basis on A
        out += fourier_vector(d, (-x) % d).reshape((d,) + (1,) * coeffs.ndim) * amp_a[None]
    labels = ("D",) + ext.labels[1:] + (a_label,)
    dims = (("D", d),) + ext.dims[1:] + (ext.dims[0],)
    return PureState(out.ravel(), dims).reorder(labels)


def check_isometries(maps: Sequence[Isometry], tol: float = ISOMETRY_TOL) -> bool:
    return all(m.is_isometry(tol) for m in maps)

