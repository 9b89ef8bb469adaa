"""State families: canonical A|BR form, Z-extension, Weyl operators, Fourier and
Bell bases, Haar-random states and observable-conditioned ensembles."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .numerics import (
    DEFAULT_TOL,
    Dims,
    LabelError,
    LabeledOperator,
    NormalizationError,
    ShapeError,
    check_size,
    normalize_dims,
    reduced_from_vector,
    total_dim,
)


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray
    dims: Dims

    def __post_init__(self):
        dims = normalize_dims(self.dims)
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        n = total_dim(dims)
        check_size(n)
        if amps.size != n:
            raise ShapeError(f"{amps.size} amplitudes do not match dims {dims}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1) > 1e-8:
            raise NormalizationError(f"state has norm {norm:.12g}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.dims)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.dims)

    def dim_of(self, label: str) -> int:
        for l, d in self.dims:
            if l == label:
                return d
        raise LabelError(f"no subsystem {label!r} in {self.labels}")

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.shape)

    def density(self) -> LabeledOperator:
        v = self.amplitudes
        return LabeledOperator(np.outer(v, v.conj()), self.dims)

    def marginal(self, keep: Iterable[str]) -> LabeledOperator:
        return reduced_from_vector(self.amplitudes, self.dims, keep)

    def relabel(self, mapping: dict[str, str]) -> "PureState":
        return PureState(self.amplitudes, tuple((mapping.get(l, l), d) for l, d in self.dims))

    def reorder(self, labels: Sequence[str]) -> "PureState":
        """Same state with its tensor factors permuted into ``labels`` order."""
        if sorted(labels) != sorted(self.labels):
            raise LabelError(f"cannot reorder {self.labels} into {tuple(labels)}")
        perm = [self.labels.index(l) for l in labels]
        amps = self.tensor().transpose(perm).ravel()
        return PureState(amps, tuple(self.dims[i] for i in perm))

    def to_json(self) -> str:
        return json.dumps(state_to_dict(self))


def product(*states: PureState) -> PureState:
    amps = np.ones(1, dtype=complex)
    for s in states:
        check_size(amps.size * s.amplitudes.size)
        amps = np.kron(amps, s.amplitudes)
    return PureState(amps, tuple(p for s in states for p in s.dims))


def basis_state(label: str, d: int, k: int) -> PureState:
    if not 0 <= k < d:
        raise IndexError(f"basis index {k} out of range for dimension {d}")
    v = np.zeros(d, dtype=complex)
    v[k] = 1
    return PureState(v, ((label, d),))


def state_to_dict(state: PureState) -> dict:
    return {
        "dims": [[l, d] for l, d in state.dims],
        "re": state.amplitudes.real.tolist(),
        "im": state.amplitudes.imag.tolist(),
    }


def state_from_dict(doc: dict) -> PureState:
    amps = np.asarray(doc["re"], dtype=float) + 1j * np.asarray(doc["im"], dtype=float)
    return PureState(amps, tuple((l, d) for l, d in doc["dims"]))


def state_from_json(text: str) -> PureState:
    return state_from_dict(json.loads(text))


@dataclass(frozen=True)
class CanonicalABR:
    """``|psi> = sum_z sqrt(p_z) |z>^A |phi_z>^{rest}``."""

    p: np.ndarray
    phi: tuple[PureState, ...]
    a_label: str = "A"

    def reassemble(self) -> PureState:
        d = len(self.p)
        blocks = [np.sqrt(self.p[z]) * self.phi[z].amplitudes for z in range(d)]
        dims = ((self.a_label, d),) + self.phi[0].dims
        return PureState(np.concatenate(blocks), dims)


@dataclass(frozen=True)
class Ensemble:
    weights: np.ndarray
    members: tuple[LabeledOperator, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) != len(self.members):
            raise ShapeError("weights and members differ in length")
        if np.any(w < -DEFAULT_TOL) or abs(w.sum() - 1) > 1e-8:
            raise NormalizationError(f"weights {w} are not a probability vector")
        dims = {tuple(d for _, d in m.dims) for m in self.members}
        if len(dims) > 1:
            raise ShapeError(f"members live on different composites: {dims}")
        object.__setattr__(self, "weights", np.clip(w, 0.0, None))
        object.__setattr__(self, "members", tuple(self.members))

    @property
    def dims(self) -> Dims:
        return self.members[0].dims

    @property
    def dim(self) -> int:
        return self.members[0].dim

    def __len__(self) -> int:
        return len(self.members)

    def stacked(self) -> np.ndarray:
        """Weighted members ``w_z rho_z`` as an ``(n, D, D)`` array."""
        return np.stack([w * m.matrix for w, m in zip(self.weights, self.members)])

    def average(self) -> np.ndarray:
        return self.stacked().sum(axis=0)


def omega(d: int) -> complex:
    return np.exp(2j * np.pi / d)


def _check_d(d: int) -> None:
    if d < 2:
        raise ValueError(f"dimension must be at least 2, got {d}")


def weyl_z_matrix(d: int) -> np.ndarray:
    _check_d(d)
    return np.diag(omega(d) ** np.arange(d))


def weyl_x_matrix(d: int) -> np.ndarray:
    _check_d(d)
    # |k> -> |k+1 mod d>
    return np.roll(np.eye(d, dtype=complex), 1, axis=0)


def weyl_z(d: int, label: str = "A") -> LabeledOperator:
    return LabeledOperator(weyl_z_matrix(d), ((label, d),))


def weyl_x(d: int, label: str = "A") -> LabeledOperator:
    return LabeledOperator(weyl_x_matrix(d), ((label, d),))


def fourier_matrix(d: int) -> np.ndarray:
    """Columns are the X eigenstates: ``F[z, x] = omega^{xz} / sqrt(d)``."""
    k = np.arange(d)
    return omega(d) ** np.outer(k, k) / np.sqrt(d)


def fourier_vector(d: int, x: int) -> np.ndarray:
    return omega(d) ** (x * np.arange(d)) / np.sqrt(d)


def fourier_state(d: int, x: int, label: str = "A") -> PureState:
    _check_d(d)
    if not 0 <= x < d:
        raise IndexError(f"Fourier index {x} out of range for dimension {d}")
    return PureState(fourier_vector(d, x), ((label, d),))


def phi_d(d: int, labels: tuple[str, str] = ("A", "B")) -> PureState:
    _check_d(d)
    return PureState(np.eye(d, dtype=complex).ravel() / np.sqrt(d), ((labels[0], d), (labels[1], d)))


def bell_jk(d: int, j: int, k: int, labels: tuple[str, str] = ("A", "B")) -> PureState:
    if not (0 <= j < d and 0 <= k < d):
        raise IndexError(f"Bell index ({j}, {k}) out of range for d={d}")
    op = np.linalg.matrix_power(weyl_x_matrix(d), j) @ np.linalg.matrix_power(weyl_z_matrix(d), k)
    amps = np.kron(np.eye(d), op) @ phi_d(d).amplitudes
    return PureState(amps, ((labels[0], d), (labels[1], d)))


def _split_first(psi: PureState, a_label: str) -> PureState:
    if psi.labels[0] != a_label:
        psi = psi.reorder((a_label,) + tuple(l for l in psi.labels if l != a_label))
    return psi


def canonical_decomposition(psi: PureState, a_label: str = "A") -> CanonicalABR:
    psi = _split_first(psi, a_label)
    d = psi.dims[0][1]
    rest = psi.dims[1:]
    blocks = psi.amplitudes.reshape(d, -1)
    norms = np.linalg.norm(blocks, axis=1)
    p = norms**2
    phis = []
    for z in range(d):
        if norms[z] > 1e-14:
            phis.append(PureState(blocks[z] / norms[z], rest))
        else:
            # inert placeholder, always multiplied by p_z = 0
            v = np.zeros(blocks.shape[1], dtype=complex)
            v[0] = 1
            phis.append(PureState(v, rest))
    return CanonicalABR(p / p.sum(), tuple(phis), a_label)


def z_extension(psi: PureState, a_label: str = "A", copy_label: str = "C") -> PureState:
    """Coherent Z-basis copy of A into a new register placed right after A.

    Output label order is ``(A, C, *rest)``.
    """
    psi = _split_first(psi, a_label)
    d = psi.dims[0][1]
    blocks = psi.amplitudes.reshape(d, -1)
    check_size(d * psi.amplitudes.size)
    out = np.zeros((d, d, blocks.shape[1]), dtype=complex)
    for z in range(d):
        out[z, z] = blocks[z]
    dims = (psi.dims[0], (copy_label, d)) + psi.dims[1:]
    return PureState(out.ravel(), dims)


def _observable_basis(observable: str, d: int) -> np.ndarray:
    """Columns are the measurement eigenvectors, indexed by outcome."""
    obs = observable.upper()
    if obs == "Z":
        return np.eye(d, dtype=complex)
    if obs == "X":
        return fourier_matrix(d)
    if obs == "Y" and d == 2:
        return np.array([[1, 1], [1j, -1j]], dtype=complex) / np.sqrt(2)
    raise ValueError(f"unsupported observable {observable!r} for d={d}")


def ensemble_for_observable(
    psi: PureState, observable: str, side: Iterable[str], a_label: str = "A"
) -> Ensemble:
    """Outcome distribution of measuring ``observable`` on A, with conditional
    states of the ``side`` systems. Outcome ``x`` of X is the eigenvector
    ``(1/sqrt d) sum_z omega^{xz} |z>``."""
    side = list(side)
    if not side:
        raise ValueError("side system set is empty")
    if a_label in side:
        raise ValueError(f"side systems must exclude {a_label!r}")
    psi = _split_first(psi, a_label)
    d = psi.dims[0][1]
    rest = psi.dims[1:]
    basis = _observable_basis(observable, d)
    cond = basis.conj().T @ psi.amplitudes.reshape(d, -1)
    weights = np.sum(np.abs(cond) ** 2, axis=1)
    members = []
    for x in range(d):
        if weights[x] > 1e-14:
            m = reduced_from_vector(cond[x] / np.sqrt(weights[x]), rest, side)
        else:
            m = reduced_from_vector(np.ones(cond.shape[1]), rest, side)
            m = LabeledOperator(np.eye(m.dim) / m.dim, m.dims)
        members.append(m)
    return Ensemble(weights / weights.sum(), tuple(members))


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based generator for sample ``index`` under master ``seed``."""
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), int(index)])
    return np.random.Generator(np.random.Philox(ss))


def haar_random_state(dims, seed: int, index: int = 0) -> PureState:
    """Haar-random pure state; ``dims`` is a list of (label, dim) pairs or of ints
    (labelled A, B, R, ... in order)."""
    dims = list(dims)
    if dims and not isinstance(dims[0], (tuple, list)):
        names = ["A", "B", "R"] + [f"S{i}" for i in range(3, len(dims))]
        dims = list(zip(names, dims))
    dims = normalize_dims(dims)
    n = total_dim(dims)
    check_size(n)
    rng = stream(seed, index)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return PureState(v / np.linalg.norm(v), dims)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    g = rng.standard_normal((d, rank or d)) + 1j * rng.standard_normal((d, rank or d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def purify(rho: LabeledOperator, env_label: str = "R", tol: float = DEFAULT_TOL) -> PureState:
    """Spectral purification, environment basis ordered by descending eigenvalue
    (ties by index)."""
    vals, vecs = np.linalg.eigh(0.5 * (rho.matrix + rho.matrix.conj().T))
    if vals[0] < -tol * 10:
        raise ValueError(f"operator is not PSD (min eigenvalue {vals[0]:.3g})")
    vals = np.clip(vals, 0.0, None)
    order = sorted(range(len(vals)), key=lambda i: (-round(vals[i], 12), i))
    amps = sum(np.sqrt(vals[i]) * np.kron(vecs[:, i], np.eye(len(vals))[r]) for r, i in enumerate(order))
    amps = amps / np.linalg.norm(amps)
    return PureState(amps, rho.dims + ((env_label, len(vals)),))
