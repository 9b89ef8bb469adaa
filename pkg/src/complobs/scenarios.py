"""Named state families with closed-form expectations, plus the
channel-to-state construction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .numerics import LabeledOperator, NormalizationError
from .states import PureState, basis_state, bell_jk, phi_d, product


class ValidityError(ValueError):
    pass


Y_BASIS = (np.array([1, 1j]) / np.sqrt(2), np.array([1, -1j]) / np.sqrt(2))


def counterexample_state() -> PureState:
    """``(|0y 0y 0y> + |1y 1y 1y>) / sqrt 2`` on A, B, R."""
    y0, y1 = Y_BASIS
    v = (np.kron(np.kron(y0, y0), y0) + np.kron(np.kron(y1, y1), y1)) / np.sqrt(2)
    return PureState(v, (("A", 2), ("B", 2), ("R", 2)))


def phase_damping_state(lam: float) -> PureState:
    """``(|00>|r0> + |11>|r1>) / sqrt 2`` with real environment states of overlap ``lam``."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    r0 = np.array([1.0, 0.0])
    r1 = np.array([lam, np.sqrt(max(0.0, 1 - lam**2))])
    e = np.eye(2)
    v = (np.kron(np.kron(e[0], e[0]), r0) + np.kron(np.kron(e[1], e[1]), r1)) / np.sqrt(2)
    return PureState(v, (("A", 2), ("B", 2), ("R", 2)))


def bell_diagonal_state(q: Sequence[float]) -> tuple[LabeledOperator, PureState]:
    """``sum q_jk |b_jk><b_jk|`` (index ``2j + k``) and its purification onto a
    four-dimensional R, basis ordered by descending weight, ties by index."""
    q = np.asarray(q, dtype=float)
    if q.shape != (4,) or np.any(q < 0) or abs(q.sum() - 1) > 1e-9:
        raise NormalizationError(f"q must be four probabilities summing to 1, got {q}")
    bells = [bell_jk(2, j, k).amplitudes for j in range(2) for k in range(2)]
    rho = sum(w * np.outer(b, b.conj()) for w, b in zip(q, bells))
    order = sorted(range(4), key=lambda i: (-q[i], i))
    amps = sum(np.sqrt(q[i]) * np.kron(bells[i], np.eye(4)[r]) for r, i in enumerate(order))
    dims = (("A", 2), ("B", 2))
    return LabeledOperator(rho, dims), PureState(amps, dims + (("R", 4),))


def channel_to_state(kraus: Sequence[np.ndarray], d: int, tol: float = 1e-9) -> PureState:
    """Send half of ``Phi_d`` through the channel's Stinespring dilation.

    A is the reference, B the channel output and R the dilation environment
    (one basis state per Kraus operator), so ``psi^R`` is the complementary
    channel's output.
    """
    ks = [np.asarray(k, dtype=complex) for k in kraus]
    if not ks or any(k.shape[1] != d for k in ks):
        raise ValidityError(f"Kraus operators must have {d} columns")
    gram = sum(k.conj().T @ k for k in ks)
    err = float(np.max(np.abs(gram - np.eye(d))))
    if err > tol:
        raise ValidityError(f"Kraus operators are not trace preserving (deviation {err:.3g})")
    dout, n = ks[0].shape[0], len(ks)
    phi = phi_d(d).amplitudes.reshape(d, d)
    # amplitude[a, b, k] = sum_j phi[a, j] K_k[b, j]
    t = np.einsum("aj,kbj->abk", phi, np.stack(ks))
    return PureState(t.ravel(), (("A", d), ("B", dout), ("R", n)))


def apply_channel(kraus: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    return sum(k @ rho @ k.conj().T for k in kraus)


def dephasing_kraus(p: float = 1.0) -> list[np.ndarray]:
    """Qubit dephasing, full at ``p = 1``."""
    return [np.sqrt(1 - p / 2) * np.eye(2), np.sqrt(p / 2) * np.diag([1.0, -1.0])]


def amplitude_damping_kraus(gamma: float) -> list[np.ndarray]:
    return [np.array([[1, 0], [0, np.sqrt(1 - gamma)]]), np.array([[0, np.sqrt(gamma)], [0, 0]])]


def depolarizing_kraus(p: float) -> list[np.ndarray]:
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    y = np.array([[0, -1j], [1j, 0]])
    z = np.diag([1.0, -1.0]).astype(complex)
    return [np.sqrt(1 - 3 * p / 4) * np.eye(2)] + [np.sqrt(p / 4) * s for s in (x, y, z)]


def entropy_bits(q: Sequence[float]) -> float:
    q = np.asarray(q, dtype=float)
    q = q[q > 0]
    return float(-np.sum(q * np.log2(q)))


@dataclass(frozen=True)
class Scenario:
    name: str
    parameters: dict[str, float]
    build: Callable[..., PureState]
    expected: Callable[..., dict[str, float]] = field(default=lambda **_: {})
    notes: str = ""

    def state(self, **overrides) -> PureState:
        unknown = set(overrides) - set(self.parameters)
        if unknown:
            raise KeyError(f"scenario {self.name!r} has no parameters {sorted(unknown)}")
        return self.build(**{**self.parameters, **overrides})

    def expectations(self, **overrides) -> dict[str, float]:
        return self.expected(**{**self.parameters, **overrides})


def _phase_damping_expected(lam):
    return {
        "p_guess_x_bc": (1 + lam) / 2,
        "p_secure_z": float(np.sqrt((1 + lam**2) / 2)),
        "eps_z": 0.0,
        "eps_x": (1 - lam) / 2,
        "bound": float(np.sqrt(1 - lam)),
    }


def _bell_q(q0, q1, q2, q3):
    return [q0, q1, q2, q3]


SCENARIOS: dict[str, Scenario] = {
    s.name: s
    for s in [
        Scenario(
            "counterexample",
            {},
            lambda: counterexample_state(),
            lambda: {"p_secure_z": 1.0, "p_secure_x": 1.0, "p_guess_z_b": 0.5},
            "y-basis GHZ state: environment blind to X and Z, yet AB separable",
        ),
        Scenario(
            "phase_damping",
            {"lambda": 0.5},
            lambda **p: phase_damping_state(p["lambda"]),
            lambda **p: _phase_damping_expected(p["lambda"]),
            "Helstrom closed forms on two-dimensional conditionals",
        ),
        Scenario(
            "bell_diagonal",
            {"q0": 0.7, "q1": 0.1, "q2": 0.1, "q3": 0.1},
            lambda **p: bell_diagonal_state(_bell_q(p["q0"], p["q1"], p["q2"], p["q3"]))[1],
            lambda **p: {"hashing_rate": 1 - entropy_bits(_bell_q(p["q0"], p["q1"], p["q2"], p["q3"]))},
            "hashing rate equals 1 - H(q)",
        ),
        Scenario(
            "maximally_entangled",
            {"d": 2},
            lambda **p: product(phi_d(int(p["d"])), basis_state("R", 2, 0)),
            lambda **p: {"eps_z": 0.0, "eps_x": 0.0, "distance": 0.0},
            "perfect premises, exact recovery",
        ),
        Scenario(
            "dephasing",
            {"p": 1.0},
            lambda **p: channel_to_state(dephasing_kraus(p["p"]), 2),
            lambda **p: {"p_guess_z_b": 1.0, "p_guess_x_b": 0.5 + 0.5 * abs(1 - p["p"])},
            "qubit dephasing channel applied to half of a Bell pair",
        ),
        Scenario(
            "amplitude_damping",
            {"gamma": 0.2},
            lambda **p: channel_to_state(amplitude_damping_kraus(p["gamma"]), 2),
            lambda **p: {},
            "qubit amplitude damping channel applied to half of a Bell pair",
        ),
        Scenario(
            "depolarizing",
            {"p": 0.1},
            lambda **p: channel_to_state(depolarizing_kraus(p["p"]), 2),
            lambda **p: {},
            "qubit depolarizing channel applied to half of a Bell pair",
        ),
    ]
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
