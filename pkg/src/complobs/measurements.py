"""POVMs, guessing probability and its optimizers, and the security functional."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.optimize import minimize

from .numerics import (
    DEFAULT_TOL,
    LabeledOperator,
    ShapeError,
    fidelity,
    inv_sqrt_on_support,
)
from .states import Ensemble, PureState, ensemble_for_observable

OPT_TOL = 1e-8
OPT_MAX_ITER = 5000


@dataclass(frozen=True)
class Povm:
    elements: tuple[LabeledOperator, ...]
    labels: tuple[int, ...] = ()

    def __post_init__(self):
        elements = tuple(self.elements)
        if not elements:
            raise ValueError("a POVM needs at least one element")
        dims = {tuple(d for _, d in e.dims) for e in elements}
        if len(dims) > 1:
            raise ShapeError(f"POVM elements act on different composites: {dims}")
        object.__setattr__(self, "elements", elements)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(range(len(elements))))

    @classmethod
    def from_arrays(cls, arrays, dims) -> "Povm":
        return cls(tuple(LabeledOperator(a, dims) for a in arrays))

    @property
    def dims(self):
        return self.elements[0].dims

    def __len__(self) -> int:
        return len(self.elements)

    def stacked(self) -> np.ndarray:
        return np.stack([e.matrix for e in self.elements])

    def completeness_error(self) -> float:
        s = self.stacked().sum(axis=0)
        return float(np.max(np.abs(s - np.eye(s.shape[0]))))

    def is_valid(self, tol: float = DEFAULT_TOL) -> bool:
        if self.completeness_error() > tol:
            return False
        for e in self.elements:
            m = e.matrix
            if np.max(np.abs(m - m.conj().T)) > tol:
                return False
            if np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0] < -tol:
                return False
        return True


def projective_povm(basis: np.ndarray, dims) -> Povm:
    """Rank-one projectors onto the columns of ``basis``."""
    return Povm.from_arrays([np.outer(basis[:, k], basis[:, k].conj()) for k in range(basis.shape[1])], dims)


@dataclass
class GuessReport:
    achieved: float
    upper: float
    measurement: Povm
    iterations: int = 0
    converged: bool = True
    history: list[float] = field(default_factory=list, repr=False)

    @property
    def gap(self) -> float:
        return self.upper - self.achieved

    def to_dict(self, include_measurement: bool = False) -> dict:
        out = {
            "achieved": float(self.achieved),
            "upper": float(self.upper),
            "gap": float(self.gap),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
        }
        if include_measurement:
            out["measurement"] = [
                {"re": e.matrix.real.tolist(), "im": e.matrix.imag.tolist()}
                for e in self.measurement.elements
            ]
        return out


@dataclass
class SecureReport:
    value: float
    per_outcome: list[tuple[float, float]]

    def to_dict(self) -> dict:
        return {"value": self.value, "per_outcome": [list(p) for p in self.per_outcome]}


def _guess_value(sigmas: np.ndarray, lams: np.ndarray) -> float:
    # sum_z Tr[sigma_z Lambda_z]
    return float(np.real(np.einsum("zij,zji->", sigmas, lams)))


def p_guess_with(povm: Povm, ens: Ensemble) -> float:
    if len(povm) != len(ens):
        raise ShapeError(f"POVM has {len(povm)} outcomes, ensemble has {len(ens)} members")
    if povm.elements[0].dim != ens.dim:
        raise ShapeError(f"POVM acts on dimension {povm.elements[0].dim}, ensemble on {ens.dim}")
    return _guess_value(ens.stacked(), povm.stacked())


def _complete(lams: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Split the identity deficit ``kernel`` equally among outcomes."""
    return lams + kernel[None] / lams.shape[0]


def clean_povm(lams: np.ndarray, floor: float = 1e-13) -> np.ndarray:
    """Zero eigenvalues below ``floor`` and renormalize to sum to the identity.

    Rank is preserved by the renormalization, so square roots of the cleaned
    elements carry no spurious ``sqrt(roundoff)`` components.
    """
    vals, vecs = np.linalg.eigh(0.5 * (lams + lams.conj().transpose(0, 2, 1)))
    vals = np.where(vals < floor, 0.0, vals)
    lams = (vecs * vals[:, None, :]) @ vecs.conj().transpose(0, 2, 1)
    root, kernel = inv_sqrt_on_support(lams.sum(axis=0), tol=1e-12)
    lams = _complete(root @ lams @ root, kernel)
    return 0.5 * (lams + lams.conj().transpose(0, 2, 1))


def pgm(ens: Ensemble) -> Povm:
    """Pretty-good (square-root) measurement of the ensemble."""
    sigmas = ens.stacked()
    root, kernel = inv_sqrt_on_support(sigmas.sum(axis=0))
    lams = _complete(root @ sigmas @ root, kernel)
    return Povm.from_arrays(0.5 * (lams + lams.conj().transpose(0, 2, 1)), ens.dims)


def helstrom_binary(ens: Ensemble) -> GuessReport:
    if len(ens) != 2:
        raise ValueError(f"Helstrom measurement needs exactly two hypotheses, got {len(ens)}")
    s0, s1 = ens.stacked()
    vals, vecs = np.linalg.eigh(0.5 * ((s0 - s1) + (s0 - s1).conj().T))
    pos = vecs[:, vals > 0]
    p0 = pos @ pos.conj().T
    p1 = np.eye(len(vals)) - p0
    # w1 + Tr[(w0 rho0 - w1 rho1) P+]  ==  (1 + ||w0 rho0 - w1 rho1||_1) / 2
    value = float(np.real(np.trace(s1)) + np.sum(vals[vals > 0]))
    return GuessReport(value, value, Povm.from_arrays([p0, p1], ens.dims), iterations=0)


def dual_upper_bound(sigmas: np.ndarray, lams: np.ndarray) -> float:
    """Tr Y for a feasible dual point built from a candidate measurement.

    ``Y`` is the Hermitian part of ``sum_z sigma_z Lambda_z`` shifted by the
    smallest multiple of the identity with ``Y >= sigma_z`` for every ``z``.
    """
    y = np.einsum("zij,zjk->ik", sigmas, lams)
    y = 0.5 * (y + y.conj().T)
    shift = max(float(np.linalg.eigvalsh(s - y)[-1]) for s in sigmas)
    shift = max(shift, 0.0)
    return min(float(np.real(np.trace(y))) + shift * y.shape[0], 1.0)


def _hermitian_basis(dim: int) -> np.ndarray:
    """Orthonormal basis of Hermitian ``dim x dim`` matrices under ``Re Tr(AB)``."""
    out = []
    for i in range(dim):
        e = np.zeros((dim, dim), dtype=complex)
        e[i, i] = 1
        out.append(e)
    for i in range(dim):
        for j in range(i + 1, dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = e[j, i] = 1 / np.sqrt(2)
            out.append(e)
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = 1j / np.sqrt(2)
            e[j, i] = -1j / np.sqrt(2)
            out.append(e)
    return np.stack(out)


def _barrier_polish(sigmas: np.ndarray, y: np.ndarray, tol: float, max_newton: int = 400):
    """Path-following Newton method on ``min Tr Y s.t. Y >= sigma_z``.

    ``y`` must be strictly feasible. Returns ``(Y, Lambda)`` where the POVM is
    read off the central path as ``Lambda_z = (Y - sigma_z)^{-1} / t``.
    """
    n, dim, _ = sigmas.shape
    basis = _hermitian_basis(dim)
    traces = np.real(np.einsum("aii->a", basis))
    slack_floor = np.array([np.linalg.eigvalsh(y - s)[0] for s in sigmas]).min()
    t = n * dim / max(slack_floor * dim, 1e-12)
    steps = 0
    while True:
        for _ in range(50):
            steps += 1
            k = np.linalg.inv(y[None] - sigmas)
            grad = t * traces - np.real(np.einsum("zij,aji->a", k, basis))
            ke = k[:, None] @ basis[None]
            hess = np.real(np.einsum("zaij,zbji->ab", ke, ke))
            try:
                step = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(hess, grad, rcond=None)[0]
            decrement = float(-grad @ step)
            if decrement < 1e-10:
                break
            dy = np.einsum("a,aij->ij", step, basis)
            alpha = 1.0
            f0 = t * np.real(np.trace(y)) - sum(np.linalg.slogdet(y - s)[1] for s in sigmas)
            while alpha > 1e-12:
                cand = y + alpha * dy
                try:
                    for s in sigmas:
                        np.linalg.cholesky(cand - s)
                except np.linalg.LinAlgError:
                    alpha *= 0.5
                    continue
                f1 = t * np.real(np.trace(cand)) - sum(np.linalg.slogdet(cand - s)[1] for s in sigmas)
                if f1 <= f0 - 0.25 * alpha * decrement:
                    break
                alpha *= 0.5
            else:
                break
            y = 0.5 * (cand + cand.conj().T)
            if steps >= max_newton:
                break
        if n * dim / t < tol / 10 or steps >= max_newton:
            break
        t *= 8
    lams = np.linalg.inv(y[None] - sigmas) / t
    lams = 0.5 * (lams + lams.conj().transpose(0, 2, 1))
    root, kernel = inv_sqrt_on_support(lams.sum(axis=0))
    lams = _complete(root @ lams @ root, kernel)
    return y, 0.5 * (lams + lams.conj().transpose(0, 2, 1))


def optimize_min_error(
    ens: Ensemble, tol: float = OPT_TOL, max_iter: int = OPT_MAX_ITER, polish_after: int | None = 300
) -> GuessReport:
    """Minimum-error discrimination by fixed-point iteration started at the PGM.

    Each sweep maps ``Lambda_z -> R^{-1} sigma_z Lambda_z sigma_z R^{-1}`` with
    ``R = (sum_z sigma_z Lambda_z sigma_z)^{1/2}`` and ``sigma_z = w_z rho_z``.
    The best iterate is kept, so the reported value never decreases. Stops once
    the dual gap falls below ``tol``.

    The iteration converges slowly when the optimal measurement is degenerate.
    If the gap is still open after ``polish_after`` sweeps, a barrier method on
    the dual problem finishes the job; its result is kept only if it is better.
    """
    sigmas = ens.stacked()
    lams = pgm(ens).stacked()
    best = _guess_value(sigmas, lams)
    best_lams = lams
    upper = dual_upper_bound(sigmas, lams)
    history = [best]
    it = 0
    converged = upper - best < tol
    check_every = 10
    limit = max_iter if polish_after is None else min(max_iter, polish_after)
    while not converged and it < limit:
        it += 1
        t = sigmas @ lams @ sigmas
        m = t.sum(axis=0)
        m = 0.5 * (m + m.conj().T)
        vals, vecs = np.linalg.eigh(m)
        keep = vals > 1e-14 * max(vals[-1], 1e-300)
        inv = np.zeros_like(vals)
        inv[keep] = 1.0 / np.sqrt(vals[keep])
        r = (vecs * inv) @ vecs.conj().T
        kv = vecs[:, ~keep]
        lams = r @ t @ r
        lams = 0.5 * (lams + lams.conj().transpose(0, 2, 1))
        if kv.shape[1]:
            lams = _complete(lams, kv @ kv.conj().T)
        value = _guess_value(sigmas, lams)
        history.append(value)
        if value >= best:
            best, best_lams = value, lams
        if it % check_every == 0 or it == limit:
            upper = min(upper, dual_upper_bound(sigmas, best_lams))
            converged = upper - best < tol
    if not converged and polish_after is not None:
        y = np.einsum("zij,zjk->ik", sigmas, best_lams)
        y = 0.5 * (y + y.conj().T)
        shift = max(float(np.linalg.eigvalsh(s - y)[-1]) for s in sigmas)
        y = y + (max(shift, 0.0) + 1e-3) * np.eye(y.shape[0])
        y, lams = _barrier_polish(sigmas, y, tol)
        value = _guess_value(sigmas, lams)
        upper = min(upper, float(np.real(np.trace(y))), dual_upper_bound(sigmas, lams))
        if value >= best:
            best, best_lams = value, lams
            history.append(value)
        converged = upper - best < tol
    best_lams = clean_povm(best_lams)
    best = _guess_value(sigmas, best_lams)
    upper = max(min(upper, dual_upper_bound(sigmas, best_lams)), best)
    converged = upper - best < tol
    povm = Povm.from_arrays(best_lams, ens.dims)
    return GuessReport(best, upper, povm, iterations=it, converged=converged, history=history)


def p_secure(
    psi: PureState, observable: str, env: Iterable[str], a_label: str = "A"
) -> SecureReport:
    """Fidelity-based measure of the observable on A being uniform and
    independent of ``env``: ``sum_z sqrt(p_z / d) F(rho_z^env, rho^env)``."""
    env = list(env)
    ens = ensemble_for_observable(psi, observable, env, a_label)
    marginal = psi.marginal(env)
    d = len(ens)
    pairs = []
    for w, member in zip(ens.weights, ens.members):
        f = fidelity(member, marginal, tol=1e-8) if w > 0 else 0.0
        pairs.append((float(np.sqrt(w / d)), float(f)))
    return SecureReport(float(sum(a * b for a, b in pairs)), pairs)


def _bloch(m: np.ndarray) -> tuple[float, np.ndarray]:
    """``m = a I + b . sigma``."""
    a = 0.5 * np.real(np.trace(m))
    b = 0.5 * np.array([2 * np.real(m[0, 1]), -2 * np.imag(m[0, 1]), np.real(m[0, 0] - m[1, 1])])
    return a, b


def qubit_grid_oracle(ens: Ensemble, resolution: float = 1e-6) -> float:
    """Independent optimum of the guessing probability for a qubit ensemble.

    Works on the dual problem ``min Tr Y s.t. Y >= w_z rho_z``. Writing
    ``Y = y0 I + y . sigma`` the constraints reduce to ``y0 >= a_z + |y - b_z|``
    so only the three components of ``y`` are searched: nested grids halve
    around the best point down to ``resolution``, then SLSQP polishes the
    equivalent smooth program ``min t s.t. |y - b_z|^2 <= (t - a_z)^2``.
    Every candidate is a feasible dual point, so the result never undercuts
    the true optimum; the smaller of the grid and polished values is returned.
    """
    if ens.dim != 2:
        raise ValueError(f"grid oracle supports a single qubit only, got dimension {ens.dim}")
    if len(ens) > 4:
        raise ValueError(f"grid oracle supports at most 4 outcomes, got {len(ens)}")
    parts = [_bloch(s) for s in ens.stacked()]
    a = np.array([p[0] for p in parts])
    b = np.array([p[1] for p in parts])

    def objective(points: np.ndarray) -> np.ndarray:
        dist = np.linalg.norm(points[:, None, :] - b[None, :, :], axis=2)
        return 2 * np.max(a[None, :] + dist, axis=1)

    center = np.zeros(3)
    half = 1.0
    steps = 21
    best = np.inf
    while True:
        axis = np.linspace(-half, half, steps)
        grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3) + center
        vals = objective(grid)
        k = int(np.argmin(vals))
        best = min(best, float(vals[k]))
        center = grid[k]
        if 2 * half / (steps - 1) <= resolution:
            break
        half *= 0.5

    unit_t = np.array([0.0, 0.0, 0.0, 1.0])
    cons = []
    for ai, bi in zip(a, b):
        cons.append({
            "type": "ineq",
            "fun": lambda x, ai=ai, bi=bi: (x[3] - ai) ** 2 - np.sum((x[:3] - bi) ** 2),
            "jac": lambda x, ai=ai, bi=bi: np.append(-2 * (x[:3] - bi), 2 * (x[3] - ai)),
        })
        cons.append({"type": "ineq", "fun": lambda x, ai=ai: x[3] - ai, "jac": lambda x: unit_t})
    res = minimize(
        lambda x: x[3],
        np.append(center, best / 2),
        jac=lambda x: unit_t,
        constraints=cons,
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 500},
    )
    if np.all(np.isfinite(res.x)):
        best = min(best, float(objective(res.x[None, :3])[0]))
    return best
