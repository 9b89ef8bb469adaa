"""Certificates for the two recovery conditions, the guessing/secrecy duality
they rest on, and auxiliary diagnostics (decoupling distance, hashing rate)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .measurements import (
    OPT_TOL,
    GuessReport,
    Povm,
    SecureReport,
    optimize_min_error,
    p_guess_with,
    p_secure,
)
from .numerics import LabeledOperator, partial_trace, trace_distance, von_neumann_entropy
from .recovery import (
    apply_isometry,
    build_u1,
    build_u2,
    compose_recovery,
    ideal_xi,
    overlap,
    recovery_error,
)
from .states import PureState, ensemble_for_observable, phi_d, z_extension

CERT_TOL = 1e-6


def _clip01(x: float) -> float:
    return min(max(float(x), 0.0), 1.0)


def env_labels(psi: PureState, a_label: str = "A", b_label: str = "B") -> list[str]:
    return [l for l in psi.labels if l not in (a_label, b_label)]


@dataclass
class TheoremCertificate:
    theorem: int
    eps_z: float
    eps_x: float
    bound: float
    bound_uncapped: float
    achieved_distance: float
    holds: bool
    tol: float = CERT_TOL
    experimental: bool = False
    detail: dict = field(default_factory=dict, repr=False)

    @property
    def margin(self) -> float:
        return self.bound - self.achieved_distance

    def to_dict(self) -> dict:
        solver = {}
        for key, value in self.detail.items():
            if isinstance(value, (GuessReport, SecureReport)):
                solver[key] = value.to_dict()
            elif isinstance(value, (bool, np.bool_)):
                solver[key] = bool(value)
            elif isinstance(value, (int, float, np.floating)):
                solver[key] = float(value)
            elif isinstance(value, str):
                solver[key] = value
        return {
            "theorem": self.theorem,
            "eps_z": float(self.eps_z),
            "eps_x": float(self.eps_x),
            "bound": float(self.bound),
            "bound_uncapped": float(self.bound_uncapped),
            "distance": float(self.achieved_distance),
            "holds": self.holds,
            "experimental": self.experimental,
            "solver": solver,
        }


def _certificate(theorem, eps_z, eps_x, uncapped, distance, tol, detail, experimental=False):
    bound = min(uncapped, 1.0)
    return TheoremCertificate(
        theorem=theorem,
        eps_z=eps_z,
        eps_x=eps_x,
        bound=bound,
        bound_uncapped=uncapped,
        achieved_distance=distance,
        holds=bool(distance <= bound + tol),
        tol=tol,
        experimental=experimental,
        detail=detail,
    )


def z_ensemble(psi: PureState, b_label: str = "B"):
    return ensemble_for_observable(psi, "Z", [b_label])


def x_ensemble_on_extension(psi: PureState, b_label: str = "B"):
    """X outcomes on A against Bob's B and the copy register C of the Z-extension."""
    return ensemble_for_observable(z_extension(psi), "X", ["C", b_label])


def optimized_measurements(psi: PureState, tol: float = OPT_TOL, b_label: str = "B"):
    """Optimized Z-guessing POVM on B and X-guessing POVM on CB."""
    z = optimize_min_error(z_ensemble(psi, b_label), tol=tol)
    x = optimize_min_error(x_ensemble_on_extension(psi, b_label), tol=tol)
    return z, x


def theorem1_certificate(
    psi: PureState,
    lambda_z: Povm | None = None,
    gamma_x: Povm | None = None,
    tol: float = CERT_TOL,
    b_label: str = "B",
) -> TheoremCertificate:
    """Recovery error of the composed isometry against ``sqrt(2 eps_x) + sqrt(2 eps_z)``.

    The eps values come from the guessing probabilities the supplied
    measurements actually achieve. Missing measurements are optimized.
    """
    detail: dict = {}
    if lambda_z is None or gamma_x is None:
        zr, xr = optimized_measurements(psi, b_label=b_label)
        lambda_z = lambda_z or zr.measurement
        gamma_x = gamma_x or xr.measurement
        detail.update(guess_z=zr, guess_x=xr)
    pz = p_guess_with(lambda_z, z_ensemble(psi, b_label))
    px = p_guess_with(gamma_x, x_ensemble_on_extension(psi, b_label))
    eps_z, eps_x = _clip01(1 - pz), _clip01(1 - px)
    u = compose_recovery(lambda_z, gamma_x)
    distance = recovery_error(psi, u)
    detail.update(p_guess_z=pz, p_guess_x=px, isometry_error=u.isometry_error(), recovery=u)
    return _certificate(1, eps_z, eps_x, np.sqrt(2 * eps_x) + np.sqrt(2 * eps_z), distance, tol, detail)


def theorem2_certificate(
    psi: PureState,
    tol: float = CERT_TOL,
    b_label: str = "B",
    guesses: tuple[GuessReport, GuessReport] | None = None,
) -> TheoremCertificate:
    """Recovery error against ``(8 eps_x)^{1/4} + (8 eps_z)^{1/4}`` with the eps
    values read off the secrecy of X (from C and the environment, on the
    Z-extension) and of Z (from the environment)."""
    env = env_labels(psi, b_label=b_label)
    sec_x = p_secure(z_extension(psi), "X", ["C"] + env)
    sec_z = p_secure(psi, "Z", env)
    eps_x, eps_z = _clip01(1 - sec_x.value), _clip01(1 - sec_z.value)
    zr, xr = guesses or optimized_measurements(psi, b_label=b_label)
    u = compose_recovery(zr.measurement, xr.measurement)
    distance = recovery_error(psi, u)
    detail = dict(secure_x=sec_x, secure_z=sec_z, guess_z=zr, guess_x=xr, recovery=u)
    uncapped = (8 * eps_x) ** 0.25 + (8 * eps_z) ** 0.25
    return _certificate(2, eps_z, eps_x, uncapped, distance, tol, detail)


def hybrid_certificate(
    psi: PureState,
    tol: float = CERT_TOL,
    b_label: str = "B",
    guesses: tuple[GuessReport, GuessReport] | None = None,
) -> TheoremCertificate:
    """Experimental mixed condition: Z guessable from B and Z secret from the
    environment. ``p_secure(Z|R) >= 1 - eps_x^2 / 2`` is inverted to
    ``eps_x = sqrt(2 (1 - p_secure))`` and fed to the first bound."""
    env = env_labels(psi, b_label=b_label)
    sec_z = p_secure(psi, "Z", env)
    zr, xr = guesses or optimized_measurements(psi, b_label=b_label)
    eps_z = _clip01(1 - zr.achieved)
    eps_x = _clip01(np.sqrt(2 * max(0.0, 1 - sec_z.value)))
    u = compose_recovery(zr.measurement, xr.measurement)
    distance = recovery_error(psi, u)
    detail = dict(secure_z=sec_z, guess_z=zr, guess_x=xr)
    uncapped = np.sqrt(2 * eps_x) + np.sqrt(2 * eps_z)
    return _certificate(3, eps_z, eps_x, uncapped, distance, tol, detail, experimental=True)


@dataclass
class DualityReport:
    p_guess_z_b: float
    gap_z: float
    p_secure_x_cr: float
    rhs_z: float
    p_guess_x_bc: float
    gap_x: float
    p_secure_z_r: float
    rhs_x: float
    tol: float = CERT_TOL

    @property
    def margin_z(self) -> float:
        # solver gap counts as slack: the optimum may exceed the achieved value by it
        return self.p_guess_z_b + self.gap_z - self.rhs_z

    @property
    def margin_x(self) -> float:
        return self.p_guess_x_bc + self.gap_x - self.rhs_x

    @property
    def margin(self) -> float:
        return min(self.margin_z, self.margin_x)

    @property
    def passes(self) -> bool:
        return bool(self.margin >= -self.tol)

    def to_dict(self) -> dict:
        keys = ["p_guess_z_b", "gap_z", "p_secure_x_cr", "rhs_z", "margin_z"]
        keys += ["p_guess_x_bc", "gap_x", "p_secure_z_r", "rhs_x", "margin_x"]
        out = {k: float(getattr(self, k)) for k in keys}
        out["passes"] = self.passes
        return out


def duality_check(
    psi: PureState,
    tol: float = CERT_TOL,
    b_label: str = "B",
    guesses: tuple[GuessReport, GuessReport] | None = None,
) -> DualityReport:
    """Secrecy of one observable against guessability of the other:
    ``p_guess(Z|B) >= 1 - sqrt(2 (1 - p_secure(X|CR)))`` on the Z-extension and
    ``p_guess(X|BC) >= 1 - sqrt(2 (1 - p_secure(Z|R)))``."""
    env = env_labels(psi, b_label=b_label)
    zr, xr = guesses or optimized_measurements(psi, b_label=b_label)
    sx = p_secure(z_extension(psi), "X", ["C"] + env).value
    sz = p_secure(psi, "Z", env).value
    return DualityReport(
        p_guess_z_b=zr.achieved,
        gap_z=max(zr.gap, 0.0),
        p_secure_x_cr=sx,
        rhs_z=1 - np.sqrt(2 * max(0.0, 1 - sx)),
        p_guess_x_bc=xr.achieved,
        gap_x=max(xr.gap, 0.0),
        p_secure_z_r=sz,
        rhs_x=1 - np.sqrt(2 * max(0.0, 1 - sz)),
        tol=tol,
    )


def decoupling_distance(psi: PureState, a_label: str = "A", b_label: str = "B") -> float:
    """Trace distance of the A-environment marginal from ``(I/d) (x) psi^env``."""
    env = env_labels(psi, a_label, b_label)
    if psi.labels[0] != a_label:
        psi = psi.reorder((a_label,) + tuple(l for l in psi.labels if l != a_label))
    d = psi.dim_of(a_label)
    joint = psi.marginal([a_label] + env)
    if env:
        ideal = np.kron(np.eye(d) / d, psi.marginal(env).matrix)
    else:
        ideal = np.eye(d) / d
    return trace_distance(joint.matrix, ideal)


def hashing_rate(rho_ab: LabeledOperator, b_label: str = "B") -> float:
    """One-way hashing rate ``H(B) - H(AB)`` in ebits (log base 2)."""
    return von_neumann_entropy(partial_trace(rho_ab, [b_label])) - von_neumann_entropy(rho_ab)


def _su2(params: np.ndarray) -> np.ndarray:
    a, b, c = params
    rz = lambda t: np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])  # noqa: E731
    ry = np.array([[np.cos(b / 2), -np.sin(b / 2)], [np.sin(b / 2), np.cos(b / 2)]])
    return rz(a) @ ry @ rz(c)


def max_entangled_overlap(rho_ab: LabeledOperator, grid: int = 12, seed: int = 0) -> float:
    """Largest ``<Phi|rho|Phi>`` over maximally entangled two-qubit states.

    Every such state is ``(I (x) U)|Phi_2>`` with ``U`` in SU(2) up to phase, so
    the search is over three Euler angles: a coarse grid, then local polishing
    from the best grid points.
    """
    if rho_ab.dim != 4:
        raise ValueError("maximally entangled overlap is implemented for two qubits")
    phi = phi_d(2).amplitudes
    rho = rho_ab.matrix

    def value(p):
        v = np.kron(np.eye(2), _su2(p)) @ phi
        return float(np.real(np.vdot(v, rho @ v)))

    axes = np.linspace(0, 2 * np.pi, grid, endpoint=False)
    pts = [np.array([a, b, c]) for a in axes for b in axes for c in axes]
    vals = np.array([value(p) for p in pts])
    best = float(vals.max())
    rng = np.random.default_rng(seed)
    starts = [pts[i] for i in np.argsort(vals)[-5:]] + [rng.uniform(0, 2 * np.pi, 3) for _ in range(5)]
    for start in starts:
        res = minimize(lambda p: -value(p), start, method="BFGS", options={"gtol": 1e-12})
        best = max(best, -float(res.fun))
    return best


@dataclass
class StateAnalysis:
    """Everything the runner reports for one state, sharing one pair of
    optimized measurements across all checks."""

    thm1: TheoremCertificate
    thm2: TheoremCertificate
    duality: DualityReport
    p_secure_z: float
    p_secure_x: float
    decoupling: float
    hashing: float
    overlap_z: float
    overlap_x: float


def analyze(psi: PureState, tol: float = CERT_TOL, b_label: str = "B") -> StateAnalysis:
    zr, xr = optimized_measurements(psi, b_label=b_label)
    thm1 = theorem1_certificate(psi, zr.measurement, xr.measurement, tol=tol, b_label=b_label)
    thm1.detail.update(guess_z=zr, guess_x=xr)
    thm2 = theorem2_certificate(psi, tol=tol, b_label=b_label, guesses=(zr, xr))
    dual = duality_check(psi, tol=tol, b_label=b_label, guesses=(zr, xr))
    env = env_labels(psi, b_label=b_label)
    ab = psi.marginal(["A", b_label])
    ov_z, ov_x = step_overlaps(psi, zr.measurement, xr.measurement)
    return StateAnalysis(
        thm1=thm1,
        thm2=thm2,
        duality=dual,
        p_secure_z=dual.p_secure_z_r,
        p_secure_x=p_secure(psi, "X", env).value,
        decoupling=decoupling_distance(psi, b_label=b_label),
        hashing=hashing_rate(ab, b_label),
        overlap_z=ov_z,
        overlap_x=ov_x,
    )


def step_overlaps(psi: PureState, lambda_z: Povm, gamma_x: Povm) -> tuple[float, float]:
    """``|<psi_Z|U1 psi>|`` and ``|<xi|U2 psi_Z>|``, each bounded below by the
    corresponding achieved guessing probability."""
    ext = z_extension(psi)
    first = apply_isometry(psi, build_u1(lambda_z))
    second = apply_isometry(ext, build_u2(gamma_x))
    return abs(overlap(ext, first)), abs(overlap(ideal_xi(psi), second))
