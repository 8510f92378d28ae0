"""Periodic orbits and their Poincare return-map multipliers.

The synchronized orbit (all oscillators at one point) and the splay orbit
(phases equidistant on the circle) are the two organizing solutions of the
coupled system.  This module provides

* thin system wrappers exposing ``rhs`` / ``jac`` / ``angle_mask`` so the
  full polar model and any assembled phase reduction share one code path,
* trajectory integration and monodromy matrices computed from the matrix
  variational equation along an orbit,
* closed-form multipliers and spectra where they exist (sync orbits of the
  low-order reductions, the full system at zero shape deviation, splay
  eigenvalues of the zeroth-order reductions),
* Newton shooting on a phase section to continue orbits to nonzero shape
  deviation, where no closed forms survive.

Multipliers of the Poincare return map are the eigenvalues of the
fundamental matrix over one period with the trivial flow-direction
eigenvalue removed; exponents are their logarithms divided by the period.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .model import DomainError, Network, Params, ShapeFn, full_jacobian, full_rhs
from .reduction import ReducedSystem, ReductionOrder

TWO_PI = 2.0 * np.pi

# defaults chosen so that Newton residuals at 1e-9 are not limited by the flow
DEFAULT_TOL = 1e-10
SHOOTING_TOL = 1e-9
SHOOTING_INTEGRATOR_TOL = 1e-12
MAX_NEWTON_ITER = 25


class StabilityError(RuntimeError):
    """Base class for orbit and monodromy failures."""


class IntegrationError(StabilityError):
    """The adaptive integrator gave up (step-size underflow or similar)."""


class OrbitNotClosedError(StabilityError):
    """Flowing the claimed orbit for one period did not return to the start."""


class ContinuationError(StabilityError):
    """Newton shooting failed to converge to a periodic orbit."""


class SectionError(StabilityError):
    """The flow is tangent to (or crosses backwards through) the section."""


class DegenerateOrbitError(StabilityError):
    """No orbit of the requested kind exists at these parameters."""


# ---------------------------------------------------------------------------
# system wrappers
# ---------------------------------------------------------------------------


class FullSystem:
    """Polar-coordinate oscillator network as a flat autonomous system.

    State layout is ``(R_1..R_N, phi_1..phi_N)``; the second half is angular,
    which matters when closing orbits modulo full turns.
    """

    def __init__(self, params: Params, shape: ShapeFn, network: Network):
        self.params = params
        self.shape = shape
        self.network = network
        n = network.n
        self.dim = 2 * n
        self.n_osc = n
        self.angle_mask = np.concatenate([np.zeros(n, bool), np.ones(n, bool)])
        self.omega = params.omega

    def rhs(self, x: np.ndarray) -> np.ndarray:
        return full_rhs(x, self.params, self.shape, self.network)

    def jac(self, x: np.ndarray) -> np.ndarray:
        return full_jacobian(x, self.params, self.shape, self.network)


def system_label(system) -> str:
    """Short name used in result tables: "full" or the reduction order."""
    if isinstance(system, ReducedSystem):
        return str(system.order)
    return "full"


def _n_oscillators(system) -> int:
    return int(np.count_nonzero(system.angle_mask))


# ---------------------------------------------------------------------------
# orbits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PeriodicOrbit:
    """A point on a periodic orbit together with its period.

    ``state`` follows the owning system's layout (radii then phases for the
    full model, phases only for reductions).  ``system`` is a label, not a
    live object, so orbits can be stored and compared across runs.
    """

    state: np.ndarray
    period: float
    kind: str = "generic"  # sync | splay | continued | generic
    system: str = "full"

    def __post_init__(self):
        state = np.array(self.state, dtype=float)
        state.setflags(write=False)
        object.__setattr__(self, "state", state)
        if not np.isfinite(self.period) or self.period <= 0:
            raise ValueError("period must be positive and finite")


def sync_orbit(system, phase: float = 0.0) -> PeriodicOrbit:
    """Synchronized orbit: equal phases, unit radii, period 2*pi/omega.

    Exact for every shape deviation: on the sync set the coupling sums
    cancel pointwise, so the radii stay at 1 and the phases advance at the
    uncoupled frequency.
    """
    state = np.where(system.angle_mask, float(phase), 1.0)
    return PeriodicOrbit(state, TWO_PI / system.omega, kind="sync",
                         system=system_label(system))


def splay_phases(n: int, lead: float = 0.0) -> np.ndarray:
    return lead + TWO_PI * np.arange(n) / n


def splay_orbit_delta0(p: Params, n: int, reduced: bool = False,
                       system: str | None = None,
                       lead: float = 0.0) -> PeriodicOrbit:
    """Closed-form splay orbit of the all-to-all system at zero deviation.

    All radii sit at ``R* = (1 + sqrt(1 + 4 K cos(alpha)/m))/2`` and the
    phases rotate rigidly at ``omega - K sin(alpha)``.  With ``reduced=True``
    only the phase part is returned, which is the matching orbit of any
    assembled reduction (their deviation-order terms carry no weight at
    delta = 0).
    """
    if p.delta != 0.0:
        raise ValueError("closed-form splay orbit requires delta = 0")
    if n < 3:
        raise ValueError("splay orbit needs at least three oscillators")
    disc = 1.0 + 4.0 * p.K * np.cos(p.alpha) / p.m
    if disc < 0.0:
        raise DegenerateOrbitError(
            "no real splay amplitude: 1 + 4K cos(alpha)/m < 0")
    what = p.omega - p.K * np.sin(p.alpha)
    if abs(what) < 1e-12:
        raise DegenerateOrbitError(
            "splay frequency omega - K sin(alpha) vanishes; period undefined")
    rstar = 0.5 * (1.0 + np.sqrt(disc))
    phases = splay_phases(n, lead)
    period = TWO_PI / abs(what)
    if reduced:
        state = phases
        label = system if system is not None else "reduced"
    else:
        state = np.concatenate([np.full(n, rstar), phases])
        label = system if system is not None else "full"
    return PeriodicOrbit(state, period, kind="splay", system=label)


def order_parameter(phi) -> "OrderParams":
    phi = np.asarray(phi, dtype=float)
    z = np.exp(1j * phi)
    return OrderParams(z1=complex(z.mean()), z2=complex((z * z).mean()))


@dataclass(frozen=True)
class OrderParams:
    """First and second circular moments of a phase configuration."""

    z1: complex
    z2: complex

    def __post_init__(self):
        if abs(self.z1) > 1.0 + 1e-12 or abs(self.z2) > 1.0 + 1e-12:
            raise ValueError("circular moments cannot exceed unit modulus")

    @property
    def R(self) -> float:
        return abs(self.z1)

    @property
    def Psi(self) -> float:
        return float(np.angle(self.z1))

    @property
    def Q(self) -> float:
        return abs(self.z2)

    @property
    def Theta(self) -> float:
        return float(np.angle(self.z2))


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------


def integrate(system, x0, t_final: float, tol: float = DEFAULT_TOL,
              t_eval=None):
    """Flow the system for ``t_final`` time units (negative runs backwards).

    Explicit high-order Runge-Kutta with mixed tolerance ``tol``; returns the
    solver result object (``.t``, ``.y``).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x0 = np.asarray(x0, dtype=float)
    sol = solve_ivp(lambda t, x: system.rhs(x), (0.0, t_final), x0,
                    method="DOP853", rtol=tol, atol=tol, t_eval=t_eval,
                    dense_output=False)
    if not sol.success:
        raise IntegrationError(sol.message)
    return sol


def flow(system, x0, t_final: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    return integrate(system, x0, t_final, tol).y[:, -1]


def _flow_with_variational(system, x0, t_final: float, tol: float):
    """Integrate state and fundamental matrix together.

    One augmented system keeps the matrix columns synchronized with the
    trajectory under the same step-size control.  Returns (x(T), Phi(T)).
    """
    dim = system.dim
    eye = np.eye(dim)

    def rhs(_t, y):
        x = y[:dim]
        phi_mat = y[dim:].reshape(dim, dim)
        a = system.jac(x)
        return np.concatenate([system.rhs(x), (a @ phi_mat).ravel()])

    y0 = np.concatenate([np.asarray(x0, dtype=float), eye.ravel()])
    sol = solve_ivp(rhs, (0.0, t_final), y0, method="DOP853",
                    rtol=tol, atol=tol)
    if not sol.success:
        raise IntegrationError(sol.message)
    y_final = sol.y[:, -1]
    return y_final[:dim], y_final[dim:].reshape(dim, dim)


def _closure_defect(system, x0, x_final) -> np.ndarray:
    """Return-map residual with angular coordinates closed modulo full turns."""
    d = np.asarray(x_final, dtype=float) - np.asarray(x0, dtype=float)
    mask = system.angle_mask
    d[mask] -= TWO_PI * np.round(d[mask] / TWO_PI)
    return d


# ---------------------------------------------------------------------------
# monodromy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MonodromyResult:
    """Eigen-data of the fundamental matrix over one period."""

    multipliers: np.ndarray  # complex eigenvalues of Phi(T)
    trivial_index: int       # flow-direction multiplier (should be ~1)
    exponents: np.ndarray    # log(multiplier)/T, principal branch
    period: float
    closure_defect: float

    @property
    def trivial(self) -> complex:
        return complex(self.multipliers[self.trivial_index])

    @property
    def nontrivial(self) -> np.ndarray:
        keep = np.ones(len(self.multipliers), dtype=bool)
        keep[self.trivial_index] = False
        return self.multipliers[keep]

    @property
    def critical(self) -> complex:
        others = self.nontrivial
        return complex(others[np.argmax(np.abs(others))])

    @property
    def critical_abs(self) -> float:
        return abs(self.critical)

    @property
    def critical_exponent(self) -> complex:
        return complex(np.log(self.critical) / self.period)


def monodromy(system, orbit: PeriodicOrbit, tol: float = DEFAULT_TOL,
              closure_tol: float = 1e-6) -> MonodromyResult:
    """Multipliers of the return map around a converged periodic orbit.

    The trivial multiplier is identified by eigenvector alignment with the
    flow direction at the base point, not by proximity to 1; near a torus
    bifurcation a nontrivial pair sits on the unit circle and proximity
    would misattribute it.
    """
    try:
        x_final, phi_mat = _flow_with_variational(system, orbit.state,
                                                  orbit.period, tol)
    except DomainError as exc:
        raise IntegrationError(f"flow left the model domain: {exc}") from exc
    defect = _closure_defect(system, orbit.state, x_final)
    defect_norm = float(np.max(np.abs(defect)))
    if defect_norm > closure_tol:
        raise OrbitNotClosedError(
            f"orbit defect {defect_norm:.3e} exceeds {closure_tol:.1e}; "
            "refine the orbit before asking for multipliers")

    evals, evecs = np.linalg.eig(phi_mat)
    cond = np.linalg.cond(evecs)
    if cond > 1e8:
        warnings.warn(
            f"monodromy eigenbasis nearly defective (cond {cond:.1e}); "
            "multipliers may lose accuracy", RuntimeWarning, stacklevel=2)

    f0 = system.rhs(np.asarray(orbit.state, dtype=float))
    f0 = f0 / np.linalg.norm(f0)
    # columns of evecs are unit-norm; |v^H f| in [0, 1]
    alignment = np.abs(evecs.conj().T @ f0) / np.linalg.norm(evecs, axis=0)
    trivial_index = int(np.argmax(alignment))

    exponents = np.log(evals.astype(complex)) / orbit.period
    return MonodromyResult(multipliers=evals.astype(complex),
                           trivial_index=trivial_index,
                           exponents=exponents,
                           period=orbit.period,
                           closure_defect=defect_norm)


# ---------------------------------------------------------------------------
# closed forms: synchronized orbit
# ---------------------------------------------------------------------------


def prmm_sync_closed(order: ReductionOrder, p: Params,
                     shape: ShapeFn | None = None) -> float:
    """Critical return-map multiplier of the sync orbit, in closed form.

    Known for the first-order exact-shape reduction (where it is independent
    of the shape deviation), for both second-order reductions truncated at
    shape order <= 1 (they agree), and for the (2,2) reduction with a unit
    sine shape.
    """
    a, b = order.a, order.b
    k, al, w, m, d = p.K, p.alpha, p.omega, p.m, p.delta
    if a == 1 and order.exact_delta:
        return float(np.exp(-TWO_PI * k * np.cos(al) / w))
    if a == 2 and b in (0, 1):
        return float(np.exp(-TWO_PI * k
                            * (m * np.cos(al) - k * np.sin(al) ** 2)
                            / (m * w)))
    if a == 2 and b == 2:
        if shape is not None and not shape.is_unit_sin:
            raise ValueError(
                "closed form at shape order 2 is only known for g = sin")
        num = (m ** 3 * np.cos(al) + m * w ** 2 * np.cos(al)
               - k * m ** 2 * np.sin(al) ** 2
               - 2.0 * k * m ** 2 * d ** 2 * np.sin(al) ** 2
               - k * w ** 2 * np.sin(al) ** 2)
        return float(np.exp(-TWO_PI * k * num / (m * w * (m ** 2 + w ** 2))))
    raise ValueError(f"no closed-form sync multiplier for order {order}")


def full_sync_spectrum_delta0(p: Params, n: int) -> np.ndarray:
    """Floquet exponents of the full-system sync orbit at zero deviation.

    With no shape deviation the linearization is constant along the orbit,
    so the exponents are plain eigenvalues: one zero (phase continuum), a
    phase branch of multiplicity N-1, the radial rate m, and a radial branch
    of multiplicity N-1.  Ordered [0, phase branch, m, radial branch].
    """
    if p.delta != 0.0:
        raise ValueError(
            "constant-coefficient spectrum needs delta = 0; use monodromy")
    if n < 2:
        raise ValueError("need at least two oscillators")
    k, al, m = p.K, p.alpha, p.m
    root = np.sqrt(complex(-2.0 * k ** 2 + m ** 2
                           + 2.0 * k ** 2 * np.cos(2.0 * al)))
    q_plus = 0.5 * (m - 2.0 * k * np.cos(al) + root)
    q_minus = 0.5 * (m - 2.0 * k * np.cos(al) - root)
    out = np.empty(2 * n, dtype=complex)
    out[0] = 0.0
    out[1:n] = q_plus
    out[n] = m
    out[n + 1:] = q_minus
    return out


# ---------------------------------------------------------------------------
# closed forms: splay orbit
# ---------------------------------------------------------------------------


def splay_eigs_reduced(order: ReductionOrder, p: Params) -> np.ndarray:
    """Nonzero splay eigenvalues of the zeroth-shape-order reductions, N=3.

    Computed in the frame co-rotating with the splay solution, where the
    splay state is an equilibrium; the associated return-map multipliers are
    exp(T q).  Only the two reductions with no shape-deviation terms admit
    this closed form.
    """
    if p.delta != 0.0:
        raise ValueError("closed-form splay eigenvalues require delta = 0")
    if not ((order.a, order.b) in ((1, 0), (2, 0)) or
            (order.a == 1 and order.exact_delta)):
        raise ValueError(
            f"closed-form splay eigenvalues unavailable for order {order}")
    rot = np.exp(1j * p.alpha)
    q = 0.5 * p.K * rot
    if order.a == 2:
        q = q * (1.0 - 0.5 * p.K * rot / p.m)
    return np.array([q, np.conj(q)])


# ---------------------------------------------------------------------------
# Newton shooting
# ---------------------------------------------------------------------------


def continue_orbit(system, guess: PeriodicOrbit, tol: float = SHOOTING_TOL,
                   max_iter: int = MAX_NEWTON_ITER,
                   integrator_tol: float = SHOOTING_INTEGRATOR_TOL,
                   kind: str = "continued") -> PeriodicOrbit:
    """Correct a near-periodic guess by Newton shooting on a phase section.

    The section fixes the first angular coordinate at its seed value with
    positive crossing speed; the unknowns are the remaining coordinates and
    the return time.  The shooting Jacobian comes from the same variational
    integration that the monodromy uses, so a converged orbit costs little
    extra to analyze afterwards.
    """
    x = np.array(guess.state, dtype=float)
    period = float(guess.period)
    dim = system.dim
    section = int(np.argmax(system.angle_mask))
    free = np.array([i for i in range(dim) if i != section])
    eye = np.eye(dim)

    for _ in range(max_iter):
        fx = system.rhs(x)
        if fx[section] <= 0.0:
            raise SectionError(
                "flow does not cross the phase section forwards "
                f"(d/dt coordinate {section} = {fx[section]:.3e})")
        try:
            x_final, phi_mat = _flow_with_variational(system, x, period,
                                                      integrator_tol)
        except (IntegrationError, DomainError) as exc:
            raise ContinuationError(
                f"flow evaluation failed during shooting: {exc}") from exc
        residual = _closure_defect(system, x, x_final)
        if np.max(np.abs(residual)) < tol:
            return PeriodicOrbit(x, period, kind=kind,
                                 system=system_label(system))
        jac = np.empty((dim, dim))
        jac[:, :dim - 1] = phi_mat[:, free] - eye[:, free]
        jac[:, dim - 1] = system.rhs(x_final)
        try:
            step = np.linalg.solve(jac, -residual)
        except np.linalg.LinAlgError as exc:
            raise ContinuationError(f"singular shooting system: {exc}") from exc
        x[free] += step[:dim - 1]
        period += step[dim - 1]
        if not np.all(np.isfinite(x)) or not np.isfinite(period) or period <= 0:
            raise ContinuationError(
                "shooting step left the admissible region "
                f"(period {period:.3e})")
    raise ContinuationError(
        f"no convergence after {max_iter} corrector iterations")


# ---------------------------------------------------------------------------
# per-harmonic sync linearization terms
# ---------------------------------------------------------------------------


def appendix_sync_floquet_correction(n: int, kind: str, p: Params,
                                     gamma) -> float | np.ndarray:
    """Second-order shape contribution to the sync linearization gain.

    For a single harmonic of index ``n`` in the shape function, the
    coefficient multiplying the exchange matrix in the linearization around
    the sync orbit picks up this term at second order in coupling and first
    order in deviation.  Integrated over one period it averages to zero, so
    these harmonics leave the closed-form multiplier untouched.
    """
    if n < 1:
        raise ValueError("harmonic index must be >= 1")
    if kind not in ("sin", "cos"):
        raise ValueError("kind must be 'sin' or 'cos'")
    gamma = np.asarray(gamma, dtype=float)
    k, al, w, m, d = p.K, p.alpha, p.omega, p.m, p.delta
    pref = 2.0 * k ** 2 * d * np.sin(al) ** 2 / (m ** 2 + (n * w) ** 2)
    if kind == "sin":
        val = pref * (n * w * np.cos(n * gamma) + m * np.sin(n * gamma))
    else:
        val = pref * (m * np.cos(n * gamma) - n * w * np.sin(n * gamma))
    return float(val) if val.ndim == 0 else val
