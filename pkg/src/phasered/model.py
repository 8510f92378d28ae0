"""Coupled oscillators with a phase-dependent limit-cycle radius.

Each unit is a planar oscillator whose attracting cycle sits at
r = 1 + delta*g(phi) with uniform rotation phi_dot = omega.  In the
rescaled radius R = r / (1 + delta*g(phi)) the cycle is the unit circle
and the radial dynamics read

    R_dot = m R^2 (R - 1) (1 + delta*g(phi))^2 .

Units are coupled diffusively through their complex positions
A_k = R_k (1 + delta*g(phi_k)) e^{i phi_k}:

    A_k_dot = F(A_k) + K e^{i alpha} (1/N) sum_l a_kl (A_l - A_k).

State vectors are ordered (R_1..R_N, phi_1..phi_N).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .trigpoly import TrigPoly


class DomainError(ValueError):
    """State or parameters outside the model's domain of validity."""


@dataclass(frozen=True)
class Params:
    omega: float
    m: float
    alpha: float
    K: float
    delta: float

    def __post_init__(self):
        if not self.omega > 0:
            raise DomainError("omega must be positive")
        if not self.m < 0:
            raise DomainError("m must be negative (attracting cycle)")
        if not abs(self.delta) < 1:
            raise DomainError("|delta| must be below 1")

    def replace(self, **kw) -> "Params":
        d = {"omega": self.omega, "m": self.m, "alpha": self.alpha,
             "K": self.K, "delta": self.delta}
        d.update(kw)
        return Params(**d)


@dataclass(frozen=True)
class ShapeFn:
    """Cycle-shape deviation g(phi) = sum_n a_n cos(n phi) + b_n sin(n phi)."""

    harmonics: tuple[tuple[int, float, float], ...]

    def __post_init__(self):
        ns = [n for n, _, _ in self.harmonics]
        if any(n < 1 for n in ns):
            raise DomainError("harmonic indices must be >= 1 (no offset term)")
        if len(set(ns)) != len(ns):
            raise DomainError("duplicate harmonic index")

    @classmethod
    def single_sin(cls, n: int = 1, amp: float = 1.0) -> "ShapeFn":
        return cls(((n, 0.0, amp),))

    @classmethod
    def single_cos(cls, n: int = 1, amp: float = 1.0) -> "ShapeFn":
        return cls(((n, amp, 0.0),))

    @classmethod
    def zero(cls) -> "ShapeFn":
        return cls(())

    def g(self, phi):
        phi = np.asarray(phi, dtype=float)
        out = np.zeros_like(phi)
        for n, a, b in self.harmonics:
            out += a * np.cos(n * phi) + b * np.sin(n * phi)
        return out

    def dg(self, phi):
        phi = np.asarray(phi, dtype=float)
        out = np.zeros_like(phi)
        for n, a, b in self.harmonics:
            out += -a * n * np.sin(n * phi) + b * n * np.cos(n * phi)
        return out

    def d2g(self, phi):
        phi = np.asarray(phi, dtype=float)
        out = np.zeros_like(phi)
        for n, a, b in self.harmonics:
            out += -n * n * (a * np.cos(n * phi) + b * np.sin(n * phi))
        return out

    def poly(self, n_osc: int, k: int) -> TrigPoly:
        """g(phi_k) as a trig polynomial on the N-torus."""
        p = TrigPoly.zero(n_osc)
        for n, a, b in self.harmonics:
            if a:
                p = p + TrigPoly.cosine(n_osc, {k: n}, amp=a)
            if b:
                p = p + TrigPoly.sine(n_osc, {k: n}, amp=b)
        return p

    def dpoly(self, n_osc: int, k: int) -> TrigPoly:
        p = TrigPoly.zero(n_osc)
        for n, a, b in self.harmonics:
            if a:
                p = p + TrigPoly.sine(n_osc, {k: n}, amp=-a * n)
            if b:
                p = p + TrigPoly.cosine(n_osc, {k: n}, amp=b * n)
        return p

    @property
    def is_unit_sin(self) -> bool:
        return self.harmonics == ((1, 0.0, 1.0),)

    def max_abs(self, samples: int = 4096) -> float:
        if not self.harmonics:
            return 0.0
        return float(np.max(np.abs(self.g(np.linspace(0, 2 * np.pi, samples)))))

    def key(self):
        return self.harmonics


@dataclass(frozen=True)
class Network:
    """Weighted digraph on the oscillators; a[k, l] couples l into k."""

    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DomainError("adjacency must be a square matrix")
        object.__setattr__(self, "a", a)
        a.setflags(write=False)

    @classmethod
    def all_to_all(cls, n: int) -> "Network":
        # diagonal entries are kept: self-coupling drops out of the pairwise
        # terms but matters for the triplet tensors downstream
        return cls(np.ones((n, n)))

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        """Weighted in-degrees d_k = sum_l a_kl (row sums)."""
        return self.a.sum(axis=1)

    @property
    def is_all_to_all(self) -> bool:
        return bool(np.all(self.a == 1.0))

    def digest(self) -> str:
        return hashlib.sha1(self.a.tobytes()).hexdigest()

    def __eq__(self, other):
        return isinstance(other, Network) and np.array_equal(self.a, other.a)

    def __hash__(self):
        return hash(self.digest())


@dataclass
class FullState:
    R: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        if self.R.shape != self.phi.shape or self.R.ndim != 1:
            raise DomainError("R and phi must be matching 1-d arrays")
        if np.any(self.R <= 0):
            raise DomainError("radii must stay positive")

    def flat(self) -> np.ndarray:
        return np.concatenate([self.R, self.phi])

    @classmethod
    def from_flat(cls, x: np.ndarray) -> "FullState":
        x = np.asarray(x, dtype=float)
        n = x.size // 2
        return cls(x[:n].copy(), x[n:].copy())


def _shape_factors(phi, p: Params, g: ShapeFn):
    u = 1.0 + p.delta * g.g(phi)
    if np.any(u <= 0):
        raise DomainError("1 + delta*g(phi) must stay positive")
    return u, p.delta * g.dg(phi)


def single_rhs(r: float, phi: float, p: Params, g: ShapeFn) -> tuple[float, float]:
    """One uncoupled unit in the original polar coordinates (r, phi)."""
    u, gp = _shape_factors(phi, p, g)
    rdot = gp * p.omega * r / u + p.m * r**2 * (r - 1.0 - p.delta * g.g(phi))
    return float(rdot), p.omega


def to_transformed(r, phi, p: Params, g: ShapeFn):
    u, _ = _shape_factors(phi, p, g)
    return np.asarray(r, dtype=float) / u


def from_transformed(R, phi, p: Params, g: ShapeFn):
    u, _ = _shape_factors(phi, p, g)
    return np.asarray(R, dtype=float) * u


def _coupling_sum(R, phi, u, p: Params, net: Network):
    # W_k = (1/N) sum_l a_kl (B_l z_kl - B_k e^{i alpha}),  B = R*u
    B = R * u
    z = np.exp(1j * (phi[None, :] - phi[:, None] + p.alpha))
    ea = np.exp(1j * p.alpha)
    W = (net.a * (B[None, :] * z)).sum(axis=1) / net.n \
        - net.degrees * B * ea / net.n
    return W, B, z, ea


def full_rhs(x: np.ndarray, p: Params, g: ShapeFn, net: Network) -> np.ndarray:
    """Transformed-coordinate vector field on (R_1..R_N, phi_1..phi_N)."""
    N = net.n
    R, phi = x[:N], x[N:]
    u, gp = _shape_factors(phi, p, g)
    W, B, _, _ = _coupling_sum(R, phi, u, p, net)
    dR = p.m * R**2 * (R - 1.0) * u**2 + p.K * (W.real / u - gp * W.imag / u**2)
    dphi = p.omega + p.K * W.imag / B
    return np.concatenate([dR, dphi])


def full_jacobian(x: np.ndarray, p: Params, g: ShapeFn, net: Network) -> np.ndarray:
    """Analytic Jacobian of `full_rhs`, same state ordering."""
    N = net.n
    R, phi = x[:N], x[N:]
    u, gp = _shape_factors(phi, p, g)
    gpp = p.delta * g.d2g(phi)
    W, B, z, ea = _coupling_sum(R, phi, u, p, net)
    d = net.degrees

    # dW_k/dR_j and dW_k/dphi_j as N x N complex matrices
    MR = net.a * (u[None, :] * z) / N
    MR[np.diag_indices(N)] -= d * u * ea / N
    Mp = net.a * (R[None, :] * (gp[None, :] + 1j * u[None, :]) * z) / N
    Mp[np.diag_indices(N)] += (-1j * (net.a * (B[None, :] * z)).sum(axis=1)
                               - d * R * gp * ea) / N

    J = np.zeros((2 * N, 2 * N))
    iR, iP = slice(0, N), slice(N, 2 * N)

    # radial rows
    J[iR, iR] = p.K * (MR.real / u[:, None] - (gp / u**2)[:, None] * MR.imag)
    J[iR, iR] += np.diag(p.m * (3 * R**2 - 2 * R) * u**2)
    J[iR, iP] = p.K * (Mp.real / u[:, None] - (gp / u**2)[:, None] * Mp.imag)
    J[iR, iP] += np.diag(2 * p.m * R**2 * (R - 1.0) * u * gp
                         - p.K * W.real * gp / u**2
                         - p.K * W.imag * (gpp / u**2 - 2 * gp**2 / u**3))

    # phase rows
    J[iP, iR] = p.K * MR.imag / B[:, None]
    J[iP, iR] -= np.diag(p.K * W.imag * u / B**2)
    J[iP, iP] = p.K * Mp.imag / B[:, None]
    J[iP, iP] -= np.diag(p.K * W.imag * R * gp / B**2)
    return J


def cartesian_rhs(xy: np.ndarray, p: Params, g: ShapeFn, net: Network) -> np.ndarray:
    """Vector field in Cartesian coordinates (x_1..x_N, y_1..y_N).

    Computed directly from the complex-plane form, independently of
    `full_rhs`, so the two can be cross-checked through the coordinate
    change.
    """
    N = net.n
    A = xy[:N] + 1j * xy[N:]
    r = np.abs(A)
    if np.any(r == 0):
        raise DomainError("phase undefined at the origin")
    phi = np.angle(A)
    u, gp = _shape_factors(phi, p, g)
    rdot = gp * p.omega * r / u + p.m * r**2 * (r - 1.0 - p.delta * g.g(phi))
    F = (rdot / r + 1j * p.omega) * A
    coup = p.K * np.exp(1j * p.alpha) * (net.a @ A - net.degrees * A) / N
    dA = F + coup
    return np.concatenate([dA.real, dA.imag])


# ---- JSON config ----

def parse_config(cfg: dict) -> tuple[Params, ShapeFn, Network]:
    """Read {omega, m, alpha, K, delta, N, g, adjacency} into model objects."""
    try:
        p = Params(omega=float(cfg["omega"]), m=float(cfg["m"]),
                   alpha=float(cfg["alpha"]), K=float(cfg["K"]),
                   delta=float(cfg["delta"]))
        g = ShapeFn(tuple((int(h["n"]), float(h.get("a", 0.0)),
                           float(h.get("b", 0.0))) for h in cfg.get("g", [])))
        n = int(cfg["N"])
        adj = cfg.get("adjacency", "all_to_all")
        if isinstance(adj, str):
            if adj != "all_to_all":
                raise DomainError(f"unknown adjacency keyword {adj!r}")
            net = Network.all_to_all(n)
        else:
            net = Network(np.asarray(adj, dtype=float))
            if net.n != n:
                raise DomainError("adjacency size disagrees with N")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DomainError):
            raise
        raise DomainError(f"bad model config: {exc}") from exc
    if abs(p.delta) * g.max_abs() >= 1.0:
        raise DomainError("delta*g reaches -1: cycle radius would vanish")
    return p, g, net


def config_dict(p: Params, g: ShapeFn, net: Network) -> dict:
    adj = "all_to_all" if net.is_all_to_all else net.a.tolist()
    return {"omega": p.omega, "m": p.m, "alpha": p.alpha, "K": p.K,
            "delta": p.delta, "N": net.n,
            "g": [{"n": n, "a": a, "b": b} for n, a, b in g.harmonics],
            "adjacency": adj}
