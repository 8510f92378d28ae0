"""Construction of first- and second-order phase reductions.

The coupled system in transformed polar coordinates carries an attracting
invariant torus whose radii admit the expansion

    R_k(phi) = 1 + K R_k^(1,*)(phi) + O(K^2),
    R_k^(1,*) = R_k^(1,0) + delta R_k^(1,1) + delta^2 R_k^(1,2) + ...

Each delta order solves a linear torus PDE

    m (1+delta*g_k)^2 R^(1,*) + G_k(1,phi) = omega grad R^(1,*) . 1,

which is diagonal in the complex-exponential basis, so the corrections are
computed exactly as sparse trig polynomials.  Phase dynamics on the torus
then expand as

    phi_k_dot = omega + sum_{n,j} K^n delta^j P_k^(n,j)(phi),

with P^(1,j) the delta-expansion of H_k(1,phi) and
P^(2,j) = sum_{j1+j2=j} grad_R H^(-,j1) . R^(1,j2).

An (a,b)-reduction keeps n <= a and j <= b.  The special case b=inf (only
with a=1) evaluates H_k(1,phi) exactly, without expanding in delta; it is
rational in (1+delta*g) and therefore not represented as a TrigPoly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Network, Params, ShapeFn
from .trigpoly import DeltaSeries, TrigPoly, resolvent_solve

_cache: dict = {}


@dataclass(frozen=True)
class ReductionOrder:
    """Truncation orders: a in the coupling K, b in the shape deviation."""

    a: int
    b: float  # 0, 1, 2 or math.inf

    def __post_init__(self):
        if self.a not in (0, 1, 2):
            raise ValueError("order in K must be 0, 1 or 2")
        if self.b not in (0, 1, 2, math.inf):
            raise ValueError("order in delta must be 0, 1, 2 or inf")
        if self.b == math.inf and self.a > 1:
            raise ValueError("exact-in-delta evaluation only exists at first order")

    @property
    def exact_delta(self) -> bool:
        return self.b == math.inf

    @classmethod
    def parse(cls, text: str) -> "ReductionOrder":
        s = text.strip().strip("()").replace(" ", "")
        a_str, b_str = s.split(",")
        b = math.inf if b_str in ("inf", "oo") else int(b_str)
        return cls(int(a_str), b)

    def __str__(self) -> str:
        return f"({self.a},{'inf' if self.exact_delta else int(self.b)})"


@dataclass(frozen=True)
class LeonPazoParams:
    """Comparison point with the isochron-flat Stuart-Landau family."""

    eps: float
    c1: float

    def to_params(self, omega: float = 1.0, delta: float = 0.0) -> Params:
        # their coupling eps*(1+i c1) has magnitude K and phase alpha;
        # the cycle attraction rate of their radial equation is -2
        return Params(omega=omega, m=-2.0, alpha=math.atan2(self.c1, 1.0),
                      K=self.eps * math.hypot(1.0, self.c1), delta=delta)


# ---- symbolic building blocks ----

def _pair_freqs(k: int, l: int, nk: int, nl: int) -> dict:
    return {k: nk + nl} if k == l else {k: nk, l: nl}


def _series_blocks(net: Network, g: ShapeFn, alpha: float):
    """Per-site and per-pair delta series shared by H, G and grad_R H."""
    key = ("blocks", net.digest(), g.key(), alpha)
    if key in _cache:
        return _cache[key]
    N = net.n
    one = TrigPoly.constant(N, 1.0)
    zero = TrigPoly.zero(N)
    gs = [g.poly(N, k) for k in range(N)]
    gps = [g.dpoly(N, k) for k in range(N)]
    u = [DeltaSeries([one, gs[k], zero]) for k in range(N)]
    inv_u = [DeltaSeries([one, -1.0 * gs[k], gs[k] * gs[k]]) for k in range(N)]
    inv_u2 = [DeltaSeries([one, -2.0 * gs[k], 3.0 * (gs[k] * gs[k])])
              for k in range(N)]

    sin_a = TrigPoly.constant(N, math.sin(alpha))
    cos_a = TrigPoly.constant(N, math.cos(alpha))

    # w[k][l]: (u_l/u_k) sin(phi_l - phi_k + alpha) as a delta series
    w = [[None] * N for _ in range(N)]
    H = []
    G = []
    for k in range(N):
        Hk = DeltaSeries([zero, zero, zero])
        Gk = DeltaSeries([zero, zero, zero])
        for l in range(N):
            a_kl = net.a[k, l]
            s_lk = TrigPoly.sine(N, _pair_freqs(k, l, -1, 1), shift=alpha)
            c_lk = TrigPoly.cosine(N, _pair_freqs(k, l, -1, 1), shift=alpha)
            ratio = u[l] * inv_u[k]
            w[k][l] = ratio * DeltaSeries.of(s_lk, 2)
            if a_kl == 0.0:
                continue
            Hk = Hk + a_kl * (w[k][l] - DeltaSeries.of(sin_a, 2))
            rad = ratio * DeltaSeries.of(c_lk, 2) - DeltaSeries.of(cos_a, 2)
            tilt = (u[l] * inv_u2[k]) * DeltaSeries.of(s_lk, 2) \
                - inv_u[k] * DeltaSeries.of(sin_a, 2)
            Gk = Gk + a_kl * (rad - (DeltaSeries.of(gps[k], 2) * tilt).shift(1))
        H.append((1.0 / N) * Hk)
        G.append((1.0 / N) * Gk)

    out = {"g": gs, "H": H, "G": G, "w": w}
    _cache[key] = out
    return out


def compute_R1(net: Network, p: Params, g: ShapeFn, j: int) -> tuple[TrigPoly, ...]:
    """Torus correction R^(1,j), one TrigPoly per oscillator.

    Solves the order-j torus PDE by the mode-wise resolvent; orders below j
    fold in through the (1+delta*g)^2 prefactor of the radial linearization.
    """
    if j not in (0, 1, 2):
        raise ValueError("delta order must be 0, 1 or 2")
    if p.m == 0.0:
        raise ValueError("torus PDE is singular at m = 0")
    key = ("R1", net.digest(), g.key(), p.alpha, p.m, p.omega, j)
    if key in _cache:
        return _cache[key]
    blocks = _series_blocks(net, g, p.alpha)
    gs, G = blocks["g"], blocks["G"]
    out = []
    for k in range(net.n):
        rhs = G[k].term(j)
        if j >= 1:
            rhs = rhs + 2.0 * p.m * (gs[k] * compute_R1(net, p, g, j - 1)[k])
        if j >= 2:
            rhs = rhs + p.m * (gs[k] * gs[k] * compute_R1(net, p, g, j - 2)[k])
        out.append(resolvent_solve(rhs, p.m, p.omega))
    result = tuple(out)
    _cache[key] = result
    return result


def compute_gradH(net: Network, p: Params, g: ShapeFn,
                  j: int) -> tuple[tuple[TrigPoly, ...], ...]:
    """Order-j delta coefficient of grad_R H_k at R=1; rows of N TrigPoly."""
    if j not in (0, 1, 2):
        raise ValueError("delta order must be 0, 1 or 2")
    blocks = _series_blocks(net, g, p.alpha)
    w = blocks["w"]
    N = net.n
    rows = []
    for k in range(N):
        row = [TrigPoly.zero(N) for _ in range(N)]
        for l in range(N):
            if net.a[k, l] == 0.0:
                continue
            wj = net.a[k, l] * w[k][l].term(j)
            row[l] = row[l] + (1.0 / N) * wj
            row[k] = row[k] - (1.0 / N) * wj
        rows.append(tuple(row))
    return tuple(rows)


def compute_P(net: Network, p: Params, g: ShapeFn, n: int,
              j: int) -> tuple[TrigPoly, ...]:
    """Phase-interaction term P^(n,j), one TrigPoly per oscillator."""
    if n not in (1, 2):
        raise ValueError("coupling order must be 1 or 2")
    if j not in (0, 1, 2):
        raise ValueError("delta order must be 0, 1 or 2")
    key = ("P", net.digest(), g.key(), p.alpha, p.m, p.omega, n, j)
    if key in _cache:
        return _cache[key]
    N = net.n
    if n == 1:
        blocks = _series_blocks(net, g, p.alpha)
        result = tuple(blocks["H"][k].term(j) for k in range(N))
    else:
        out = [TrigPoly.zero(N) for _ in range(N)]
        for j1 in range(j + 1):
            grad = compute_gradH(net, p, g, j1)
            r1 = compute_R1(net, p, g, j - j1)
            for k in range(N):
                acc = out[k]
                for l in range(N):
                    if not grad[k][l].is_zero:
                        acc = acc + grad[k][l] * r1[l]
                out[k] = acc
        result = tuple(out)
    _cache[key] = result
    return result


@dataclass(frozen=True)
class TorusExpansion:
    """Stored torus corrections, keyed (order in K, order in delta)."""

    n_osc: int
    terms: dict

    @classmethod
    def build(cls, net: Network, p: Params, g: ShapeFn,
              jmax: int = 2) -> "TorusExpansion":
        terms = {(1, j): compute_R1(net, p, g, j) for j in range(jmax + 1)}
        return cls(net.n, terms)

    def radius(self, phi, K: float, delta: float) -> np.ndarray:
        """Predicted torus radii 1 + sum K^n delta^j R^(n,j)(phi)."""
        phi = np.asarray(phi, dtype=float)
        out = np.ones(phi.shape[:-1] + (self.n_osc,))
        for (n, j), polys in self.terms.items():
            coef = K**n * delta**j
            for k, poly in enumerate(polys):
                out[..., k] += coef * poly.eval(phi)
        return out


# ---- assembled reduced systems ----

class ReducedSystem:
    """Phase-only vector field of an (a,b)-reduction; immutable once built.

    For finite b the right-hand side is omega plus a per-oscillator
    TrigPoly; for b=inf it is evaluated in closed form.
    """

    def __init__(self, order: ReductionOrder, params: Params, g: ShapeFn,
                 network: Network, p_terms: dict):
        self.order = order
        self.params = params
        self.g = g
        self.network = network
        self.omega = params.omega
        self.p_terms = p_terms
        self.dim = network.n
        self.angle_mask = np.ones(network.n, dtype=bool)
        if not order.exact_delta:
            combined = [TrigPoly.zero(network.n) for _ in range(network.n)]
            for (n, j), polys in p_terms.items():
                coef = params.K**n * params.delta**j
                for k in range(network.n):
                    combined[k] = combined[k] + coef * polys[k]
            self._combined = tuple(combined)
            self._partials = None

    def rhs(self, phi: np.ndarray) -> np.ndarray:
        p = self.params
        if self.order.exact_delta:
            u = 1.0 + p.delta * self.g.g(phi)
            S = np.sin(phi[None, :] - phi[:, None] + p.alpha)
            H = ((self.network.a * (u[None, :] / u[:, None]) * S).sum(axis=1)
                 - self.network.degrees * math.sin(p.alpha)) / self.dim
            return p.omega + p.K * H
        return p.omega + np.array([q.eval(phi) for q in self._combined])

    def jac(self, phi: np.ndarray) -> np.ndarray:
        p = self.params
        N = self.dim
        if self.order.exact_delta:
            u = 1.0 + p.delta * self.g.g(phi)
            gp = p.delta * self.g.dg(phi)
            S = np.sin(phi[None, :] - phi[:, None] + p.alpha)
            C = np.cos(phi[None, :] - phi[:, None] + p.alpha)
            a = self.network.a
            J = p.K / N * a * (gp[None, :] * S + u[None, :] * C) / u[:, None]
            slot_k = p.K / N * (a * (-u[None, :] * S * gp[:, None] / u[:, None]**2
                                     - (u[None, :] / u[:, None]) * C)).sum(axis=1)
            J[np.diag_indices(N)] += slot_k
            return J
        if self._partials is None:
            self._partials = tuple(tuple(q.partial(j) for j in range(N))
                                   for q in self._combined)
        J = np.empty((N, N))
        for k in range(N):
            for j in range(N):
                J[k, j] = self._partials[k][j].eval(phi)
        return J


def assemble(net: Network, p: Params, g: ShapeFn,
             order: ReductionOrder) -> ReducedSystem:
    """Build the (a,b)-reduction of the coupled system."""
    if order.exact_delta or order.a == 0:
        return ReducedSystem(order, p, g, net, {})
    terms = {}
    for n in range(1, order.a + 1):
        for j in range(int(order.b) + 1):
            terms[(n, j)] = compute_P(net, p, g, n, j)
    return ReducedSystem(order, p, g, net, terms)


# ---- oracles ----

def meanfield_20_rhs(phi: np.ndarray, p: Params) -> np.ndarray:
    """All-to-all second-order phase dynamics in order-parameter form.

    Independent of the symbolic pipeline; used to cross-check the
    assembled (2,0) reduction.
    """
    phi = np.asarray(phi, dtype=float)
    Z1 = np.mean(np.exp(1j * phi))
    Z2 = np.mean(np.exp(2j * phi))
    R, Psi = np.abs(Z1), np.angle(Z1)
    Q, Theta = np.abs(Z2), np.angle(Z2)
    a, K, m = p.alpha, p.K, p.m
    first = K * R * np.sin(Psi - phi + a) - K * math.sin(a)
    second = K**2 / (2 * m) * (R * Q * np.sin(Psi + phi - Theta)
                               - R * np.sin(Psi - phi + 2 * a)
                               + R**2 * np.sin(2 * Psi - 2 * phi + 2 * a))
    return p.omega + first + second


def appendix_R11_harmonic(n: int, kind: str, net: Network,
                          p: Params) -> tuple[TrigPoly, ...]:
    """Closed-form R^(1,1) for a single shape harmonic g = sin or cos(n phi).

    Stated as a pair sum (1/(2N(m^2+(n w)^2))) sum_l a_kl s1(phi_k, phi_l);
    general shapes superpose these by linearity of the order-delta PDE.
    """
    if n < 1:
        raise ValueError("harmonic index must be >= 1")
    if kind not in ("sin", "cos"):
        raise ValueError("kind must be 'sin' or 'cos'")
    N, w, m, al = net.n, p.omega, p.m, p.alpha
    pref = 1.0 / (2 * N * (m**2 + (n * w) ** 2))

    # shared mode list (freq of phi_k, freq of phi_l, alpha shift) with two
    # coefficient patterns; the harmonic families differ only by which
    # pattern sits on the cos and sin parts
    modes = [(n, 0, -al), (1, -(n + 1), -al), (n + 1, -1, -al),
             (1, n - 1, -al), (n, 0, al), (n - 1, 1, al)]
    ca = [n - 2, -1, -(n - 3), -1, -(n + 2), n + 3]
    cb = [n - 2, 1, -(n - 3), -1, -(n + 2), n + 3]
    if kind == "sin":
        cos_amps = [n * w * c for c in ca]
        sin_amps = [m * c for c in cb]
    else:
        cos_amps = [m * c for c in ca]
        sin_amps = [-n * w * c for c in cb]

    def s1(k: int, l: int) -> TrigPoly:
        acc = TrigPoly.zero(N)
        for (nk, nl, sh), camp, samp in zip(modes, cos_amps, sin_amps):
            freqs = _pair_freqs(k, l, nk, nl)
            acc = acc + TrigPoly.cosine(N, freqs, shift=sh, amp=camp)
            acc = acc + TrigPoly.sine(N, freqs, shift=sh, amp=samp)
        return acc

    out = []
    for k in range(N):
        acc = TrigPoly.zero(N)
        for l in range(N):
            if net.a[k, l] != 0.0:
                acc = acc + net.a[k, l] * s1(k, l)
        out.append(pref * acc)
    return tuple(out)


def clear_cache():
    _cache.clear()
