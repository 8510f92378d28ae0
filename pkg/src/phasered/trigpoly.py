"""Sparse multivariate trigonometric polynomials on the N-torus.

Real-valued functions of N phase variables are stored in the complex
exponential basis,

    f(phi) = sum_n  c_n * exp(i <n, phi>),

where the frequency vectors n have integer entries and the coefficients
satisfy the Hermitian constraint c_{-n} = conj(c_n).  Both halves of each
conjugate pair are stored explicitly, so products are plain convolutions.

`DeltaSeries` layers a truncated power series in a small real parameter on
top, with `TrigPoly` coefficients per order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

# Coefficients below this magnitude are dropped after every operation.
PRUNE_TOL = 1e-14

# Allowed imaginary residue when evaluating (should be pure rounding noise).
EVAL_IMAG_TOL = 1e-12

# Symmetry deviation beyond this means a construction bug, not rounding.
_HERMITIAN_TOL = 1e-10


@dataclass(frozen=True)
class FreqVector:
    """Integer frequency vector, stored sparsely as ((index, freq), ...).

    Entries are sorted by oscillator index and never contain zero
    frequencies; the empty tuple is the constant mode.
    """

    entries: tuple[tuple[int, int], ...]

    @staticmethod
    def make(freqs: Mapping[int, int]) -> "FreqVector":
        items = tuple(sorted((int(i), int(n)) for i, n in freqs.items() if n != 0))
        if any(i < 0 for i, _ in items):
            raise ValueError("oscillator indices must be non-negative")
        return FreqVector(items)

    @property
    def total(self) -> int:
        """Sum of frequencies; the resolvent denominator depends only on this."""
        return sum(n for _, n in self.entries)

    @property
    def degree(self) -> int:
        return sum(abs(n) for _, n in self.entries)

    def __neg__(self) -> "FreqVector":
        return FreqVector(tuple((i, -n) for i, n in self.entries))

    def combine(self, other: "FreqVector") -> "FreqVector":
        acc = dict(self.entries)
        for i, n in other.entries:
            acc[i] = acc.get(i, 0) + n
        return FreqVector(tuple(sorted((i, n) for i, n in acc.items() if n != 0)))

    def sort_key(self):
        return (self.degree, self.entries)

    def label(self) -> str:
        if not self.entries:
            return "0"
        parts = []
        for i, n in self.entries:
            if n == 1:
                term = f"phi{i}"
            elif n == -1:
                term = f"-phi{i}"
            else:
                term = f"{n}*phi{i}"
            parts.append(term if not parts or term.startswith("-") else "+" + term)
        return "".join(parts)


def _finalize(terms: dict[FreqVector, complex]) -> dict[FreqVector, complex]:
    # Symmetrize conjugate pairs exactly and check the deviation was noise.
    out: dict[FreqVector, complex] = {}
    for fv, c in terms.items():
        neg = -fv
        if neg in out or fv in out:
            continue
        cbar = terms.get(neg, 0.0)
        dev = abs(c - cbar.conjugate())
        if dev > _HERMITIAN_TOL * max(1.0, abs(c)):
            raise ValueError(f"Hermitian symmetry violated at mode {fv}: {dev:.3e}")
        avg = 0.5 * (c + cbar.conjugate())
        if fv == neg:  # constant mode, must be real
            avg = complex(avg.real, 0.0)
        if abs(avg) <= PRUNE_TOL:
            continue
        out[fv] = avg
        if fv != neg:
            out[neg] = avg.conjugate()
    return out


class TrigPoly:
    """Immutable sparse trig polynomial on the torus of `n_osc` phases."""

    __slots__ = ("n_osc", "terms", "_cache")

    def __init__(self, n_osc: int, terms: Mapping[FreqVector, complex] | None = None):
        if n_osc < 1:
            raise ValueError("need at least one phase variable")
        object.__setattr__(self, "n_osc", int(n_osc))
        object.__setattr__(self, "terms", _finalize(dict(terms or {})))
        object.__setattr__(self, "_cache", None)

    def __setattr__(self, name, value):
        raise AttributeError("TrigPoly is immutable")

    # ---- constructors ----

    @staticmethod
    def zero(n_osc: int) -> "TrigPoly":
        return TrigPoly(n_osc)

    @staticmethod
    def constant(n_osc: int, value: float) -> "TrigPoly":
        return TrigPoly(n_osc, {FreqVector(()): complex(value, 0.0)})

    @staticmethod
    def cosine(n_osc: int, freqs: Mapping[int, int], shift: float = 0.0,
               amp: float = 1.0) -> "TrigPoly":
        """amp * cos(<n, phi> + shift)."""
        fv = FreqVector.make(freqs)
        if not fv.entries:
            return TrigPoly.constant(n_osc, amp * math.cos(shift))
        c = 0.5 * amp * complex(math.cos(shift), math.sin(shift))
        return TrigPoly(n_osc, {fv: c, -fv: c.conjugate()})

    @staticmethod
    def sine(n_osc: int, freqs: Mapping[int, int], shift: float = 0.0,
             amp: float = 1.0) -> "TrigPoly":
        """amp * sin(<n, phi> + shift)."""
        fv = FreqVector.make(freqs)
        if not fv.entries:
            return TrigPoly.constant(n_osc, amp * math.sin(shift))
        c = -0.5j * amp * complex(math.cos(shift), math.sin(shift))
        return TrigPoly(n_osc, {fv: c, -fv: c.conjugate()})

    # ---- algebra ----

    def __add__(self, other: "TrigPoly") -> "TrigPoly":
        if not isinstance(other, TrigPoly):
            return NotImplemented
        if other.n_osc != self.n_osc:
            raise ValueError("phase-count mismatch")
        acc = dict(self.terms)
        for fv, c in other.terms.items():
            acc[fv] = acc.get(fv, 0.0) + c
        return TrigPoly(self.n_osc, acc)

    def __neg__(self) -> "TrigPoly":
        return TrigPoly(self.n_osc, {fv: -c for fv, c in self.terms.items()})

    def __sub__(self, other: "TrigPoly") -> "TrigPoly":
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, TrigPoly):
            if other.n_osc != self.n_osc:
                raise ValueError("phase-count mismatch")
            acc: dict[FreqVector, complex] = {}
            for fa, ca in self.terms.items():
                for fb, cb in other.terms.items():
                    fv = fa.combine(fb)
                    acc[fv] = acc.get(fv, 0.0) + ca * cb
            return TrigPoly(self.n_osc, acc)
        if isinstance(other, (int, float)):
            # complex scalars would break the Hermitian constraint
            s = float(other)
            return TrigPoly(self.n_osc, {fv: s * c for fv, c in self.terms.items()})
        return NotImplemented

    __rmul__ = __mul__

    # ---- calculus ----

    def partial(self, j: int) -> "TrigPoly":
        """Derivative with respect to phase j."""
        if not 0 <= j < self.n_osc:
            raise ValueError("phase index out of range")
        acc = {}
        for fv, c in self.terms.items():
            nj = dict(fv.entries).get(j, 0)
            if nj:
                acc[fv] = 1j * nj * c
        return TrigPoly(self.n_osc, acc)

    def directional_derivative(self) -> "TrigPoly":
        """Derivative along the diagonal flow, sum_j d/dphi_j."""
        acc = {}
        for fv, c in self.terms.items():
            if fv.total:
                acc[fv] = 1j * fv.total * c
        return TrigPoly(self.n_osc, acc)

    # ---- evaluation ----

    def _compiled(self):
        cache = object.__getattribute__(self, "_cache")
        if cache is None:
            if self.terms:
                modes = np.zeros((len(self.terms), self.n_osc))
                coeffs = np.empty(len(self.terms), dtype=complex)
                for r, (fv, c) in enumerate(self.terms.items()):
                    for i, n in fv.entries:
                        modes[r, i] = n
                    coeffs[r] = c
            else:
                modes = np.zeros((0, self.n_osc))
                coeffs = np.zeros(0, dtype=complex)
            cache = (modes, coeffs)
            object.__setattr__(self, "_cache", cache)
        return cache

    def eval(self, phases) -> np.ndarray | float:
        """Evaluate at a phase vector (N,) or a batch (..., N)."""
        phases = np.asarray(phases, dtype=float)
        if phases.shape[-1] != self.n_osc:
            raise ValueError("phase vector has wrong length")
        modes, coeffs = self._compiled()
        z = np.exp(1j * phases @ modes.T) @ coeffs
        if np.max(np.abs(np.imag(np.atleast_1d(z)))) > EVAL_IMAG_TOL:
            raise AssertionError("imaginary residue exceeds tolerance")
        out = np.real(z)
        return float(out) if out.ndim == 0 else out

    def coefficient(self, freqs: Mapping[int, int]) -> complex:
        return self.terms.get(FreqVector.make(freqs), 0.0)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def abs_sum(self) -> float:
        return sum(abs(c) for c in self.terms.values())

    # ---- serialization / printing ----

    def to_dict(self) -> dict:
        terms = []
        for fv in sorted(self.terms, key=FreqVector.sort_key):
            c = self.terms[fv]
            terms.append({"modes": [[i, n] for i, n in fv.entries],
                          "re": c.real, "im": c.imag})
        return {"n_oscillators": self.n_osc, "terms": terms}

    @staticmethod
    def from_dict(data: dict) -> "TrigPoly":
        terms = {}
        for t in data["terms"]:
            fv = FreqVector.make({int(i): int(n) for i, n in t["modes"]})
            terms[fv] = complex(t["re"], t["im"])
        return TrigPoly(int(data["n_oscillators"]), terms)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @staticmethod
    def from_json(text: str) -> "TrigPoly":
        return TrigPoly.from_dict(json.loads(text))

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        lines = []
        for fv in sorted(self.terms, key=FreqVector.sort_key):
            c = self.terms[fv]
            lines.append(f"({c.real:+.6g}{c.imag:+.6g}j) e^(i({fv.label()}))")
        return "\n".join(lines)

    def __repr__(self) -> str:
        return f"TrigPoly(n_osc={self.n_osc}, n_terms={len(self.terms)})"

    def __eq__(self, other) -> bool:
        return (isinstance(other, TrigPoly) and other.n_osc == self.n_osc
                and other.terms == self.terms)

    def __hash__(self):
        return hash((self.n_osc, frozenset(self.terms.items())))


def resolvent_solve(rhs: TrigPoly, m: float, omega: float) -> TrigPoly:
    """Solve  m*R + rhs - omega * dR/d(diagonal) = 0  mode by mode.

    With R = sum_n R_n exp(i<n,phi>), each mode decouples:
    R_n = rhs_n / (i*omega*total(n) - m).  Requires m != 0; for the constant
    mode the denominator is -m.
    """
    if m == 0.0:
        raise ValueError("resolvent is singular at m = 0")
    acc = {fv: c / (1j * omega * fv.total - m) for fv, c in rhs.terms.items()}
    return TrigPoly(rhs.n_osc, acc)


class DeltaSeries:
    """Truncated power series in a real parameter with TrigPoly coefficients.

    orders[j] multiplies delta**j; everything beyond the truncation order is
    discarded, so products of valid series stay valid.
    """

    __slots__ = ("orders",)

    def __init__(self, orders: Sequence[TrigPoly]):
        if not orders:
            raise ValueError("need at least the constant order")
        n = orders[0].n_osc
        if any(p.n_osc != n for p in orders):
            raise ValueError("phase-count mismatch across orders")
        object.__setattr__(self, "orders", tuple(orders))

    def __setattr__(self, name, value):
        raise AttributeError("DeltaSeries is immutable")

    @property
    def truncation(self) -> int:
        return len(self.orders) - 1

    @property
    def n_osc(self) -> int:
        return self.orders[0].n_osc

    def term(self, j: int) -> TrigPoly:
        return self.orders[j] if j <= self.truncation else TrigPoly.zero(self.n_osc)

    @staticmethod
    def of(poly: TrigPoly, truncation: int) -> "DeltaSeries":
        zero = TrigPoly.zero(poly.n_osc)
        return DeltaSeries([poly] + [zero] * truncation)

    def __add__(self, other: "DeltaSeries") -> "DeltaSeries":
        t = min(self.truncation, other.truncation)
        return DeltaSeries([self.orders[j] + other.orders[j] for j in range(t + 1)])

    def __sub__(self, other: "DeltaSeries") -> "DeltaSeries":
        t = min(self.truncation, other.truncation)
        return DeltaSeries([self.orders[j] - other.orders[j] for j in range(t + 1)])

    def __neg__(self) -> "DeltaSeries":
        return DeltaSeries([-p for p in self.orders])

    def __mul__(self, other):
        if isinstance(other, DeltaSeries):
            t = min(self.truncation, other.truncation)
            out = []
            for j in range(t + 1):
                acc = TrigPoly.zero(self.n_osc)
                for a in range(j + 1):
                    acc = acc + self.orders[a] * other.orders[j - a]
                out.append(acc)
            return DeltaSeries(out)
        if isinstance(other, (int, float)):
            return DeltaSeries([float(other) * p for p in self.orders])
        return NotImplemented

    __rmul__ = __mul__

    def shift(self, k: int = 1) -> "DeltaSeries":
        """Multiply by delta**k, keeping the truncation order."""
        zero = TrigPoly.zero(self.n_osc)
        padded = [zero] * k + list(self.orders)
        return DeltaSeries(padded[:len(self.orders)])

    def eval(self, phases, delta: float):
        acc = self.orders[0].eval(phases)
        for j in range(1, len(self.orders)):
            acc = acc + delta**j * self.orders[j].eval(phases)
        return acc
