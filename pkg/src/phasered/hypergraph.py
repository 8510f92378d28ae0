"""Triplet structure of the second-order phase interactions.

At second order in the coupling, the phase dynamics on a graph stop being a
sum of pairwise terms: oscillator k feels products of adjacency weights along
wedges k->l, k->i and along two-step paths k->l->i.  This module makes that
structure explicit.  It builds the two weight tensors

    hhat[k,l,i] = a[k,l] a[k,i]      (wedge, symmetric in l and i)
    hbar[k,l,i] = a[k,l] a[l,i]      (two-step path, no symmetry)

evaluates the second-order term directly from them, and decomposes it into
six interaction classes: degree-corrected pairwise terms (a1, a2), a triplet
term on the wedge tensor (b1), a pairwise term along virtual length-2 edges
(b2), and two genuinely triadic terms (c1 on wedges, c2 on paths).  The
decomposition re-sums exactly to the reduction's second-order term, which is
the invariant every consumer of the export can check.

Self-loops are allowed and flow through every formula unchanged; the
all-to-all graph here includes them, matching the unrestricted double sums
of the mean-field form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import Network, Params, ShapeFn
from .reduction import compute_P

__all__ = [
    "Hyper3Tensor",
    "VirtualEdgeGraph",
    "SinTemplate",
    "InteractionClass",
    "InteractionDecomposition",
    "build_tensors",
    "virtual_edges",
    "coupling_wedge",
    "coupling_path",
    "eval_second_order_via_hypergraph",
    "decompose",
    "decomposition_doc",
    "export_json",
    "load_json",
    "check_decomposition",
]


# ---------------------------------------------------------------------------
# tensors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Hyper3Tensor:
    """Dense (n, n, n) weight tensor indexed [tail k, l, i]."""

    tensor: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.tensor, dtype=float)
        if t.ndim != 3 or len(set(t.shape)) != 1:
            raise ValueError("expected a cubic three-index tensor")
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "tensor", t)

    @property
    def n(self) -> int:
        return self.tensor.shape[0]

    def weight(self, k: int, l: int, i: int) -> float:
        return float(self.tensor[k, l, i])

    def entries(self) -> dict[tuple[int, int, int], float]:
        """Sparse view: nonzero (k, l, i) -> weight."""
        out = {}
        for k, l, i in zip(*np.nonzero(self.tensor)):
            out[(int(k), int(l), int(i))] = float(self.tensor[k, l, i])
        return out


@dataclass(frozen=True)
class VirtualEdgeGraph:
    """Length-2 path counts: c[k, i] = sum_l a[k,l] a[l,i]."""

    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).copy()
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.c.shape[0]


def build_tensors(net: Network) -> tuple[Hyper3Tensor, Hyper3Tensor]:
    a = net.a
    hhat = np.einsum("kl,ki->kli", a, a)
    hbar = np.einsum("kl,li->kli", a, a)
    return Hyper3Tensor(hhat), Hyper3Tensor(hbar)


def virtual_edges(net: Network) -> VirtualEdgeGraph:
    return VirtualEdgeGraph(net.a @ net.a)


# ---------------------------------------------------------------------------
# coupling functions
# ---------------------------------------------------------------------------


def coupling_wedge(phi_k, phi_l, phi_i, alpha: float):
    """Interaction carried by a wedge (k; l, i); vanishes on the diagonal
    configuration by the double-angle identity."""
    return (2.0 * np.cos(alpha) * np.sin(phi_l - phi_k + alpha)
            + np.sin(phi_i - phi_l)
            - np.sin(phi_i - 2.0 * phi_k + phi_l + 2.0 * alpha))


def coupling_path(phi_k, phi_l, phi_i, alpha: float):
    """Interaction carried by a two-step path k -> l -> i."""
    return (2.0 * np.cos(alpha) * np.sin(phi_l - phi_k + alpha)
            - np.sin(phi_i - phi_k + 2.0 * alpha)
            + np.sin(phi_i + phi_k - 2.0 * phi_l))


def eval_second_order_via_hypergraph(phi, net: Network,
                                     p: Params) -> np.ndarray:
    """Second-order phase term computed from the triplet tensors.

    Must agree with the reduction's assembled term; keeping both routes
    alive is the point, since each catches sign slips in the other.
    """
    phi = np.asarray(phi, dtype=float)
    n = net.n
    hhat, hbar = build_tensors(net)
    pk = phi[:, None, None]
    pl = phi[None, :, None]
    pi_ = phi[None, None, :]
    ghat = coupling_wedge(pk, pl, pi_, p.alpha)
    gbar = coupling_path(pk, pl, pi_, p.alpha)
    pref = 1.0 / (2.0 * n * n * p.m)
    return pref * (np.einsum("kli,kli->k", hbar.tensor, gbar)
                   - np.einsum("kli,kli->k", hhat.tensor, ghat))


# ---------------------------------------------------------------------------
# decomposition into interaction classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SinTemplate:
    """sin(ck*phi_k + cl*phi_l + ci*phi_i + s*alpha) with integer weights."""

    coeff_k: int
    coeff_l: int
    coeff_i: int
    alpha_mult: int

    def label(self) -> str:
        parts = []
        for coeff, name in ((self.coeff_k, "phi_k"), (self.coeff_l, "phi_l"),
                            (self.coeff_i, "phi_i"), (self.alpha_mult, "alpha")):
            if coeff == 0:
                continue
            mag = abs(coeff)
            term = name if mag == 1 else f"{mag} {name}"
            if not parts:
                parts.append(term if coeff > 0 else f"-{term}")
            else:
                parts.append(f"{'+' if coeff > 0 else '-'} {term}")
        return f"sin({' '.join(parts)})"

    def to_dict(self) -> dict:
        return {"coeff_k": self.coeff_k, "coeff_l": self.coeff_l,
                "coeff_i": self.coeff_i, "alpha_mult": self.alpha_mult}

    @classmethod
    def from_dict(cls, d: dict) -> "SinTemplate":
        return cls(int(d["coeff_k"]), int(d["coeff_l"]),
                   int(d["coeff_i"]), int(d["alpha_mult"]))


# the five trig templates appearing at second order
TEMPLATE_PAIRWISE = SinTemplate(-1, 1, 0, 1)        # sin(phi_l - phi_k + alpha)
TEMPLATE_WEDGE_FLOW = SinTemplate(0, -1, 1, 0)      # sin(phi_i - phi_l)
TEMPLATE_VIRTUAL = SinTemplate(-1, 0, 1, 2)         # sin(phi_i - phi_k + 2a)
TEMPLATE_WEDGE_TRIAD = SinTemplate(-2, 1, 1, 2)     # sin(phi_i - 2phi_k + phi_l + 2a)
TEMPLATE_PATH_TRIAD = SinTemplate(1, -2, 1, 0)      # sin(phi_i + phi_k - 2phi_l)


@dataclass(frozen=True)
class InteractionClass:
    """One labeled term collection of the second-order decomposition.

    ``weights`` is (n, n) for graph-like structures (columns index whichever
    phase slot the template uses) and (n, n, n) for tensor structures.  The
    numeric prefactor is sign/(2 n^2 m), doubled by 2 cos(alpha) when
    ``cos_alpha_factor`` is set; everything else is parameter-free.
    """

    name: str
    structure: str  # graph | virtual-graph | wedge-tensor | path-tensor
    template: SinTemplate
    weights: np.ndarray
    sign: int
    cos_alpha_factor: bool = False

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.sign not in (-1, 1):
            raise ValueError("sign must be -1 or +1")
        if w.ndim == 2 and self.template.coeff_l and self.template.coeff_i:
            raise ValueError("pairwise class cannot use both l and i slots")

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def prefactor(self, p: Params) -> float:
        pref = self.sign / (2.0 * self.n ** 2 * p.m)
        if self.cos_alpha_factor:
            pref *= 2.0 * np.cos(p.alpha)
        return pref

    def evaluate(self, phi, p: Params) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        t = self.template
        if self.weights.ndim == 2:
            co = t.coeff_l if t.coeff_l != 0 else t.coeff_i
            angle = (t.coeff_k * phi[:, None] + co * phi[None, :]
                     + t.alpha_mult * p.alpha)
            summed = np.einsum("ko,ko->k", self.weights, np.sin(angle))
        else:
            angle = (t.coeff_k * phi[:, None, None]
                     + t.coeff_l * phi[None, :, None]
                     + t.coeff_i * phi[None, None, :]
                     + t.alpha_mult * p.alpha)
            summed = np.einsum("kli,kli->k", self.weights, np.sin(angle))
        return self.prefactor(p) * summed


@dataclass(frozen=True)
class InteractionDecomposition:
    """Second-order interactions sorted into labeled classes.

    Freshly decomposed graphs carry six classes with the two pairwise
    corrections a1 (tail degree) and a2 (neighbor degree) separate; files
    store them merged into a single degree-difference class "a", so a loaded
    decomposition carries five.  Either way the class evaluations sum to the
    full second-order term.
    """

    n: int
    classes: tuple[InteractionClass, ...]

    def class_by_name(self, name: str) -> InteractionClass:
        for cls in self.classes:
            if cls.name == name:
                return cls
        raise KeyError(name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(cls.name for cls in self.classes)

    def evaluate(self, phi, p: Params) -> np.ndarray:
        total = np.zeros(self.n)
        for cls in self.classes:
            total = total + cls.evaluate(phi, p)
        return total

    def merged_pairwise_weights(self) -> np.ndarray:
        """Degree-difference weights a[k,l] (deg(k) - deg(l)) of class a."""
        if "a" in self.names:
            return np.asarray(self.class_by_name("a").weights)
        a1 = self.class_by_name("a1")
        a2 = self.class_by_name("a2")
        # a1 enters with sign -1, a2 with +1; fold onto the -1 convention
        return np.asarray(a1.weights - a2.weights)


def decompose(net: Network) -> InteractionDecomposition:
    a = net.a
    deg = net.degrees  # weighted out-degree, row sums
    hhat, hbar = build_tensors(net)
    virt = virtual_edges(net)
    classes = (
        InteractionClass("a1", "graph", TEMPLATE_PAIRWISE,
                         deg[:, None] * a, sign=-1, cos_alpha_factor=True),
        InteractionClass("a2", "graph", TEMPLATE_PAIRWISE,
                         a * deg[None, :], sign=1, cos_alpha_factor=True),
        InteractionClass("b1", "wedge-tensor", TEMPLATE_WEDGE_FLOW,
                         hhat.tensor, sign=-1),
        InteractionClass("b2", "virtual-graph", TEMPLATE_VIRTUAL,
                         virt.c, sign=-1),
        InteractionClass("c1", "wedge-tensor", TEMPLATE_WEDGE_TRIAD,
                         hhat.tensor, sign=1),
        InteractionClass("c2", "path-tensor", TEMPLATE_PATH_TRIAD,
                         hbar.tensor, sign=1),
    )
    return InteractionDecomposition(n=net.n, classes=classes)


# ---------------------------------------------------------------------------
# export / import
# ---------------------------------------------------------------------------


def _sparse_pairs(w: np.ndarray) -> list:
    out = []
    for k, o in zip(*np.nonzero(w)):
        out.append([int(k), int(o), float(w[k, o])])
    return out


def _sparse_triples(w: np.ndarray) -> list:
    out = []
    for k, l, i in zip(*np.nonzero(w)):
        out.append([int(k), int(l), int(i), float(w[k, l, i])])
    return out


def _class_dict(cls: InteractionClass) -> dict:
    body = {
        "structure": cls.structure,
        "term": cls.template.label(),
        "template": cls.template.to_dict(),
        "sign": cls.sign,
        "cos_alpha_factor": cls.cos_alpha_factor,
    }
    if cls.weights.ndim == 2:
        key = "virtual_edges" if cls.structure == "virtual-graph" else "edges"
        body[key] = _sparse_pairs(cls.weights)
    else:
        body["triples"] = _sparse_triples(cls.weights)
    return body


def decomposition_doc(decomp: InteractionDecomposition,
                      params: Params | None = None) -> dict:
    """Serializable document with the two pairwise corrections merged.

    Merging a1 and a2 into one degree-difference class keeps the file free
    of redundant edge lists; the merge preserves the evaluated sum, so the
    exactness check still holds on what the file describes.
    """
    merged = InteractionClass("a", "graph", TEMPLATE_PAIRWISE,
                              decomp.merged_pairwise_weights(),
                              sign=-1, cos_alpha_factor=True)
    file_classes = [merged] + [decomp.class_by_name(name)
                               for name in ("b1", "b2", "c1", "c2")]
    return {
        "n": decomp.n,
        "classes": {cls.name: _class_dict(cls) for cls in file_classes},
        "params": None if params is None else {
            "omega": params.omega, "m": params.m, "alpha": params.alpha,
            "K": params.K, "delta": params.delta,
        },
    }


def export_json(decomp: InteractionDecomposition, path,
                params: Params | None = None) -> None:
    doc = decomposition_doc(decomp, params)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _dense_from_entries(n: int, body: dict) -> np.ndarray:
    if "triples" in body:
        w = np.zeros((n, n, n))
        for k, l, i, val in body["triples"]:
            w[int(k), int(l), int(i)] = float(val)
        return w
    key = "virtual_edges" if "virtual_edges" in body else "edges"
    w = np.zeros((n, n))
    for k, o, val in body.get(key, []):
        w[int(k), int(o)] = float(val)
    return w


def load_json(path) -> tuple[InteractionDecomposition, Params | None]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    n = int(doc["n"])
    classes = []
    for name in ("a", "b1", "b2", "c1", "c2"):
        body = doc["classes"][name]
        classes.append(InteractionClass(
            name, body["structure"], SinTemplate.from_dict(body["template"]),
            _dense_from_entries(n, body), sign=int(body["sign"]),
            cos_alpha_factor=bool(body["cos_alpha_factor"])))
    params = None
    if doc.get("params") is not None:
        q = doc["params"]
        params = Params(omega=q["omega"], m=q["m"], alpha=q["alpha"],
                        K=q["K"], delta=q["delta"])
    return InteractionDecomposition(n=n, classes=tuple(classes)), params


# ---------------------------------------------------------------------------
# consistency check
# ---------------------------------------------------------------------------


def check_decomposition(net: Network, p: Params, n_samples: int = 500,
                        seed: int = 0) -> float:
    """Max pointwise deviation between the class re-sum, the direct tensor
    evaluation, and the reduction's second-order term."""
    polys = compute_P(net, p, ShapeFn.zero(), 2, 0)
    decomp = decompose(net)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        phi = rng.uniform(0.0, 2.0 * np.pi, net.n)
        reference = np.array([poly.eval(phi) for poly in polys])
        via_tensors = eval_second_order_via_hypergraph(phi, net, p)
        via_classes = decomp.evaluate(phi, p)
        worst = max(worst,
                    float(np.max(np.abs(via_tensors - reference))),
                    float(np.max(np.abs(via_classes - reference))))
    return worst
