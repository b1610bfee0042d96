"""CPPN genotype: a small feed-forward graph of heterogeneous activation
functions queried over spatial coordinates.

Genomes have exactly 4 inputs (x, y, z, r) and 5 outputs (one per voxel
content category). Reproduction is mutation-only: polynomial mutation of
weights, biases and activation parameters, plus structural add-node /
add-connection / toggle operators. Acyclicity is enforced over all
connections (enabled or not), so toggling can never create a cycle.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

N_INPUTS = 4
N_OUTPUTS = 5

ACTIVATION_KINDS = ("gaussian", "sigmoid", "sinusoid", "linear")

# (lower, upper) per activation parameter; also used as fresh-draw ranges.
PARAM_BOUNDS: dict[str, tuple[tuple[float, float], ...]] = {
    "gaussian": ((-1.0, 1.0), (0.05, 2.0)),   # center, width
    "sigmoid": ((0.1, 5.0),),                 # slope
    "sinusoid": ((0.1, 5.0), (-math.pi, math.pi)),  # frequency, phase
    "linear": ((-3.0, 3.0),),                 # slope
}


class CppnError(ValueError):
    """Structural invariant violation in a genome."""


@dataclass
class Node:
    id: int
    kind: str
    params: list[float]
    bias: float


@dataclass
class Connection:
    src: int
    dst: int
    weight: float
    enabled: bool = True


@dataclass
class MutationParams:
    p_add_node: float = 0.1
    p_add_connection: float = 0.15
    p_toggle: float = 0.05
    p_weight: float = 0.8
    p_kind: float = 0.0          # activation-kind mutation, off by default
    eta: float = 15.0
    weight_bound: float = 3.0

    def validate(self) -> None:
        for name in ("p_add_node", "p_add_connection", "p_toggle", "p_weight", "p_kind"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0,1], got {v}")
        if self.eta <= 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")
        if self.weight_bound <= 0:
            raise ValueError(f"weight_bound must be > 0, got {self.weight_bound}")


@dataclass
class CppnGenome:
    """Feed-forward graph. Inputs are ids 0..3, outputs 4..8, hidden 9+.

    Treated as an immutable value after construction: mutation returns a
    new genome and never touches the parent.
    """

    nodes: list[Node] = field(default_factory=list)
    connections: list[Connection] = field(default_factory=list)
    innovation: int = N_INPUTS + N_OUTPUTS

    @property
    def input_ids(self) -> list[int]:
        return list(range(N_INPUTS))

    @property
    def output_ids(self) -> list[int]:
        return list(range(N_INPUTS, N_INPUTS + N_OUTPUTS))

    def node_by_id(self) -> dict[int, Node]:
        return {n.id: n for n in self.nodes}

    def copy(self) -> "CppnGenome":
        return CppnGenome(
            nodes=[replace(n, params=list(n.params)) for n in self.nodes],
            connections=[replace(c) for c in self.connections],
            innovation=self.innovation,
        )


def _activation(kind: str, params: list[float], x: np.ndarray) -> np.ndarray:
    if kind == "gaussian":
        center, width = params
        u = (x - center) / width
        return np.exp(-u * u)
    if kind == "sigmoid":
        return 1.0 / (1.0 + np.exp(-params[0] * x))
    if kind == "sinusoid":
        return np.sin(params[0] * x + params[1])
    if kind == "linear":
        return params[0] * x
    raise CppnError(f"unknown activation kind {kind!r}")


def topo_order(genome: CppnGenome) -> list[int]:
    """Kahn topological sort over all connections. Raises on cycles."""
    ids = [n.id for n in genome.nodes]
    indeg = {i: 0 for i in ids}
    out: dict[int, list[int]] = {i: [] for i in ids}
    for c in genome.connections:
        indeg[c.dst] += 1
        out[c.src].append(c.dst)
    ready = sorted(i for i in ids if indeg[i] == 0)
    order: list[int] = []
    while ready:
        i = ready.pop(0)
        order.append(i)
        for j in sorted(out[i]):
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(j)
        ready.sort()
    if len(order) != len(ids):
        raise CppnError("genome graph contains a cycle")
    return order


def validate(genome: CppnGenome) -> None:
    """Raise CppnError unless all structural invariants hold."""
    ids = [n.id for n in genome.nodes]
    if len(set(ids)) != len(ids):
        raise CppnError("duplicate node ids")
    idset = set(ids)
    if set(genome.input_ids) - idset or set(genome.output_ids) - idset:
        raise CppnError("missing input or output nodes")
    for n in genome.nodes:
        if n.kind not in PARAM_BOUNDS:
            raise CppnError(f"unknown activation kind {n.kind!r}")
        if len(n.params) != len(PARAM_BOUNDS[n.kind]):
            raise CppnError(f"bad parameter arity for {n.kind}")
        if n.kind == "gaussian" and n.params[1] <= 0:
            raise CppnError("gaussian width must be > 0")
        if n.kind == "sinusoid" and n.params[0] <= 0:
            raise CppnError("sinusoid frequency must be > 0")
    seen: set[tuple[int, int]] = set()
    for c in genome.connections:
        if c.src not in idset or c.dst not in idset:
            raise CppnError("connection references unknown node")
        if c.src in genome.output_ids:
            raise CppnError("output node has outgoing connection")
        if c.dst in genome.input_ids:
            raise CppnError("input node has incoming connection")
        if c.enabled:
            if (c.src, c.dst) in seen:
                raise CppnError("duplicate enabled connection")
            seen.add((c.src, c.dst))
    topo_order(genome)


def _fresh_params(kind: str, rng: np.random.Generator) -> list[float]:
    return [float(rng.uniform(lo, hi)) for lo, hi in PARAM_BOUNDS[kind]]


def random_genome(rng: np.random.Generator, params: MutationParams) -> CppnGenome:
    """Minimal genome: inputs fully connected to outputs, uniform weights
    in [-weight_bound, +weight_bound], random activation kinds on outputs.
    """
    params.validate()
    nodes = [Node(id=i, kind="linear", params=[1.0], bias=0.0) for i in range(N_INPUTS)]
    for i in range(N_INPUTS, N_INPUTS + N_OUTPUTS):
        kind = ACTIVATION_KINDS[int(rng.integers(len(ACTIVATION_KINDS)))]
        nodes.append(Node(id=i, kind=kind, params=_fresh_params(kind, rng),
                          bias=float(rng.uniform(-1.0, 1.0))))
    conns = []
    for src in range(N_INPUTS):
        for dst in range(N_INPUTS, N_INPUTS + N_OUTPUTS):
            w = float(rng.uniform(-params.weight_bound, params.weight_bound))
            conns.append(Connection(src=src, dst=dst, weight=w))
    return CppnGenome(nodes=nodes, connections=conns)


def evaluate(genome: CppnGenome, x, y, z, r) -> np.ndarray:
    """Forward pass in topological order.

    x, y, z, r may be scalars or equally shaped arrays; returns shape (5,)
    for scalars, (5, N) for arrays. Pure function of (genome, inputs).
    """
    inputs = [np.asarray(v, dtype=np.float64) for v in (x, y, z, r)]
    order = topo_order(genome)
    nodes = genome.node_by_id()
    incoming: dict[int, list[Connection]] = {n.id: [] for n in genome.nodes}
    for c in genome.connections:
        if c.enabled:
            incoming[c.dst].append(c)
    values: dict[int, np.ndarray] = {}
    zero = np.zeros(np.broadcast(*inputs).shape)
    for nid in order:
        if nid < N_INPUTS:
            values[nid] = inputs[nid]
            continue
        node = nodes[nid]
        pre = zero + node.bias
        for c in incoming[nid]:
            pre = pre + c.weight * values[c.src]
        values[nid] = _activation(node.kind, node.params, pre)
    out = np.stack([values[i] for i in genome.output_ids])
    if not np.all(np.isfinite(out)):
        raise CppnError("non-finite CPPN output")
    return out


def polynomial_mutation(x: float, lo: float, hi: float, eta: float, u: float) -> float:
    """Bounded polynomial mutation; u is the uniform draw in [0,1).

    u = 0.5 leaves x unchanged; results always stay inside [lo, hi].
    """
    if hi <= lo:
        return x
    x = min(max(x, lo), hi)
    span = hi - lo
    if u < 0.5:
        d1 = (x - lo) / span
        dq = (2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)) ** (1.0 / (eta + 1.0)) - 1.0
    else:
        d2 = (hi - x) / span
        dq = 1.0 - (2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)) ** (1.0 / (eta + 1.0))
    return min(max(x + dq * span, lo), hi)


def _creates_cycle(genome: CppnGenome, src: int, dst: int) -> bool:
    """Would adding src->dst close a cycle? Checks reachability dst->src
    over all connections."""
    if src == dst:
        return True
    adj: dict[int, list[int]] = {}
    for c in genome.connections:
        adj.setdefault(c.src, []).append(c.dst)
    stack = [dst]
    seen = set()
    while stack:
        i = stack.pop()
        if i == src:
            return True
        if i in seen:
            continue
        seen.add(i)
        stack.extend(adj.get(i, []))
    return False


def mutate(genome: CppnGenome, params: MutationParams, rng: np.random.Generator) -> CppnGenome:
    """Return a mutated copy; the parent is never modified.

    Draw order is fixed (weights, biases/params, toggle, add-connection,
    add-node) so a given (genome, seed) pair always yields the same child.
    """
    params.validate()
    g = genome.copy()
    wb = params.weight_bound

    for c in g.connections:
        if rng.random() < params.p_weight:
            c.weight = polynomial_mutation(c.weight, -wb, wb, params.eta, rng.random())

    for n in g.nodes:
        if n.id < N_INPUTS:
            continue
        if params.p_kind > 0 and rng.random() < params.p_kind:
            n.kind = ACTIVATION_KINDS[int(rng.integers(len(ACTIVATION_KINDS)))]
            n.params = _fresh_params(n.kind, rng)
        if rng.random() < params.p_weight:
            n.bias = polynomial_mutation(n.bias, -wb, wb, params.eta, rng.random())
        bounds = PARAM_BOUNDS[n.kind]
        for k, (lo, hi) in enumerate(bounds):
            if rng.random() < params.p_weight:
                n.params[k] = polynomial_mutation(n.params[k], lo, hi, params.eta, rng.random())

    if g.connections and rng.random() < params.p_toggle:
        c = g.connections[int(rng.integers(len(g.connections)))]
        c.enabled = not c.enabled

    if rng.random() < params.p_add_connection:
        sources = [n.id for n in g.nodes if n.id not in g.output_ids]
        targets = [n.id for n in g.nodes if n.id >= N_INPUTS]
        existing = {(c.src, c.dst) for c in g.connections}
        for _ in range(20):
            src = sources[int(rng.integers(len(sources)))]
            dst = targets[int(rng.integers(len(targets)))]
            if (src, dst) in existing or _creates_cycle(g, src, dst):
                continue
            w = float(rng.uniform(-wb, wb))
            g.connections.append(Connection(src=src, dst=dst, weight=w))
            break

    if rng.random() < params.p_add_node:
        enabled = [c for c in g.connections if c.enabled]
        if enabled:
            c = enabled[int(rng.integers(len(enabled)))]
            c.enabled = False
            kind = ACTIVATION_KINDS[int(rng.integers(len(ACTIVATION_KINDS)))]
            nid = g.innovation
            g.innovation += 1
            g.nodes.append(Node(id=nid, kind=kind, params=_fresh_params(kind, rng), bias=0.0))
            g.connections.append(Connection(src=c.src, dst=nid, weight=1.0))
            g.connections.append(Connection(src=nid, dst=c.dst, weight=c.weight))

    return g


# -- genome file format -------------------------------------------------

def to_dict(genome: CppnGenome) -> dict:
    return {
        "nodes": [{"id": n.id, "kind": n.kind, "params": list(n.params), "bias": n.bias}
                  for n in genome.nodes],
        "connections": [{"src": c.src, "dst": c.dst, "weight": c.weight, "enabled": c.enabled}
                        for c in genome.connections],
        "meta": {"innovation": genome.innovation},
    }


def from_dict(d: dict) -> CppnGenome:
    g = CppnGenome(
        nodes=[Node(id=n["id"], kind=n["kind"], params=list(n["params"]), bias=n["bias"])
               for n in d["nodes"]],
        connections=[Connection(src=c["src"], dst=c["dst"], weight=c["weight"],
                                enabled=bool(c["enabled"]))
                     for c in d["connections"]],
        innovation=int(d["meta"]["innovation"]),
    )
    validate(g)
    return g


def save(genome: CppnGenome, path) -> None:
    with open(path, "w") as f:
        json.dump(to_dict(genome), f, indent=1)


def load(path) -> CppnGenome:
    with open(path) as f:
        return from_dict(json.load(f))
