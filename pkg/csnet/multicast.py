"""Multicast networks: max-flow min-cut, random linear network coding, and
sparse distributed compression delivered over a coded network.

Graphs are small acyclic multigraphs with integer capacities counted in
packets per time slot. Every edge of capacity c carries c packets, each a
random GF(2^q) combination of the packets available at its tail node.
"""

import logging
import math
from collections import defaultdict, deque
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import galois
import numpy as np

from csnet import settings
from csnet.sdc import (
    ActiveSet,
    SchemeKind,
    SchemeReport,
    check_active_rip,
    cs_decode,
    rate_table,
    transport_active,
)
from csnet.solver import CapExceededError
from csnet.source_model import SourceEnsemble, SourceMode, sample_messages
from csnet.utils import derive_rng

logger = logging.getLogger(__name__)

# Edge subsets enumerated by the brute-force cut oracle are capped at 2^this
BRUTE_FORCE_MAX_EDGES = 20

_SUPER_SOURCE = object()


class RankDeficientError(ValueError):
    """Raised when received coding vectors do not span all active sources."""

    def __init__(self, rank: int, required: int):
        super().__init__(f"rank deficient: rank {rank} < {required}")
        self.rank = rank
        self.required = required


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    capacity: int = 1


@dataclass(frozen=True)
class NetworkGraph:
    nodes: tuple[int, ...]
    edges: tuple[Edge, ...]
    sources: tuple[int, ...]
    receivers: tuple[int, ...]

    def __post_init__(self):
        for name in ("nodes", "edges", "sources", "receivers"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        known = set(self.nodes)
        if len(known) != len(self.nodes):
            raise ValueError("node ids must be distinct")
        for edge in self.edges:
            if edge.u not in known or edge.v not in known:
                raise ValueError(f"edge {edge.u}->{edge.v} references an unknown node")
            if int(edge.capacity) != edge.capacity or edge.capacity < 1:
                raise ValueError(f"edge {edge.u}->{edge.v} capacity must be an integer >= 1")
        for node in self.sources + self.receivers:
            if node not in known:
                raise ValueError(f"terminal {node} is not a node")
        self.topological_order()

    def topological_order(self) -> list[int]:
        """Kahn's algorithm, smallest ready node first; raises on cycles."""
        indegree = {node: 0 for node in self.nodes}
        for edge in self.edges:
            indegree[edge.v] += 1
        ready = sorted(node for node, degree in indegree.items() if degree == 0)
        order = []
        while ready:
            node = ready.pop(0)
            order.append(node)
            for edge in self.out_edges(node):
                indegree[edge.v] -= 1
                if indegree[edge.v] == 0:
                    ready.append(edge.v)
                    ready.sort()
        if len(order) != len(self.nodes):
            raise ValueError("network graph must be acyclic")
        return order

    def out_edges(self, node: int) -> list[Edge]:
        return [edge for edge in self.edges if edge.u == node]


@dataclass(frozen=True)
class FlowResult:
    value: int
    edge_flows: tuple[int, ...]


def max_flow(g: NetworkGraph, source_set, receiver: int) -> FlowResult:
    """Edmonds-Karp from a virtual super-source feeding every node of source_set.

    Parallel edges are merged for the search and the aggregate flow is
    handed back to them in edge order.
    """
    source_set = set(source_set)
    if receiver in source_set:
        raise ValueError(f"receiver {receiver} is also a source")

    capacity = defaultdict(lambda: defaultdict(int))
    for edge in g.edges:
        capacity[edge.u][edge.v] += edge.capacity
        capacity[edge.v][edge.u] += 0
    unbounded = sum(edge.capacity for edge in g.edges) + 1
    for node in source_set:
        capacity[_SUPER_SOURCE][node] = unbounded
        capacity[node][_SUPER_SOURCE] += 0
    residual = {u: dict(row) for u, row in capacity.items()}

    value = 0
    while True:
        parent = {_SUPER_SOURCE: None}
        queue = deque([_SUPER_SOURCE])
        while queue and receiver not in parent:
            u = queue.popleft()
            for v, remaining in residual.get(u, {}).items():
                if remaining > 0 and v not in parent:
                    parent[v] = u
                    queue.append(v)
        if receiver not in parent:
            break
        path_flow = math.inf
        v = receiver
        while parent[v] is not None:
            path_flow = min(path_flow, residual[parent[v]][v])
            v = parent[v]
        v = receiver
        while parent[v] is not None:
            u = parent[v]
            residual[u][v] -= path_flow
            residual[v][u] += path_flow
            v = u
        value += path_flow

    remaining_flow = {
        (u, v): capacity[u][v] - residual[u][v] for u in capacity if u is not _SUPER_SOURCE for v in capacity[u]
    }
    edge_flows = []
    for edge in g.edges:
        carried = max(0, min(edge.capacity, remaining_flow.get((edge.u, edge.v), 0)))
        remaining_flow[(edge.u, edge.v)] -= carried
        edge_flows.append(carried)
    return FlowResult(value=int(value), edge_flows=tuple(edge_flows))


def min_cut(g: NetworkGraph, source_set, receiver: int) -> int:
    """Minimum edge cut between source_set and receiver; 0 if unreachable."""
    return max_flow(g, source_set, receiver).value


def _reachable(edges, source_set, receiver) -> bool:
    adjacency = defaultdict(list)
    for edge in edges:
        adjacency[edge.u].append(edge.v)
    seen = set(source_set)
    queue = deque(seen)
    while queue:
        u = queue.popleft()
        if u == receiver:
            return True
        for v in adjacency[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return False


def brute_force_min_cut(g: NetworkGraph, source_set, receiver: int) -> int:
    """Smallest total capacity of an edge set whose removal disconnects receiver."""
    count = len(g.edges)
    if count > BRUTE_FORCE_MAX_EDGES:
        raise CapExceededError(f"{count} edges exceed the brute-force limit {BRUTE_FORCE_MAX_EDGES}")
    source_set = set(source_set)
    best = sum(edge.capacity for edge in g.edges)
    for mask in range(1 << count):
        removed = [g.edges[i] for i in range(count) if mask >> i & 1]
        weight = sum(edge.capacity for edge in removed)
        if weight >= best:
            continue
        kept = [g.edges[i] for i in range(count) if not mask >> i & 1]
        if not _reachable(kept, source_set, receiver):
            best = weight
    return best


def depth1(n: int) -> NetworkGraph:
    """n sources each wired straight to one receiver."""
    return NetworkGraph(
        nodes=tuple(range(n + 1)),
        edges=tuple(Edge(i, n) for i in range(n)),
        sources=tuple(range(n)),
        receivers=(n,),
    )


def butterfly() -> NetworkGraph:
    """Two sources, two receivers and one shared bottleneck edge 2->3."""
    edges = [(0, 4), (0, 2), (1, 5), (1, 2), (2, 3), (3, 4), (3, 5)]
    return NetworkGraph(
        nodes=tuple(range(6)),
        edges=tuple(Edge(u, v) for u, v in edges),
        sources=(0, 1),
        receivers=(4, 5),
    )


def parse_graph(text: str) -> NetworkGraph:
    """Parse 'u v cap' edge lines plus 'sources:' and 'receivers:' headers.

    Blank lines and anything after '#' are ignored; a missing capacity is 1.
    """
    edges, sources, receivers = [], [], []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, rest = line.partition(":")
        if rest or line.endswith(":"):
            key = key.strip().lower()
            if key not in ("sources", "receivers"):
                raise ValueError(f"line {number}: unknown header {key!r}")
            target = sources if key == "sources" else receivers
            target.extend(int(token) for token in rest.replace(",", " ").split())
            continue
        fields = line.split()
        if len(fields) not in (2, 3):
            raise ValueError(f"line {number}: expected 'u v [cap]', got {raw!r}")
        u, v = int(fields[0]), int(fields[1])
        edges.append(Edge(u, v, int(fields[2]) if len(fields) == 3 else 1))

    nodes = sorted({e.u for e in edges} | {e.v for e in edges} | set(sources) | set(receivers))
    if not sources or not receivers:
        raise ValueError("graph needs 'sources:' and 'receivers:' lines")
    return NetworkGraph(nodes=tuple(nodes), edges=tuple(edges), sources=tuple(sources), receivers=tuple(receivers))


def load_graph(path) -> NetworkGraph:
    return parse_graph(Path(path).read_text(encoding="utf-8"))


def named_topology(name: str, n: int | None = None) -> NetworkGraph:
    """'butterfly', 'depth1' (n sources), 'depth1:8', or a path to a graph file."""
    key, _, argument = name.partition(":")
    if key == "butterfly":
        return butterfly()
    if key == "depth1":
        size = int(argument) if argument else n
        if not size:
            raise ValueError("depth1 topology needs a source count")
        return depth1(size)
    if Path(name).is_file():
        return load_graph(name)
    raise ValueError(f"unknown topology {name!r}; available: butterfly, depth1[:n], or a graph file")


@lru_cache(maxsize=None)
def gf_field(q: int):
    """GF(2^q) array class; built once per q."""
    if not 1 <= q <= 16:
        raise ValueError(f"field bits must be in [1, 16], got {q}")
    return galois.GF(2**q)


def _raw(array) -> np.ndarray:
    return np.asarray(array.view(np.ndarray), dtype=np.int64)


@dataclass(frozen=True, eq=False)
class CodedPacket:
    payload: galois.FieldArray
    coding_vector: galois.FieldArray


def rlnc_session(g: NetworkGraph, active_packets, q: int, seed: int, injection_nodes=None) -> dict[int, list[CodedPacket]]:
    """Push m source packets through g with random linear network coding.

    Packet j enters at injection_nodes[j] (default: the j-th graph source).
    Nodes holding a single packet relay it unchanged; others send uniformly
    random combinations, zero coefficients included. Returns the packets
    each receiver collected with their global coding vectors.
    """
    GF = gf_field(q)
    payloads = np.atleast_2d(np.asarray(active_packets, dtype=np.int64))
    m, length = payloads.shape
    if injection_nodes is None:
        if len(g.sources) < m:
            raise ValueError(f"{m} packets but only {len(g.sources)} sources")
        injection_nodes = g.sources[:m]
    if len(injection_nodes) != m:
        raise ValueError("need one injection node per packet")

    for receiver in g.receivers:
        cut = min_cut(g, set(injection_nodes), receiver)
        if cut < m:
            logger.warning("receiver %d min-cut %d < %d active sources; decoding cannot succeed", receiver, cut, m)

    rng = derive_rng(seed, "rlnc")
    injected = defaultdict(list)
    for j, node in enumerate(injection_nodes):
        injected[node].append((np.eye(m, dtype=np.int64)[j], payloads[j]))
    received = defaultdict(list)

    for node in g.topological_order():
        available = injected[node] + received[node]
        if not available:
            continue
        vectors = GF(np.array([vector for vector, _ in available]))
        data = GF(np.array([payload for _, payload in available]))
        for edge in g.out_edges(node):
            if len(available) == 1:
                coefficients = GF.Ones((edge.capacity, 1))
            else:
                coefficients = GF.Random((edge.capacity, len(available)), seed=rng)
            out_vectors = _raw(coefficients @ vectors)
            out_data = _raw(coefficients @ data)
            received[edge.v].extend(zip(out_vectors, out_data))

    return {
        receiver: [CodedPacket(payload=GF(payload), coding_vector=GF(vector)) for vector, payload in received[receiver]]
        for receiver in g.receivers
    }


def receiver_decode(packets, m: int | None = None) -> galois.FieldArray:
    """Gaussian elimination on [C | P]; the m x L original payloads."""
    if not packets:
        raise RankDeficientError(0, m or 0)
    GF = type(packets[0].coding_vector)
    m = m or packets[0].coding_vector.size
    vectors = np.array([_raw(packet.coding_vector) for packet in packets])
    data = np.array([_raw(packet.payload) for packet in packets])
    rank = int(np.linalg.matrix_rank(GF(vectors)))
    if rank < m:
        raise RankDeficientError(rank, m)
    reduced = GF(np.hstack([vectors, data])).row_reduce(ncols=m)
    return reduced[:m, m:]


@dataclass(frozen=True)
class Quantizer:
    """Uniform fixed-point grid on [-bound, bound]."""

    bound: float
    bits: int = settings.QUANTIZER_BITS

    def __post_init__(self):
        if self.bound <= 0:
            raise ValueError("quantizer bound must be > 0")

    @classmethod
    def for_ensemble(cls, ens: SourceEnsemble, bits: int = settings.QUANTIZER_BITS) -> "Quantizer":
        """Bound |mu_i| from the transform and the largest latent level."""
        phi = np.abs(ens.transform.entries)
        if ens.mode is SourceMode.FIXED_K:
            bound = max(ens.k, 1) * float(phi.max()) * ens.levels
        else:
            bound = float(phi.sum(axis=1).max()) * ens.levels
        return cls(bound=bound, bits=bits)

    @property
    def step(self) -> float:
        return 2.0 * self.bound / (2**self.bits - 1)

    def encode(self, values) -> np.ndarray:
        codes = np.rint((np.asarray(values, dtype=float) + self.bound) / self.step)
        return np.clip(codes, 0, 2**self.bits - 1).astype(np.int64)

    def decode(self, codes) -> np.ndarray:
        return np.asarray(codes, dtype=float) * self.step - self.bound


def symbols_per_value(q: int, bits: int = settings.QUANTIZER_BITS) -> int:
    return math.ceil(bits / q)


def pack_symbols(codes, q: int, bits: int = settings.QUANTIZER_BITS) -> np.ndarray:
    """Split each code into base-2^q digits, least significant first."""
    codes = np.asarray(codes, dtype=np.int64)
    shifts = q * np.arange(symbols_per_value(q, bits), dtype=np.int64)
    return ((codes[:, None] >> shifts) & (2**q - 1)).reshape(-1)


def unpack_symbols(symbols, q: int, bits: int = settings.QUANTIZER_BITS) -> np.ndarray:
    digits = np.asarray(symbols, dtype=np.int64).reshape(-1, symbols_per_value(q, bits))
    shifts = q * np.arange(digits.shape[1], dtype=np.int64)
    return (digits << shifts).sum(axis=1)


def injection_nodes_for(g: NetworkGraph, ens: SourceEnsemble, active: ActiveSet) -> list[int]:
    """Graph node of each active source.

    A graph with one source node per ensemble source keeps the indices;
    otherwise the j-th active source is placed on the j-th graph source.
    """
    if len(g.sources) == ens.n:
        return [g.sources[i] for i in active.indices]
    if len(g.sources) < active.m:
        raise ValueError(f"graph has {len(g.sources)} sources for {active.m} active ones")
    return list(g.sources[: active.m])


def sdcic_multicast_roundtrip(
    ens: SourceEnsemble,
    g: NetworkGraph,
    active: ActiveSet,
    t: int,
    seed: int,
    q: int = settings.DEFAULT_FIELD_BITS,
    rip_samples: int = settings.DEFAULT_RIP_SAMPLES,
) -> list[SchemeReport]:
    """Quantise mu_{t,S}, network-code it to every receiver, then decode each.

    A receiver succeeds when its rebuilt mu_t is within the multicast
    tolerance of the truth.
    """
    delta = check_active_rip(ens, active, seed, rip_samples) if rip_samples else None
    msg = sample_messages(ens, t, seed)
    transport = transport_active(ens, msg, active)
    quantizer = Quantizer.for_ensemble(ens)
    packets = np.array([pack_symbols(quantizer.encode([value]), q) for value in transport.values])
    nodes = injection_nodes_for(g, ens, active)
    collected = rlnc_session(g, packets, q, seed, injection_nodes=nodes)

    reports = []
    for receiver in g.receivers:
        cut = min_cut(g, set(nodes), receiver)
        extras = {"min_cut": cut, "field_bits": q, "rip_delta_2k": delta}
        try:
            decoded = receiver_decode(collected[receiver], active.m)
        except RankDeficientError as error:
            logger.debug("receiver %d: %s", receiver, error)
            extras.update(rank=error.rank, status="rank_deficient")
            reports.append(
                SchemeReport(SchemeKind.SDCIC, transport.bits, None, False, seed, receiver=receiver, extras=extras)
            )
            continue

        values = quantizer.decode(np.array([unpack_symbols(row, q)[0] for row in _raw(decoded)]))
        result, recovered = cs_decode(ens, active, values)
        error = float(np.max(np.abs(recovered - msg.observed)))
        extras.update(rank=active.m, status=result.status.value, max_error=error)
        reports.append(
            SchemeReport(
                scheme=SchemeKind.SDCIC,
                min_cut_rate=transport.bits,
                decode_op_count=transport.op_count + result.op_count,
                success=result.ok and error <= settings.MULTICAST_TOLERANCE,
                trial_seed=seed,
                receiver=receiver,
                extras=extras,
            )
        )
    return reports


_DECODERS = {
    SchemeKind.SDCIC: "network decoding + CS decoding",
    SchemeKind.SLEPIAN_WOLF: "minimum-entropy decoding over all n sources",
    SchemeKind.SDC_PLUS_SW: "minimum-entropy decoding over m sources + CS decoding",
    SchemeKind.NAIVE: "network decoding",
}


def multicast_rate_table(ens: SourceEnsemble, m: int) -> list[SchemeReport]:
    """Rates per receiver for multicast; identical to the tree, decoders differ."""
    return [replace(report, extras={"decoder": _DECODERS[report.scheme]}) for report in rate_table(ens, m)]
