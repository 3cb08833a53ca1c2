"""Decoders over the 256-entry syndrome space and fidelity evaluation.

Two decoders are provided.  The optimal lookup table takes a majority
decision per syndrome from empirical (syndrome, flip) counts.  The
rule-based decoder converts the two syndrome rounds into defects (bits
that changed relative to the previous round), pairs them with
unit-weight matching rules over the plaquette adjacency graph, and any
defect that cannot be paired is attributed to an error at the nearest
code edge; the decision is the parity of matched corrections crossing
the measured logical operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .layout import CodeLayout
from .pauli_mc import N_SYNDROMES, JointCounts

KEEP, FLIP, TIE = 0, 1, 2
_DECISION_NAMES = {KEEP: "keep", FLIP: "flip", TIE: "tie"}
_DECISION_VALUES = {v: k for k, v in _DECISION_NAMES.items()}


@dataclass
class LookupTable:
    """Per-syndrome keep/flip decisions from empirical counts.

    Ties (equal counts, including unseen syndromes) are recorded as TIE
    and resolve to keep when decoding.
    """

    decisions: np.ndarray  # (256,) int8 of KEEP/FLIP/TIE
    counts: np.ndarray  # (256, 2) int64 snapshot of the source counts
    basis: str
    meta: dict

    def decide(self, syndrome: int) -> int:
        d = self.decisions[syndrome]
        return KEEP if d == TIE else int(d)

    def to_text(self) -> str:
        lines = ["# surface17 lookup table", f"# basis: {self.basis}"]
        for key in sorted(self.meta):
            lines.append(f"# {key}: {self.meta[key]}")
        lines.append("# bit order: bits 0-3 ancilla round, bits 4-7 readout round")
        lines.append("# columns: syndrome count_noflip count_flip decision")
        for s in range(N_SYNDROMES):
            lines.append(f"{s} {self.counts[s, 0]} {self.counts[s, 1]} "
                         f"{_DECISION_NAMES[int(self.decisions[s])]}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "LookupTable":
        decisions = np.full(N_SYNDROMES, TIE, dtype=np.int8)
        counts = np.zeros((N_SYNDROMES, 2), dtype=np.int64)
        basis = ""
        meta: dict = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, val = body.split(":", 1)
                    key, val = key.strip(), val.strip()
                    if key == "basis":
                        basis = val
                    elif key not in ("columns", "bit order"):
                        meta[key] = val
                continue
            s, c0, c1, dec = line.split()
            decisions[int(s)] = _DECISION_VALUES[dec]
            counts[int(s), 0] = int(c0)
            counts[int(s), 1] = int(c1)
        if not basis:
            raise ValueError("lookup table file missing basis header")
        return LookupTable(decisions, counts, basis, meta)


def build_lut(counts: JointCounts) -> LookupTable:
    """Majority decision per syndrome; unseen or tied syndromes are TIE."""
    if counts.total_samples < 1:
        raise ValueError("counts are empty")
    c = counts.counts
    decisions = np.full(N_SYNDROMES, TIE, dtype=np.int8)
    decisions[c[:, 1] > c[:, 0]] = FLIP
    decisions[c[:, 0] > c[:, 1]] = KEEP
    return LookupTable(decisions, c.copy(), counts.basis, dict(counts.meta))


def lut_fidelity(counts: JointCounts) -> float:
    """Success probability of the per-syndrome majority rule: the larger
    of the two counts per syndrome, summed and normalized."""
    total = counts.total_samples
    if total < 1:
        raise ValueError("counts are empty")
    return float(counts.counts.max(axis=1).sum()) / total


def marginalize_to_final_round(counts: JointCounts) -> JointCounts:
    """Sum counts over the ancilla-round bits, keeping readout bits.

    The result lives on syndromes with the low nibble zeroed; its
    lut_fidelity is the single-round code fidelity.
    """
    marg = np.zeros_like(counts.counts)
    idx = np.arange(N_SYNDROMES) & 0xF0
    np.add.at(marg, idx, counts.counts)
    meta = dict(counts.meta)
    meta["marginalized"] = "final_round_only"
    return JointCounts(marg, counts.basis, meta)


def split_counts(counts: JointCounts, seed: int) -> tuple[JointCounts, JointCounts]:
    """Split counts into two multinomial halves (train/test mode for
    quantifying lookup-table overfitting at finite samples)."""
    rng = np.random.default_rng(seed)
    flat = counts.counts.reshape(-1)
    half = rng.multivariate_hypergeometric(flat, int(flat.sum()) // 2)
    a = half.reshape(N_SYNDROMES, 2)
    b = counts.counts - a
    meta_a = dict(counts.meta, split="train")
    meta_b = dict(counts.meta, split="test")
    return JointCounts(a, counts.basis, meta_a), JointCounts(b, counts.basis, meta_b)


def holdout_fidelity(train: JointCounts, test: JointCounts) -> float:
    """Fidelity of the LUT built on train, evaluated on test counts."""
    lut = build_lut(train)
    dec = np.array([lut.decide(s) for s in range(N_SYNDROMES)])
    total = test.total_samples
    return float(test.counts[np.arange(N_SYNDROMES), dec].sum()) / total


@dataclass(frozen=True)
class DefectGraph:
    """Unit-weight defect adjacency for one stabilizer kind.

    Nodes 0..7 are (stabilizer kind-index, round) pairs node = i + 4*r;
    node 8 is the virtual boundary.  dist/parity give shortest path
    lengths and the logical-crossing parity of a canonical shortest path.
    """

    dist: np.ndarray  # (9, 9) int
    parity: np.ndarray  # (9, 9) uint8

    BOUNDARY = 8

    @staticmethod
    def build(layout: CodeLayout, basis: str) -> "DefectGraph":
        stabs = layout.relevant_stabilizers(basis)
        logical = set(layout.measured_logical(basis).support)
        supports = [set(s.support) for s in stabs]

        # Space-like adjacency: stabilizers of one kind sharing a data qubit.
        adj: dict[tuple[int, int], int] = {}
        for i, j in combinations(range(4), 2):
            shared = supports[i] & supports[j]
            if len(shared) > 1:
                raise ValueError(f"ambiguous adjacency between stabilizers {i},{j}")
            if shared:
                q = next(iter(shared))
                adj[(i, j)] = int(q in logical)
        # Boundary attachment: support qubits not shared with any neighbor.
        boundary_parity = {}
        for i in range(4):
            others = set().union(*(supports[j] for j in range(4) if j != i))
            edge_qubits = sorted(supports[i] - others)
            if not edge_qubits:
                raise ValueError(f"stabilizer {i} has no boundary qubit")
            parities = {int(q in logical) for q in edge_qubits}
            if len(parities) != 1:
                raise ValueError(f"stabilizer {i} boundary parity is ambiguous")
            boundary_parity[i] = parities.pop()

        n = 9
        big = 99
        dist = np.full((n, n), big, dtype=int)
        parity = np.zeros((n, n), dtype=np.uint8)
        np.fill_diagonal(dist, 0)

        def add_edge(u: int, v: int, par: int) -> None:
            if 1 < dist[u, v]:
                dist[u, v] = dist[v, u] = 1
                parity[u, v] = parity[v, u] = par

        for r in (0, 1):
            for (i, j), par in adj.items():
                add_edge(i + 4 * r, j + 4 * r, par)   # space-like
        for i in range(4):
            add_edge(i, i + 4, 0)                     # time-like
        for (i, j), par in adj.items():
            add_edge(i, j + 4, par)                   # diagonal space-time
            add_edge(j, i + 4, par)
        for r in (0, 1):
            for i in range(4):
                add_edge(i + 4 * r, DefectGraph.BOUNDARY, boundary_parity[i])

        # Floyd-Warshall with deterministic tie-breaking (first minimal path
        # found in fixed node order defines the parity).
        for k in range(n):
            for u in range(n):
                for v in range(n):
                    d = dist[u, k] + dist[k, v]
                    if d < dist[u, v]:
                        dist[u, v] = d
                        parity[u, v] = parity[u, k] ^ parity[k, v]
        return DefectGraph(dist, parity)


def syndrome_defects(syndrome: int) -> list[int]:
    """Defect nodes of a syndrome: ancilla-round bits set (vs the all-+1
    reference) and readout bits differing from the ancilla round."""
    defects = []
    for i in range(4):
        anc = (syndrome >> i) & 1
        readout = (syndrome >> (4 + i)) & 1
        if anc:
            defects.append(i)
        if anc != readout:
            defects.append(i + 4)
    return defects


def _match_defects(graph: DefectGraph, defects: list[int]) -> tuple[int, int]:
    """Minimum-total-weight pairing of defects (boundary allowed for any
    defect); returns (cost, logical parity).  Ties resolve to the first
    minimal assignment in lowest-node order."""
    if not defects:
        return 0, 0
    u = defects[0]
    rest = defects[1:]
    b = DefectGraph.BOUNDARY
    best_cost, best_par = None, 0
    options = [(graph.dist[u, b], graph.parity[u, b], rest)]
    for k, v in enumerate(rest):
        options.append((graph.dist[u, v], graph.parity[u, v],
                        rest[:k] + rest[k + 1:]))
    for cost, par, remaining in options:
        sub_cost, sub_par = _match_defects(graph, remaining)
        total = cost + sub_cost
        if best_cost is None or total < best_cost:
            best_cost = total
            best_par = par ^ sub_par
    return int(best_cost), int(best_par)


_TS_TABLES: dict[tuple[str, str], np.ndarray] = {}


def ts_decision_table(layout: CodeLayout, basis: str = "Z") -> np.ndarray:
    """All 256 rule-based decisions, cached per (variant, basis)."""
    key = (layout.variant, basis)
    table = _TS_TABLES.get(key)
    if table is None:
        graph = DefectGraph.build(layout, basis)
        table = np.zeros(N_SYNDROMES, dtype=np.int8)
        for s in range(N_SYNDROMES):
            _, par = _match_defects(graph, syndrome_defects(s))
            table[s] = FLIP if par else KEEP
        _TS_TABLES[key] = table
    return table


def ts_decode(syndrome: int, layout: CodeLayout, basis: str = "Z") -> int:
    """Rule-based decision (KEEP or FLIP) for one syndrome."""
    return int(ts_decision_table(layout, basis)[syndrome])


def ts_fidelity(counts: JointCounts, layout: CodeLayout) -> float:
    """Success probability of the rule-based decoder on the given counts."""
    total = counts.total_samples
    if total < 1:
        raise ValueError("counts are empty")
    dec = ts_decision_table(layout, counts.basis)
    return float(counts.counts[np.arange(N_SYNDROMES), dec].sum()) / total
