"""Pauli-frame Monte Carlo simulation of the two-round experiment.

A frame is the accumulated Pauli error on all 17 qubits, tracked as X/Z
bit arrays and conjugated through the entangling gates instead of
simulating quantum states.  One sample walks through six noise stages —
preparation flips, four gate rounds (depolarizing on gated qubits, one
idle decay segment on the rest), measurement flips — and reads out an
8-bit syndrome (4 ancilla-round bits plus 4 readout-round bits inferred
from the data measurements) and the logical flip.

Everything is vectorized over sample batches; batches draw from
counter-based Philox streams keyed by (master_seed, chunk_index), so
results are bit-identical for a fixed seed regardless of worker count.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channels import NoiseParams, PauliProbs
from .layout import BLUE, N_DATA, N_QUBITS, WHITE, CodeLayout

CHUNK_SAMPLES = 1 << 16

STAGES = ("prep", "round0", "round1", "round2", "round3", "meas")
N_STAGES = len(STAGES)
N_SYNDROMES = 256


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one run: 8-bit syndrome and the logical flip bit.

    Syndrome bits 0-3 hold the ancilla round (relevant stabilizers in id
    order), bits 4-7 the readout-inferred round.
    """

    syndrome: int
    logical_flip: int


@dataclass
class JointCounts:
    """Empirical counts over (syndrome, logical flip) for one basis."""

    counts: np.ndarray  # (256, 2) int64: columns no-flip, flip
    basis: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (N_SYNDROMES, 2):
            raise ValueError(f"counts must be (256, 2), got {self.counts.shape}")

    @property
    def total_samples(self) -> int:
        return int(self.counts.sum())

    def to_text(self) -> str:
        lines = ["# surface17 joint counts", f"# basis: {self.basis}",
                 f"# total_samples: {self.total_samples}"]
        for key in sorted(self.meta):
            lines.append(f"# {key}: {self.meta[key]}")
        lines.append("# columns: syndrome count_noflip count_flip")
        for s in range(N_SYNDROMES):
            lines.append(f"{s} {self.counts[s, 0]} {self.counts[s, 1]}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "JointCounts":
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
                    elif key not in ("columns", "total_samples") and key != "surface17 joint counts":
                        meta[key] = val
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"bad counts row: {line!r}")
            s, c0, c1 = int(parts[0]), int(parts[1]), int(parts[2])
            counts[s, 0] = c0
            counts[s, 1] = c1
        if not basis:
            raise ValueError("counts file missing basis header")
        return JointCounts(counts, basis, meta)


@dataclass(frozen=True, eq=False)
class CircuitModel:
    """Precompiled gate structure and readout maps for (layout, basis)."""

    layout: CodeLayout
    basis: str
    # gates[r] is a list of (collect_label, data_index, ancilla_index);
    # collect_label "Z" gates are plain CNOTs (data controls in the Z
    # basis), "X" gates are CNOTs controlled on |+>/|-> of the data qubit.
    gates: tuple[tuple[tuple[str, int, int], ...], ...]
    gated: np.ndarray  # (4, 17) bool, True where the qubit is in a gate
    relevant_ancillas: np.ndarray  # (4,) global indices, kind_index order
    stab_x: np.ndarray  # (4, 9) uint8 symplectic rows of relevant stabilizers
    stab_z: np.ndarray  # (4, 9)
    logical_x: np.ndarray  # (9,) uint8
    logical_z: np.ndarray  # (9,)

    @staticmethod
    def build(layout: CodeLayout, basis: str) -> "CircuitModel":
        stab_by_id = {s.id: s for s in layout.stabilizers}
        gates = []
        gated = np.zeros((4, N_QUBITS), dtype=bool)
        for rnd in range(4):
            round_gates = []
            for g in layout.gates_in_round(rnd, basis):
                label = stab_by_id[g.stabilizer_id].op.label(g.data)
                round_gates.append((label, g.data, g.ancilla))
                gated[rnd, g.data] = True
                gated[rnd, g.ancilla] = True
            gates.append(tuple(round_gates))
        relevant = layout.relevant_stabilizers(basis)
        anc = np.array([s.ancilla for s in relevant], dtype=np.int64)
        stab_x = np.zeros((4, N_DATA), dtype=np.uint8)
        stab_z = np.zeros((4, N_DATA), dtype=np.uint8)
        for s in relevant:
            for q in range(N_DATA):
                stab_x[s.kind_index, q] = (s.op.x_mask >> q) & 1
                stab_z[s.kind_index, q] = (s.op.z_mask >> q) & 1
        logical = layout.measured_logical(basis)
        lx = np.array([(logical.op.x_mask >> q) & 1 for q in range(N_DATA)], dtype=np.uint8)
        lz = np.array([(logical.op.z_mask >> q) & 1 for q in range(N_DATA)], dtype=np.uint8)
        return CircuitModel(layout, basis, tuple(gates), gated, anc,
                            stab_x, stab_z, lx, lz)


def location_probs(model: CircuitModel, params: NoiseParams) -> np.ndarray:
    """Per-location (stage, qubit) Pauli probabilities, shape (6, 17, 3).

    Preparation and measurement stages apply independent bit and phase
    flips (probability p resp. m each); gate rounds apply depolarizing
    g/3 to gated qubits and one idle segment to everything else.
    """
    probs = np.zeros((N_STAGES, N_QUBITS, 3))
    for stage, pr in ((0, params.p), (5, params.m)):
        probs[stage, :, 0] = pr * (1 - pr)  # X
        probs[stage, :, 1] = pr * pr        # Y
        probs[stage, :, 2] = pr * (1 - pr)  # Z
    idle = params.idle
    depol = params.depolarizing
    for rnd in range(4):
        stage = 1 + rnd
        g = model.gated[rnd]
        probs[stage, g] = (depol.px, depol.py, depol.pz)
        probs[stage, ~g] = (idle.px, idle.py, idle.pz)
    return probs


def _conjugate_through_round(model: CircuitModel, rnd: int,
                             x: np.ndarray, z: np.ndarray) -> None:
    """Push the frame through one transversal gate round, in place.

    Label-Z gates are CNOTs with the data qubit as control; label-X
    gates are CNOTs controlled on the |+>/|-> states of the data qubit
    (a CNOT conjugated by Hadamard on the control).
    """
    for label, d, a in model.gates[rnd]:
        if label == "Z":
            x[:, a] ^= x[:, d]
            z[:, d] ^= z[:, a]
        else:
            x[:, d] ^= z[:, a]
            x[:, a] ^= z[:, d]


def propagate(model: CircuitModel, stage_x: list[np.ndarray],
              stage_z: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Propagate per-stage error injections to (syndrome, logical_flip).

    stage_x[s] / stage_z[s] are (n, 17) uint8 arrays of X/Z components
    injected at stage s.  Returns (syndrome uint16 (n,), flip uint8 (n,)).
    """
    n = stage_x[0].shape[0]
    x = stage_x[0].copy()
    z = stage_z[0].copy()
    for rnd in range(4):
        x ^= stage_x[1 + rnd]
        z ^= stage_z[1 + rnd]
        _conjugate_through_round(model, rnd, x, z)
    x ^= stage_x[5]
    z ^= stage_z[5]

    syndrome = np.zeros(n, dtype=np.uint16)
    for i in range(4):
        syndrome |= (x[:, model.relevant_ancillas[i]] & 1).astype(np.uint16) << i
    xd = x[:, :N_DATA]
    zd = z[:, :N_DATA]
    readout = (xd @ model.stab_z.T + zd @ model.stab_x.T) & 1
    for i in range(4):
        syndrome |= readout[:, i].astype(np.uint16) << (4 + i)
    flip = ((xd @ model.logical_z + zd @ model.logical_x) & 1).astype(np.uint8)
    return syndrome, flip


def _sample_stage_masks(probs: np.ndarray, n: int,
                        rng: np.random.Generator) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Draw per-stage error masks; one uniform per (sample, stage, qubit)."""
    cum = np.cumsum(probs, axis=2)
    stage_x, stage_z = [], []
    for s in range(N_STAGES):
        u = rng.random((n, N_QUBITS))
        x_err = (u < cum[s, :, 1]).astype(np.uint8)           # X or Y
        z_err = ((u >= cum[s, :, 0]) & (u < cum[s, :, 2])).astype(np.uint8)  # Y or Z
        stage_x.append(x_err)
        stage_z.append(z_err)
    return stage_x, stage_z


def _chunk_rng(master_seed: int, chunk_index: int) -> np.random.Generator:
    key = np.array([master_seed & 0xFFFFFFFFFFFFFFFF, chunk_index],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _count_batch(model: CircuitModel, probs: np.ndarray, n: int,
                 rng: np.random.Generator) -> np.ndarray:
    stage_x, stage_z = _sample_stage_masks(probs, n, rng)
    syndrome, flip = propagate(model, stage_x, stage_z)
    joint = syndrome.astype(np.int64) * 2 + flip
    return np.bincount(joint, minlength=2 * N_SYNDROMES).reshape(N_SYNDROMES, 2)


def sample_run(layout: CodeLayout, params: NoiseParams, basis: str,
               rng: np.random.Generator) -> RunRecord:
    """Simulate a single run (thin wrapper over the batched path)."""
    model = CircuitModel.build(layout, basis)
    probs = location_probs(model, params)
    stage_x, stage_z = _sample_stage_masks(probs, 1, rng)
    syndrome, flip = propagate(model, stage_x, stage_z)
    return RunRecord(int(syndrome[0]), int(flip[0]))


def _chunk_spans(n_samples: int) -> list[tuple[int, int]]:
    spans = []
    start = 0
    idx = 0
    while start < n_samples:
        size = min(CHUNK_SAMPLES, n_samples - start)
        spans.append((idx, size))
        start += size
        idx += 1
    return spans


_WORKER_MODEL: dict = {}


def _worker_counts(args) -> np.ndarray:
    layout, params, basis, master_seed, chunk_index, size = args
    key = (id(layout), basis)
    model = _WORKER_MODEL.get(key)
    if model is None:
        model = CircuitModel.build(layout, basis)
        _WORKER_MODEL[key] = model
    probs = location_probs(model, params)
    return _count_batch(model, probs, size, _chunk_rng(master_seed, chunk_index))


def resolve_workers(n_workers: int | None) -> int:
    if n_workers is None:
        n_workers = int(os.environ.get("SURFACE17_WORKERS", "1"))
    return max(1, n_workers)


def sample_many(layout: CodeLayout, params: NoiseParams, basis: str,
                n_samples: int, master_seed: int,
                n_workers: int | None = None) -> JointCounts:
    """Aggregate n_samples independent runs into JointCounts.

    Deterministic for fixed (master_seed, n_samples) regardless of
    n_workers: samples are partitioned into fixed-size chunks and chunk
    j draws from Philox stream (master_seed, j).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    n_workers = resolve_workers(n_workers)
    spans = _chunk_spans(n_samples)
    total = np.zeros((N_SYNDROMES, 2), dtype=np.int64)
    if n_workers == 1:
        model = CircuitModel.build(layout, basis)
        probs = location_probs(model, params)
        for chunk_index, size in spans:
            total += _count_batch(model, probs, size,
                                  _chunk_rng(master_seed, chunk_index))
    else:
        tasks = [(layout, params, basis, master_seed, idx, size)
                 for idx, size in spans]
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for counts in pool.map(_worker_counts, tasks, chunksize=1):
                total += counts
    meta = {"params": _params_str(params), "seed": str(master_seed),
            "layout": f"variant={layout.variant} measured_set={layout.measured_set}",
            "channel_mode": "pauli"}
    return JointCounts(total, basis, meta)


def _params_str(params: NoiseParams) -> str:
    return (f"p={params.p!r} m={params.m!r} g={params.g!r} "
            f"t1_ratio={params.t1_ratio!r} t_ratio={params.t_ratio!r}")


def apply_faults(layout: CodeLayout, basis: str,
                 faults: list[tuple[str, int, str]]) -> RunRecord:
    """Deterministic run with injected faults and no stochastic noise.

    Each fault is (stage, qubit, pauli) with stage one of
    'prep', 'round0'..'round3', 'meas'; round faults are injected before
    that round's gates.
    """
    model = CircuitModel.build(layout, basis)
    stage_x = [np.zeros((1, N_QUBITS), dtype=np.uint8) for _ in range(N_STAGES)]
    stage_z = [np.zeros((1, N_QUBITS), dtype=np.uint8) for _ in range(N_STAGES)]
    for stage, qubit, pauli in faults:
        s = STAGES.index(stage)
        if pauli in ("X", "Y"):
            stage_x[s][0, qubit] ^= 1
        if pauli in ("Z", "Y"):
            stage_z[s][0, qubit] ^= 1
        if pauli not in "XYZ":
            raise ValueError(f"bad fault Pauli {pauli!r}")
    syndrome, flip = propagate(model, stage_x, stage_z)
    return RunRecord(int(syndrome[0]), int(flip[0]))


def fault_locations(model: CircuitModel, params: NoiseParams,
                    include_zero_prob: bool = False) -> list[tuple[int, int, PauliProbs]]:
    """Enumerable (stage, qubit, probs) locations of the circuit model."""
    probs = location_probs(model, params)
    locations = []
    for s in range(N_STAGES):
        for q in range(N_QUBITS):
            pp = PauliProbs(*probs[s, q])
            if include_zero_prob or pp.total > 0:
                locations.append((s, q, pp))
    return locations


def truncated_enumeration_oracle(layout: CodeLayout, params: NoiseParams,
                                 basis: str, max_weight: int
                                 ) -> tuple[np.ndarray, float]:
    """Exact joint distribution over configurations of at most max_weight
    faulty locations, plus an upper bound on the neglected mass.

    Returns (probs (256, 2) float64, neglected_mass).  Intended as a
    small-instance oracle; cost grows as (locations choose w) * 3^w.
    """
    if max_weight < 0 or max_weight > 3:
        raise ValueError("max_weight must be in 0..3")
    model = CircuitModel.build(layout, basis)
    locations = fault_locations(model, params)
    p0 = [max(0.0, 1.0 - pp.total) for (_, _, pp) in locations]
    base = math.prod(p0)

    joint = np.zeros((N_SYNDROMES, 2))
    joint[0, 0] += base
    enumerated = base

    for weight in range(1, max_weight + 1):
        batch_x, batch_z, batch_p = [], [], []
        for combo in itertools.combinations(range(len(locations)), weight):
            pauli_choices = []
            for li in combo:
                _, _, pp = locations[li]
                choices = [(c, pr) for c, pr in (("X", pp.px), ("Y", pp.py), ("Z", pp.pz))
                           if pr > 0]
                pauli_choices.append(choices)
            for assignment in itertools.product(*pauli_choices):
                prob = base
                sx = np.zeros((N_STAGES, N_QUBITS), dtype=np.uint8)
                sz = np.zeros((N_STAGES, N_QUBITS), dtype=np.uint8)
                for li, (pauli, pr) in zip(combo, assignment):
                    stage, qubit, _ = locations[li]
                    prob *= pr / p0[li]
                    if pauli in ("X", "Y"):
                        sx[stage, qubit] ^= 1
                    if pauli in ("Z", "Y"):
                        sz[stage, qubit] ^= 1
                batch_x.append(sx)
                batch_z.append(sz)
                batch_p.append(prob)
        if not batch_p:
            continue
        stage_x = [np.array([b[s] for b in batch_x], dtype=np.uint8)
                   for s in range(N_STAGES)]
        stage_z = [np.array([b[s] for b in batch_z], dtype=np.uint8)
                   for s in range(N_STAGES)]
        syndrome, flip = propagate(model, stage_x, stage_z)
        np.add.at(joint, (syndrome.astype(np.int64), flip.astype(np.int64)), batch_p)
        enumerated += float(np.sum(batch_p))

    return joint, max(0.0, 1.0 - enumerated)
