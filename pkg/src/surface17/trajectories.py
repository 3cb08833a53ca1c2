"""Stochastic Kraus-unraveling simulation on exact statevectors.

Each trajectory holds a pure 17-qubit state (2^17 amplitudes).  Noise
channels are unraveled stochastically: Kraus operator k is applied with
probability ||K_k psi||^2 followed by renormalization, so the trajectory
average reproduces the density-operator evolution exactly in
expectation.  Entangling gates are exact unitaries.  The final readout
samples all 17 commuting single-qubit measurements jointly from the
Born distribution.

Channels whose Kraus operators form a Pauli mixture (detected at
construction) take a fast sampling path: the branch probabilities of a
Pauli mixture are state-independent, so the branch index can be drawn
directly and applied as a cheap Pauli update.  Non-Pauli channels go
through the generic branch-norm path.

Trajectories are batched for throughput and drawn from counter-based
Philox streams keyed by (master_seed, chunk_index), giving bit-identical
results for a fixed seed regardless of worker count.

A dense density-operator oracle for up to 6 qubits (channels applied
through their superoperator tensors) validates the unraveling in tests.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channels import NoiseParams, QuantumChannel, channel_tensor, gate_noise_channel, idle_channel
from .layout import BLUE, N_DATA, N_QUBITS, WHITE, CodeLayout
from .pauli_mc import N_SYNDROMES, CircuitModel, JointCounts, RunRecord, resolve_workers

TRAJ_CHUNK = 64

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)

NORM_TOL = 1e-10
UNDERFLOW_EPS = 1e-14


class ChannelUnderflowError(RuntimeError):
    """All Kraus branch norms vanished; the channel is broken."""


@dataclass(frozen=True, eq=False)
class TrajectoryConfig:
    """Channel assignments for every noise location of the experiment.

    One channel object per category; the circuit locations (which qubit,
    which round) come from the layout's schedule, mirroring the noise
    placement of the Pauli-frame simulator: preparation flips on all
    qubits, per-round depolarizing on gated qubits and one idle segment
    on idle qubits, measurement flips on all qubits.
    """

    prep: QuantumChannel
    idle: QuantumChannel
    gate_noise: QuantumChannel
    meas: QuantumChannel
    channel_mode: str
    params: NoiseParams
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("prep", "idle", "gate_noise", "meas"):
            ch = getattr(self, name)
            if ch.arity != 1:
                raise ValueError(f"{name} channel must be single-qubit")

    @staticmethod
    def pauli(params: NoiseParams) -> "TrajectoryConfig":
        """Pauli-mixture channels identical to the Pauli-frame model."""
        return TrajectoryConfig(
            prep=QuantumChannel.prep_or_meas_flips(params.p),
            idle=QuantumChannel.pauli_mixture(params.idle, name="idle_pauli"),
            gate_noise=QuantumChannel.pauli_mixture(params.depolarizing, name="depol"),
            meas=QuantumChannel.prep_or_meas_flips(params.m),
            channel_mode="pauli",
            params=params,
        )

    @staticmethod
    def general(params: NoiseParams) -> "TrajectoryConfig":
        """Lindblad-integrated idle and gate-noise channels; preparation
        and measurement noise stay classical flips."""
        from .channels import lindblad_rates
        rates = lindblad_rates(params)
        meta = {"gamma": rates.gamma, "phi": rates.phi, "omega": rates.omega,
                "idle_duration": rates.idle_duration,
                "depol_duration": rates.depol_duration}
        return TrajectoryConfig(
            prep=QuantumChannel.prep_or_meas_flips(params.p),
            idle=idle_channel(params, rates),
            gate_noise=gate_noise_channel(params, rates),
            meas=QuantumChannel.prep_or_meas_flips(params.m),
            channel_mode="general",
            params=params,
            metadata=meta,
        )


# ---------------------------------------------------------------------------
# Batched statevector primitives.  States have shape (B, 2**n); qubit q is
# bit q of the amplitude index (qubit 0 least significant).


def _views(psi: np.ndarray, q: int) -> tuple[np.ndarray, np.ndarray]:
    """(batch, outer, 2, inner) views of the two q-subspaces."""
    b, dim = psi.shape
    inner = 1 << q
    v = psi.reshape(b, dim // (2 * inner), 2, inner)
    return v[:, :, 0, :], v[:, :, 1, :]


def apply_unitary_1q(psi: np.ndarray, u: np.ndarray, q: int) -> None:
    v0, v1 = _views(psi, q)
    t = v0.copy()
    v0 *= u[0, 0]
    v0 += u[0, 1] * v1
    v1 *= u[1, 1]
    v1 += u[1, 0] * t


def apply_pauli(psi: np.ndarray, pauli: str, q: int) -> None:
    v0, v1 = _views(psi, q)
    if pauli == "X":
        t = v0.copy()
        v0[...] = v1
        v1[...] = t
    elif pauli == "Z":
        v1 *= -1.0
    elif pauli == "Y":
        t = v0.copy()
        v0[...] = -1j * v1
        v1[...] = 1j * t
    elif pauli != "I":
        raise ValueError(f"bad Pauli {pauli!r}")


def apply_cnot(psi: np.ndarray, control: int, target: int) -> None:
    b, dim = psi.shape
    hi, lo = max(control, target), min(control, target)
    v = psi.reshape(b, dim >> (hi + 1), 2, (1 << hi) >> (lo + 1), 2, 1 << lo)
    c_axis = 2 if hi == control else 4
    block = v[:, :, 1, :, :, :] if c_axis == 2 else v[:, :, :, :, 1, :]
    if c_axis == 2:
        t0 = block[:, :, :, 0, :]
        t1 = block[:, :, :, 1, :]
    else:
        t0 = block[:, :, 0, :, :]
        t1 = block[:, :, 1, :, :]
    tmp = t0.copy()
    t0[...] = t1
    t1[...] = tmp


def apply_xc(psi: np.ndarray, control: int, target: int) -> None:
    """CNOT controlled on the |+>/|-> states of the control qubit."""
    apply_unitary_1q(psi, _H, control)
    apply_cnot(psi, control, target)
    apply_unitary_1q(psi, _H, control)


def _apply_kraus_to_rows(psi: np.ndarray, rows: np.ndarray,
                         k: np.ndarray, q: int) -> None:
    """Apply 2x2 Kraus k to selected batch rows and renormalize them."""
    sub = psi[rows]
    v0, v1 = _views(sub, q)
    t = v0.copy()
    v0 *= k[0, 0]
    v0 += k[0, 1] * v1
    v1 *= k[1, 1]
    v1 += k[1, 0] * t
    norms = np.sqrt(np.einsum("bi,bi->b", sub.conj(), sub).real)
    if np.any(norms < UNDERFLOW_EPS):
        raise ChannelUnderflowError("Kraus branch norm underflow")
    sub /= norms[:, None]
    psi[rows] = sub


def apply_kraus_stochastic(psi: np.ndarray, channel: QuantumChannel, q: int,
                           rng: np.random.Generator) -> None:
    """Sample one Kraus branch per batch row with probability
    ||K_k psi||^2, apply it and renormalize, in place.

    Consumes exactly one rng.random(batch) draw (plus no state-dependent
    draws) on the Pauli fast path, and one draw on the generic path, so
    the stream layout is fixed per location.
    """
    b = psi.shape[0]
    u = rng.random(b)
    probs = channel.pauli_mixture_probs
    if probs is not None:
        edges = np.array([probs.px, probs.px + probs.py, probs.total])
        choice = np.searchsorted(edges, u, side="right")  # 0..3 -> X,Y,Z,I
        for idx, pauli in enumerate("XYZ"):
            rows = np.nonzero(choice == idx)[0]
            if rows.size:
                sub = psi[rows]
                apply_pauli(sub, pauli, q)
                psi[rows] = sub
        return

    # Generic path: per-row Gram matrix of the target qubit gives every
    # branch norm in one pass (g[d, e] = sum psi_d psi*_e over other axes).
    dim = psi.shape[1]
    m = psi.reshape(b, dim // (2 << q), 2, 1 << q)
    g = np.einsum("badi,baei->bde", m, m.conj())
    ks = np.stack(channel.kraus)
    branch = np.einsum("kcd,bde,kce->bk", ks, g, ks.conj()).real
    total = branch.sum(axis=1)
    if np.any(total < UNDERFLOW_EPS):
        raise ChannelUnderflowError("all Kraus branch norms vanished")
    cum = np.cumsum(branch / total[:, None], axis=1)
    choice = (cum < u[:, None]).sum(axis=1)
    choice = np.minimum(choice, len(ks) - 1)
    for k_idx in range(len(ks)):
        rows = np.nonzero(choice == k_idx)[0]
        if rows.size:
            _apply_kraus_to_rows(psi, rows, ks[k_idx], q)


def measure_all(psi: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Jointly sample a computational-basis outcome for every qubit.

    Equivalent to sequential projective measurements of all qubits (the
    observables commute); returns (batch, n_qubits) uint8 outcome bits.
    """
    b, dim = psi.shape
    n = dim.bit_length() - 1
    probs = (psi.conj() * psi).real
    cum = np.cumsum(probs, axis=1)
    u = rng.random(b) * cum[:, -1]
    idx = np.minimum((cum < u[:, None]).sum(axis=1), dim - 1)
    bits = (idx[:, None] >> np.arange(n)[None, :]) & 1
    return bits.astype(np.uint8)


def measure_qubit(psi: np.ndarray, q: int, rng: np.random.Generator) -> np.ndarray:
    """Projectively measure one qubit (Z basis) with state collapse."""
    v0, v1 = _views(psi, q)
    p1 = np.einsum("boi,boi->b", v1.conj(), v1).real
    outcome = (rng.random(psi.shape[0]) < p1).astype(np.uint8)
    zero_rows = np.nonzero(outcome == 0)[0]
    one_rows = np.nonzero(outcome == 1)[0]
    if zero_rows.size:
        sub = psi[zero_rows]
        s0, s1 = _views(sub, q)
        s1[...] = 0
        sub /= np.sqrt(np.einsum("bi,bi->b", sub.conj(), sub).real)[:, None]
        psi[zero_rows] = sub
    if one_rows.size:
        sub = psi[one_rows]
        s0, s1 = _views(sub, q)
        s0[...] = 0
        sub /= np.sqrt(np.einsum("bi,bi->b", sub.conj(), sub).real)[:, None]
        psi[one_rows] = sub
    return outcome


# ---------------------------------------------------------------------------
# Experiment pipeline.


def _initial_state(layout: CodeLayout, basis: str) -> np.ndarray:
    """Product state preparing the logical eigenstate: |0> everywhere,
    with |+> on X-frame data qubits (all data for an X-basis run,
    Hadamard-frame-adjusted for the fig1b variant)."""
    plus = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2)
    zero = np.array([1.0, 0.0], dtype=complex)
    state = np.array([1.0], dtype=complex)
    for q in range(N_QUBITS - 1, -1, -1):
        state = np.kron(state, plus if q in _x_frame_qubits(layout, basis) else zero)
    return state


def _x_frame_qubits(layout: CodeLayout, basis: str) -> frozenset[int]:
    """Data qubits prepared and read out in the X basis."""
    if basis == "X":
        return frozenset(set(range(N_DATA)) - layout.hframe)
    return frozenset(layout.hframe)


def _run_chunk(model: CircuitModel, config: TrajectoryConfig, batch: int,
               rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    layout = model.layout
    psi = np.tile(_initial_state(layout, model.basis), (batch, 1))

    for q in range(N_QUBITS):
        apply_kraus_stochastic(psi, config.prep, q, rng)
    for rnd in range(4):
        gated = model.gated[rnd]
        for q in range(N_QUBITS):
            ch = config.gate_noise if gated[q] else config.idle
            apply_kraus_stochastic(psi, ch, q, rng)
        for label, d, a in model.gates[rnd]:
            if label == "Z":
                apply_cnot(psi, d, a)
            else:
                apply_xc(psi, d, a)
    for q in range(N_QUBITS):
        apply_kraus_stochastic(psi, config.meas, q, rng)

    for q in _x_frame_qubits(layout, model.basis):
        apply_unitary_1q(psi, _H, q)
    bits = measure_all(psi, rng)

    syndrome = np.zeros(batch, dtype=np.uint16)
    for i in range(4):
        syndrome |= bits[:, model.relevant_ancillas[i]].astype(np.uint16) << i
    supports = np.zeros((4, N_DATA), dtype=np.uint8)
    for s in layout.relevant_stabilizers(model.basis):
        for q in s.support:
            supports[s.kind_index, q] = 1
    readout = (bits[:, :N_DATA] @ supports.T) & 1
    for i in range(4):
        syndrome |= readout[:, i].astype(np.uint16) << (4 + i)
    logical_mask = np.zeros(N_DATA, dtype=np.uint8)
    for q in layout.measured_logical(model.basis).support:
        logical_mask[q] = 1
    flip = (bits[:, :N_DATA] @ logical_mask) & 1
    return syndrome, flip.astype(np.uint8)


def run_trajectory(layout: CodeLayout, config: TrajectoryConfig, basis: str,
                   rng: np.random.Generator) -> RunRecord:
    """Simulate one trajectory and return its RunRecord."""
    model = CircuitModel.build(layout, basis)
    syndrome, flip = _run_chunk(model, config, 1, rng)
    return RunRecord(int(syndrome[0]), int(flip[0]))


def _traj_chunk_rng(master_seed: int, chunk_index: int) -> np.random.Generator:
    key = np.array([master_seed & 0xFFFFFFFFFFFFFFFF, chunk_index],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _traj_spans(n: int) -> list[tuple[int, int]]:
    spans = []
    start = idx = 0
    while start < n:
        size = min(TRAJ_CHUNK, n - start)
        spans.append((idx, size))
        start += size
        idx += 1
    return spans


def _traj_worker(args) -> np.ndarray:
    layout, config, basis, master_seed, chunk_index, size = args
    model = CircuitModel.build(layout, basis)
    syndrome, flip = _run_chunk(model, config, size,
                                _traj_chunk_rng(master_seed, chunk_index))
    joint = syndrome.astype(np.int64) * 2 + flip
    return np.bincount(joint, minlength=2 * N_SYNDROMES).reshape(N_SYNDROMES, 2)


def estimate_joint(layout: CodeLayout, config: TrajectoryConfig, basis: str,
                   n_trajectories: int, master_seed: int,
                   n_workers: int | None = None) -> JointCounts:
    """Aggregate trajectories into JointCounts under the same seeding
    contract as the Pauli-frame sampler."""
    if n_trajectories < 1:
        raise ValueError("n_trajectories must be >= 1")
    n_workers = resolve_workers(n_workers)
    spans = _traj_spans(n_trajectories)
    total = np.zeros((N_SYNDROMES, 2), dtype=np.int64)
    if n_workers == 1:
        model = CircuitModel.build(layout, basis)
        for chunk_index, size in spans:
            syndrome, flip = _run_chunk(model, config, size,
                                        _traj_chunk_rng(master_seed, chunk_index))
            joint = syndrome.astype(np.int64) * 2 + flip
            total += np.bincount(joint, minlength=2 * N_SYNDROMES).reshape(N_SYNDROMES, 2)
    else:
        tasks = [(layout, config, basis, master_seed, idx, size)
                 for idx, size in spans]
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for counts in pool.map(_traj_worker, tasks, chunksize=4):
                total += counts
    meta = {"params": repr(config.params.to_dict()), "seed": str(master_seed),
            "layout": f"variant={layout.variant} measured_set={layout.measured_set}",
            "channel_mode": config.channel_mode}
    meta.update({k: repr(v) for k, v in config.metadata.items()})
    return JointCounts(total, basis, meta)


# ---------------------------------------------------------------------------
# Dense density-operator oracle for small systems.


def dense_channel_oracle(n_qubits: int, circuit: list[tuple[str, object, tuple[int, ...]]],
                         rho0: np.ndarray | None = None) -> np.ndarray:
    """Exactly evolve a density operator through unitaries and channels.

    circuit entries are ("unitary", U, targets) or ("channel", ch,
    targets); channels act through their superoperator tensor.
    Limited to n_qubits <= 6.
    """
    if n_qubits > 6:
        raise ValueError("dense oracle limited to 6 qubits")
    dim = 2 ** n_qubits
    if rho0 is None:
        rho = np.zeros((dim, dim), dtype=complex)
        rho[0, 0] = 1.0
    else:
        rho = np.asarray(rho0, dtype=complex).copy()

    for op, payload, targets in circuit:
        if op == "unitary":
            u = _embed_unitary(np.asarray(payload, dtype=complex), targets, n_qubits)
            rho = u @ rho @ u.conj().T
        elif op == "channel":
            tensor = channel_tensor(payload)
            rho = _apply_tensor_dense(rho, tensor, targets, n_qubits)
        else:
            raise ValueError(f"bad circuit op {op!r}")
    return rho


def _embed_unitary(u: np.ndarray, targets: tuple[int, ...], n: int) -> np.ndarray:
    """Expand a 1- or 2-qubit unitary to the full Hilbert space."""
    dim = 2 ** n
    full = np.zeros((dim, dim), dtype=complex)
    k = len(targets)
    for col in range(dim):
        sub_in = 0
        for b, q in enumerate(targets):
            sub_in |= ((col >> q) & 1) << (k - 1 - b)
        base = col
        for q in targets:
            base &= ~(1 << q)
        for sub_out in range(2 ** k):
            row = base
            for b, q in enumerate(targets):
                row |= ((sub_out >> (k - 1 - b)) & 1) << q
            full[row, col] += u[sub_out, sub_in]
    return full


def _apply_tensor_dense(rho: np.ndarray, tensor: np.ndarray,
                        targets: tuple[int, ...], n: int) -> np.ndarray:
    """Contract a channel tensor E[i, j, j', i'] with rho on the targets."""
    k = len(targets)
    d = 2 ** k
    dim = 2 ** n
    t = tensor.reshape(d, d, d, d)
    out = np.zeros_like(rho)
    mask = 0
    for q in targets:
        mask |= 1 << q

    def sub_index(full: int) -> int:
        s = 0
        for b, q in enumerate(targets):
            s |= ((full >> q) & 1) << (k - 1 - b)
        return s

    def with_sub(full: int, sub: int) -> int:
        out_idx = full & ~mask
        for b, q in enumerate(targets):
            out_idx |= ((sub >> (k - 1 - b)) & 1) << q
        return out_idx

    for row in range(dim):
        j = sub_index(row)
        for col in range(dim):
            jp = sub_index(col)
            val = rho[row, col]
            if val == 0:
                continue
            for i in range(d):
                r2 = with_sub(row, i)
                for ip in range(d):
                    c2 = with_sub(col, ip)
                    out[r2, c2] += t[i, j, jp, ip] * val
    return out
