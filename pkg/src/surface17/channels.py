"""Noise parameters and quantum channels.

Two noise descriptions coexist:

* Pauli form: per-segment idle error probabilities from the decay law
  (bit-ish components from amplitude damping T1, phase from dephasing T2)
  and symmetric depolarizing strength g at entangling gates.
* General form: channels obtained by integrating a Lindblad generator
  with trivial Hamiltonian.  Idle noise uses jump operators sqrt(gamma)
  sigma+, sqrt(gamma) sigma- and sqrt(phi) sigma_z; gate noise uses
  sqrt(omega) sigma_{x,y,z}.

The generator rates fix no evolution duration by themselves.  The
durations used here are calibrated in closed form so that the Pauli
twirl of each general channel reproduces the Pauli form exactly: one
idle segment evolves for 2*t/T2 and one gate-noise application for 2
(both in units of T2).  See lindblad_rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import expm

from .validation import ValidationReport

CPTP_ATOL = 1e-10
CHOI_EIG_CLIP = -1e-12

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)   # |1><0|
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|
PAULIS_1Q = {"I": np.eye(2, dtype=complex), "X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z}


@dataclass(frozen=True)
class PauliProbs:
    """Probabilities of X, Y and Z errors for one noise application."""

    px: float
    py: float
    pz: float

    @property
    def total(self) -> float:
        return self.px + self.py + self.pz

    def __post_init__(self) -> None:
        for name in ("px", "py", "pz"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.total > 1.0 + 1e-12:
            raise ValueError(f"total error probability {self.total} exceeds 1")


@dataclass(frozen=True)
class NoiseParams:
    """Experiment noise point: p (prep), m (measurement), g (gate), timescales.

    Both bit- and phase-flip components of preparation and measurement
    noise use the same probability (p and m respectively).  Timescales
    are dimensionless: t1_ratio = T1/T2 and t_ratio = t/T2, where t is
    the total storage time split into four equal gate-round segments.
    """

    p: float = 0.0
    m: float = 0.0
    g: float = 0.0
    t1_ratio: float = 1e4
    t_ratio: float = 1e-3

    def __post_init__(self) -> None:
        for name in ("p", "m"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name}={v} outside [0, 1)")
        if not 0.0 <= self.g < 0.75:
            raise ValueError(f"g={self.g} outside [0, 0.75); the depolarizing "
                             "rate diverges at 3/4")
        if self.t_ratio < 0.0:
            raise ValueError(f"t_ratio={self.t_ratio} negative")
        if self.t1_ratio <= 0.0:
            raise ValueError(f"t1_ratio={self.t1_ratio} must be positive")
        if self.t1_ratio < 0.5:
            raise ValueError(f"t1_ratio={self.t1_ratio} < 1/2 makes the "
                             "dephasing rate negative")

    @property
    def idle(self) -> PauliProbs:
        return pauli_idle_probs(self.t_ratio, self.t1_ratio)

    @property
    def depolarizing(self) -> PauliProbs:
        return depolarizing_probs(self.g)

    def to_dict(self) -> dict[str, float]:
        return {"p": self.p, "m": self.m, "g": self.g,
                "t1_ratio": self.t1_ratio, "t_ratio": self.t_ratio}


def pauli_idle_probs(t_ratio: float, t1_ratio: float) -> PauliProbs:
    """Pauli approximation of one idle segment of duration t/4.

    dx = dy = (1 - exp(-t/(4*T1)))/4 and dz = (1 - exp(-t/(4*T2)))/2 - dx,
    with the physical decay sign convention.
    """
    if t_ratio < 0 or t1_ratio <= 0:
        raise ValueError("time ratios must be nonnegative (t1_ratio positive)")
    dx = (1.0 - math.exp(-t_ratio / (4.0 * t1_ratio))) / 4.0
    dz = (1.0 - math.exp(-t_ratio / 4.0)) / 2.0 - dx
    if dz < 0:
        raise ValueError(f"dz={dz} < 0: T1/T2={t1_ratio} below the valid "
                         "regime (requires T1 >= T2/2)")
    return PauliProbs(dx, dx, dz)


def depolarizing_probs(g: float) -> PauliProbs:
    """Symmetric per-qubit gate-noise probabilities (g/3 each)."""
    if not 0.0 <= g < 0.75:
        raise ValueError(f"g={g} outside [0, 0.75)")
    return PauliProbs(g / 3.0, g / 3.0, g / 3.0)


@dataclass(frozen=True)
class LindbladRates:
    """Generator rates plus the calibrated evolution durations (T2 units)."""

    gamma: float
    phi: float
    omega: float
    idle_duration: float
    depol_duration: float = 2.0

    def __post_init__(self) -> None:
        if self.gamma < 0 or self.omega < 0:
            raise ValueError("rates must be nonnegative")
        if self.phi < 0:
            raise ValueError(f"phi={self.phi} < 0: requires T1 >= T2/2")


def lindblad_rates(params: NoiseParams) -> LindbladRates:
    """Rates gamma = 1/(16 T1), phi = (1/(8 T2) - gamma)/2 and
    omega = -log(1 - 4g/3)/8, with durations calibrated so the twirled
    channels match pauli_idle_probs and depolarizing_probs exactly.

    Closed forms behind the calibration: the idle generator decays the
    z Bloch component as exp(-2*gamma*tau) and the transverse ones as
    exp(-(gamma + 2*phi)*tau); matching exp(-t/(4*T1)) and
    exp(-t/(4*T2)) per segment gives tau = 2*t/T2.  The depolarizing
    generator decays every component as exp(-4*omega*tau); matching
    1 - 4g/3 gives tau = 2.
    """
    gamma = 1.0 / (16.0 * params.t1_ratio)
    phi = 0.5 * (1.0 / 8.0 - gamma)
    omega = -math.log1p(-4.0 * params.g / 3.0) / 8.0
    return LindbladRates(gamma, phi, omega, idle_duration=2.0 * params.t_ratio)


def _kron_all(mats: list[np.ndarray]) -> np.ndarray:
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def pauli_matrix(labels: str) -> np.ndarray:
    """Tensor product of single-qubit Paulis, e.g. "XZ" or "Y"."""
    return _kron_all([PAULIS_1Q[c] for c in labels])


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """A CPTP map in Kraus form.

    Construction validates trace preservation and complete positivity to
    1e-10.  Channels are immutable and shareable across workers.
    """

    kraus: tuple[np.ndarray, ...]
    name: str = ""

    def __post_init__(self) -> None:
        if not self.kraus:
            raise ValueError("channel needs at least one Kraus operator")
        d = self.kraus[0].shape[0]
        if d not in (2, 4) or any(k.shape != (d, d) for k in self.kraus):
            raise ValueError("Kraus operators must be equal square 2^n matrices")
        object.__setattr__(self, "kraus",
                           tuple(np.asarray(k, dtype=complex) for k in self.kraus))
        report = self.validate()
        if not report:
            raise ValueError("; ".join(report.failures))

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    @property
    def arity(self) -> int:
        return 1 if self.dim == 2 else 2

    def validate(self, atol: float = CPTP_ATOL) -> ValidationReport:
        failures = []
        total = sum(k.conj().T @ k for k in self.kraus)
        tp_err = np.max(np.abs(total - np.eye(self.dim)))
        if tp_err > atol:
            failures.append(f"trace preservation violated by {tp_err:.3e}")
        eigs = np.linalg.eigvalsh(self.choi())
        if eigs.min() < -atol:
            failures.append(f"Choi matrix has eigenvalue {eigs.min():.3e}")
        return ValidationReport(not failures, tuple(failures))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.kraus)

    def superoperator(self) -> np.ndarray:
        """Row-stacked-vec superoperator: vec(E(rho)) = S vec(rho)."""
        return sum(np.kron(k, k.conj()) for k in self.kraus)

    def choi(self) -> np.ndarray:
        vecs = [k.reshape(-1) for k in self.kraus]
        return sum(np.outer(v, v.conj()) for v in vecs)

    def compose(self, other: "QuantumChannel") -> "QuantumChannel":
        """self after other (self applied second)."""
        kraus = tuple(a @ b for a in self.kraus for b in other.kraus)
        return QuantumChannel(kraus, name=f"{self.name}*{other.name}")

    @cached_property
    def pauli_mixture_probs(self) -> PauliProbs | None:
        """(px, py, pz) if this single-qubit channel is a Pauli mixture.

        A channel is a Pauli mixture iff its Pauli transfer matrix is
        diagonal; the simulators use this to take a cheap sampling path.
        """
        if self.arity != 1:
            return None
        r = pauli_transfer_matrix(self)
        if np.max(np.abs(r - np.diag(np.diag(r)))) > 1e-12:
            return None
        lx, ly, lz = r[1, 1].real, r[2, 2].real, r[3, 3].real
        px = max(0.0, (1 + lx - ly - lz) / 4)
        py = max(0.0, (1 - lx + ly - lz) / 4)
        pz = max(0.0, (1 - lx - ly + lz) / 4)
        return PauliProbs(px, py, pz)

    @staticmethod
    def identity(arity: int = 1, name: str = "identity") -> "QuantumChannel":
        return QuantumChannel((np.eye(2 ** arity, dtype=complex),), name=name)

    @staticmethod
    def pauli_mixture(probs: PauliProbs, name: str = "pauli") -> "QuantumChannel":
        p0 = 1.0 - probs.total
        kraus = []
        for pr, label in ((p0, "I"), (probs.px, "X"), (probs.py, "Y"), (probs.pz, "Z")):
            if pr > 0:
                kraus.append(math.sqrt(pr) * PAULIS_1Q[label])
        return QuantumChannel(tuple(kraus), name=name)

    @staticmethod
    def bit_flip(p: float) -> "QuantumChannel":
        return QuantumChannel.pauli_mixture(PauliProbs(p, 0.0, 0.0), name="bit_flip")

    @staticmethod
    def phase_flip(p: float) -> "QuantumChannel":
        return QuantumChannel.pauli_mixture(PauliProbs(0.0, 0.0, p), name="phase_flip")

    @staticmethod
    def prep_or_meas_flips(p: float) -> "QuantumChannel":
        """Independent bit flip and phase flip, each with probability p."""
        q = p * (1.0 - p)
        return QuantumChannel.pauli_mixture(PauliProbs(q, p * p, q), name="flips")

    @staticmethod
    def amplitude_damping(eta: float) -> "QuantumChannel":
        """Zero-temperature damping (sigma- jumps only); genuinely non-Pauli."""
        k0 = np.array([[1, 0], [0, math.sqrt(1 - eta)]], dtype=complex)
        k1 = np.array([[0, math.sqrt(eta)], [0, 0]], dtype=complex)
        return QuantumChannel((k0, k1), name="amp_damp")


def lindblad_superoperator(ops: list[tuple[float, np.ndarray]]) -> np.ndarray:
    """Liouvillian of sum_i r_i D[L_i] for a trivial Hamiltonian
    (row-stacked vec convention)."""
    d = ops[0][1].shape[0]
    eye = np.eye(d)
    liou = np.zeros((d * d, d * d), dtype=complex)
    for rate, L in ops:
        L = np.asarray(L, dtype=complex)
        LdL = L.conj().T @ L
        liou += rate * (np.kron(L, L.conj())
                        - 0.5 * np.kron(LdL, eye)
                        - 0.5 * np.kron(eye, LdL.T))
    return liou


def kraus_from_choi(choi: np.ndarray, clip: float = CHOI_EIG_CLIP) -> tuple[np.ndarray, ...]:
    """Eigendecompose a Choi matrix into Kraus operators.

    Eigenvalues in [clip, 0) are clipped to zero to absorb integrator
    noise; anything below clip is a genuine CP violation and raises.
    """
    d = int(round(math.sqrt(choi.shape[0])))
    vals, vecs = np.linalg.eigh(choi)
    if vals.min() < clip:
        raise ValueError(f"Choi eigenvalue {vals.min():.3e} below clip {clip:.0e}")
    kraus = []
    for val, vec in zip(vals, vecs.T):
        if val > 1e-14:
            kraus.append(math.sqrt(val) * vec.reshape(d, d))
    return tuple(kraus)


def solve_lindblad_channel(ops: list[tuple[float, np.ndarray]], duration: float,
                           name: str = "lindblad") -> QuantumChannel:
    """Integrate the Lindblad equation for the given duration and return
    the resulting CPTP channel in Kraus form (via the Choi matrix of the
    integrated superoperator)."""
    if duration < 0:
        raise ValueError("duration must be nonnegative")
    liou = lindblad_superoperator(ops)
    sup = expm(liou * duration)
    d = int(round(math.sqrt(sup.shape[0])))
    choi = sup.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
    choi = 0.5 * (choi + choi.conj().T)
    return QuantumChannel(kraus_from_choi(choi), name=name)


def idle_channel(params: NoiseParams, rates: LindbladRates | None = None) -> QuantumChannel:
    """General-noise channel for one idle segment."""
    rates = rates or lindblad_rates(params)
    ops = [(rates.gamma, SIGMA_PLUS), (rates.gamma, SIGMA_MINUS), (rates.phi, SIGMA_Z)]
    return solve_lindblad_channel(ops, rates.idle_duration, name="idle")


def gate_noise_channel(params: NoiseParams, rates: LindbladRates | None = None) -> QuantumChannel:
    """General-noise depolarizing channel applied per gated qubit."""
    rates = rates or lindblad_rates(params)
    ops = [(rates.omega, SIGMA_X), (rates.omega, SIGMA_Y), (rates.omega, SIGMA_Z)]
    return solve_lindblad_channel(ops, rates.depol_duration, name="gate_noise")


def channel_tensor(channel: QuantumChannel) -> np.ndarray:
    """Superoperator tensor E[i, j, j', i'] = <i| E(|j><j'|) |i'>."""
    d = channel.dim
    choi = channel.choi().reshape(d, d, d, d)  # indices (i, j, i', j')
    return choi.transpose(0, 1, 3, 2)


def kraus_from_tensor(tensor: np.ndarray) -> tuple[np.ndarray, ...]:
    """Invert channel_tensor back to Kraus form (round-trip companion)."""
    d = tensor.shape[0]
    choi = tensor.transpose(0, 1, 3, 2).reshape(d * d, d * d)
    return kraus_from_choi(0.5 * (choi + choi.conj().T))


def apply_tensor(tensor: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Apply a channel to a density matrix through its tensor form."""
    return np.einsum("ijkl,jk->il", tensor, rho)


def pauli_transfer_matrix(channel: QuantumChannel) -> np.ndarray:
    """R[a, b] = Tr(P_a E(P_b)) / d over the n-qubit Pauli basis."""
    labels_1q = "IXYZ"
    if channel.arity == 1:
        labels = list(labels_1q)
    else:
        labels = [a + b for a in labels_1q for b in labels_1q]
    d = channel.dim
    r = np.zeros((len(labels), len(labels)))
    images = {b: channel.apply(pauli_matrix(b)) for b in labels}
    for i, a in enumerate(labels):
        pa = pauli_matrix(a)
        for j, b in enumerate(labels):
            r[i, j] = np.trace(pa @ images[b]).real / d
    return r


def pauli_twirl(channel: QuantumChannel) -> PauliProbs:
    """Pauli-channel approximation of a single-qubit channel (PTM diagonal
    converted to error probabilities)."""
    if channel.arity != 1:
        raise ValueError("pauli_twirl is defined for single-qubit channels")
    r = pauli_transfer_matrix(channel)
    lx, ly, lz = r[1, 1], r[2, 2], r[3, 3]
    px = max(0.0, (1 + lx - ly - lz) / 4)
    py = max(0.0, (1 - lx + ly - lz) / 4)
    pz = max(0.0, (1 - lx - ly + lz) / 4)
    return PauliProbs(px, py, pz)


def validate_noise_ordering(params: NoiseParams) -> ValidationReport:
    """Pass iff the per-segment idle error total d does not exceed g,
    so gated qubits never see less noise than idle ones."""
    d = params.idle.total
    if d <= params.g + 1e-15:
        return ValidationReport(True)
    return ValidationReport(False, (f"idle error d={d:.6g} exceeds gate noise "
                                    f"g={params.g:.6g}",))


def channel_dump(channel: QuantumChannel, digits: int = 10) -> str:
    """Fixed-precision text rendering of Kraus operators and the PTM,
    for regression snapshots."""
    lines = [f"channel {channel.name or 'unnamed'} arity={channel.arity} "
             f"kraus={len(channel.kraus)}"]
    fmt = f"{{:+.{digits}f}}"

    def cstr(z: complex) -> str:
        return f"{fmt.format(z.real)}{fmt.format(z.imag)}j"

    for idx, k in enumerate(channel.kraus):
        lines.append(f"K{idx}:")
        for row in k:
            lines.append("  " + "  ".join(cstr(z) for z in row))
    lines.append("PTM:")
    for row in pauli_transfer_matrix(channel):
        lines.append("  " + "  ".join(fmt.format(v) for v in row))
    return "\n".join(lines) + "\n"
