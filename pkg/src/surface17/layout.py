"""Surface-17 geometry: qubits, stabilizers, logical operators, gate schedule.

Nine data qubits sit on a 3x3 grid (indices 0..8, row-major; the
human-facing numbering 1..9 appears in dumps).  Eight ancilla qubits
(indices 9..16) each measure one stabilizer.  Stabilizers come in two
kinds: "white" plaquettes (all-Z in the fig1a variant, used to decode a
logical-Z experiment) and "blue" plaquettes (all-X, used for logical X).
The fig1b variant conjugates every operator by Hadamards on a
checkerboard subset of the data qubits, mixing the two error types per
plaquette while preserving all commutation relations.

Pauli operators on the data qubits are carried as (x_mask, z_mask) bit
pairs so that commutation checks and syndrome extraction reduce to
popcount parities of the symplectic product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .validation import ValidationReport

N_DATA = 9
N_ANCILLA = 8
N_QUBITS = 17

WHITE = "white"
BLUE = "blue"

VARIANTS = ("fig1a", "fig1b")
MEASURED_SETS = ("all8", "relevant4", "bulk4")
BASES = ("Z", "X")

# Data qubits conjugated by Hadamard in the fig1b variant: grid positions
# with odd row+col parity.
_HFRAME = frozenset({1, 3, 5, 7})

# Supports in 0-based data indices.  White stabilizers are listed first
# (ids 0-3), blue second (ids 4-7); within a kind, ids ascend in the order
# used for syndrome bits.
_WHITE_SUPPORTS = ((1, 2), (0, 1, 3, 4), (4, 5, 7, 8), (6, 7))
_BLUE_SUPPORTS = ((0, 3), (1, 2, 4, 5), (3, 4, 6, 7), (5, 8))
_LOGICAL_Z_SUPPORT = (0, 3, 6)  # leftmost column
_LOGICAL_X_SUPPORT = (0, 1, 2)  # topmost row

# Gate round of each (ancilla-relative) direction, per plaquette kind.
# White bulk plaquettes run NW, NE, SW, SE; blue bulk run NW, SW, NE, SE.
# Boundary plaquettes inherit the rounds of their two present directions,
# which keeps every round transversal.
_WHITE_ORDER = ("NW", "NE", "SW", "SE")
_BLUE_ORDER = ("NW", "SW", "NE", "SE")
_DIRECTIONS = {"NW": (-0.5, -0.5), "NE": (-0.5, 0.5), "SW": (0.5, -0.5), "SE": (0.5, 0.5)}

# Plaquette centers in grid coordinates (row, col); data qubit d sits at
# (d // 3, d % 3).  Boundary centers lie outside the grid.
_WHITE_CENTERS = ((-0.5, 1.5), (0.5, 0.5), (1.5, 1.5), (2.5, 0.5))
_BLUE_CENTERS = ((0.5, -0.5), (0.5, 1.5), (1.5, 0.5), (1.5, 2.5))


def popcount(x: int) -> int:
    return bin(x).count("1")


@dataclass(frozen=True)
class PauliOp:
    """A Pauli operator on the data qubits in symplectic (x, z) mask form."""

    x_mask: int
    z_mask: int

    def commutes_with(self, other: "PauliOp") -> bool:
        return self.symplectic(other) == 0

    def symplectic(self, other: "PauliOp") -> int:
        """Anticommutation parity: 0 commute, 1 anticommute."""
        return (popcount(self.x_mask & other.z_mask)
                + popcount(self.z_mask & other.x_mask)) % 2

    def compose(self, other: "PauliOp") -> "PauliOp":
        return PauliOp(self.x_mask ^ other.x_mask, self.z_mask ^ other.z_mask)

    def label(self, qubit: int) -> str:
        x = (self.x_mask >> qubit) & 1
        z = (self.z_mask >> qubit) & 1
        return "IXZY"[x + 2 * z]

    @staticmethod
    def from_string(s: str) -> "PauliOp":
        """Parse a length-9 string over IXYZ (data qubit 0 first)."""
        if len(s) != N_DATA:
            raise ValueError(f"expected {N_DATA} Pauli labels, got {len(s)}")
        x_mask = z_mask = 0
        for q, c in enumerate(s.upper()):
            if c in "XY":
                x_mask |= 1 << q
            if c in "ZY":
                z_mask |= 1 << q
            if c not in "IXYZ":
                raise ValueError(f"bad Pauli label {c!r}")
        return PauliOp(x_mask, z_mask)

    def to_string(self) -> str:
        return "".join(self.label(q) for q in range(N_DATA))


def _hadamard_conjugate(op: PauliOp, qubits: frozenset[int] = _HFRAME) -> PauliOp:
    """Swap X and Z components on the given qubits."""
    mask = 0
    for q in qubits:
        mask |= 1 << q
    swap_x = op.x_mask & mask
    swap_z = op.z_mask & mask
    return PauliOp((op.x_mask & ~mask) | swap_z, (op.z_mask & ~mask) | swap_x)


@dataclass(frozen=True)
class Stabilizer:
    id: int
    kind: str  # WHITE or BLUE
    support: tuple[int, ...]  # data qubit indices, ascending
    op: PauliOp
    ancilla: int  # global qubit index 9..16

    @property
    def weight(self) -> int:
        return len(self.support)

    @property
    def kind_index(self) -> int:
        """Id within its kind, 0..3 (syndrome bit position)."""
        return self.id % 4


@dataclass(frozen=True)
class LogicalOperator:
    label: str  # "Z" or "X"
    support: tuple[int, ...]
    op: PauliOp


@dataclass(frozen=True)
class ScheduledGate:
    round: int  # 0..3
    stabilizer_id: int
    ancilla: int  # global index
    data: int  # data qubit index 0..8
    kind: str  # gate type follows the plaquette kind


@dataclass(frozen=True)
class CodeLayout:
    """Immutable Surface-17 layout; safe to share across workers."""

    variant: str
    measured_set: str
    stabilizers: tuple[Stabilizer, ...]
    logicals: dict[str, LogicalOperator]
    schedule: tuple[ScheduledGate, ...]
    hframe: frozenset[int] = field(default_factory=frozenset)

    @property
    def data_qubits(self) -> range:
        return range(N_DATA)

    @property
    def ancilla_qubits(self) -> range:
        return range(N_DATA, N_QUBITS)

    def stabilizers_of_kind(self, kind: str) -> tuple[Stabilizer, ...]:
        return tuple(s for s in self.stabilizers if s.kind == kind)

    def relevant_kind(self, basis: str) -> str:
        """Stabilizer kind whose outcomes decode the given readout basis."""
        _check_basis(basis)
        return WHITE if basis == "Z" else BLUE

    def relevant_stabilizers(self, basis: str) -> tuple[Stabilizer, ...]:
        return self.stabilizers_of_kind(self.relevant_kind(basis))

    def measured_logical(self, basis: str) -> LogicalOperator:
        _check_basis(basis)
        return self.logicals[basis]

    def gated_stabilizer_ids(self, basis: str) -> frozenset[int]:
        """Stabilizers whose entangling gates run, per measured_set."""
        if self.measured_set == "all8":
            return frozenset(s.id for s in self.stabilizers)
        if self.measured_set == "relevant4":
            return frozenset(s.id for s in self.relevant_stabilizers(basis))
        return frozenset(s.id for s in self.stabilizers if s.weight == 4)

    def gates(self, basis: str = "Z") -> tuple[ScheduledGate, ...]:
        gated = self.gated_stabilizer_ids(basis)
        return tuple(g for g in self.schedule if g.stabilizer_id in gated)

    def gates_in_round(self, rnd: int, basis: str = "Z") -> tuple[ScheduledGate, ...]:
        return tuple(g for g in self.gates(basis) if g.round == rnd)

    def dump(self) -> str:
        """Stable text listing of supports, schedule, and logicals."""
        lines = [f"surface17 layout variant={self.variant} measured_set={self.measured_set}"]
        for s in self.stabilizers:
            terms = " ".join(f"{s.op.label(q)}{q + 1}" for q in s.support)
            lines.append(f"stabilizer {s.id} kind={s.kind} ancilla=q{s.ancilla} {terms}")
        for label in ("Z", "X"):
            l = self.logicals[label]
            terms = " ".join(f"{l.op.label(q)}{q + 1}" for q in l.support)
            lines.append(f"logical {label} {terms}")
        for rnd in range(4):
            gates = [g for g in self.schedule if g.round == rnd]
            pairs = " ".join(f"(a{g.ancilla},d{g.data + 1})" for g in gates)
            lines.append(f"round {rnd}: {pairs}")
        return "\n".join(lines) + "\n"


def _check_basis(basis: str) -> None:
    if basis not in BASES:
        raise ValueError(f"basis must be one of {BASES}, got {basis!r}")


def _plaquette_rounds(center: tuple[float, float], support: tuple[int, ...],
                      order: tuple[str, ...]) -> dict[int, int]:
    """Map each support qubit to its gate round via the direction order."""
    rounds: dict[int, int] = {}
    present = {(q // 3, q % 3): q for q in support}
    for rnd, direction in enumerate(order):
        dr, dc = _DIRECTIONS[direction]
        pos = (center[0] + dr, center[1] + dc)
        if pos in present:
            rounds[present[pos]] = rnd
    if len(rounds) != len(support):
        raise ValueError(f"support {support} does not match center {center}")
    return rounds


def build_surface17(variant: str = "fig1a", measured_set: str = "all8") -> CodeLayout:
    """Construct the canonical 17-qubit layout.

    White supports (data numbering 1..9): {2,3} {1,2,4,5} {5,6,8,9} {7,8};
    blue supports: {1,4} {2,3,5,6} {4,5,7,8} {6,9}.  Logical Z runs down
    the left column {1,4,7}, logical X across the top row {1,2,3}.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if measured_set not in MEASURED_SETS:
        raise ValueError(f"measured_set must be one of {MEASURED_SETS}, got {measured_set!r}")

    hframe = _HFRAME if variant == "fig1b" else frozenset()

    def conj(op: PauliOp) -> PauliOp:
        return _hadamard_conjugate(op, hframe) if hframe else op

    stabilizers = []
    schedule = []
    for sid, (support, center) in enumerate(zip(_WHITE_SUPPORTS, _WHITE_CENTERS)):
        mask = sum(1 << q for q in support)
        stabilizers.append(Stabilizer(sid, WHITE, support, conj(PauliOp(0, mask)),
                                      ancilla=N_DATA + sid))
        for q, rnd in _plaquette_rounds(center, support, _WHITE_ORDER).items():
            schedule.append(ScheduledGate(rnd, sid, N_DATA + sid, q, WHITE))
    for i, (support, center) in enumerate(zip(_BLUE_SUPPORTS, _BLUE_CENTERS)):
        sid = 4 + i
        mask = sum(1 << q for q in support)
        stabilizers.append(Stabilizer(sid, BLUE, support, conj(PauliOp(mask, 0)),
                                      ancilla=N_DATA + sid))
        for q, rnd in _plaquette_rounds(center, support, _BLUE_ORDER).items():
            schedule.append(ScheduledGate(rnd, sid, N_DATA + sid, q, BLUE))

    logicals = {
        "Z": LogicalOperator("Z", _LOGICAL_Z_SUPPORT,
                             conj(PauliOp(0, sum(1 << q for q in _LOGICAL_Z_SUPPORT)))),
        "X": LogicalOperator("X", _LOGICAL_X_SUPPORT,
                             conj(PauliOp(sum(1 << q for q in _LOGICAL_X_SUPPORT), 0))),
    }

    schedule.sort(key=lambda g: (g.round, g.stabilizer_id))
    return CodeLayout(variant, measured_set, tuple(stabilizers), logicals,
                      tuple(schedule), hframe)


def check_commutation(layout: CodeLayout) -> ValidationReport:
    """Exhaustive symplectic check of every operator pair.

    Passes iff all stabilizer pairs commute, every stabilizer commutes
    with both logicals, and the two logicals anticommute.
    """
    failures = []
    stabs = layout.stabilizers
    for i, a in enumerate(stabs):
        for b in stabs[i + 1:]:
            if a.op.symplectic(b.op):
                failures.append(f"stabilizers {a.id} and {b.id} anticommute")
    for s in stabs:
        for label, logical in layout.logicals.items():
            if s.op.symplectic(logical.op):
                failures.append(f"stabilizer {s.id} anticommutes with logical {label}")
    if layout.logicals["Z"].op.symplectic(layout.logicals["X"].op) != 1:
        failures.append("logical X and logical Z do not anticommute")
    return ValidationReport(not failures, tuple(failures))


def validate_schedule(layout: CodeLayout) -> ValidationReport:
    """Check transversality, coverage, and gate counts of the schedule."""
    failures = []
    for rnd in range(4):
        used: set[int] = set()
        for g in (g for g in layout.schedule if g.round == rnd):
            for q in (g.data, g.ancilla):
                if q in used:
                    failures.append(f"round {rnd}: qubit {q} gated twice")
                used.add(q)
    covered = {(g.stabilizer_id, g.data) for g in layout.schedule}
    for s in layout.stabilizers:
        want = {(s.id, q) for q in s.support}
        missing = want - covered
        extra = {c for c in covered if c[0] == s.id} - want
        if missing or extra:
            failures.append(f"stabilizer {s.id}: coverage mismatch {missing or extra}")
    expected = {"all8": 24, "relevant4": 12, "bulk4": 16}[layout.measured_set]
    for basis in BASES:
        count = len(layout.gates(basis))
        if count != expected:
            failures.append(f"basis {basis}: {count} gates, expected {expected}")
    return ValidationReport(not failures, tuple(failures))


def pauli_action(layout: CodeLayout, pauli: PauliOp | str, basis: str) -> tuple[int, int]:
    """Syndrome and logical effect of a data-qubit Pauli error.

    Returns (syndrome_bits, logical_flip): bit i of syndrome_bits is the
    anticommutation parity with relevant stabilizer i (white stabilizers
    for a Z-basis experiment, blue for X); logical_flip is the parity with
    the measured logical operator.
    """
    if isinstance(pauli, str):
        pauli = PauliOp.from_string(pauli)
    syndrome = 0
    for s in layout.relevant_stabilizers(basis):
        syndrome |= pauli.symplectic(s.op) << s.kind_index
    flip = pauli.symplectic(layout.measured_logical(basis).op)
    return syndrome, flip
