"""Redundant-executor structures: heterogeneous variants under a dynamic scheduler.

A structure has ``width`` redundant slots. Each slot's cell state selects
which executor variant currently runs there; the scheduler (a cellular
automaton over variant indices) reconfigures the slots once per tick while
the per-slot runs themselves happen under the frozen pre-tick assignment. An
output arbiter votes over the per-slot output words.

Fault injection never mutates shared executors: the cell-state set is
widened with per-slot tagged copies, so a compromised slot keeps routing to
its faulty variant across reconfigurations while everything stays immutable
and replayable.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .cellular import (
    AnyCellular,
    CellState,
    CellularAutomaton,
    Lattice,
    ProbabilisticCellularAutomaton,
)
from .composition import (
    Binding,
    MODE_SA_FROM_CA,
    MimicAutomaton,
    MimicConfiguration,
    SaUnit,
    _macro_step_mode1,
    ma_initial,
)
from .errors import MimicError, ModelValidationError, Violation
from .hierarchical import HierarchicalAutomaton
from .rng import master_stream
from .sequential import SequentialAutomaton, Word, validate_sa

STRICT_MAJORITY = "strict_majority"
PLURALITY = "plurality"

WIDEN_TABLE_CAP = 250_000  # lifted rule tables beyond this are refused


@dataclass(frozen=True)
class FaultTagged:
    """Cell state carrying a per-slot fault marker.

    The tag sticks to its slot: the lifted scheduler rule computes the base
    transition on untagged values and re-applies the center cell's tag.
    """

    base: CellState
    slot: int

    def __str__(self):
        return f"{self.base}!f{self.slot}"


def base_state(q: CellState) -> CellState:
    return q.base if isinstance(q, FaultTagged) else q


@dataclass(frozen=True)
class VoterPolicy:
    """Output arbiter. ``quorum`` defaults to a strict majority of the width.

    ``strict_majority`` elects the unique most frequent word when its count
    reaches the quorum; any tie or shortfall abstains. ``plurality`` breaks
    ties through ``preferences`` (then lexicographically) and still abstains
    below the quorum.
    """

    kind: str = STRICT_MAJORITY
    quorum: int | None = None
    preferences: tuple[Word, ...] = ()

    def effective_quorum(self, width: int) -> int:
        return self.quorum if self.quorum is not None else width // 2 + 1


def vote(policy: VoterPolicy, words: Sequence[Word]) -> tuple[Word | None, frozenset[int]]:
    """Arbitrate per-slot output words: the elected word and the dissenting slots.

    Abstention (no elected word) reports no dissenters by definition.
    """
    width = len(words)
    quorum = policy.effective_quorum(width)
    counts = Counter(words)
    top = max(counts.values())
    candidates = [w for w, c in counts.items() if c == top]
    voted: Word | None = None
    if top >= quorum:
        if policy.kind == STRICT_MAJORITY:
            if len(candidates) == 1:
                voted = candidates[0]
        elif policy.kind == PLURALITY:
            prefs = list(policy.preferences)

            def rank(w: Word):
                return (prefs.index(w) if w in prefs else len(prefs), w)

            voted = min(candidates, key=rank)
        else:
            raise MimicError(f"unknown voter kind {policy.kind!r}")
    if voted is None:
        return None, frozenset()
    return voted, frozenset(i for i, w in enumerate(words) if w != voted)


@dataclass(frozen=True)
class DhrStructure:
    """Executors indexed by cell state, a scheduler, and an output arbiter."""

    name: str
    executors: tuple[SequentialAutomaton, ...]
    scheduler: AnyCellular
    width: int
    voter: VoterPolicy = field(default_factory=VoterPolicy)
    initial_lattice: Lattice | None = None
    overrides: Mapping[int, SequentialAutomaton] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "executors", tuple(self.executors))
        object.__setattr__(self, "overrides", dict(self.overrides))
        if self.initial_lattice is not None:
            object.__setattr__(self, "initial_lattice", tuple(self.initial_lattice))

    @cached_property
    def automaton(self) -> MimicAutomaton:
        return build_dhr(self)

    def start_lattice(self) -> Lattice:
        if self.initial_lattice is not None:
            return self.initial_lattice
        return (self.scheduler.cell_states[0],) * self.width

    def check(self) -> "DhrStructure":
        report = validate_dhr(self)
        if report:
            raise ModelValidationError(report)
        return self


@dataclass(frozen=True)
class DhrStepReport:
    """One tick: frozen-lattice per-slot runs, then the vote, then the reconfiguration."""

    input_block: Word
    per_slot_outputs: tuple[Word, ...]
    voted_output: Word | None
    dissenters: frozenset[int]
    lattice_before: Lattice
    lattice_after: Lattice


@dataclass(frozen=True)
class SerialDhr:
    """Two or more structures in series: each stage consumes the previous vote."""

    name: str
    stages: tuple[DhrStructure, ...]

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))

    @cached_property
    def automata(self) -> tuple[MimicAutomaton, ...]:
        return tuple(stage.automaton for stage in self.stages)

    def check(self) -> "SerialDhr":
        report = validate_serial(self)
        if report:
            raise ModelValidationError(report)
        return self


@dataclass(frozen=True)
class SerialTick:
    """End-to-end record of one serial tick; ``aborted_at`` names an abstaining stage."""

    stage_reports: tuple[DhrStepReport, ...]
    output: Word | None
    aborted_at: int | None


def validate_dhr(d: DhrStructure) -> list[Violation]:
    report: list[Violation] = []
    if not d.executors:
        report.append(Violation("executors-nonempty", d.name, "no executor variants"))
        return report
    inputs = set(d.executors[0].input_alphabet)
    outputs = set(d.executors[0].output_alphabet)
    for sa in d.executors:
        if set(sa.input_alphabet) != inputs or set(sa.output_alphabet) != outputs:
            report.append(Violation("shared-alphabets", sa.name, "alphabet differs across executors"))
        for v in validate_sa(sa):
            report.append(Violation(v.invariant, f"{sa.name}/{v.subject}", v.message))
    if len(d.executors) != len(d.scheduler.cell_states):
        report.append(
            Violation(
                "executors-per-state",
                d.name,
                f"{len(d.executors)} executors for {len(d.scheduler.cell_states)} scheduler states",
            )
        )
    if d.width < 1:
        report.append(Violation("width-positive", d.name, f"width {d.width} must be >= 1"))
    if d.scheduler.width != d.width:
        report.append(
            Violation("scheduler-width", d.name, f"scheduler width {d.scheduler.width} != width {d.width}")
        )
    if d.initial_lattice is not None:
        if len(d.initial_lattice) != d.width:
            report.append(Violation("initial-lattice-width", d.name, "initial lattice width mismatch"))
        else:
            states = set(d.scheduler.cell_states)
            for q in d.initial_lattice:
                if q not in states:
                    report.append(Violation("initial-lattice-range", repr(q), "not a scheduler state"))
    if d.voter.quorum is not None and not (1 <= d.voter.quorum <= d.width):
        report.append(Violation("quorum-range", d.name, f"quorum {d.voter.quorum} outside 1..{d.width}"))
    for slot, sa in sorted(d.overrides.items()):
        if not (0 <= slot < d.width):
            report.append(Violation("override-slot", str(slot), "slot out of range"))
        if set(sa.input_alphabet) != inputs or set(sa.output_alphabet) != outputs:
            report.append(Violation("override-alphabets", sa.name, "faulty variant alphabet mismatch"))
    return report


def validate_serial(s: SerialDhr) -> list[Violation]:
    report: list[Violation] = []
    if len(s.stages) < 2:
        report.append(Violation("serial-length", s.name, "a serial composition needs at least 2 stages"))
    for stage in s.stages:
        for v in validate_dhr(stage):
            report.append(Violation(v.invariant, f"{stage.name}/{v.subject}", v.message))
    for left, right in zip(s.stages, s.stages[1:]):
        if not left.executors or not right.executors:
            continue
        produced = set(left.executors[0].output_alphabet)
        consumed = set(right.executors[0].input_alphabet)
        if produced != consumed:
            report.append(
                Violation(
                    "stage-chaining",
                    f"{left.name}->{right.name}",
                    "voted output alphabet differs from the next stage's input alphabet",
                )
            )
    return report


# ---------------------------------------------------------------------------
# lattice widening for per-slot fault overrides

def _lift(value: CellState, like: CellState) -> CellState:
    return FaultTagged(value, like.slot) if isinstance(like, FaultTagged) else value


def _widened_states(base: tuple, slots: Iterable[int]) -> tuple:
    extra = tuple(FaultTagged(q, slot) for slot in sorted(slots) for q in base)
    return base + extra


def _widen_scheduler(scheduler: AnyCellular, slots: Iterable[int]) -> AnyCellular:
    states = _widened_states(scheduler.cell_states, slots)
    size = 2 * scheduler.radius + 1
    entries = len(states) ** size
    if entries > WIDEN_TABLE_CAP:
        raise MimicError(
            f"widened rule table needs {entries} entries (cap {WIDEN_TABLE_CAP}); "
            "reduce injected slots, states or radius"
        )
    boundary_value = scheduler.boundary_value
    if isinstance(scheduler, ProbabilisticCellularAutomaton):
        rule = {}
        for nb in itertools.product(states, repeat=size):
            base_nb = tuple(base_state(q) for q in nb)
            center = nb[scheduler.radius]
            rule[nb] = tuple((_lift(s, center), p) for s, p in scheduler.rule[base_nb])
        return ProbabilisticCellularAutomaton(
            name=f"{scheduler.name}+faults",
            cell_states=states,
            width=scheduler.width,
            radius=scheduler.radius,
            boundary=scheduler.boundary,
            boundary_value=boundary_value,
            rule=rule,
        )
    rule = {}
    for nb in itertools.product(states, repeat=size):
        base_nb = tuple(base_state(q) for q in nb)
        center = nb[scheduler.radius]
        rule[nb] = _lift(scheduler.rule[base_nb], center)
    return CellularAutomaton(
        name=f"{scheduler.name}+faults",
        cell_states=states,
        width=scheduler.width,
        radius=scheduler.radius,
        boundary=scheduler.boundary,
        boundary_value=boundary_value,
        rule=rule,
    )


def build_dhr(d: DhrStructure) -> MimicAutomaton:
    """Realize a structure as a runnable ``sa_from_ca`` composite automaton.

    Slots become lattice cells, the scheduler becomes the lattice rule, and
    every cell state maps to its executor variant. Injected slots appear as
    tagged cell states mapped to the faulty variant.
    """
    index = {q: i for i, q in enumerate(d.scheduler.cell_states)}
    scheduler = d.scheduler
    lattice0 = d.start_lattice()
    cell_map: dict[CellState, SaUnit] = {
        q: SaUnit(d.executors[index[q]].name) for q in d.scheduler.cell_states
    }
    sa_set = {sa.name: sa for sa in d.executors}

    if d.overrides:
        scheduler = _widen_scheduler(d.scheduler, d.overrides)
        for slot, faulty in d.overrides.items():
            sa_set[faulty.name] = faulty
            for q in d.scheduler.cell_states:
                cell_map[FaultTagged(q, slot)] = SaUnit(faulty.name)
        lattice0 = tuple(
            FaultTagged(q, i) if i in d.overrides else q for i, q in enumerate(lattice0)
        )

    binding = Binding(
        name=f"{d.name}.binding",
        mode=MODE_SA_FROM_CA,
        ca=scheduler.name,
        cell_map=cell_map,
        seed=lattice0,
    )
    return MimicAutomaton(
        name=f"dhr:{d.name}",
        sa_set=sa_set,
        ca_set={scheduler.name: scheduler},
        ha_set={},
        bindings={binding.name: binding},
        root_binding=binding.name,
        voter=d.voter,
        metadata={"kind": "dhr", "structure": d.name, "width": str(d.width)},
    )


def dhr_initial(d: DhrStructure) -> MimicConfiguration:
    ma = d.automaton
    return ma_initial(ma, ma.root().seed)


def _dhr_tick(
    ma: MimicAutomaton,
    voter: VoterPolicy,
    cfg: MimicConfiguration,
    block: Word,
    rng: np.random.Generator | None,
) -> tuple[MimicConfiguration, DhrStepReport]:
    new_cfg, per_cell, after = _macro_step_mode1(ma, ma.root(), cfg, block, rng, depth=1)
    words = tuple(r.output_word for r in per_cell)
    voted, dissenters = vote(voter, words)
    report = DhrStepReport(
        input_block=block,
        per_slot_outputs=words,
        voted_output=voted,
        dissenters=dissenters,
        lattice_before=tuple(base_state(q) for q in cfg.lattice),
        lattice_after=tuple(base_state(q) for q in after),
    )
    return new_cfg, report


def dhr_step(
    d: DhrStructure,
    state: MimicConfiguration,
    input_block: Iterable[str],
    rng: np.random.Generator | None = None,
) -> tuple[MimicConfiguration, DhrStepReport]:
    """One tick: per-slot runs under the frozen lattice, the vote, one scheduler step."""
    return _dhr_tick(d.automaton, d.voter, state, tuple(input_block), rng)


def inject_fault(d: DhrStructure, slot: int, faulty: SequentialAutomaton) -> DhrStructure:
    """A copy of the structure whose ``slot`` always runs ``faulty``."""
    if not (0 <= slot < d.width):
        raise MimicError(f"slot {slot} out of range 0..{d.width - 1}")
    inputs = set(d.executors[0].input_alphabet)
    outputs = set(d.executors[0].output_alphabet)
    if set(faulty.input_alphabet) != inputs or set(faulty.output_alphabet) != outputs:
        raise ModelValidationError(
            [Violation("override-alphabets", faulty.name, "faulty variant alphabet mismatch")]
        )
    return replace(d, overrides={**d.overrides, slot: faulty})


def dhr_run(
    target: DhrStructure | SerialDhr,
    schedule: Iterable[Iterable[str]],
    seed: int | None = None,
) -> list[DhrStepReport]:
    """Fold ticks over a schedule of input blocks.

    For a serial composition the reports describe the final stage (the
    structure's observable end); an abstaining stage aborts the run after
    emitting its abstention report.
    """
    if isinstance(target, SerialDhr):
        _, ticks = serial_run(target, schedule, seed=seed)
        reports: list[DhrStepReport] = []
        for tick in ticks:
            reports.append(tick.stage_reports[-1])
            if tick.aborted_at is not None:
                break
        return reports
    ma = target.automaton
    rng = master_stream(seed) if isinstance(ma.ca_set[ma.root().ca], ProbabilisticCellularAutomaton) else None
    cfg = dhr_initial(target)
    reports = []
    for block in schedule:
        cfg, report = _dhr_tick(ma, target.voter, cfg, tuple(block), rng)
        reports.append(report)
    return reports


# ---------------------------------------------------------------------------
# serial composition

def serial_initial(s: SerialDhr) -> tuple[MimicConfiguration, ...]:
    return tuple(dhr_initial(stage) for stage in s.stages)


def serial_step(
    s: SerialDhr,
    states: Sequence[MimicConfiguration],
    input_block: Iterable[str],
    rng: np.random.Generator | None = None,
) -> tuple[tuple[MimicConfiguration, ...], SerialTick]:
    """One serial tick: stage i's vote becomes stage i+1's input block."""
    block = tuple(input_block)
    new_states = list(states)
    stage_reports: list[DhrStepReport] = []
    word: Word | None = block
    aborted_at = None
    for i, stage in enumerate(s.stages):
        new_states[i], report = _dhr_tick(s.automata[i], stage.voter, states[i], word, rng)
        stage_reports.append(report)
        word = report.voted_output
        if word is None:
            aborted_at = i
            break
    return tuple(new_states), SerialTick(tuple(stage_reports), word, aborted_at)


def serial_run(
    s: SerialDhr,
    schedule: Iterable[Iterable[str]],
    seed: int | None = None,
) -> tuple[tuple[MimicConfiguration, ...], list[SerialTick]]:
    random_stages = any(
        isinstance(stage.scheduler, ProbabilisticCellularAutomaton) for stage in s.stages
    )
    rng = master_stream(seed) if random_stages else None
    states = serial_initial(s)
    ticks: list[SerialTick] = []
    for block in schedule:
        states, tick = serial_step(s, states, block, rng)
        ticks.append(tick)
        if tick.aborted_at is not None:
            break
    return states, ticks


def compose_serial(s: SerialDhr) -> MimicAutomaton:
    """Structural composite: a sequencer hierarchy over per-stage lattices.

    The returned automaton carries a root hierarchy whose top machine has one
    state per stage (with a deterministic advance transition); each stage
    state refines into renamed copies of that stage's executors, and each
    stage contributes its ``sa_from_ca`` binding. Serial data flow itself is
    executed by ``serial_run``; the composite is the checkable artifact.
    """
    report = validate_serial(s)
    if report:
        raise ModelValidationError(report)

    seq_states = tuple(f"stage{i}" for i in range(len(s.stages)))
    transitions = {}
    outputs = {}
    for i, state in enumerate(seq_states):
        target = seq_states[min(i + 1, len(seq_states) - 1)]
        transitions[(state, "advance")] = target
        outputs[(state, "advance")] = "advance"
    sequencer = SequentialAutomaton(
        name=f"{s.name}.seq",
        states=seq_states,
        initial=seq_states[0],
        finals=frozenset({seq_states[-1]}),
        input_alphabet=("advance",),
        output_alphabet=("advance",),
        transitions=transitions,
        outputs=outputs,
    )

    sa_set: dict[str, SequentialAutomaton] = {sequencer.name: sequencer}
    ca_set: dict[str, AnyCellular] = {}
    bindings: dict[str, Binding] = {}
    gamma: dict[tuple[str, str], frozenset[str]] = {}
    members = [sequencer]

    for i, stage in enumerate(s.stages):
        prefix = f"{s.name}.s{i}"
        renamed = {}
        for sa in stage.executors:
            copy = replace(sa, name=f"{prefix}.{sa.name}")
            renamed[sa.name] = copy
            sa_set[copy.name] = copy
            members.append(copy)
        overrides = {}
        for slot, faulty in stage.overrides.items():
            copy = replace(faulty, name=f"{prefix}.{faulty.name}")
            sa_set[copy.name] = copy
            members.append(copy)
            overrides[slot] = copy
        gamma[(sequencer.name, seq_states[i])] = frozenset(
            renamed[sa.name].name for sa in stage.executors
        )

        stage_ma = build_dhr(
            replace(
                stage,
                name=prefix,
                executors=tuple(renamed[sa.name] for sa in stage.executors),
                overrides=overrides,
            )
        )
        scheduler = stage_ma.ca_set[stage_ma.root().ca]
        scheduler = replace(scheduler, name=f"{prefix}.{scheduler.name}")
        ca_set[scheduler.name] = scheduler
        binding = replace(stage_ma.root(), name=f"{prefix}.binding", ca=scheduler.name)
        bindings[binding.name] = binding

    hierarchy = HierarchicalAutomaton(
        name=f"{s.name}.ha", sas=tuple(members), root=sequencer.name, gamma=gamma
    )
    return MimicAutomaton(
        name=f"serial:{s.name}",
        sa_set=sa_set,
        ca_set=ca_set,
        ha_set={hierarchy.name: hierarchy},
        bindings=bindings,
        root_binding=f"{s.name}.s0.binding",
        voter=s.stages[0].voter,
        metadata={
            "kind": "serial_dhr",
            "structure": s.name,
            "stages": " ".join(f"{s.name}.s{i}.binding" for i in range(len(s.stages))),
            "sequencer": hierarchy.name,
        },
    )
