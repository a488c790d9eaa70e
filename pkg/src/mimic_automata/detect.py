"""Signature-based behavior detection over flattened models.

A signature is a bad-prefix monitor: a pattern machine over observable action
labels whose final states mark a hit. Detection flattens the model once, then
checks each signature's product for a reachable accepting state; a match
comes with a shortest witness trace that replays on the model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .checker import (
    ACCEPTING,
    DEFAULT_FLATTEN_BOUND,
    Path,
    TransitionSystem,
    check_reach,
    flatten,
    product,
)
from .composition import MimicAutomaton
from .errors import ModelValidationError, Violation
from .sequential import SequentialAutomaton, validate_sa


@dataclass(frozen=True)
class Signature:
    """One behavioral pattern with an identifier and an ordinal severity."""

    id: str
    description: str
    pattern: SequentialAutomaton
    severity: int = 1

    def check(self) -> "Signature":
        report = validate_signature(self)
        if report:
            raise ModelValidationError(report)
        return self


def validate_signature(sig: Signature) -> list[Violation]:
    report = [
        Violation(v.invariant, f"{sig.id}/{v.subject}", v.message)
        for v in validate_sa(sig.pattern)
    ]
    if not sig.pattern.finals:
        report.append(Violation("matchable", sig.id, "pattern has no final states"))
    return report


@dataclass(frozen=True)
class SignatureResult:
    signature_id: str
    severity: int
    matched: bool
    witness: Path | None


@dataclass(frozen=True)
class DetectionReport:
    model: str
    results: tuple[SignatureResult, ...]
    stats: Mapping[str, object] = field(default_factory=dict)

    @property
    def matched(self) -> tuple[SignatureResult, ...]:
        return tuple(r for r in self.results if r.matched)


def detect(
    ma: MimicAutomaton,
    input_universe: Iterable,
    signatures: Sequence[Signature],
    bound: int = DEFAULT_FLATTEN_BOUND,
    ts: TransitionSystem | None = None,
) -> DetectionReport:
    """Scan a model against a signature set; witnesses are shortest in BFS order."""
    if ts is None:
        ts = flatten(ma, input_universe, bound=bound)
    results = []
    for sig in signatures:
        prod = product(ts, sig.pattern)
        outcome = check_reach(prod, ACCEPTING)
        matched = outcome.verdict == "holds"
        witness = None
        if matched:
            # express the witness over the model's own flattened graph
            base = prod.metadata["base_state"]
            path = outcome.counterexample
            witness = Path(tuple(base[p] for p in path.states), path.actions)
        results.append(SignatureResult(sig.id, sig.severity, matched, witness))
    return DetectionReport(
        model=ma.name,
        results=tuple(results),
        stats={"states": len(ts.states), "transitions": ts.transition_count},
    )


def load_signatures(paths: Iterable[str]) -> list[Signature]:
    """Parse signature documents; duplicate identifiers are rejected, naming both files."""
    from .modelfile import parse_files

    doc, diagnostics = parse_files(list(paths))
    if diagnostics:
        from .errors import ModelFormatError

        raise ModelFormatError(diagnostics)
    return [doc.signatures[name] for name in sorted(doc.signatures)]
