import pytest

from mimic_automata import (
    DhrStructure,
    ModelFormatError,
    Signature,
    VoterPolicy,
    build_dhr,
    detect,
    flatten,
    inject_fault,
    load_signatures,
    replay_path,
)
from mimic_automata.detect import validate_signature

from helpers import SIGNATURES, const_sa, identity_ca, make_sa

UNIVERSE = [("x",)]


def const_dhr():
    emit_a = const_sa("emitA", "A")
    scheduler = identity_ca("i3", width=3, states=("0", "1", "2"))
    return DhrStructure("const3", (emit_a, emit_a, emit_a), scheduler, 3,
                        VoterPolicy(quorum=2), ("0", "1", "2"))


def emits_b_signature():
    pattern = make_sa(
        "pat_b", ("w", "m"), "w", ("m",), ("A", "B"), ("A", "B"),
        delta=[("w", "B", "m"), ("m", "A", "m"), ("m", "B", "m")],
        partial=True,
    )
    return Signature("emits_b", "arbitrated output becomes B", pattern, severity=3)


def test_empty_signature_set_gives_empty_report():
    report = detect(build_dhr(const_dhr()), UNIVERSE, [])
    assert report.results == ()
    assert report.matched == ()


def test_healthy_structure_never_votes_b():
    report = detect(build_dhr(const_dhr()), UNIVERSE, [emits_b_signature()])
    assert report.results[0].matched is False
    assert report.results[0].witness is None


def test_two_planted_faults_match_with_length_one_witness():
    rogue = inject_fault(inject_fault(const_dhr(), 0, const_sa("emitB", "B")),
                         1, const_sa("emitB", "B"))
    ma = build_dhr(rogue)
    report = detect(ma, UNIVERSE, [emits_b_signature()])
    result = report.results[0]
    assert result.matched is True
    assert len(result.witness) == 1
    assert result.witness.actions[0].output == ("B",)
    # the witness is a genuine behavior of the model
    assert replay_path(ma, flatten(ma, UNIVERSE), result.witness)


def test_one_planted_fault_is_masked():
    rogue = inject_fault(const_dhr(), 0, const_sa("emitB", "B"))
    report = detect(build_dhr(rogue), UNIVERSE, [emits_b_signature()])
    assert report.results[0].matched is False


def test_witness_drives_pattern_into_finals():
    rogue = inject_fault(inject_fault(const_dhr(), 0, const_sa("emitB", "B")),
                         1, const_sa("emitB", "B"))
    sig = emits_b_signature()
    report = detect(build_dhr(rogue), UNIVERSE, [sig])
    witness = report.results[0].witness
    state = sig.pattern.initial
    for action in witness.actions:
        label = action.label()
        if (state, label) in sig.pattern.transitions:
            state = sig.pattern.transitions[(state, label)]
    assert state in sig.pattern.finals


def test_adding_signatures_is_monotone():
    ma = build_dhr(const_dhr())
    sig = emits_b_signature()
    other = Signature(
        "emits_a",
        "arbitrated output becomes A",
        make_sa("pat_a", ("w", "m"), "w", ("m",), ("A", "B"), ("A", "B"),
                delta=[("w", "A", "m"), ("m", "A", "m"), ("m", "B", "m")], partial=True),
    )
    alone = detect(ma, UNIVERSE, [sig])
    together = detect(ma, UNIVERSE, [sig, other])
    assert alone.results[0] == together.results[0]
    assert together.results[1].matched is True


def test_signature_requires_final_states():
    hollow = make_sa("hollow", ("w",), "w", (), ("A",), ("A",),
                     delta=[("w", "A", "w")])
    report = validate_signature(Signature("hollow", "matches nothing", hollow))
    assert any(v.invariant == "matchable" for v in report)


def test_load_signatures_empty_set():
    assert load_signatures([]) == []


def test_load_signatures_corpus_file():
    sigs = load_signatures([str(SIGNATURES / "emits_b.ma")])
    assert [s.id for s in sigs] == ["emits_b"]
    assert sigs[0].severity == 3
    assert sigs[0].pattern.name == "pat_b"


def test_load_signatures_duplicate_ids_name_both_files(tmp_path):
    text = (SIGNATURES / "emits_b.ma").read_text()
    first = tmp_path / "one.ma"
    second = tmp_path / "two.ma"
    first.write_text(text)
    second.write_text(text)
    with pytest.raises(ModelFormatError) as exc:
        load_signatures([str(first), str(second)])
    message = str(exc.value)
    assert "one.ma" in message and "two.ma" in message


def test_load_signatures_parse_error_carries_location(tmp_path):
    bad = tmp_path / "bad.ma"
    bad.write_text("signature x {\n  severity: not_a_number\n")
    with pytest.raises(ModelFormatError) as exc:
        load_signatures([str(bad)])
    assert any(d.line >= 1 for d in exc.value.diagnostics)


def test_no_match_is_complete_up_to_depth_four():
    """Brute-force completeness: if nothing matched, no input sequence of
    length <= 4 drives the pattern into a final state."""
    import itertools

    from mimic_automata import ma_initial, ma_run

    ma = build_dhr(const_dhr())
    sig = emits_b_signature()
    report = detect(ma, UNIVERSE, [sig])
    assert report.results[0].matched is False

    from mimic_automata.checker import render_word
    from mimic_automata.dhr import vote

    for depth in range(0, 5):
        for seq in itertools.product(UNIVERSE, repeat=depth):
            cfg = ma_initial(ma, ma.root().seed)
            pat_state = sig.pattern.initial
            for block in seq:
                cfg, trace = ma_run(ma, cfg, [block])
                voted, _ = vote(ma.voter, tuple(r.output_word for r in trace[0].per_cell))
                label = render_word(voted)
                if (pat_state, label) in sig.pattern.transitions:
                    pat_state = sig.pattern.transitions[(pat_state, label)]
                assert pat_state not in sig.pattern.finals, (depth, seq)
