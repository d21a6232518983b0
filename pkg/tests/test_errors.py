import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from proofmend.errors import (
    ErrorCategory,
    ErrorFacts,
    RuleTable,
    category_histogram,
    classify,
    render_histogram,
)
from proofmend.script import sentence

from conftest import FIXTURES

C = ErrorCategory

# (message, failing sentence, category, extra facts)
QUOTED = [
    ('Unable to unify "m=n" with "n=m".', "apply H.", C.WRONG_THEOREM_APPLICATION, {"misused_theorem": "H"}),
    ("Unable to unify `m=n' with `n=m'.", "apply H.", C.WRONG_THEOREM_APPLICATION, {"misused_theorem": "H"}),
    ('Found no subterm matching "b" in the current goal.', "rewrite H2.", C.INCORRECT_REWRITE,
     {"misused_theorem": "H2"}),
    ("Found no subterm matching `b' in the current goal.", "rewrite H2.", C.INCORRECT_REWRITE,
     {"misused_theorem": "H2"}),
    ("The reference in_remove_all was not found in the current environment.", "apply in_remove_all.",
     C.INVALID_REFERENCE, {"bad_reference": "in_remove_all"}),
    ("Wrong bullet +: Expecting -.", "+", C.BULLET_MISUSE, {"expected_bullet": "-"}),
    ("Wrong bullet -: Current bullet - is not finished.", "-", C.BULLET_MISUSE, {"unfinished_bullet": True}),
    ("Not an inductive product.", "destruct f.", C.TACTIC_MISUSE, {}),
    ("Cannot turn inductive into an evaluable reference.", "unfold nat.", C.TACTIC_MISUSE, {}),
    ("H is already used.", "intros H.", C.REDUNDANT_INTRODUCTION, {}),
    ("Abort does not prove the goal.", "Abort.", C.MISCELLANEOUS, {}),
]


@pytest.mark.parametrize("message,failing,category,facts", QUOTED)
def test_quoted_messages(message, failing, category, facts):
    got = classify(message, sentence(failing))
    assert got.category is category
    for key, value in facts.items():
        assert getattr(got, key) == value


def test_unable_to_unify_depends_on_head():
    msg = 'Unable to unify "a" with "b".'
    assert classify(msg, sentence("apply foo.")).category is C.WRONG_THEOREM_APPLICATION
    assert classify(msg, sentence("rewrite foo.")).category is C.INCORRECT_REWRITE
    assert classify(msg, sentence("reflexivity.")).category is C.TACTIC_MISUSE


def test_misused_theorem_skips_keywords():
    got = classify("Found no subterm matching x in the current goal.", sentence("rewrite <- Nat.add_comm in H."))
    assert got.misused_theorem == "Nat.add_comm"
    got = classify("Unable to unify a with b.", sentence("apply (le_S n)."))
    assert got.misused_theorem is None


def test_unknown():
    got = classify("Tactic failure: not a valid ring equation.", sentence("ring."))
    assert got == ErrorFacts(C.UNKNOWN)


def test_qed_on_open_goals_is_unfinished_bullet():
    got = classify("(in proof sqr_le): Attempt to save an incomplete proof", sentence("Qed."))
    assert got.category is C.BULLET_MISUSE and got.unfinished_bullet


def test_admit_is_miscellaneous():
    assert classify("admit does not prove the goal", sentence("admit.")).category is C.MISCELLANEOUS


def test_empty_message_rejected():
    with pytest.raises(ValueError):
        classify("  ", sentence("auto."))


def test_multiline_messages_are_flattened():
    got = classify("In environment\nn : nat\nThe reference\nfoo was not found in the current environment.",
                   sentence("apply foo."))
    assert got.bad_reference == "foo"


@given(st.sampled_from(["-", "+", "*", "--", "auto.", "apply H.", "rewrite H.", "intros."]),
       st.sampled_from(["-", "+", "*"]), st.sampled_from(["-", "+", "*"]), st.text(max_size=20))
def test_bullet_messages_win_regardless_of_head(failing, got_b, want_b, noise):
    msg = f"{noise} Wrong bullet {got_b}: Expecting {want_b}. {noise}"
    facts = classify(msg, sentence(failing))
    assert facts.category is C.BULLET_MISUSE
    assert facts.expected_bullet == want_b


@given(st.text(min_size=1).filter(str.strip), st.sampled_from(["apply H.", "-", "Qed.", "intros x."]))
def test_facts_invariants(message, failing):
    facts = classify(message, sentence(failing))
    assert facts == classify(message, sentence(failing))
    if facts.bad_reference is not None:
        assert facts.category is C.INVALID_REFERENCE
    if facts.expected_bullet is not None or facts.unfinished_bullet:
        assert facts.category is C.BULLET_MISUSE


def load_error_events():
    with open(FIXTURES / "error_events.jsonl", encoding="utf-8") as f:
        return [json.loads(line) for line in f]


ERROR_COUNTS = {
    C.WRONG_THEOREM_APPLICATION: 258,
    C.INVALID_REFERENCE: 79,
    C.INCORRECT_REWRITE: 61,
    C.REDUNDANT_INTRODUCTION: 56,
    C.TACTIC_MISUSE: 44,
    C.BULLET_MISUSE: 19,
    C.MISCELLANEOUS: 3,
    C.UNKNOWN: 0,
}


def test_error_fixture_histogram():
    events = load_error_events()
    assert len(events) == 520
    facts = [classify(e["error"], sentence(e["sentence"])) for e in events]
    assert [f.category.value for f in facts] == [e["expected"] for e in events]
    assert category_histogram(facts) == ERROR_COUNTS


def test_histogram_edges():
    assert category_histogram([]) == {c: 0 for c in C}
    one = category_histogram([ErrorFacts(C.WRONG_THEOREM_APPLICATION)])
    assert one[C.WRONG_THEOREM_APPLICATION] == 1 and sum(one.values()) == 1


def test_render_histogram_percentages():
    text = render_histogram(ERROR_COUNTS, include_unknown=False)
    assert "Wrong theorem application" in text
    assert "258    49.6%" in text
    assert "520   100.0%" in text
    assert "Unknown" not in text


def test_rule_table_is_data(tmp_path):
    path = tmp_path / "rules.json"
    path.write_text(json.dumps({"version": "custom", "rules": [
        {"name": "ring", "pattern": "not a valid ring equation", "category": "TacticMisuse"}]}))
    table = RuleTable.load(path)
    assert table.version == "custom"
    assert classify("Tactic failure: not a valid ring equation.", sentence("ring."), table).category is C.TACTIC_MISUSE
