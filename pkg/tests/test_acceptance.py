"""One test per acceptance criterion; each prints a PASS/FAIL line."""
import contextlib
import os
import random
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proofmend.backtrack import ExecutionTrace, HammerConfig, backtrack
from proofmend.cli import demo_path
from proofmend.errors import category_histogram, classify
from proofmend.genai import MockModelClient
from proofmend.orchestrator import ProveConfig, format_cell, load_dataset, prove, replay
from proofmend.repair import RepairContext, RepairStatus, repair
from proofmend.retrieval import PremiseDoc, bm25_rerank, build_index, knn_premises, tokenize
from proofmend.script import sentence, split_sentences

import oracles
from conftest import ADD_COMM_BODY, SQR_LE_BODY, SQR_LE_REPAIRED, session_for
from test_errors import QUOTED, ERROR_COUNTS, load_error_events
from test_retrieval import random_statement


@pytest.fixture
def criterion(capsys):
    @contextlib.contextmanager
    def check(number, title):
        try:
            yield
        except BaseException as e:
            verdict = "SKIP" if isinstance(e, pytest.skip.Exception) else "FAIL"
            with capsys.disabled():
                print(f"\n[{verdict}] criterion {number}: {title}")
            raise
        with capsys.disabled():
            print(f"\n[PASS] criterion {number}: {title}")
    return check


def _round_trip(body):
    first = split_sentences(body)
    again = split_sentences(" ".join(s.raw for s in first))
    return [s.raw for s in first] == [s.raw for s in again]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from(["intros.", "auto.", "-", "+", "{", "}", 'idtac "a.b".', "simpl in *."]),
                min_size=1, max_size=12),
       st.lists(st.sampled_from(["(* c. *)", "(* (* nested. *) *)", '(* "s." *)']), max_size=4),
       st.randoms(use_true_random=False))
def _splitter_property(raws, comments, rnd):
    pieces = list(raws)
    for c in comments:
        pieces.insert(rnd.randint(0, len(pieces)), c)
    assert [s.raw for s in split_sentences(" ".join(pieces))] == raws


def test_criterion_1_splitter(criterion):
    with criterion(1, "splitter: add_comm body 10, sqr_le body 13, 200-case round trip, < 1 s"):
        t0 = time.perf_counter()
        assert len(split_sentences(ADD_COMM_BODY)) == 10
        assert _round_trip(ADD_COMM_BODY) and _round_trip(SQR_LE_BODY)
        _splitter_property()
        assert time.perf_counter() - t0 < 1.0
        sqr = split_sentences(SQR_LE_BODY)
        assert len(sqr) == 13, f"sqr_le body splits into {len(sqr)} sentences: {[s.raw for s in sqr]}"


def test_criterion_2_classifier(criterion):
    with criterion(2, "classifier: quoted messages 100%, error fixture histogram exact"):
        for message, failing, category, facts in QUOTED:
            got = classify(message, sentence(failing))
            assert got.category is category, message
            for key, value in facts.items():
                assert getattr(got, key) == value
        events = load_error_events()
        hist = category_histogram(classify(e["error"], sentence(e["sentence"])) for e in events)
        assert hist == ERROR_COUNTS
        counts = sorted((n for n in hist.values() if n), reverse=True)
        assert counts == [258, 79, 61, 56, 44, 19, 3]


def test_criterion_3_retrieval(criterion):
    with criterion(3, "retrieval: knn and BM25 match brute-force oracles, 1000 queries < 10 s"):
        r = random.Random(11)
        t0 = time.perf_counter()
        queries = 0
        while queries < 1000:
            docs = [PremiseDoc(f"d{i:02d}", random_statement(r)) for i in range(r.randint(1, 50))]
            corpus = build_index(docs)
            names = [d.name for d in docs]
            tokens = [list(d.tokens) for d in docs]
            for _ in range(25):
                query = random_statement(r)
                qt = tokenize(query)
                queries += 1
                want = oracles.cosine_scores(tokens, qt)
                assert max((abs(a - b) for a, b in zip(corpus.similarities(query), want)), default=0.0) <= 1e-9
                knn = knn_premises(corpus, query, r.randint(1, len(docs)))
                assert [x.name for x in knn] == [names[i] for i in oracles.ranked(names, want)[:len(knn)]]
                bm = oracles.bm25([list(x.doc.tokens) for x in knn], qt)
                cnames = [x.name for x in knn]
                reranked = bm25_rerank(knn, query)
                want_bm = dict(zip(cnames, bm))
                assert all(abs(x.bm25_score - want_bm[x.name]) <= 1e-9 for x in reranked)
                corder = oracles.ranked(cnames, bm, [x.knn_score for x in knn])
                assert [x.name for x in reranked] == [cnames[i] for i in corder]
        assert time.perf_counter() - t0 < 10.0


def _repair_case(name, prefix, raw, **ctx):
    s = session_for(name)
    for p in prefix:
        assert s.execute(p).ok
    failing = sentence(raw)
    result = s.execute(failing)
    assert not result.ok
    before = (s.state, s.depth, list(s.history))
    out = repair(classify(result.error, failing), failing, s.state, s, RepairContext(**ctx))
    if out.status is not RepairStatus.REPAIRED:
        assert (s.state, s.depth, list(s.history)) == before
    return out


def test_criterion_4_repair(criterion):
    with criterion(4, "repair: four worked examples repaired, NotRepaired paths atomic"):
        cases = [
            (("remove_keep", ["intros A x y l Hneq Hin."], "apply in_remove_all.",
              {"premise_names": ["map_insert", "in_remove_all_preserve"]}), ["apply in_remove_all_preserve."]),
            (("intro_clash", ["intros P Q H."], "intros H.", {}), ["intros H'."]),
            (("bullet_swap", ["intros.", "induction n.", "-", "auto."], "+", {}), ["-"]),
            (("pos_le_sq", ["intros."], "apply Zlt_le_succ.", {}), ["qsimpl use: Zlt_le_succ."]),
        ]
        for (name, prefix, raw, ctx), want in cases:
            out = _repair_case(name, prefix, raw, **ctx)
            assert out.status is RepairStatus.REPAIRED, name
            assert [x.raw for x in out.replacement] == want
        # Each mechanism's failure path leaves the session untouched.
        assert _repair_case("remove_keep", ["intros A x y l Hneq Hin."], "apply in_remove_all.",
                            premise_names=["map_insert"]).status is RepairStatus.NOT_REPAIRED
        assert _repair_case("bullet_swap", ["intros.", "induction n.", "-"], "-").status \
            is RepairStatus.NOT_REPAIRED
        assert _repair_case("pos_le_sq", ["intros."], "apply Z.le_refl.").status is RepairStatus.NOT_REPAIRED
        assert _repair_case("pos_le_sq", ["intros."], "rewrite Z.mul_comm.").status \
            is RepairStatus.NOT_REPAIRED


def test_criterion_5_backtracking(criterion, demo_backend, demo_env):
    with criterion(5, "backtracking: sqr_le walkthrough event-for-event, final script equals the expected repair"):
        s = session_for("sqr_le")
        trace = ExecutionTrace()
        body = split_sentences(SQR_LE_BODY)
        for sent in body[:9]:
            assert s.execute(sent).ok
            trace.sync(s)
        assert not s.execute(body[9]).ok
        steps = []
        assert backtrack(s, trace, HammerConfig(), steps) is not None
        assert [st["action"] for st in steps] == [
            "hammer_fail", "undo", "hammer_fail", "bullet_hit", "discard", "hammer_success"]
        assert steps[1]["sentence"] == "simpl." and steps[3]["sentence"] == "+"
        assert steps[4]["sentences"] == ["induction p.", "+"]
        record = next(t for t in load_dataset(demo_path("dataset.jsonl")) if t.name == "sqr_le")
        result = prove(record, demo_env, ProveConfig(), backend=demo_backend,
                       model=MockModelClient.from_file(demo_path("replies.json")))
        assert [x.raw for x in result.final_script] == SQR_LE_REPAIRED


def test_criterion_6_end_to_end(criterion, demo_backend, demo_env):
    with criterion(6, "end to end: add_comm and sqr_le proved, replay confirms, one model call each"):
        records = {t.name: t for t in load_dataset(demo_path("dataset.jsonl"))}
        for name in ("add_comm", "sqr_le"):
            model = MockModelClient.from_file(demo_path("replies.json"))
            result = prove(records[name], demo_env, ProveConfig(), backend=demo_backend, model=model)
            assert result.proved, (name, result.reason)
            assert model.calls == 1
            assert replay(result.final_script.sentences, records[name].statement, demo_backend)
        repaired = prove(records["sqr_le"], demo_env, ProveConfig(), backend=demo_backend,
                         model=MockModelClient.from_file(demo_path("replies.json")))
        assert any("backtrack" in e for e in repaired.events)


def test_criterion_7_report_cell(criterion):
    with criterion(7, "report: {4377, 10842} renders as 4377 (40.4%)"):
        assert format_cell(4377, 10842) == "4377 (40.4%)"


@pytest.mark.integration
def test_criterion_8_real_coqtop(criterion):
    with criterion(8, "integration: add_comm replays on a real Coq toplevel, undo restores goals"):
        if not os.environ.get("PROOFMEND_COQTOP"):
            pytest.skip("PROOFMEND_COQTOP not set")
        from proofmend.prover.coqtop import CoqtopBackend
        backend = CoqtopBackend()
        statement = "Theorem add_comm : forall n m : nat, n + m = m + n."
        with backend.start_session(statement) as s:
            seen = [s.state.goals]
            for sent in split_sentences(ADD_COMM_BODY)[:-1]:
                assert s.execute(sent).ok, sent.raw
                seen.append(s.state.goals)
            assert s.is_complete()
            while s.depth:
                seen.pop()
                assert s.undo().goals == seen[-1]
        assert replay(split_sentences(ADD_COMM_BODY), statement, backend)
