from pathlib import Path

import pytest

from proofmend.cli import demo_path
from proofmend.genai import MockModelClient
from proofmend.prover.mock import MockBackend, Transcript
from proofmend.retrieval import Corpus

FIXTURES = Path(__file__).parent / "fixtures"

ADD_COMM_BODY = """Proof.
  intros n m.
  induction n.
  -
  auto.
  -
  simpl.
  rewrite IHn.
  apply plus_n_Sm.
Qed."""

SQR_LE_BODY = """Proof.
  intros. destruct a.
  - reflexivity.
  - induction p.
    + simpl. ring.
    + apply Z_le_dec.
    + apply Z.le_refl.
  - apply Z.eq_le_incl.
Qed."""

SQR_LE_REPAIRED = [
    "Proof.", "intros.", "destruct a.", "-", "reflexivity.", "-",
    "chfcrush use: Zlt_le_succ, Pos2Z.is_pos, Z.le_mul_diag_r.", "-", "hfcrush.", "Qed.",
]


def load_transcript(name: str) -> Transcript:
    for base in (FIXTURES / "transcripts", FIXTURES / "repair", demo_path("transcripts")):
        path = base / f"{name}.json"
        if path.exists():
            return Transcript.load(path)
    raise FileNotFoundError(name)


def backend_for(*names: str) -> MockBackend:
    return MockBackend({n: load_transcript(n) for n in names})


def session_for(name: str):
    t = load_transcript(name)
    return MockBackend({name: t}).start_session(t.statement)


@pytest.fixture
def demo_backend():
    return MockBackend.from_dir(demo_path("transcripts"))


@pytest.fixture
def demo_model():
    return MockModelClient.from_file(demo_path("replies.json"))


@pytest.fixture
def demo_env():
    return Corpus.load(demo_path("premises.jsonl"))
