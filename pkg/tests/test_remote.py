import threading
import time

import httpx
import numpy as np
import pytest

from divrr.config import RemoteConfig, ScoringConfig
from divrr.errors import (
    DegenerateEmbedding,
    EmbeddingDimensionMismatch,
    EmptyCompletion,
    MalformedResponse,
    MissingCandidates,
    TransportError,
)
from divrr.memory import Memory
from divrr.mock_server import MockBehavior, MockServer
from divrr.relevance import TokenEvidence, relevance_score
from divrr.remote import (
    NO_OBSERVATIONS,
    RemoteClient,
    evidence_from_top_logprobs,
    extract_choice,
    grade,
    memory_prompt,
    remote_answerer,
)
from divrr.world import Observation, Pose, Question, VisibleEntity

from oracles import softmax_share


@pytest.fixture
def server():
    with MockServer() as srv:
        yield srv


def client_for(srv, **kw):
    sleeps = []
    cfg = RemoteConfig(base_url=srv.base_url, **kw)
    return RemoteClient(cfg, sleep=sleeps.append, jitter_seed=0), sleeps


def test_logprobs_round_trip(server):
    c, _ = client_for(server)
    ev = c.fetch_token_evidence("Is the chair visible?")
    assert ev.entries == {"Yes": -0.12, "No": -2.2}
    s = relevance_score(ev)
    assert s == pytest.approx(softmax_share({"Yes": -0.12, "No": -2.2}, ["Yes"], ["Yes", "No"], 1.0), abs=1e-9)
    assert s == pytest.approx(0.889, abs=5e-4)


def test_request_shape(server, monkeypatch):
    monkeypatch.setenv("DIVRR_API_KEY", "secret-token")
    c, _ = client_for(server, top_logprobs=5)
    c.fetch_token_evidence("prompt", image_payload=b"\x89PNG")
    req = server.requests[-1]
    assert req["path"] == "/v1/chat/completions"
    assert req["headers"]["Authorization"] == "Bearer secret-token"
    body = req["body"]
    assert body["logprobs"] is True and body["top_logprobs"] == 5 and body["max_tokens"] == 1
    assert body["messages"][0]["content"][1]["image_url"]["url"].startswith("data:image/png;base64,")


def test_missing_logprobs_is_malformed():
    with MockServer(MockBehavior(mode="malformed")) as srv:
        c, _ = client_for(srv)
        with pytest.raises(MalformedResponse):
            c.fetch_token_evidence("p")


def test_missing_candidates():
    with MockServer(MockBehavior(mode="missing")) as srv:
        c, _ = client_for(srv)
        with pytest.raises(MissingCandidates):
            c.fetch_token_evidence("p")


@pytest.mark.parametrize(
    "variants",
    [
        [{"token": "Yes", "logprob": -0.5}, {"token": "yes", "logprob": -1.5}, {"token": " Yes", "logprob": -2.0}, {"token": "No", "logprob": -1.0}],
        [{"token": "YES", "logprob": -0.5}, {"token": " no ", "logprob": -1.0}],
    ],
)
def test_case_variants_merge(variants):
    ev = evidence_from_top_logprobs(variants, ScoringConfig())
    yes = [v["logprob"] for v in variants if v["token"].strip().lower() == "yes"]
    no = [v["logprob"] for v in variants if v["token"].strip().lower() == "no"]
    assert ev.entries["Yes"] == pytest.approx(float(np.log(np.sum(np.exp(yes)))))
    assert ev.entries["No"] == pytest.approx(float(np.log(np.sum(np.exp(no)))))


def test_floor_mode():
    top = [{"token": "Yes", "logprob": -0.2}, {"token": "The", "logprob": -3.0}]
    with pytest.raises(MissingCandidates):
        evidence_from_top_logprobs(top, ScoringConfig())
    ev = evidence_from_top_logprobs(top, ScoringConfig(), missing="floor")
    assert ev.entries == {"Yes": -0.2, "No": -8.0}


def test_retries_then_success():
    with MockServer(MockBehavior(fail_first=2)) as srv:
        c, sleeps = client_for(srv)
        ev = c.fetch_token_evidence("p")
        assert ev.entries["Yes"] == -0.12
        assert len(sleeps) == 2
        assert 0.4 <= sleeps[0] <= 0.6 and 0.8 <= sleeps[1] <= 1.2


def test_retries_exhausted():
    with MockServer(MockBehavior(fail_first=10)) as srv:
        c, sleeps = client_for(srv, max_retries=3)
        with pytest.raises(TransportError):
            c.fetch_token_evidence("p")
        assert len(sleeps) == 3
        assert len(srv.requests) == 4


def test_unreachable_host():
    cfg = RemoteConfig(base_url="http://127.0.0.1:9/v1", max_retries=1, timeout=0.5)
    c = RemoteClient(cfg, sleep=lambda s: None)
    with pytest.raises(TransportError):
        c.fetch_token_evidence("p")


def test_in_flight_cap():
    active, peak, lock = [0], [0], threading.Lock()

    def handler(request):
        with lock:
            active[0] += 1
            peak[0] = max(peak[0], active[0])
        time.sleep(0.02)
        with lock:
            active[0] -= 1
        top = [{"token": "Yes", "logprob": -0.1}, {"token": "No", "logprob": -2.0}]
        return httpx.Response(200, json={"choices": [{"logprobs": {"content": [{"top_logprobs": top}]}}]})

    c = RemoteClient(RemoteConfig(max_in_flight=2), transport=httpx.MockTransport(handler))
    threads = [threading.Thread(target=c.fetch_token_evidence, args=("p",)) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert peak[0] <= 2


def test_embeddings(server):
    c, _ = client_for(server)
    v = c.fetch_embedding("a chair")
    assert v.shape == (768,) and np.linalg.norm(v) == pytest.approx(1.0)
    with MockServer(MockBehavior(embedding_dim=512)) as srv:
        with pytest.raises(EmbeddingDimensionMismatch):
            client_for(srv)[0].fetch_embedding("x")
    with MockServer(MockBehavior(zero_embedding=True)) as srv:
        with pytest.raises(DegenerateEmbedding):
            client_for(srv)[0].fetch_embedding("x")


Q = Question("q", "What color is the chair?", "attribute", "red", (("A", 1),), "room", Pose(0, 0))


def test_empty_memory_prompt_marker():
    assert NO_OBSERVATIONS in memory_prompt(Q, [])
    obs = Observation("o", Pose(1, 2, 90.0, 10), (VisibleEntity("A", "object", "chair", "color=red"),), ())
    assert NO_OBSERVATIONS not in memory_prompt(Q, [obs])


def test_answer_grading_end_to_end():
    with MockServer(MockBehavior(answer="  Red ")) as srv:
        c, _ = client_for(srv)
        answer, ok = remote_answerer(c)(Q, Memory(8), None)
        assert ok and answer.strip() == "Red"
        assert NO_OBSERVATIONS in srv.requests[-1]["body"]["messages"][0]["content"]
    with MockServer(MockBehavior(answer="blue")) as srv:
        assert remote_answerer(client_for(srv)[0])(Q, Memory(8), None)[1] is False


def test_empty_answer():
    with MockServer(MockBehavior(mode="empty_answer")) as srv:
        with pytest.raises(EmptyCompletion):
            client_for(srv)[0].fetch_answer(Q, [])


@pytest.mark.parametrize(
    "text,n,letter",
    [("B", 4, "B"), ("The answer is C.", 4, "C"), ("(A) red", 3, "A"), ("D", 3, None), ("Answer: b", 4, None), ("A, then B", 4, "A")],
)
def test_choice_extraction(text, n, letter):
    assert extract_choice(text, n) == letter


def test_multiple_choice_grading():
    q = Question("q", "Color?", "attribute", "red", (("A", 1),), "room", Pose(0, 0), choices=("blue", "red", "green"))
    assert grade("B", q) and not grade("A", q) and not grade("none", q)
