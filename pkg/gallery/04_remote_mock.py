"""
Talking to an OpenAI-compatible endpoint
========================================

The bundled mock server speaks the same chat-completion and embedding
protocol as a real VLM server, so the remote client can be exercised with no
network. Point ``base_url`` at a real server to use a real model.
"""

from divrr import relevance_score
from divrr.config import RemoteConfig
from divrr.errors import MissingCandidates
from divrr.mock_server import MockBehavior, MockServer
from divrr.relevance import TokenEvidence
from divrr.remote import RemoteClient

behavior = MockBehavior(logprobs={"Yes": -0.3, " yes": -2.0, "No": -1.6}, fail_first=2)
with MockServer(behavior) as server:
    cfg = RemoteConfig(base_url=server.base_url, max_retries=3)
    # sleep is injectable, so the demo does not wait out the backoff
    waits = []
    with RemoteClient(cfg, sleep=waits.append, jitter_seed=0) as client:
        ev = client.fetch_token_evidence("Is there a red chair in view? Answer Yes or No.")
        print("two 503s, then success; backoff waits:", [round(w, 3) for w in waits])
        print("merged evidence:", {k: round(v, 4) for k, v in ev.entries.items()})
        print(f"remote score  {relevance_score(ev):.6f}")

        # the same numbers scored offline give the same answer
        offline = TokenEvidence({"Yes": ev.entries["Yes"], "No": -1.6})
        print(f"offline score {relevance_score(offline):.6f}")

        vec = client.fetch_embedding("a red chair next to the sofa")
        print("embedding dim", vec.shape[0], "norm", round(float((vec**2).sum() ** 0.5), 6))

    print("requests seen by the server:", [r["path"] for r in server.requests])

    behavior.mode = "missing"
    with RemoteClient(RemoteConfig(base_url=server.base_url)) as client:
        try:
            client.fetch_token_evidence("Anything here?")
        except MissingCandidates as exc:
            print("missing candidates ->", type(exc).__name__, exc)
