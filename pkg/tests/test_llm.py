import json

import pytest

from streetdyn import llm
from streetdyn.llm import (AgentInit, ConfigError, ExhaustedRetriesError, FixtureClient, MissingFixtureError,
                           NoJsonFoundError, PromptTemplates, RemoteClient, RunStats, prompt_digest, run_actor,
                           run_oracle, structured_extract)

VALID_ORACLE = {
    "agent_list": {"0": "car_a", "1": "car_b"},
    "init_states": [
        {"agent_id": "0", "agent_type": "vehicle", "movement": "overtake", "speed": 60},
        {"agent_id": "1", "agent_type": "vehicle", "movement": "straight", "speed": 30},
    ],
    "guide_texts": {"0": "car_a overtakes car_b", "1": "car_b drives straight"},
}


class ScriptedClient:
    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = []

    def complete(self, prompt, context, key=None):
        self.calls.append(list(context))
        return self.replies[min(len(self.calls) - 1, len(self.replies) - 1)]


@pytest.mark.parametrize("raw", [
    '```json\n{"a":1}\n```',
    'Here is my answer: {"a":1} hope it helps',
    "{'a': 1}",
])
def test_extract(raw):
    assert structured_extract(raw) == {"a": 1}


def test_extract_nested_and_escaped():
    raw = 'prose {"k": "a } b \\" c", "n": {"m": [1, 2]}} trailing'
    assert structured_extract(raw) == {"k": 'a } b " c', "n": {"m": [1, 2]}}


def test_extract_none():
    with pytest.raises(NoJsonFoundError):
        structured_extract("I cannot help")


def test_oracle_overtake_from_instruction():
    client = ScriptedClient([json.dumps(VALID_ORACLE)])
    r = run_oracle("car a wants to overtake car b", client)
    assert r.agent_list == {"0": "car_a", "1": "car_b"}


def test_retry_once_then_valid():
    client = ScriptedClient(["not json at all", json.dumps(VALID_ORACLE)])
    stats = RunStats()
    run_oracle("x", client, stats=stats)
    assert stats.retries == 1
    assert client.calls[1][0]["role"] == "assistant"
    assert "rejected" in client.calls[1][1]["content"]


def test_retries_exhausted():
    client = ScriptedClient(['{"agent_list": {}}'])
    with pytest.raises(ExhaustedRetriesError) as exc:
        run_oracle("x", client, max_retries=2)
    assert exc.value.attempts == 3 and len(client.calls) == 3


def test_retry_count_equals_schema_errors_capped():
    client = ScriptedClient(["{}", "{}", json.dumps(VALID_ORACLE)])
    stats = RunStats()
    run_oracle("x", client, max_retries=3, stats=stats)
    assert stats.retries == 2 and stats.attempts == 3


def test_templates_have_no_open_slots():
    t = PromptTemplates()
    text = t.oracle("car a wants to overtake car b")
    agent = AgentInit("0", "car_a", "vehicle", "overtake", "overtake car_b")
    text2 = t.actor(agent, {"0": "car_a", "1": "car_b"}, "none")
    for s in (text, text2):
        assert "$" not in s
    assert "'end', 'start', 'trajectory', 'None'" in text2


def _fixture(tmp_path, name, prompt, responses):
    (tmp_path / f"{name}.json").write_text(json.dumps({"prompt_sha256": prompt_digest(prompt), "responses": responses}))


def test_fixture_client_digest_and_key(tmp_path):
    prompt = PromptTemplates().oracle("hello")
    _fixture(tmp_path, "oracle", prompt, ["a", "b"])
    c = FixtureClient(tmp_path)
    assert c.complete(prompt, []) == "a"
    assert c.complete(prompt, [{"role": "assistant"}, {"role": "user"}]) == "b"
    assert c.complete(prompt, [{"role": "assistant"}] * 5) == "b"
    with pytest.raises(MissingFixtureError, match="different prompt"):
        c.complete("edited prompt", [], key="oracle")
    with pytest.raises(MissingFixtureError, match="ghost.json"):
        c.complete("other", [], key="ghost")


def test_actor_fixtures(data_dir):
    c = FixtureClient(data_dir / "fixtures" / "left_turn")
    oracle = run_oracle("A car turns left at the intersection.", c)
    (agent,) = llm.agent_inits(oracle)
    plan = run_actor(agent, oracle.agent_list, c, llm.shared_summary(oracle, agent.agent_id))
    assert [k.kind for k in plan.keypoints] == [0, 1]

    c = FixtureClient(data_dir / "fixtures" / "taxi_pickup")
    oracle = run_oracle("A pedestrian waits at the curb and a taxi pulls over to pick them up.", c)
    taxi = [a for a in llm.agent_inits(oracle) if a.name == "taxi_0"][0]
    plan = run_actor(taxi, oracle.agent_list, c, llm.shared_summary(oracle, taxi.agent_id))
    assert (plan.depend_id, plan.depend_type) == ("0", "end")
    assert plan.keypoints[-1].kind == 2 and plan.keypoints[-1].get("info_type") == "point"

    c = FixtureClient(data_dir / "fixtures" / "ped_push")
    oracle = run_oracle("Two pedestrians walk along the sidewalk and one pushes the other from behind.", c)
    ped0 = [a for a in llm.agent_inits(oracle) if a.name == "ped_0"][0]
    assert run_actor(ped0, oracle.agent_list, c, llm.shared_summary(oracle, "0")).behavior == "pushing"


def test_remote_without_key(monkeypatch):
    monkeypatch.delenv(llm.API_KEY_ENV, raising=False)
    with pytest.raises(ConfigError):
        RemoteClient()


def test_remote_request_shape(monkeypatch):
    monkeypatch.setenv(llm.API_KEY_ENV, "k")
    body = RemoteClient(model="m").request_body("p", [{"role": "assistant", "content": "x"}])
    assert body == {"model": "m", "temperature": 0,
                    "messages": [{"role": "user", "content": "p"}, {"role": "assistant", "content": "x"}]}
