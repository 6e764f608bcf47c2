"""Regenerate the canned LLM fixtures and scenario files.

Responses are hand-authored; the script renders the current prompt templates
and stores their digests so a template edit shows up as a missing fixture.

    python tools/make_fixtures.py
"""

import json
from pathlib import Path

from streetdyn.llm import AgentInit, PromptTemplates, prompt_digest, shared_summary, validate_oracle_output

DATA = Path(__file__).resolve().parents[1] / "src" / "streetdyn" / "data"


def kp0(position, lane_type="centerline", direction="straight"):
    return {"0": {"position": position, "lane_type": lane_type, "direction": direction}}


def kp1(relationship):
    return {"1": {"relationship": relationship}}


def kp2(info_type):
    return {"2": {"info_type": info_type}}


def fenced(doc) -> str:
    return "```json\n" + json.dumps(doc, indent=2) + "\n```"


SCENARIOS = {
    "overtake": {
        "map": "urban_road",
        "instruction": "A fast car overtakes a slower car driving ahead of it.",
        "oracle": {
            "agent_list": {"0": "car_a", "1": "car_b"},
            "init_states": [
                {"agent_id": "0", "agent_type": "car", "movement": "overtaking", "speed": 60},
                {"agent_id": "1", "agent_type": "vehicle", "movement": "straight", "speed": 30},
            ],
            "guide_texts": {
                "0": "car_a is a vehicle that overtakes car_b from the left lane and merges back in front of it.",
                "1": "car_b is a vehicle that keeps driving straight in its lane.",
            },
        },
        "actors": {
            "car_a": [{"depend": [1, "trajectory"], "speed_change": 0,
                       "keypoints": [kp0("left"), kp2("point")], "behavior": "None"}],
            "car_b": [{"depend": [-1, "None"], "speed_change": 0, "keypoints": [kp0("front")], "behavior": "None"}],
        },
    },
    "left_turn": {
        "map": "intersection",
        "instruction": "A car turns left at the intersection.",
        "oracle": [
            "The scene has one car turning left.",
            {
                "agent_list": {"0": "car_0"},
                "init_states": [{"agent_id": "0", "agent_type": "vehicle", "movement": "turn left", "speed": 30}],
                "guide_texts": {"0": "car_0 is a vehicle that turns left at the intersection."},
            },
        ],
        "actors": {
            "car_0": [{"depend": [-1, "None"], "speed_change": 0,
                       "keypoints": [kp0("front", direction="turn left"), kp1("adjacent straight")],
                       "behavior": "None"}],
        },
    },
    "taxi_pickup": {
        "map": "urban_road",
        "instruction": "A pedestrian waits at the curb and a taxi pulls over to pick them up.",
        "oracle": {
            "agent_list": {"0": "ped_0", "1": "taxi_0"},
            "init_states": [
                {"agent_id": "0", "agent_type": "pedestrian", "movement": "static", "speed": 0},
                {"agent_id": "1", "agent_type": "vehicle", "movement": "pull over", "speed": 30},
            ],
            "guide_texts": {
                "0": "ped_0 is a pedestrian waiting at the curb on the right side of the road.",
                "1": "taxi_0 is a vehicle that pulls over next to ped_0 to pick them up.",
            },
        },
        "actors": {
            "ped_0": [{"depend": [-1, "None"], "speed_change": 0,
                       "keypoints": [kp0("right", "boundary")], "behavior": "waving hand"}],
            "taxi_0": [
                {"depend": [0, "end"], "speed_change": -1, "keypoints": [kp2("point")], "behavior": "None"},
                {"depend": [0, "end"], "speed_change": -1,
                 "keypoints": [kp0("front"), kp2("point")], "behavior": "None"},
            ],
        },
    },
    "ped_crossing": {
        "map": "urban_road",
        "instruction": "A pedestrian talking on the phone crosses the road while a car approaches.",
        "oracle": {
            "agent_list": {"0": "ped_0", "1": "car_0"},
            "init_states": [
                {"agent_id": "0", "agent_type": "pedestrian", "movement": "crossing", "speed": 5},
                {"agent_id": "1", "agent_type": "vehicle", "movement": "straight", "speed": 40},
            ],
            "guide_texts": {
                "0": "ped_0 is a pedestrian crossing the road while calling phone.",
                "1": "car_0 is a vehicle driving straight towards the crossing pedestrian.",
            },
        },
        "actors": {
            "ped_0": [{"depend": [-1, "None"], "speed_change": 0,
                       "keypoints": [kp0("right", "boundary"), kp1("opposite boundary")],
                       "behavior": "calling phone."}],
            "car_0": [{"depend": [-1, "None"], "speed_change": -1, "keypoints": [kp0("front")], "behavior": "None"}],
        },
    },
    "static_truck": {
        "map": "urban_road",
        "instruction": "A truck is parked at the roadside and a car drives past it in the left lane.",
        "oracle": {
            "agent_list": {"0": "truck_0", "1": "car_0"},
            "init_states": [
                {"agent_id": "0", "agent_type": "truck", "movement": "static", "speed": 0},
                {"agent_id": "1", "agent_type": "vehicle", "movement": "straight", "speed": 40},
            ],
            "guide_texts": {
                "0": "truck_0 is a vehicle parked at the right roadside.",
                "1": "car_0 is a vehicle driving straight in the left lane past truck_0.",
            },
        },
        "actors": {
            "truck_0": [{"depend": [-1, "None"], "speed_change": 0,
                         "keypoints": [kp0("right", "boundary")], "behavior": "None"}],
            "car_0": [{"depend": [-1, "None"], "speed_change": 0, "keypoints": [kp0("left")], "behavior": "None"}],
        },
    },
    "ped_push": {
        "map": "urban_road",
        "instruction": "Two pedestrians walk along the sidewalk and one pushes the other from behind.",
        "oracle": {
            "agent_list": {"0": "ped_0", "1": "ped_1"},
            "init_states": [
                {"agent_id": "0", "agent_type": "pedestrian", "movement": "straight", "speed": 6},
                {"agent_id": "1", "agent_type": "pedestrian", "movement": "straight", "speed": 4},
            ],
            "guide_texts": {
                "0": "ped_0 is a pedestrian who follows ped_1 and pushes ped_1.",
                "1": "ped_1 is a pedestrian walking straight along the sidewalk.",
            },
        },
        "actors": {
            "ped_0": [{"depend": [1, "trajectory"], "speed_change": 0,
                       "keypoints": [kp2("trajectory")], "behavior": "pushing"}],
            "ped_1": [{"depend": [-1, "None"], "speed_change": 0,
                       "keypoints": [kp0("right", "boundary")], "behavior": "walking"}],
        },
    },
}


def render(response) -> str:
    return response if isinstance(response, str) else fenced(response)


def main() -> None:
    templates = PromptTemplates()
    for name, sc in sorted(SCENARIOS.items()):
        fdir = DATA / "fixtures" / name
        fdir.mkdir(parents=True, exist_ok=True)
        for old in fdir.glob("*.json"):
            old.unlink()
        oracle_responses = sc["oracle"] if isinstance(sc["oracle"], list) else [sc["oracle"]]
        oracle_prompt = templates.oracle(sc["instruction"])
        write(fdir / "oracle.json", oracle_prompt, [render(r) for r in oracle_responses])
        oracle = validate_oracle_output(oracle_responses[-1])
        for s in oracle.init_states:
            agent_name = oracle.agent_list[s.agent_id]
            agent = AgentInit(s.agent_id, agent_name, s.agent_type, s.movement, oracle.guide_texts[s.agent_id])
            prompt = templates.actor(agent, oracle.agent_list, shared_summary(oracle, s.agent_id))
            write(fdir / f"{agent_name}.json", prompt, [render(r) for r in sc["actors"][agent_name]])
        scenario = {"instruction": sc["instruction"], "map": sc["map"], "fixtures": name}
        (DATA / "scenarios" / f"{name}.json").write_text(json.dumps(scenario, indent=2, sort_keys=True) + "\n")
        print("wrote", name)


def write(path: Path, prompt: str, responses: list[str]) -> None:
    doc = {"prompt_sha256": prompt_digest(prompt), "responses": responses}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
