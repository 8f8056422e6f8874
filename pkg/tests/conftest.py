"""Shared fixtures: scripted offline scenarios for the 2D and 3D pipelines.

Each scenario writes real files (images, manifest, config, mock fixtures)
into a tmp directory so the same data drives unit tests, batch-runner tests,
CLI invocations, and the acceptance suite.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import pytest

from vfc.gateway import MockTransport, ModelEndpoint, ResponseCache
from vfc.gateway.client import Gateway
from vfc.gateway.mock import transport_from_spec

BASE_URL = "http://mock.invalid"


def make_endpoint(role: str, model_id: str, **kwargs) -> ModelEndpoint:
    return ModelEndpoint(role=role, base_url=BASE_URL, model_id=model_id, **kwargs)


def write_image(path: Path, tag: str) -> str:
    """Write a small deterministic fake image; returns its sha256 digest."""
    payload = b"MOCKIMG\x00" + hashlib.sha256(tag.encode()).digest() * 3
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(payload)
    return hashlib.sha256(payload).hexdigest()


def make_gateway(transport, tmp_path: Path, **kwargs) -> Gateway:
    kwargs.setdefault("artifact_dir", tmp_path / "artifacts")
    kwargs.setdefault("sleep", lambda _s: None)
    return Gateway(transport, ResponseCache(tmp_path / "cache"), **kwargs)


@pytest.fixture
def mock_transport() -> MockTransport:
    return MockTransport()


@pytest.fixture
def gateway(mock_transport, tmp_path) -> Gateway:
    return make_gateway(mock_transport, tmp_path)


# ---------------------------------------------------------------------------
# 2D scenario: five images with fully scripted pipeline transcripts
# ---------------------------------------------------------------------------

ITEMS_2D = {
    "beach": {
        "proposals": {
            "llava-1.5": "A brown dog is jumping to catch a frisbee on a sandy beach.",
            "kosmos-2": "A dog plays with a frisbee near the ocean while a kite flies above.",
        },
        "summary": (
            "A brown dog leaps to catch a frisbee on a sandy beach "
            "while a kite floats overhead."
        ),
        "checklist_text": "dog. frisbee. kite.",
        "detections": {"dog": 1, "frisbee": 1, "kite": 0},
        "revision": (
            "Modification: removed the kite, which was not detected.\n"
            "Updated caption: A brown dog leaps to catch a frisbee on a sandy beach."
        ),
        "final": "A brown dog leaps to catch a frisbee on a sandy beach.",
    },
    "kitchen": {
        "proposals": {
            "llava-1.5": "A white cup sits on a wooden table.",
            "kosmos-2": "Two cups on a table in a bright kitchen.",
        },
        "summary": "Two white cups sit on a wooden table in a bright kitchen.",
        "checklist_text": "cup. table.",
        "detections": {"cup": 2, "table": 1},
        "revision": (
            "Modification:\n"
            "Updated caption: Two white cups sit on a wooden table in a bright kitchen."
        ),
        "final": "Two white cups sit on a wooden table in a bright kitchen.",
    },
    "park": {
        # Adversarial item: the revision LLM breaks the output format, and the
        # fallback LLM ignores the removal instruction; the mechanical scrub
        # must still eliminate the undetected "unicorn".
        "proposals": {
            "llava-1.5": "A wooden bench between two tall trees in a quiet park.",
            "kosmos-2": "A park scene with trees, a bench, and a unicorn statue.",
        },
        "summary": (
            "A wooden bench sits between two tall trees in a quiet park. "
            "A unicorn grazes nearby."
        ),
        "checklist_text": "bench. tree. unicorn.",
        "detections": {"bench": 1, "tree": 2, "unicorn": 0},
        "revision": "The caption looks fine to me and I will not follow any format.",
        "fallback_response": (
            "A wooden bench sits between two tall trees in a quiet park. "
            "A unicorn grazes nearby."
        ),
        "final": "A wooden bench sits between two tall trees in a quiet park.",
    },
    "street": {
        "proposals": {
            "llava-1.5": "Two dogs walk down a street past a red car.",
            "kosmos-2": "Dogs and a parked car on a city street.",
        },
        "summary": "Two dogs walk down a city street past a parked red car.",
        "checklist_text": "dog. street. car.",
        "detections": {"dog": 1, "street": 1, "car": 1},
        "revision": (
            "Modification: decreased the number of dogs from two to one per the detections.\n"
            "Updated caption: A dog walks down a city street past a parked red car."
        ),
        "final": "A dog walks down a city street past a parked red car.",
    },
    "field": {
        # Checklist extraction yields nothing: verification is skipped.
        "proposals": {
            "llava-1.5": "An empty green field.",
            "kosmos-2": "A grassy meadow under a blue sky.",
        },
        "summary": "A wide grassy meadow stretches under a clear blue sky.",
        "checklist_text": "",
        "detections": {},
        "revision": None,
        "final": "A wide grassy meadow stretches under a clear blue sky.",
    },
}

# Per-item embedder vectors keyed on caption fragments; summaries must be
# matched before finals because finals are substrings of their summaries.
EMBED_RULES_2D = [
    {"role": "embedder", "contains": ["kite floats overhead"],
     "response": {"vector": [0.7, 0.7141428428542851], "model": "clip-sim"}},
    {"role": "embedder", "contains": ["frisbee on a sandy beach"],
     "response": {"vector": [0.8, 0.6], "model": "clip-sim"}},
    {"role": "embedder", "contains": ["unicorn grazes nearby"],
     "response": {"vector": [0.7, 0.7141428428542851], "model": "clip-sim"}},
    {"role": "embedder", "contains": ["wooden bench sits between two tall trees"],
     "response": {"vector": [0.8, 0.6], "model": "clip-sim"}},
    {"role": "embedder", "contains": ["Two dogs walk down a city street"],
     "response": {"vector": [0.7, 0.7141428428542851], "model": "clip-sim"}},
    {"role": "embedder", "contains": ["city street past a parked red car"],
     "response": {"vector": [0.8, 0.6], "model": "clip-sim"}},
    {"role": "embedder", "contains": ["cups sit on a wooden table"],
     "response": {"vector": [0.75, 0.6614378277661476], "model": "clip-sim"}},
    {"role": "embedder", "contains": ["grassy meadow stretches"],
     "response": {"vector": [0.75, 0.6614378277661476], "model": "clip-sim"}},
]


def build_2d_rules(digests: dict[str, str]) -> list[dict]:
    rules: list[dict] = []
    for item_id, data in ITEMS_2D.items():
        digest = "sha256:" + digests[item_id]
        for model_id, proposal in data["proposals"].items():
            rules.append(
                {"role": "captioner", "contains": [model_id, digest], "text": proposal}
            )
        summary_key = data["proposals"]["llava-1.5"][:40]
        rules.append(
            {
                "role": "llm",
                "contains": ["Carefully summarize in ONE", summary_key],
                "text": data["summary"],
            }
        )
        rules.append(
            {
                "role": "llm",
                "contains": ["object detector to check the correctness", data["summary"][:40]],
                "text": data["checklist_text"],
            }
        )
        if data["detections"]:
            results = []
            for query, count in data["detections"].items():
                boxes = [[0.1, 0.1, 0.3 + 0.05 * i, 0.4 + 0.05 * i] for i in range(count)]
                scores = [0.9 - 0.05 * i for i in range(count)]
                results.append({"query": query, "boxes": boxes, "scores": scores})
            rules.append(
                {
                    "role": "detector",
                    "contains": [digest],
                    "response": {"results": results},
                }
            )
        if data["revision"] is not None:
            rules.append(
                {
                    "role": "llm",
                    "contains": ["parse and modify image captions", data["summary"][:40]],
                    "text": data["revision"],
                }
            )
        if "fallback_response" in data:
            rules.append(
                {
                    "role": "llm",
                    "contains": ["Objects to remove:", data["summary"][:40]],
                    "text": data["fallback_response"],
                }
            )
    rules.extend(EMBED_RULES_2D)
    for item_id in ITEMS_2D:
        rules.append(
            {
                "role": "embedder",
                "contains": ["sha256:" + digests[item_id]],
                "response": {"vector": [1.0, 0.0], "model": "clip-sim"},
            }
        )
    # Catch-all keeps unscripted embeds (e.g. reconstructed images) at the
    # same dimension as the scripted vectors.
    rules.append(
        {"role": "embedder", "response": {"vector": [0.6, 0.8], "model": "clip-sim"}}
    )
    return rules


@dataclass
class Scenario2D:
    root: Path
    manifest_path: Path
    config_path: Path
    fixtures_path: Path
    config_dict: dict
    rules: list[dict]
    digests: dict[str, str]
    item_ids: list[str] = field(default_factory=lambda: list(ITEMS_2D))

    def transport(self) -> MockTransport:
        return transport_from_spec({"rules": self.rules})

    def expected_final(self, item_id: str) -> str:
        return ITEMS_2D[item_id]["final"]

    def expected_summary(self, item_id: str) -> str:
        return ITEMS_2D[item_id]["summary"]


def build_2d_scenario(root: Path, latency_ms: int = 0) -> Scenario2D:
    images_dir = root / "images"
    digests = {
        item_id: write_image(images_dir / f"{item_id}.png", f"2d:{item_id}")
        for item_id in ITEMS_2D
    }
    manifest_path = root / "manifest2d.jsonl"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for item_id in ITEMS_2D:
            fh.write(json.dumps({"item_id": item_id, "image": f"images/{item_id}.png"}) + "\n")
    rules = build_2d_rules(digests)
    fixtures_path = root / "fixtures2d.json"
    fixtures_path.write_text(
        json.dumps({"rules": rules, "latency_ms": latency_ms}, indent=1), encoding="utf-8"
    )
    config_dict = {
        "captioners": [
            {"base_url": BASE_URL, "model_id": "llava-1.5"},
            {"base_url": BASE_URL, "model_id": "kosmos-2"},
        ],
        "llm": {"base_url": BASE_URL, "model_id": "gpt4-sim"},
        "detector": {"base_url": BASE_URL, "model_id": "grounding-dino-sim"},
        "embedder": {"base_url": BASE_URL, "model_id": "clip-sim"},
        "image_gen": {"base_url": BASE_URL, "model_id": "sdxl-sim"},
        "concurrency": 2,
        "cache_dir": str(root / "cache"),
        "output_dir": str(root / "runs"),
        "seed": 7,
        "mock_fixtures": str(fixtures_path),
    }
    config_path = root / "config2d.json"
    config_path.write_text(json.dumps(config_dict, indent=1), encoding="utf-8")
    return Scenario2D(
        root=root,
        manifest_path=manifest_path,
        config_path=config_path,
        fixtures_path=fixtures_path,
        config_dict=config_dict,
        rules=rules,
        digests=digests,
    )


@pytest.fixture
def scenario_2d(tmp_path) -> Scenario2D:
    return build_2d_scenario(tmp_path)


# ---------------------------------------------------------------------------
# 3D scenario: two objects, two views each
# ---------------------------------------------------------------------------

ITEMS_3D = {
    "car": {
        "views": {
            "front": {
                "proposals": {
                    "llava-1.5": "A red sports car with a large rear spoiler, front view.",
                    "instructblip-7b": "The 3D object is a red car with black wheels.",
                },
                "summary": "A red sports car with black wheels and a large rear spoiler.",
                "questions_text": '["What color is the car?", "Does the car have a spoiler?"]',
                "questions": ["What color is the car?", "Does the car have a spoiler?"],
                "answers": ["The car is red with white stripes.", "Yes, a large rear spoiler."],
                "revised": (
                    "A red sports car with white stripes, black wheels, "
                    "and a large rear spoiler."
                ),
            },
            "back": {
                "proposals": {
                    "llava-1.5": "The back of a red car showing twin exhaust pipes.",
                    "instructblip-7b": "A red 3D car model seen from behind.",
                },
                "summary": "The rear of a red sports car with twin exhaust pipes.",
                "questions_text": '["How many exhaust pipes does the car have?"]',
                "questions": ["How many exhaust pipes does the car have?"],
                "answers": ["Two exhaust pipes."],
                "revised": "The rear of a red sports car with two exhaust pipes.",
            },
        },
        "fused": (
            "A red sports car with white stripes, black wheels, a large rear spoiler, "
            "and two exhaust pipes."
        ),
    },
    "chair": {
        "views": {
            "front": {
                "proposals": {
                    "llava-1.5": "A wooden chair with a tall backrest, front view.",
                    "instructblip-7b": "The 3D object is a brown wooden chair.",
                },
                "summary": "A brown wooden chair with a tall backrest and four legs.",
                "questions_text": '["What material is the chair?", "How many legs does it have?"]',
                "questions": ["What material is the chair?", "How many legs does it have?"],
                "answers": ["It is made of wood.", "Four legs."],
                "revised": "A brown wooden chair with a tall backrest and four legs.",
            },
            "back": {
                # Malformed question output: the numbered-line fallback kicks in.
                "proposals": {
                    "llava-1.5": "The back of a wooden chair with vertical slats.",
                    "instructblip-7b": "A brown chair seen from behind.",
                },
                "summary": "The back of a brown wooden chair with vertical slats.",
                "questions_text": "1. What shape are the slats?\n2. What color is the wood?",
                "questions": ["What shape are the slats?", "What color is the wood?"],
                "answers": ["The slats are straight and vertical.", "Dark brown."],
                "revised": "The back of a dark brown wooden chair with straight vertical slats.",
            },
        },
        "fused": (
            "A dark brown wooden chair with a tall backrest, straight vertical slats, "
            "and four legs."
        ),
    },
}

VIEW_ANGLES = {"front": (0.0, 0.0), "back": (180.0, 0.0)}


def build_3d_rules(digests: dict[tuple[str, str], str]) -> list[dict]:
    rules: list[dict] = []
    for object_id, obj in ITEMS_3D.items():
        for view_name, view in obj["views"].items():
            digest = "sha256:" + digests[(object_id, view_name)]
            rules.append(
                {
                    "role": "captioner",
                    "contains": ["llava-1.5", "describe the details of the 3D object", digest],
                    "text": view["proposals"]["llava-1.5"],
                }
            )
            rules.append(
                {
                    "role": "captioner",
                    "contains": ["instructblip-7b", "Describe the 3D object in detail", digest],
                    "text": view["proposals"]["instructblip-7b"],
                }
            )
            rules.append(
                {
                    "role": "llm",
                    "contains": [
                        "describing the same 3D object",
                        view["proposals"]["llava-1.5"][:40],
                    ],
                    "text": view["summary"],
                }
            )
            rules.append(
                {
                    "role": "llm",
                    "contains": ["Please ask at most 5", view["summary"][:40]],
                    "text": view["questions_text"],
                }
            )
            for question, answer in zip(view["questions"], view["answers"]):
                rules.append(
                    {"role": "vqa", "contains": [question, digest], "text": answer}
                )
            rules.append(
                {
                    "role": "llm",
                    "contains": ["correct the description based on the VQA", view["summary"][:40]],
                    "text": view["revised"],
                }
            )
        first_revised = obj["views"]["front"]["revised"]
        rules.append(
            {
                "role": "llm",
                "contains": ["distill these descriptions", first_revised[:40]],
                "text": obj["fused"],
            }
        )
        # Fusion over raw summaries (the no-factcheck variant).
        rules.append(
            {
                "role": "llm",
                "contains": ["distill these descriptions", obj["views"]["front"]["summary"][:40]],
                "text": obj["fused"] + " (from summaries)",
            }
        )
    rules.append(
        {"role": "embedder", "response": {"vector": [0.6, 0.8], "model": "clip-sim"}}
    )
    return rules


@dataclass
class Scenario3D:
    root: Path
    manifest_path: Path
    config_path: Path
    fixtures_path: Path
    config_dict: dict
    rules: list[dict]
    digests: dict[tuple[str, str], str]
    object_ids: list[str] = field(default_factory=lambda: list(ITEMS_3D))

    def transport(self) -> MockTransport:
        return transport_from_spec({"rules": self.rules})

    def expected_fused(self, object_id: str) -> str:
        return ITEMS_3D[object_id]["fused"]


def build_3d_scenario(root: Path) -> Scenario3D:
    views_dir = root / "views"
    digests = {}
    for object_id, obj in ITEMS_3D.items():
        for view_name in obj["views"]:
            digests[(object_id, view_name)] = write_image(
                views_dir / object_id / f"{view_name}.png", f"3d:{object_id}:{view_name}"
            )
    manifest_path = root / "manifest3d.jsonl"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for object_id, obj in ITEMS_3D.items():
            views = [
                {
                    "path": f"views/{object_id}/{view_name}.png",
                    "azimuth": VIEW_ANGLES[view_name][0],
                    "elevation": VIEW_ANGLES[view_name][1],
                }
                for view_name in obj["views"]
            ]
            fh.write(json.dumps({"item_id": object_id, "views": views}) + "\n")
    rules = build_3d_rules(digests)
    fixtures_path = root / "fixtures3d.json"
    fixtures_path.write_text(json.dumps({"rules": rules}, indent=1), encoding="utf-8")
    config_dict = {
        "captioners": [
            {"base_url": BASE_URL, "model_id": "llava-1.5"},
            {"base_url": BASE_URL, "model_id": "instructblip-7b"},
        ],
        "llm": {"base_url": BASE_URL, "model_id": "gpt4-sim"},
        "vqa": {"base_url": BASE_URL, "model_id": "llava-vqa-sim"},
        "embedder": {"base_url": BASE_URL, "model_id": "clip-sim"},
        "view3d_gen": {"base_url": BASE_URL, "model_id": "mvdream-sim"},
        "concurrency": 2,
        "cache_dir": str(root / "cache3d"),
        "output_dir": str(root / "runs3d"),
        "seed": 7,
        "mock_fixtures": str(fixtures_path),
    }
    config_path = root / "config3d.json"
    config_path.write_text(json.dumps(config_dict, indent=1), encoding="utf-8")
    return Scenario3D(
        root=root,
        manifest_path=manifest_path,
        config_path=config_path,
        fixtures_path=fixtures_path,
        config_dict=config_dict,
        rules=rules,
        digests=digests,
    )


@pytest.fixture
def scenario_3d(tmp_path) -> Scenario3D:
    return build_3d_scenario(tmp_path)
