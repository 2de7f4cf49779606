# Copyright 2026 The vpe Authors
# SPDX-License-Identifier: Apache-2.0
"""Regenerates samples/fixture: 40 counting images, a manifest with a
30/10 dev/test split, and the offline script whose answers are fixed per
sample so that each program variant has a known dev accuracy."""

import json
import random
from pathlib import Path

from PIL import Image, ImageDraw

HERE = Path(__file__).resolve().parent
OUT = HERE / "fixture"
LETTERS = "ABCD"
QUESTION = "How many circles are in the image? (A) 1 (B) 2 (C) 3 (D) 4"

# Correct dev samples per variant (out of 30); baseline gets 27, so the
# identity program reproduces the 0.9 dev reward.
VARIANTS = {"base": 27, "v1": 24, "v2": 28, "v3": 20, "v4": 29}
# Correct test samples for the baseline (out of 10).
BASE_TEST = 7


def draw_sample(rng, count):
    img = Image.new("RGB", (48, 32), (235, 235, 235))
    d = ImageDraw.Draw(img)
    for i in range(count):
        x = 4 + i * 11 + rng.randint(0, 2)
        y = rng.randint(4, 18)
        d.ellipse([x, y, x + 8, y + 8], fill=(rng.randint(20, 200), 60, 160))
    return img


def wrong(letter):
    return LETTERS[(LETTERS.index(letter) + 1) % 4]


def main():
    rng = random.Random(7)
    (OUT / "images").mkdir(parents=True, exist_ok=True)
    samples = []
    for i in range(40):
        sid = f"s{i:02d}" if i < 30 else f"t{i - 30:02d}"
        count = rng.randint(1, 4)
        draw_sample(rng, count).save(OUT / "images" / f"{sid}.png")
        samples.append({"sample_id": sid, "image": f"images/{sid}.png", "question": QUESTION,
                        "answer": f"({LETTERS[count - 1]})", "answer_mode": "multiple_choice"})
    dev = [s["sample_id"] for s in samples[:30]]
    test = [s["sample_id"] for s in samples[30:]]
    header = {"task": {"name": "circle-count",
                       "problem_description": "Count the circles in a small synthetic image and answer with the "
                                              "letter of the matching option.",
                       "dev": dev, "test": test}}
    with open(OUT / "manifest.jsonl", "w") as f:
        f.write(json.dumps(header) + "\n")
        for s in samples:
            f.write(json.dumps(s) + "\n")

    target_rules = []
    for name, n_correct in VARIANTS.items():
        order = list(range(30))
        random.Random(name).shuffle(order)
        good = set(order[:n_correct])
        for i, s in enumerate(samples):
            letter = s["answer"][1]
            if i < 30:
                ok = i in good
            else:
                ok = (i - 30) < BASE_TEST
            rule = {"sample": s["sample_id"], "reply": f"({letter if ok else wrong(letter)})"}
            if name != "base":
                rule["match"] = f"[{name}]"
            target_rules.append(rule)
    # Variant rules must be tried before the catch-all baseline rules.
    target_rules.sort(key=lambda r: "match" not in r)

    programs = [
        {"steps": [{"op": "draw_line", "params": {"from": [0, 16], "to": [47, 16], "color": "red"},
                    "inputs": ["input_image"], "output": "lined"}],
         "final_image_refs": ["lined"],
         "answer_prompt_template": "[v1] A red guide line splits the image. {question}"},
        {"steps": [{"op": "convert_image_grayscale", "inputs": ["input_image"], "output": "gray"},
                   {"op": "draw_box", "params": {"box": [1, 1, 47, 31], "color": "blue", "width": 1},
                    "inputs": ["gray"], "output": "framed"}],
         "final_image_refs": ["input_image", "framed"],
         "answer_prompt_template": "[v2] The second image is a grayscale copy with a frame. {question}"},
        {"steps": [{"op": "draw_line", "params": {"from": [0, 0], "to": [47, 0]},
                    "inputs": ["missing_image"], "output": "bad"}],
         "final_image_refs": ["bad"],
         "answer_prompt_template": "{question}"},
        {"steps": [{"op": "detect_objects", "params": {"query": "circle", "threshold": 0.2},
                    "inputs": ["input_image"], "output": "dets"},
                   {"op": "draw_box", "params": {"color": "green", "width": 1},
                    "inputs": ["input_image", "dets"], "output": "boxed"}],
         "final_image_refs": ["boxed"],
         "answer_prompt_template": "[v3] Green boxes mark detected circles. {question}"},
        {"steps": [{"op": "crop", "params": {"box": [0, 0, 48, 28]}, "inputs": ["input_image"], "output": "cropped"}],
         "final_image_refs": ["cropped"],
         "answer_prompt_template": "[v4] The image was cropped to the area holding the circles. {question}"},
    ]
    engineer = [{"reply": "Program:\n```json\n" + json.dumps(p, indent=2) + "\n```"} for p in programs]

    script = {
        "id": "fixture-script",
        "roles": {
            "ideation": {
                "rules": [{"match": "evaluate an improvement idea",
                           "reply": "{\"feasibility\": ${pick:5|4|4|3|2}, \"expectation\": ${pick:2|3|4|5}, "
                                    "\"novelty\": ${pick:1|2|3|4|5}}"}],
                "fallback": "Idea ${index}: ${pick:draw guide lines between circles|outline every circle|"
                            "convert to grayscale and frame the image|crop to the busy region|"
                            "mark each circle with a number}."},
            "engineer": {"sequence": engineer, "cycle": True},
            "target_model": {"rules": target_rules, "fallback": "(A)"},
            "analyst": {
                "rules": [
                    {"match": "You are analyzing whether",
                     "reply": "IMPLICATIONS: The cue ${pick:helped|did not help} separate the circles.\n"
                              "CAUSES: ${pick:Overlapping shapes|Low contrast|None}."},
                    {"match": "You are an expert in analyzing",
                     "reply": "SUMMARY: The program ran on every sample and the answers were checked.\n"
                              "IMPLICATIONS:\n- Keep cues thin so circles stay visible.\n"
                              "- ${pick:Framing|Guide lines|Boxes} changed the counts on a few samples."},
                    {"match": "synthesizing",
                     "reply": "- Thin cues preserve the circles.\n- ${pick:Boxes|Lines|Crops} were the most useful cue.\n"
                              "- Re-check samples with touching circles."},
                ]},
        },
    }
    (OUT / "script.json").write_text(json.dumps(script, indent=2) + "\n")


if __name__ == "__main__":
    main()
