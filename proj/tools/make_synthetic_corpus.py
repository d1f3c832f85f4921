#!/usr/bin/env python3
"""Regenerates the bundled synthetic corpus and the worked-case fixtures.

Writes data/synthetic/{questions,explanations,instances}.json, one PNG per
image under data/synthetic/images/, and data/fixtures/worked_cases.json (the
fixtures match the clean images by content hash, so both are written together).
"""

import hashlib
import io
import json
from pathlib import Path

from PIL import Image, ImageDraw

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "data" / "synthetic"
FIXTURES = ROOT / "data" / "fixtures"

W, H = 96, 72

CATEGORY_IDS = {
    "person": 1, "bicycle": 2, "car": 3, "bus": 6, "truck": 8, "boat": 9, "traffic light": 10,
    "bench": 15, "bird": 16, "cat": 17, "dog": 18, "horse": 19, "sheep": 20, "cow": 21,
    "giraffe": 25, "umbrella": 28, "skis": 35, "sports ball": 37, "skateboard": 41,
    "tennis racket": 43, "cup": 47, "fork": 48, "sandwich": 54, "pizza": 59, "chair": 62,
    "couch": 63, "bed": 65, "dining table": 67, "laptop": 73, "oven": 79, "sink": 81,
    "refrigerator": 82, "book": 84, "clock": 85,
}

# (question id, question, answers, explanations, background colour, objects)
# objects: (category, x, y, w, h)
SAMPLES = [
    (101, "Why is the woman wearing goggles?", ["to protect eyes"] * 10,
     ["she is skiing and goggles protect her eyes from the snow", "the sun is bright on the snowy slope"],
     (235, 240, 250), [("person", 30, 10, 20, 40), ("skis", 20, 50, 40, 6)]),
    (102, "Is this the ocean?", ["no"] * 10,
     ["there is a dog swimming in a small lake", "the water is calm and there are trees around it"],
     (60, 110, 170), [("dog", 40, 30, 20, 15)]),
    (103, "Is this an old photo?", ["no"] * 10,
     ["the man is wearing modern clothing", "the picture is in color and the clothes are modern"],
     (150, 140, 120), [("person", 20, 8, 18, 50), ("person", 60, 12, 16, 46)]),
    (104, "Is this room neat?", ["yes"] * 10,
     ["things are put away and the bed is made", "the room is clean and tidy"],
     (210, 200, 180), [("bed", 8, 30, 50, 30), ("chair", 66, 34, 18, 24), ("book", 70, 20, 8, 6)]),
    (105, "What color is the bus?", ["red"] * 8 + ["orange"] * 2,
     ["the bus is painted bright red"], (120, 120, 120), [("bus", 10, 20, 70, 30), ("person", 82, 30, 8, 20)]),
    (106, "How many dogs are on the couch?", ["two"] * 9 + ["2"],
     ["there are two dogs lying on the couch"], (190, 170, 150),
     [("couch", 6, 30, 84, 34), ("dog", 16, 22, 20, 14), ("dog", 50, 24, 22, 14)]),
    (107, "Is the man riding a horse?", ["yes"],
     ["he is sitting on the back of a brown horse"], (120, 170, 90),
     [("person", 40, 6, 14, 26), ("horse", 28, 24, 40, 36)]),
    (108, "What is the cat sitting on?", ["laptop", "laptop", "computer"],
     ["the cat is sitting on top of an open laptop", "a cat is resting on the keyboard of a laptop"],
     (200, 190, 170), [("cat", 34, 14, 26, 22), ("laptop", 26, 34, 44, 24), ("dining table", 4, 54, 88, 18)]),
    (109, "Is the pizza hot?", ["yes"],
     ["the cheese on the pizza is still melting", "steam is rising from the pizza"],
     (220, 210, 200), [("pizza", 24, 18, 46, 36), ("cup", 76, 10, 12, 16), ("dining table", 0, 40, 96, 32)]),
    (110, "Why is the child holding an umbrella?", ["it is raining"],
     ["it is raining and the child wants to stay dry"], (110, 120, 140),
     [("person", 40, 28, 14, 36), ("umbrella", 26, 8, 42, 20)]),
    (111, "What sport is being played?", ["tennis"] * 10,
     ["the player is holding a tennis racket on a court", "a man is hitting a ball with a racket"],
     (60, 140, 80), [("person", 36, 10, 16, 44), ("tennis racket", 52, 22, 12, 12), ("sports ball", 70, 14, 4, 4)]),
    (112, "Where is the laptop?", ["on the desk"],
     ["the laptop is sitting on a wooden desk next to a cup"], (230, 225, 215),
     [("laptop", 30, 20, 34, 22), ("dining table", 6, 40, 84, 28), ("cup", 70, 28, 8, 12)]),
    (113, "Are the giraffes eating?", ["yes"],
     ["the giraffes are reaching up to eat leaves from the trees"], (170, 200, 120),
     [("giraffe", 14, 4, 22, 60), ("giraffe", 56, 8, 20, 56)]),
    (114, "Is the traffic light red?", ["no"],
     ["the traffic light is showing green so cars can go"], (140, 150, 160),
     [("traffic light", 44, 4, 8, 20), ("car", 10, 44, 30, 16), ("car", 56, 46, 30, 14)]),
    (115, "What is on the plate?", ["sandwich"] * 10,
     ["there is a sandwich and a fork on the plate"], (240, 235, 225),
     [("sandwich", 28, 24, 36, 22), ("fork", 70, 20, 6, 30), ("dining table", 0, 50, 96, 22)]),
    (116, "Is the boy on a skateboard?", ["yes"],
     ["the boy is standing on a skateboard and rolling down the street"], (150, 150, 150),
     [("person", 40, 8, 14, 44), ("skateboard", 32, 52, 30, 6)]),
    (117, "Is it safe to cross the street?", ["no"],
     ["cars are driving down the street and the light is red"], (100, 100, 110),
     [("car", 8, 40, 34, 18), ("car", 50, 42, 34, 18), ("traffic light", 82, 4, 8, 20), ("person", 4, 10, 10, 26)]),
    (118, "What animal is in the field?", ["cow", "cows", "cow"],
     ["there are cows grazing on the green grass", "cows are standing in a grassy field"],
     (90, 160, 70), [("cow", 10, 30, 26, 18), ("cow", 50, 34, 24, 16), ("cow", 74, 28, 18, 14)]),
    (119, "Is the kitchen clean?", ["yes"],
     ["the counters are clear and the sink is empty"], (225, 225, 230),
     [("oven", 6, 30, 24, 30), ("sink", 40, 34, 22, 10), ("refrigerator", 70, 6, 22, 58)]),
    (120, "Why is the clock on the tower?", ["so people can see the time"],
     ["the clock is high up so everyone in town can read the time"], (180, 190, 210),
     [("clock", 38, 10, 20, 20)]),
]

# A question without explanations: the loader skips it and reports it.
UNEXPLAINED = (121, "Is the bench wet?", ["no"], (160, 160, 150), [("bench", 20, 40, 56, 14)])

PALETTE = {}


def category_colour(name):
    if name not in PALETTE:
        digest = hashlib.sha256(name.encode()).digest()
        PALETTE[name] = (digest[0], digest[1], digest[2])
    return PALETTE[name]


def render(background, objects):
    img = Image.new("RGB", (W, H), background)
    draw = ImageDraw.Draw(img)
    for cat, x, y, w, h in objects:
        draw.rectangle([x, y, x + w - 1, y + h - 1], fill=category_colour(cat))
    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=False, compress_level=9)
    return buf.getvalue()


def image_id(qid):
    return 5000 + qid


def main():
    (OUT / "images").mkdir(parents=True, exist_ok=True)
    FIXTURES.mkdir(parents=True, exist_ok=True)

    questions, annotations, explanations = [], [], {}
    coco_images, coco_annotations = [], []
    image_hashes = {}
    ann_id = 1
    rows = [(q, text, ans, expl, bg, objs) for q, text, ans, expl, bg, objs in SAMPLES]
    rows.append((UNEXPLAINED[0], UNEXPLAINED[1], UNEXPLAINED[2], None, UNEXPLAINED[3], UNEXPLAINED[4]))
    for qid, text, answers, expl, bg, objs in rows:
        iid = image_id(qid)
        file_name = f"{iid:012d}.png"
        png = render(bg, objs)
        (OUT / "images" / file_name).write_bytes(png)
        image_hashes[qid] = hashlib.sha256(png).hexdigest()
        questions.append({"question_id": qid, "image_id": iid, "question": text})
        annotations.append({"question_id": qid, "image_id": iid, "answers": [{"answer": a} for a in answers]})
        if expl is not None:
            explanations[str(qid)] = expl
        coco_images.append({"id": iid, "file_name": file_name, "width": W, "height": H})
        for cat, x, y, w, h in objs:
            coco_annotations.append({"id": ann_id, "image_id": iid, "category_id": CATEGORY_IDS[cat],
                                     "bbox": [x, y, w, h], "area": w * h, "iscrowd": 0})
            ann_id += 1

    categories = [{"id": cid, "name": name} for name, cid in sorted(CATEGORY_IDS.items(), key=lambda kv: kv[1])]
    dump = lambda obj: json.dumps(obj, indent=1) + "\n"
    (OUT / "questions.json").write_text(dump({"questions": questions, "annotations": annotations}))
    (OUT / "explanations.json").write_text(dump(explanations))
    (OUT / "instances.json").write_text(
        dump({"images": coco_images, "annotations": coco_annotations, "categories": categories}))

    fixtures = [
        # goggles: "wearing" -> "using" is the most fluent substitute
        {"endpoint": "mlm/topk", "match": {"text": "woman wearing goggles", "mask_positions": [4]},
         "response": {"slots": [[{"token": "wearing", "logprob": -0.1}, {"token": "using", "logprob": -0.2},
                                 {"token": "holding", "logprob": -1.5}]]}},
        {"endpoint": "mlm/topk", "match": {"text": "woman wearing goggles", "mask_positions": [3]},
         "response": {"slots": [[{"token": "man", "logprob": -2.5}, {"token": "girl", "logprob": -3.0}]]}},
        {"endpoint": "mlm/logprob", "match": {"text": "goggles", "targets": "\"using\""},
         "response": {"logprobs": [-0.2]}},
        {"endpoint": "mlm/logprob", "match": {"text": "goggles", "targets": "\"holding\""},
         "response": {"logprobs": [-1.5]}},
        {"endpoint": "mlm/logprob", "match": {"text": "goggles", "targets": "\"man\""},
         "response": {"logprobs": [-2.5]}},
        {"endpoint": "mlm/logprob", "match": {"text": "goggles", "targets": "\"girl\""},
         "response": {"logprobs": [-3.0]}},
        {"endpoint": "llm/complete", "match": {"prompt": "Question: Why is the woman using goggles?\nKnowledge:"},
         "response": {"text": "goggles protect eyes from wind and snow"}},
        {"endpoint": "llm/complete", "match": {"prompt": "Question: Why is the woman wearing goggles?\nKnowledge:"},
         "response": {"text": "goggles protect eyes from wind and snow"}},
        {"endpoint": "vqa/generate", "match": {"input_text": "using goggles? based on the fact that"},
         "response": {"text": "to protect eyes because the woman is using goggles to protect her eyes from the snow"}},
        {"endpoint": "vqa/generate", "match": {"input_text": "wearing goggles"},
         "response": {"text": "to protect eyes because the woman is wearing goggles to protect eyes"}},
        {"endpoint": "vqa/generate", "match": {"input_text": "using goggles"},
         "response": {"text": "to photograph because the woman is using a camera"}},
        # dog in water: the clean image is recognised by its hash
        {"endpoint": "vqa/generate",
         "match": {"input_text": "Is this the ocean?", "image_sha256": image_hashes[102]},
         "response": {"text": "no because there is a dog in the water"}},
        {"endpoint": "vqa/generate", "match": {"input_text": "Is this the ocean?"},
         "response": {"text": "yes because there are waves in the water"}},
        # old photo
        {"endpoint": "vqa/generate",
         "match": {"input_text": "Is this an old photo?", "image_sha256": image_hashes[103]},
         "response": {"text": "no because the man is wearing modern clothing"}},
        {"endpoint": "vqa/generate", "match": {"input_text": "Is this an old photo?"},
         "response": {"text": "no because it is in black and white"}},
    ]
    (FIXTURES / "worked_cases.json").write_text(dump({"fixtures": fixtures}))


if __name__ == "__main__":
    main()
