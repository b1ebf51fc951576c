#!/usr/bin/env python3
"""Regenerate the separable toy corpus and its vocabulary under configs/toy/.

A comment is labeled hate exactly when it contains the marker word. The
output is deterministic and checked in.
"""
import csv
import pathlib
import random

OUT = pathlib.Path(__file__).resolve().parent.parent / "configs" / "toy"
MARKER = "zorbex"
FILLER = [
    "weather", "music", "garden", "coffee", "river", "movie", "street", "pizza",
    "cricket", "train", "market", "phone", "mountain", "teacher", "window",
    "bicycle", "football", "kitchen", "holiday", "village", "camera", "doctor",
    "bridge", "festival",
]
PLATFORMS = ["youtube", "instagram", "twitter"]


def main():
    rng = random.Random(20240607)
    rows = []
    for i in range(200):
        hate = i % 2 == 0
        words = rng.choices(FILLER, k=rng.randint(4, 10))
        if hate:
            words.insert(rng.randint(0, len(words)), MARKER)
        rows.append({
            "id": f"toy{i + 1:03d}",
            "platform": PLATFORMS[i % 3],
            "text": " ".join(words),
            "language": "english",
            "label": "hate" if hate else "not_hate",
        })
    rng.shuffle(rows)
    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / "comments.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=["id", "platform", "text", "language", "label"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "zor", "##bex"] + FILLER
    vocab += [c for c in "abcdefghijklmnopqrstuvwxyz"] + ["##" + c for c in "abcdefghijklmnopqrstuvwxyz"]
    (OUT / "vocab.txt").write_text("\n".join(vocab) + "\n")


if __name__ == "__main__":
    main()
