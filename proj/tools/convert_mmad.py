#!/usr/bin/env python3
"""Convert an MMAD-style annotation file to the echo-iad benchmark format.

Input: a JSON object keyed by image path. Each value holds a "conversation"
list of {"Question", "Answer", "Options": {"A": ...}, "type"} records. The
dataset is taken from the first path component (DS-MVTec -> MVTec-AD,
VisA -> VisA) and the class from the second.

Output: JSON Lines, one item per conversation turn, in input order.
"""

import argparse
import json
import sys

DATASET_NAMES = {"DS-MVTec": "MVTec-AD", "MVTec": "MVTec-AD", "MVTec-AD": "MVTec-AD", "VisA": "VisA"}


def convert_record(image_path, record, index):
    parts = image_path.split("/")
    dataset = DATASET_NAMES.get(parts[0], parts[0])
    class_name = parts[1] if len(parts) > 1 else "unknown"
    options = record.get("Options") or {}
    return {
        "id": f"{image_path}#{index}",
        "dataset": dataset,
        "image_path": image_path,
        "class_name": class_name,
        "subtask": record["type"],
        "question": record["Question"],
        "options": {k: options[k] for k in sorted(options)},
        "answer": record["Answer"],
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("input", help="MMAD-style annotation JSON")
    parser.add_argument("output", help="benchmark JSON Lines to write")
    args = parser.parse_args(argv)

    with open(args.input, encoding="utf-8") as f:
        data = json.load(f)
    written = 0
    with open(args.output, "w", encoding="utf-8") as out:
        for image_path, entry in data.items():
            for i, record in enumerate(entry.get("conversation", [])):
                out.write(json.dumps(convert_record(image_path, record, i), ensure_ascii=False) + "\n")
                written += 1
    print(f"{written} items", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
