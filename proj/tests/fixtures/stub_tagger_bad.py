#!/usr/bin/env python3
"""External tagger that violates the non-overlap postcondition on purpose."""

import json
import sys


def main() -> None:
    assert sys.argv[1] == "tag"
    reviews_path, out_path = sys.argv[2], sys.argv[3]
    out_lines = []
    with open(reviews_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            review = json.loads(line)
            text = review["text"]
            if len(text) >= 4:
                out_lines.append(
                    json.dumps(
                        {"review_id": review["id"], "fragments": [[0, 3]], "surface": text[0:3]}
                    )
                )
                out_lines.append(
                    json.dumps(
                        {"review_id": review["id"], "fragments": [[2, 4]], "surface": text[2:4]}
                    )
                )
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out_lines) + ("\n" if out_lines else ""))


if __name__ == "__main__":
    main()
