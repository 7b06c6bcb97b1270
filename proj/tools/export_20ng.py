"""Writes the 20 Newsgroups corpus as one .txt file per post.

Usage: python3 tools/export_20ng.py OUT_DIR
Then: HLTA_20NG_DIR=OUT_DIR ctest --test-dir build -R acceptance_20ng
"""

import pathlib
import sys

from sklearn.datasets import fetch_20newsgroups


def main() -> None:
    out = pathlib.Path(sys.argv[1])
    out.mkdir(parents=True, exist_ok=True)
    posts = fetch_20newsgroups(subset="all", remove=("headers", "footers", "quotes"))
    for i, text in enumerate(posts.data):
        (out / f"{i:05d}.txt").write_text(text, encoding="utf-8")
    print(f"{len(posts.data)} documents in {out}")


if __name__ == "__main__":
    main()
