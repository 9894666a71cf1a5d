#!/usr/bin/env python3
"""Regenerate fixtures/embeddings.json from fixtures/catalog.json.

Stand-in for a sentence encoder: signed feature hashing of word unigrams,
word bigrams and character trigrams, sublinear tf weighting, L2 normalised.
Deterministic and dependency-free so the fixture can be rebuilt anywhere.
"""
import argparse
import hashlib
import json
import math
import re


def _bucket(token, dim):
    h = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    v = int.from_bytes(h, "little")
    return v % dim, (1.0 if (v >> 63) & 1 else -1.0)


def embed(text, dim):
    words = re.findall(r"[a-z0-9]+", text.lower())
    tokens = ["w:" + w for w in words]
    tokens += ["b:" + a + "_" + b for a, b in zip(words, words[1:])]
    for w in words:
        padded = "#" + w + "#"
        tokens += ["c:" + padded[i:i + 3] for i in range(len(padded) - 2)]
    counts = {}
    for t in tokens:
        counts[t] = counts.get(t, 0) + 1
    vec = [0.0] * dim
    for t in sorted(counts):
        idx, sign = _bucket(t, dim)
        vec[idx] += sign * (1.0 + math.log(counts[t]))
    norm = math.sqrt(sum(x * x for x in vec)) or 1.0
    return [round(x / norm, 8) for x in vec]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--catalog", default="fixtures/catalog.json")
    ap.add_argument("--out", default="fixtures/embeddings.json")
    ap.add_argument("--dim", type=int, default=384)
    args = ap.parse_args()
    with open(args.catalog) as f:
        catalog = json.load(f)
    entries = {}
    for item in catalog["datasets"] + catalog["models"]:
        entries[item["name"]] = embed(item["description"], args.dim)
    doc = {"dim": args.dim,
           "provenance": "hash-embed-v1 (signed feature hashing, dim %d)" % args.dim,
           "entries": entries}
    with open(args.out, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
