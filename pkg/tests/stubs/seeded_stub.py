#!/usr/bin/env python3
"""External-source stub: label 1 with probability P, deterministic per
(prompt_id, draw) so retries and reordering cannot change the answer.

Usage: seeded_stub.py P SEED
"""
import hashlib
import json
import sys

p = float(sys.argv[1])
seed = sys.argv[2]

print(json.dumps({"ready": True}), flush=True)
for line in sys.stdin:
    line = line.strip()
    if not line:
        continue
    req = json.loads(line)
    digest = hashlib.sha256(
        f"{seed}:{req['prompt_id']}:{req['draw']}".encode()
    ).digest()
    u = int.from_bytes(digest[:8], "big") / 2**64
    reply = {
        "prompt_id": req["prompt_id"],
        "draw": req["draw"],
        "label": 1 if u < p else 0,
    }
    print(json.dumps(reply), flush=True)
