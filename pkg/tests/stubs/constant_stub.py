#!/usr/bin/env python3
"""External-source stub: replies label 0 to every request."""
import json
import sys

print(json.dumps({"ready": True}), flush=True)
for line in sys.stdin:
    line = line.strip()
    if not line:
        continue
    req = json.loads(line)
    reply = {"prompt_id": req["prompt_id"], "draw": req["draw"], "label": 0}
    print(json.dumps(reply), flush=True)
