#!/usr/bin/env python3
"""External-source stub: signals readiness, then never answers."""
import json
import sys

print(json.dumps({"ready": True}), flush=True)
for _ in sys.stdin:
    pass
