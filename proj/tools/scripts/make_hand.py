"""Writes data/hand_synthetic.json: a synthetic five-digit hand, four joints per digit.

Palm frame: x forward, y lateral, z up, palm facing -z. Each digit has an
abduction joint (local z), a co-located flex joint (local y) and two more flex
joints along the link. Positive flex curls the digit toward -z.
"""
import json
import math
import sys


def rz(a):
    c, s = math.cos(a), math.sin(a)
    return [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]


def transform(rot, t):
    return [v for row in rot for v in row] + list(t)


IDENT = rz(0.0)


def digit(name, base, yaw, links, abduction):
    l1, l2, l3 = links
    return {
        "name": name,
        "joints": [
            {"offset": transform(rz(yaw), base), "axis": [0, 0, 1], "limits": [-abduction, abduction], "vel_limit": 2.0},
            {"offset": transform(IDENT, (0, 0, 0)), "axis": [0, 1, 0], "limits": [-0.2, 1.6], "vel_limit": 2.0},
            {"offset": transform(IDENT, (l1, 0, 0)), "axis": [0, 1, 0], "limits": [0.0, 1.8], "vel_limit": 2.0},
            {"offset": transform(IDENT, (l2, 0, 0)), "axis": [0, 1, 0], "limits": [0.0, 1.6], "vel_limit": 2.0},
        ],
        "tip_offset": transform(rz(math.pi), (l3, 0, 0)),
    }


hand = {
    "schema_version": 1,
    "name": "synthetic-five-digit",
    "synthetic": True,
    "note": "Synthetic layout for planning experiments; not measured from any real hand.",
    "actuated_dof": 7,
    "fingers": [
        digit("thumb", (-0.016, 0.0, -0.026), math.pi, (0.040, 0.030, 0.025), 0.6),
        digit("index", (0.013, -0.03, -0.026), 0.0, (0.045, 0.028, 0.022), 0.5),
        digit("middle", (0.013, -0.01, -0.026), 0.0, (0.047, 0.029, 0.022), 0.5),
        digit("ring", (0.013, 0.01, -0.026), 0.0, (0.045, 0.028, 0.022), 0.5),
        digit("little", (0.013, 0.03, -0.026), 0.0, (0.045, 0.027, 0.022), 0.5),
    ],
}

out = sys.argv[1] if len(sys.argv) > 1 else "data/hand_synthetic.json"
with open(out, "w") as f:
    json.dump(hand, f, indent=2)
    f.write("\n")
