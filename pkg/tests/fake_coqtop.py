#!/usr/bin/env python3
"""Stand-in for ``coqtop -emacs`` driven by a transcript fixture.

Reads one sentence per line and answers with Coq-style goal output and
an emacs prompt. The transcript path comes from FAKE_COQTOP_TRANSCRIPT.
A line ``Sleep N.`` blocks for N seconds (timeout tests).
"""

import json
import os
import re
import sys
import time

PROMPT = "<prompt>{name} < {sid} |{name}| 0 < </prompt>"


def norm(text):
    return " ".join(text.split())


def show_goals(state):
    goals = state.get("goals", [])
    if not goals:
        if state.get("unfocused", 0):
            return "This subproof is complete, but there are some unfocused goals.\nFocus next goal with bullet -.\n"
        return "No more subgoals.\n"
    n = len(goals)
    out = [f"{n} subgoal{'s' if n > 1 else ''}", "  "]
    for h in goals[0].get("hyps", []):
        out.append("  " + h)
    out.append("  ============================")
    out.append("  " + goals[0]["conclusion"])
    for i, g in enumerate(goals[1:], 2):
        out.append("")
        out.append(f"subgoal {i} is:")
        out.append(" " + g["conclusion"])
    return "\n".join(out) + "\n"


def error(sentence, message):
    return f"Toplevel input, characters 0-{len(sentence)}:\n> {sentence}\n> ^^^^\nError: {message}\n"


def main():
    with open(os.environ["FAKE_COQTOP_TRANSCRIPT"], encoding="utf-8") as f:
        t = json.load(f)
    transitions = {sid: {norm(k): v for k, v in table.items()} for sid, table in t.get("transitions", {}).items()}
    complete = set(t.get("complete", []))
    states = {1: None}  # state id -> transcript state (None: outside proof mode)
    sid = 1
    name = "Coq"
    out = sys.stdout
    out.write("Welcome to Coq (fake)\n" + PROMPT.format(name=name, sid=sid))
    out.flush()
    for line in sys.stdin:
        line = norm(line)
        if not line:
            continue
        current = states[sid]
        reply, advance, new = "", False, current
        m = re.match(r"^Timeout \d+ (.*)$", line)
        if m:
            line = m.group(1)
        back = re.match(r"^BackTo (\d+)\.$", line)
        if back:
            target = int(back.group(1))
            if target not in states:
                reply = error(line, f"Invalid state {target}.")
            else:
                sid = target
                states = {k: v for k, v in states.items() if k <= sid}
                current = states[sid]
                name = t["theorem"] if current is not None else "Coq"
        elif line.startswith("Sleep "):
            time.sleep(float(line.split()[1].rstrip(".")))
        elif line.startswith("Require") or line.startswith("From"):
            if "Missing" in line:
                reply = error(line, "Cannot find a physical path bound to logical path Missing.")
            else:
                advance = True
        elif current is None:
            m = re.match(r"^(Theorem|Lemma)\s+([\w']+)", line)
            if m and m.group(2) == t["theorem"]:
                new, advance = t["initial"], True
                name = t["theorem"]
                reply = show_goals(t["states"][new])
            else:
                reply = error(line, "The reference undefined_thing was not found in the current environment.")
        elif line == "Proof.":
            new, advance = current, True
            reply = show_goals(t["states"][current])
        elif line in ("Qed.", "Defined."):
            if current in complete:
                reply, new, advance = f"{t['theorem']} is defined\n", None, True
                name = "Coq"
            else:
                reply = error(line, f"(in proof {t['theorem']}): Attempt to save an incomplete proof")
        else:
            target = transitions.get(current, {}).get(line)
            if target is None:
                reply = error(line, f"No transition for {line}.")
            elif isinstance(target, dict):
                reply = error(line, target["error"])
            else:
                new, advance = target, True
                reply = show_goals(t["states"][target])
        if advance:
            sid += 1
            states[sid] = new
        out.write(reply + PROMPT.format(name=name, sid=sid))
        out.flush()


if __name__ == "__main__":
    main()
