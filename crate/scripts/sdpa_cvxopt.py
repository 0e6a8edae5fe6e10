#!/usr/bin/env python3
"""Solve an SDPA sparse file with cvxopt and print the feasibility verdict.

The file's dual problem (max F0.Y, Fi.Y = ci, Y psd) is cvxopt's dual
(max -h.Z, Gi.Z + c_i = 0) with G_i = F_i, h = -F0 and c = -ci.
Prints one line: `feasible`, `infeasible` or `unknown <status>`.
"""

import re
import sys

from cvxopt import matrix, solvers, spmatrix


def numbers(line):
    return [t for t in re.split(r"[\s,{}()]+", line.strip()) if t]


def read_sdpa(path):
    lines = [l for l in open(path) if l.strip() and l.lstrip()[0] not in '"*']
    header, pos = [], 0

    def take(n):
        nonlocal pos
        while len(header) < n:
            toks = numbers(lines[pos])
            pos += 1
            for t in toks:
                if not re.match(r"^[-+.\d]", t):
                    break
                header.append(t)
        out = header[:n]
        del header[:n]
        return out

    m = int(take(1)[0])
    nblocks = int(take(1)[0])
    sizes = [int(s) for s in take(nblocks)]
    c = [float(s) for s in take(m)]
    entries = []
    for line in lines[pos:]:
        t = numbers(line)
        entries.append((int(t[0]), int(t[1]) - 1, int(t[2]) - 1, int(t[3]) - 1, float(t[4])))
    return m, sizes, c, entries


def main():
    m, sizes, c, entries = read_sdpa(sys.argv[1])
    lin = [i for i, s in enumerate(sizes) if s < 0]
    sdp = [i for i, s in enumerate(sizes) if s > 0]
    lin_off, off = {}, 0
    for i in lin:
        lin_off[i] = off
        off += -sizes[i]
    nl = off
    # Column 0 of each coefficient list holds F0, column k holds F_k.
    gl = {}
    gs = {i: {} for i in sdp}
    for k, b, r, s, v in entries:
        if sizes[b] < 0:
            gl[(lin_off[b] + r, k)] = gl.get((lin_off[b] + r, k), 0.0) + v
        else:
            n = sizes[b]
            for (a, d) in {(r, s), (s, r)}:
                gs[b][(a + d * n, k)] = gs[b].get((a + d * n, k), 0.0) + v

    def split(entries_map, rows):
        f0 = matrix(0.0, (rows, 1))
        vals, ri, ci = [], [], []
        for (row, k), v in entries_map.items():
            if k == 0:
                f0[row] = v
            else:
                vals.append(v)
                ri.append(row)
                ci.append(k - 1)
        return f0, spmatrix(vals, ri, ci, (rows, m))

    kwargs = {}
    if nl:
        f0, g = split(gl, nl)
        # cvxopt's linear cone is G x + s = h, s >= 0, matching the psd cone below.
        kwargs["Gl"], kwargs["hl"] = g, -f0
    gs_list, hs_list = [], []
    for b in sdp:
        n = sizes[b]
        f0, g = split(gs[b], n * n)
        gs_list.append(g)
        hs_list.append(matrix(-f0, (n, n)))
    solvers.options["show_progress"] = False
    cost = matrix([-x for x in c], (m, 1)) if m else matrix(0.0, (0, 1))
    sol = solvers.sdp(cost, Gs=gs_list, hs=hs_list, **kwargs)
    status = sol["status"]
    if status == "optimal":
        print("feasible")
    elif status == "dual infeasible":
        print("infeasible")
    elif status == "primal infeasible":
        # The file's dual is feasible but its objective is unbounded.
        print("feasible")
    else:
        print("unknown", status)


if __name__ == "__main__":
    main()
