"""Pure-Python branch-and-bound kernel over node assignments.

Mirrors ``_bnb.pyx`` exactly (same branch order, same tie breaks, same
expansion counting) so either backend gives identical results.
"""

import math

TOL = 1e-9
UNASSIGNED = -2
DUMMY = -1


def bnb_search(
    n1, n2, adj1, adj2, nbrs1, nbrs2, deg1, deg2,
    cost, ins, e_del, e_ins, lab1, lab2, n_lab,
    binary, ins_unit, order, budget, init_ub,
):
    """Minimum-cost assignment of left nodes to right nodes or dummies.

    ``cost[v][w]`` is the node cost of v -> w with column ``n2`` holding the
    deletion cost; ``ins[w]`` is the cost of inserting right node ``w``.
    Returns ``(lower, upper, assignment, expansions, complete, trace)``
    where ``trace`` lists every improvement of the incumbent.
    """
    img = [UNASSIGNED] * n1
    used2 = [False] * n2
    cnt1 = [0] * n_lab
    cnt2 = [0] * n_lab
    for v in range(n1):
        cnt1[lab1[v]] += 1
    for w in range(n2):
        cnt2[lab2[w]] += 1
    st = {
        "r1": n1, "r2": n2,
        "e1r": sum(deg1) // 2, "e2r": sum(deg2) // 2,
        "ub": init_ub, "best": None, "expansions": 0,
        "aborted": False, "open_min": math.inf,
    }
    trace = []

    def bound():
        r1, r2 = st["r1"], st["r2"]
        if binary:
            common = 0
            for l in range(n_lab):
                common += min(cnt1[l], cnt2[l])
            nodes = (r1 - common) + max(0, r2 - r1) * ins_unit
        else:
            nodes = 0.0
            for v in range(n1):
                if img[v] != UNASSIGNED:
                    continue
                best = cost[v][n2]
                for w in range(n2):
                    if not used2[w] and cost[v][w] < best:
                        best = cost[v][w]
                nodes += best
            if r2 > r1:
                mins = math.inf
                for w in range(n2):
                    if not used2[w] and ins[w] < mins:
                        mins = ins[w]
                nodes += (r2 - r1) * mins
        e1r, e2r = st["e1r"], st["e2r"]
        edges = e_del * max(0, e1r - e2r) + e_ins * max(0, e2r - e1r)
        return nodes + edges

    def apply(v, w):
        a1 = 0
        for u in nbrs1[v]:
            if img[u] != UNASSIGNED:
                a1 += 1
        img[v] = w
        st["r1"] -= 1
        cnt1[lab1[v]] -= 1
        st["e1r"] -= a1
        if w >= 0:
            a2 = 0
            for x in nbrs2[w]:
                if used2[x]:
                    a2 += 1
            used2[w] = True
            st["r2"] -= 1
            cnt2[lab2[w]] -= 1
            st["e2r"] -= a2

    def undo(v, w):
        img[v] = UNASSIGNED
        a1 = 0
        for u in nbrs1[v]:
            if img[u] != UNASSIGNED:
                a1 += 1
        st["r1"] += 1
        cnt1[lab1[v]] += 1
        st["e1r"] += a1
        if w >= 0:
            used2[w] = False
            a2 = 0
            for x in nbrs2[w]:
                if used2[x]:
                    a2 += 1
            st["r2"] += 1
            cnt2[lab2[w]] += 1
            st["e2r"] += a2

    def expand(depth, g, lb_here):
        if depth == n1:
            total = g
            for w in range(n2):
                if not used2[w]:
                    total += ins[w]
            total += e_ins * st["e2r"]
            if total < st["ub"] - TOL:
                st["ub"] = total
                st["best"] = list(img)
                trace.append(total)
            return
        if st["expansions"] >= budget and (st["best"] is not None or init_ub < math.inf):
            st["aborted"] = True
            if lb_here < st["open_min"]:
                st["open_min"] = lb_here
            return
        st["expansions"] += 1
        v = order[depth]
        cands = []
        for w in list(range(n2)) + [DUMMY]:
            if w >= 0 and used2[w]:
                continue
            inc = cost[v][w if w >= 0 else n2]
            for d in range(depth):
                u = order[d]
                pu = img[u]
                e1 = adj1[v][u]
                e2 = 1 if (w >= 0 and pu >= 0 and adj2[w][pu]) else 0
                if e1 and not e2:
                    inc += e_del
                elif e2 and not e1:
                    inc += e_ins
            apply(v, w)
            lb = g + inc + bound()
            undo(v, w)
            if w >= 0:
                dd = abs(deg1[v] - deg2[w])
                idx = w
            else:
                dd = deg1[v]
                idx = n2
            cands.append((lb, dd, idx, w, inc))
        cands.sort()
        for lb, _, _, w, inc in cands:
            if lb >= st["ub"] - TOL:
                break
            if st["aborted"]:
                if lb < st["open_min"]:
                    st["open_min"] = lb
                break
            apply(v, w)
            expand(depth + 1, g + inc, lb)
            undo(v, w)

    root_lb = bound()
    if root_lb < init_ub - TOL:
        expand(0, 0.0, root_lb)
    ub = st["ub"]
    if not st["aborted"]:
        if st["best"] is None:
            return max(root_lb, init_ub), math.inf, None, st["expansions"], True, trace
        return ub, ub, st["best"], st["expansions"], True, trace
    lower = max(root_lb, min(ub, st["open_min"]))
    upper = ub if st["best"] is not None else math.inf
    return lower, upper, st["best"], st["expansions"], False, trace
