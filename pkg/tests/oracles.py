"""Independent reference solvers used by the synthesis and acceptance tests."""
import sys

import numpy as np

from terrain_synth.synthesis import GameStructure

sys.setrecursionlimit(100000)


# -- oracle: Zielonka's algorithm on an explicit max-parity game --------------------------

def attractor(nodes, owner, edges, redges, target, player):
    attr = set(target)
    count = {v: sum(1 for w in edges[v] if w in nodes) for v in nodes}
    queue = list(attr)
    while queue:
        w = queue.pop()
        for v in redges[w]:
            if v not in nodes or v in attr:
                continue
            if owner[v] == player:
                attr.add(v)
                queue.append(v)
            else:
                count[v] -= 1
                if count[v] == 0:
                    attr.add(v)
                    queue.append(v)
    return attr


def zielonka(nodes, owner, prio, edges, redges):
    """(W0, W1) for a max-parity game where every node has a successor in ``nodes``."""
    if not nodes:
        return set(), set()
    p = max(prio[v] for v in nodes)
    i = p % 2
    a = attractor(nodes, owner, edges, redges, {v for v in nodes if prio[v] == p}, i)
    w = list(zielonka(nodes - a, owner, prio, edges, redges))
    if not w[1 - i]:
        out = [None, None]
        out[i], out[1 - i] = set(nodes), set()
        return tuple(out)
    b = attractor(nodes, owner, edges, redges, w[1 - i], 1 - i)
    w2 = list(zielonka(nodes - b, owner, prio, edges, redges))
    w2[1 - i] = w2[1 - i] | b
    return tuple(w2)


def oracle_winning(game):
    """System-winning states via a product with a goal counter.

    Player 0 is the system. Node kinds: ("s", state, m) owned by the environment,
    ("e", move, m) owned by the system, plus two sinks.
    """
    k = len(game.sys_goals)
    assert len(game.env_goals) == 1
    env_goal = game.env_goals[0]
    edges, owner, prio = {}, {}, {}
    win_sink, lose_sink = ("win",), ("lose",)
    for sink, pr in ((win_sink, 0), (lose_sink, 1)):
        edges[sink] = [sink]
        owner[sink] = 0
        prio[sink] = pr
    for m in range(k):
        for s in range(game.n_states):
            v = ("s", s, m)
            owner[v] = 1
            hit = bool(game.sys_goals[m][s])
            prio[v] = 2 if hit else (1 if env_goal[s] else 0)
            nm = (m + 1) % k if hit else m
            moves = list(game.env_moves(s))
            edges[v] = [("e", e, nm) for e in moves] or [win_sink]
        for e in range(len(game.ch_ptr) - 1):
            v = ("e", e, m)
            owner[v] = 0
            prio[v] = 0
            edges[v] = [("s", int(t), m) for t in game.choices(e)] or [lose_sink]
    redges = {v: [] for v in edges}
    for v, ws in edges.items():
        for w in ws:
            redges[w].append(v)
    w0, _ = zielonka(set(edges), owner, prio, edges, redges)
    return np.array([("s", s, 0) in w0 for s in range(game.n_states)])


def random_game(rng, n, n_sys, env_mode):
    env_ptr, ch_ptr, succ = [0], [0], []
    for _ in range(n):
        n_moves = int(rng.choice([0, 1, 1, 2, 2, 3], p=[0.05, 0.25, 0.2, 0.2, 0.15, 0.15]))
        for _ in range(n_moves):
            n_ch = int(rng.choice([0, 1, 2, 3], p=[0.05, 0.4, 0.35, 0.2]))
            succ.extend(int(t) for t in rng.integers(0, n, size=n_ch))
            ch_ptr.append(len(succ))
        env_ptr.append(len(ch_ptr) - 1)
    sys_goals = [rng.random(n) < rng.uniform(0.05, 0.3) for _ in range(n_sys)]
    env_goals = [np.ones(n, bool)] if env_mode == "true" else [rng.random(n) < rng.uniform(0.1, 0.5)]
    return GameStructure(n, np.array(env_ptr), np.array(ch_ptr), np.array(succ, dtype=np.int64),
                         [[0]], sys_goals, env_goals)


def replay_sound(game, sol, auto):
    """Independent check of an extracted strategy on an abstract game."""
    states = [c for c, _, _ in auto.nodes]
    for u, (s, _, j) in enumerate(auto.nodes):
        if not sol.winning[s]:
            return False
        moves = list(game.env_moves(s))
        if set(auto.edges[u]) != set(moves):
            return False
        for e, (_, v) in auto.edges[u].items():
            if states[v] not in set(game.choices(e).tolist()):
                return False
            nj = auto.nodes[v][2]
            hit = bool(game.sys_goals[j][s])
            if nj != ((j + 1) % len(game.sys_goals) if hit else j):
                return False
    # no cycle that stays at one goal index without visiting that goal
    n = len(auto.nodes)
    stuck = [not game.sys_goals[j][s] for s, _, j in auto.nodes]
    indeg = [0] * n
    sub = [[v for _, v in auto.edges[u].values() if stuck[u] and stuck[v] and auto.nodes[v][2] == auto.nodes[u][2]]
           for u in range(n)]
    for u in range(n):
        for v in sub[u]:
            indeg[v] += 1
    order = [u for u in range(n) if indeg[u] == 0]
    seen = 0
    while order:
        u = order.pop()
        seen += 1
        for v in sub[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                order.append(v)
    return seen == n
