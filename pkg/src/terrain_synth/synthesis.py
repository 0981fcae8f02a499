"""Explicit-state GR(1) games: construction from reduced specs, solving, strategy extraction."""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NotRealizableError, SpecNotReducedError
from .formula import Formula, evaluate_vec
from .spec import GR1Spec


@dataclass
class GameStructure:
    """Turn-based game in CSR form.

    From state ``s`` the environment picks a move ``e`` in ``env_ptr[s]:env_ptr[s+1]``;
    the system then picks a successor from ``succ[ch_ptr[e]:ch_ptr[e+1]]``. A state with
    no environment move is won by the system (the environment cannot respect its
    assumptions there).
    """

    n_states: int
    env_ptr: np.ndarray
    ch_ptr: np.ndarray
    succ: np.ndarray
    init_groups: list  # one list of candidate states per admissible initial input valuation
    sys_goals: list
    env_goals: list
    env_label: np.ndarray | None = None  # next robot cell index of each env move
    state_cell: np.ndarray | None = None
    state_output: np.ndarray | None = None  # 0 = idle, k+1 = outputs[k]
    cells: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    targets: dict = field(default_factory=dict)  # output -> postcondition cell (first)

    def env_moves(self, s):
        return range(self.env_ptr[s], self.env_ptr[s + 1])

    def choices(self, e):
        return self.succ[self.ch_ptr[e]:self.ch_ptr[e + 1]]

    def describe(self, s):
        if self.state_cell is None:
            return (int(s), None)
        k = int(self.state_output[s])
        return (self.cells[self.state_cell[s]], None if k == 0 else self.outputs[k - 1])


def _atom_column(name, cell_idx, out_idx, cells, out_pos):
    if name in out_pos:
        return out_idx == out_pos[name]
    if name[0] == "x" and name[1:].isdigit():
        return cells[cell_idx, 0] == int(name[1:])
    if name[0] == "y" and name[1:].isdigit():
        return cells[cell_idx, 1] == int(name[1:])
    raise SpecNotReducedError(f"atom {name} is not a robot input or skill output")


def build_game(spec: GR1Spec) -> GameStructure:
    """Enumerate (robot cell, active skill) states and the transitions allowed by the safety parts."""
    if not spec.is_reduced:
        left = sorted(spec.atom_names() - set(spec.outputs) - {p.id for p in spec.inputs if p.kind.startswith("robot")})
        raise SpecNotReducedError(f"terrain/request atoms remain: {left[:5]}")
    cells = spec.grid.cells()
    cell_arr = np.array(cells, dtype=np.int64).reshape(-1, 2)
    n, k = len(cells), len(spec.outputs)
    out_pos = {o: i + 1 for i, o in enumerate(spec.outputs)}
    n_states = n * (k + 1)
    st_cell = np.repeat(np.arange(n), k + 1)
    st_out = np.tile(np.arange(k + 1), n)

    env_fs = list(spec.env_safety_skill) + list(spec.env_safety_hard)
    for f in env_fs:
        if any(nx and name in out_pos for name, nx in f.atoms()):
            raise ValueError("environment safety may not reference next-step outputs")

    # environment: rows (state, next cell)
    rows_s = np.repeat(np.arange(n_states), n)
    rows_c = np.tile(np.arange(n), n_states)
    alive = np.arange(len(rows_s))
    for f in env_fs:
        if not len(alive):
            break
        s_idx, c_idx = rows_s[alive], rows_c[alive]

        def col(name, is_next, s_idx=s_idx, c_idx=c_idx):
            if is_next:
                return _atom_column(name, c_idx, np.zeros_like(c_idx), cell_arr, {})
            return _atom_column(name, st_cell[s_idx], st_out[s_idx], cell_arr, out_pos)

        alive = alive[evaluate_vec(f, col, len(alive))]
    env_s, env_c = rows_s[alive], rows_c[alive]
    env_ptr = np.zeros(n_states + 1, dtype=np.int64)
    np.add.at(env_ptr, env_s + 1, 1)
    env_ptr = np.cumsum(env_ptr)

    # system: rows (env move, next output)
    sys_fs = list(spec.sys_safety_skill) + list(spec.sys_safety_hard)
    next_only = [f for f in sys_fs if all(nx for _, nx in f.atoms())]
    mixed = [f for f in sys_fs if not all(nx for _, nx in f.atoms())]
    tab_c = np.repeat(np.arange(n), k + 1)
    tab_o = np.tile(np.arange(k + 1), n)
    ok_tab = np.ones(n * (k + 1), dtype=bool)
    for f in next_only:
        ok_tab &= evaluate_vec(f, lambda name, _nx: _atom_column(name, tab_c, tab_o, cell_arr, out_pos), len(ok_tab))
    n_moves = len(env_s)
    r_move = np.repeat(np.arange(n_moves), k + 1)
    r_out = np.tile(np.arange(k + 1), n_moves)
    r_cell = env_c[r_move]
    keep = ok_tab[r_cell * (k + 1) + r_out]
    idx = np.nonzero(keep)[0]
    for f in mixed:
        if not len(idx):
            break
        m, c, o = r_move[idx], r_cell[idx], r_out[idx]
        src = env_s[m]

        def col(name, is_next, m=m, c=c, o=o, src=src):
            if is_next:
                return _atom_column(name, c, o, cell_arr, out_pos)
            return _atom_column(name, st_cell[src], st_out[src], cell_arr, out_pos)

        idx = idx[evaluate_vec(f, col, len(idx))]
    ch_move = r_move[idx]
    succ = (r_cell[idx] * (k + 1) + r_out[idx]).astype(np.int64)
    ch_ptr = np.zeros(n_moves + 1, dtype=np.int64)
    np.add.at(ch_ptr, ch_move + 1, 1)
    ch_ptr = np.cumsum(ch_ptr)

    def state_eval(f: Formula):
        return evaluate_vec(f, lambda name, _nx: _atom_column(name, st_cell, st_out, cell_arr, out_pos), n_states)

    env_init = state_eval(spec.env_init)
    sys_init = state_eval(spec.sys_init)
    groups = []
    for c in range(n):
        block = np.arange(c * (k + 1), (c + 1) * (k + 1))
        if env_init[block].any():
            groups.append([int(s) for s in block if env_init[s] and sys_init[s]])
    targets = {o.id: tuple(o.target) for o in spec.skills}
    return GameStructure(
        n_states, env_ptr, ch_ptr, succ, groups,
        [state_eval(g) for g in spec.sys_liveness], [state_eval(g) for g in spec.env_liveness],
        env_c.astype(np.int64), st_cell, st_out, [tuple(c) for c in cells], list(spec.outputs), targets,
    )


# -- fixpoint -------------------------------------------------------------------------

def cpre(game: GameStructure, target: np.ndarray) -> np.ndarray:
    return kernels.cpre(game.env_ptr, game.ch_ptr, game.succ, target)


@dataclass
class Solution:
    realizable: bool
    winning: np.ndarray
    layers: list  # per sys goal: list of (Y_r, [X_{r,i} per env goal]) in rank order

    def winning_states(self) -> set:
        return set(np.nonzero(self.winning)[0].tolist())


def _goal_layers(game, z, goal):
    base = goal & cpre(game, z)
    y = np.zeros(game.n_states, dtype=bool)
    layers = []
    while True:
        start = base | cpre(game, y)
        y_new = np.zeros_like(y)
        xs = []
        for eg in game.env_goals:
            x = z.copy()
            while True:
                x_new = start | (~eg & cpre(game, x))
                if np.array_equal(x_new, x):
                    break
                x = x_new
            xs.append(x)
            y_new |= x
        if np.array_equal(y_new, y):
            return y, layers
        layers.append((y_new, xs))
        y = y_new


def solve_game(game: GameStructure) -> Solution:
    """Three-nested GR(1) fixpoint (nu Z. and_j mu Y. or_i nu X.)."""
    z = np.ones(game.n_states, dtype=bool)
    while True:
        z_old = z
        for goal in game.sys_goals:
            z = z & _goal_layers(game, z, goal)[0]
        if np.array_equal(z, z_old):
            break
    layers = [_goal_layers(game, z, g)[1] for g in game.sys_goals]
    realizable = all(any(z[s] for s in grp) for grp in game.init_groups)
    return Solution(bool(realizable), z, layers)


def check_realizability(game: GameStructure):
    sol = solve_game(game)
    return sol.realizable, sol.winning_states()


# -- strategy ---------------------------------------------------------------------------

@dataclass
class StrategyAutomaton:
    """Nodes are (robot cell, executing skill or None, goal index).

    ``edges[n]`` maps each admissible next robot cell to (chosen skill, successor node).
    The skill stored in a node is the one executed from the node's cell.
    """

    nodes: list
    edges: list
    initial: dict  # robot cell -> node index
    goal_cells: list
    targets: dict = field(default_factory=dict)  # skill id -> postcondition cell

    def node_of(self, idx):
        return self.nodes[idx]

    def step(self, node: int, observed_cell):
        """(skill chosen after observing ``observed_cell``, next node)."""
        return self.edges[node][tuple(observed_cell)]

    def chosen(self, node: int):
        cell, skill, _ = self.nodes[node]
        return skill

    def to_dict(self):
        return {
            "nodes": [{"cell": list(c), "skill": s, "goal": g} for c, s, g in self.nodes],
            "edges": [[[list(c), s, m] for c, (s, m) in sorted(e.items())] for e in self.edges],
            "initial": [[list(c), n] for c, n in sorted(self.initial.items())],
            "goal_cells": [list(c) for c in self.goal_cells],
            "targets": {k: list(v) for k, v in sorted(self.targets.items())},
        }

    @classmethod
    def from_dict(cls, d):
        nodes = [(tuple(n["cell"]), n["skill"], n["goal"]) for n in d["nodes"]]
        edges = [{tuple(c): (s, m) for c, s, m in e} for e in d["edges"]]
        return cls(nodes, edges, {tuple(c): n for c, n in d["initial"]}, [tuple(c) for c in d["goal_cells"]],
                   {k: tuple(v) for k, v in d.get("targets", {}).items()})

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def path_from(self, cell, max_steps=None):
        """Skill sequence executed from the idle node at ``cell`` until the robot comes to rest."""
        node, c = self.initial[tuple(cell)], tuple(cell)
        seq = []
        limit = max_steps or len(self.nodes) + 1
        while len(seq) < limit:
            _, node = self.step(node, c)
            skill = self.nodes[node][1]
            if skill is None:
                break
            seq.append(skill)
            c = self.targets[skill]
        return seq


def _ranks(layers, n):
    rank = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    for r, (y, _) in enumerate(layers):
        rank[(rank == np.iinfo(np.int64).max) & y] = r
    return rank


def extract_strategy(game: GameStructure, solution: Solution | None = None) -> StrategyAutomaton:
    """Rank-based memoryless-per-goal strategy from the fixpoint layers.

    Among winning successors the choice minimizes attractor rank, then the Manhattan
    distance of the chosen skill's target to the goal, then the skill id (idle last).
    """
    sol = solution or solve_game(game)
    if not sol.realizable:
        raise NotRealizableError("specification is not realizable")
    if not all(g.all() for g in game.env_goals):
        raise ValueError("strategy extraction assumes trivial environment liveness")
    z = sol.winning
    n_goals = len(game.sys_goals)
    ranks = [_ranks(sol.layers[j], game.n_states) for j in range(n_goals)]
    goal_cells = []
    for g in game.sys_goals:
        cs = sorted({game.cells[game.state_cell[s]] for s in np.nonzero(g)[0]}) if game.state_cell is not None else []
        goal_cells.append(cs)

    def key(j, t):
        cell, skill = game.describe(t)
        if game.state_cell is None:
            return (int(ranks[j][t]), 0, 0, str(t))
        post = game.targets.get(skill, cell) if skill else cell
        dist = min((abs(post[0] - g[0]) + abs(post[1] - g[1]) for g in goal_cells[j]), default=0)
        return (int(ranks[j][t]), dist, 1 if skill is None else 0, skill or "")

    def choose(s, e, j):
        options = [int(t) for t in game.choices(e) if z[t]]
        if not options:
            raise NotRealizableError("strategy left the winning region")
        if game.sys_goals[j][s]:
            nj = (j + 1) % n_goals
            idle = [t for t in options if game.describe(t)[1] is None]
            if n_goals == 1 and idle:
                return min(idle, key=lambda t: key(nj, t)), nj
            return min(options, key=lambda t: key(nj, t)), nj
        return min(options, key=lambda t: key(j, t)), j

    nodes, edges, index = [], [], {}

    def node_id(s, j):
        if (s, j) not in index:
            index[(s, j)] = len(nodes)
            cell, skill = game.describe(s)
            nodes.append((cell, skill, j))
            edges.append(None)
            queue.append((s, j))
        return index[(s, j)]

    queue = deque()
    initial = {}
    for grp in game.init_groups:
        win = [s for s in grp if z[s]]
        if win:
            s0 = min(win)
            initial[game.describe(s0)[0]] = node_id(s0, 0)
    while queue:
        s, j = queue.popleft()
        out = {}
        for e in game.env_moves(s):
            t, nj = choose(s, e, j)
            nid = node_id(t, nj)
            label = game.cells[game.env_label[e]] if game.env_label is not None else int(e)
            out[label] = (game.describe(t)[1], nid)
        edges[index[(s, j)]] = out
    return StrategyAutomaton(nodes, edges, initial, goal_cells[0] if goal_cells else [], dict(game.targets))


def verify_strategy(game: GameStructure, auto: StrategyAutomaton, spec: GR1Spec | None = None) -> bool:
    """Model-check a strategy: valid edges, satisfied preconditions, goal reached on every path."""
    index = {}
    for s in range(game.n_states):
        cell, skill = game.describe(s)
        index[(cell, skill)] = s
    goal = game.sys_goals[0]
    n = len(auto.nodes)
    state_of = []
    for (cell, skill, _j) in auto.nodes:
        state_of.append(index[(cell, skill)])
    # edges respect the game
    for u, e in enumerate(auto.edges):
        s = state_of[u]
        moves = {game.cells[game.env_label[m]]: set(game.choices(m).tolist()) for m in game.env_moves(s)}
        if set(e.keys()) != set(moves.keys()):
            return False
        for c, (skill, v) in e.items():
            if state_of[v] not in moves[c]:
                return False
        if spec is not None and auto.nodes[u][1] is not None:
            sk = spec.skill(auto.nodes[u][1])
            if auto.nodes[u][0] not in [p.cell for p in sk.pre]:
                return False
    # every path from an initial node hits the goal within |states| steps: no goal-free cycle
    bad = [not goal[state_of[u]] for u in range(n)]
    color = [0] * n
    for root in auto.initial.values():
        stack = [(root, iter(auto.edges[root].values()))]
        if not bad[root]:
            continue
        color[root] = 1
        while stack:
            u, it = stack[-1]
            for _, v in it:
                if not bad[v]:
                    continue
                if color[v] == 1:
                    return False
                if color[v] == 0:
                    color[v] = 1
                    stack.append((v, iter(auto.edges[v].values())))
                    break
            else:
                color[u] = 2
                stack.pop()
    return True


def synthesize(spec: GR1Spec):
    """(realizable, automaton or None, game, solution)."""
    game = build_game(spec)
    sol = solve_game(game)
    auto = extract_strategy(game, sol) if sol.realizable else None
    return sol.realizable, auto, game, sol
