"""Independent brute-force reference for the nuclear-inspection case study.

Hand-codes the DTMC semantics of the case-study model (two modules composed
with uniform 1/m choice among enabled transition units) directly in Python,
with exact rational arithmetic throughout: BFS state exploration, graph
fixpoints for probability-0/1 sets, and Gaussian elimination over Fractions
for unbounded reachability and expected rewards.

This file deliberately shares no code with the package under test.  Running
it as a script prints every pinned value used by the test suite.
"""

from __future__ import annotations

from collections import deque
from fractions import Fraction

# Default constants of the case-study model.
DEFAULTS = {
    "p_rad_crit": Fraction(2, 100),
    "p_rad_med": Fraction(8, 100),
    "p_err": Fraction(1, 100),
    "batt_dec": 20,
    "batt_dec_cm": 10,
    "batt_threshold": 30,
}

INIT = (0, 100, 0, 0, 2, False)  # (loc, batt, rad, sw, vel, op_used)


def enabled_units(s, c):
    """All enabled transition units in state s; each unit is a list of
    (probability, successor) outcomes summing to 1."""
    loc, batt, rad, sw, vel, op = s
    p_err = c["p_err"]
    p_crit = c["p_rad_crit"]
    p_med = c["p_rad_med"]
    p_safe = 1 - p_crit - p_med
    units = []

    # AIR_Navigator, unlabeled commands.
    if loc < 4 and batt < c["batt_threshold"]:
        units.append([(Fraction(1), (6, batt, rad, sw, vel, op))])
    if loc < 4 and batt >= c["batt_threshold"] and batt >= c["batt_dec"] and sw == 0:
        d = c["batt_dec"]
        units.append([
            (p_err, (5, batt - d, rad, sw, vel, op)),
            ((1 - p_err) * p_crit, (loc + 1, batt - d, 2, sw, vel, op)),
            ((1 - p_err) * p_med, (loc + 1, batt - d, 1, sw, vel, op)),
            ((1 - p_err) * p_safe, (loc + 1, batt - d, 0, sw, vel, op)),
        ])
    if loc < 4 and batt >= c["batt_threshold"] and batt >= c["batt_dec_cm"] and sw == 1:
        d = c["batt_dec_cm"]
        units.append([
            (p_err, (5, batt - d, rad, sw, vel, op)),
            ((1 - p_err) * p_crit, (loc + 1, batt - d, 2, sw, vel, op)),
            ((1 - p_err) * p_med, (loc + 1, batt - d, 1, sw, vel, op)),
            ((1 - p_err) * p_safe, (loc + 1, batt - d, 0, sw, vel, op)),
        ])
    if loc < 4 and sw == 2 and batt >= c["batt_threshold"]:
        units.append([(Fraction(1), s)])
    if loc in (4, 5, 6):
        units.append([(Fraction(1), s)])

    # AIR_SafetyWrapper, unlabeled commands.
    if sw == 0 and rad == 1:
        units.append([(Fraction(1), (loc, batt, rad, 1, 1, op))])
    if sw <= 1 and rad == 2:
        units.append([(Fraction(1), (loc, batt, rad, 2, 0, op))])
    if sw == 2:
        units.append([(Fraction(1), (loc, batt, rad, 2, 0, op))])

    # Labeled commands [hdng] and [vel]; each label lives in one module only,
    # so each fires alone as its own unit.
    if sw == 0:
        units.append([(Fraction(1), (loc, batt, rad, sw, vel, True))])
        units.append([(Fraction(1), (loc, batt, rad, sw, vel, True))])
    return units


def build_chain(c):
    """BFS exploration; returns (states, index map, rows) where rows[i] is a
    dict successor-index -> exact probability."""
    states = [INIT]
    index = {INIT: 0}
    rows = []
    queue = deque([INIT])
    while queue:
        s = queue.popleft()
        units = enabled_units(s, c)
        m = len(units)
        assert m > 0, f"deadlock in oracle at {s}"
        dist = {}
        for unit in units:
            total = sum(p for p, _ in unit)
            assert total == 1, f"unit probabilities sum to {total} at {s}"
            for p, t in unit:
                if p == 0:
                    continue
                if t not in index:
                    index[t] = len(states)
                    states.append(t)
                    queue.append(t)
                dist[t] = dist.get(t, Fraction(0)) + p / m
        rows.append(None)  # placeholder; filled after indices settle
        rows[index[s]] = {index[t]: p for t, p in dist.items()}
    # rows were appended in BFS order which equals index order here, but the
    # placeholder dance above guards against any drift.
    return states, index, rows


def backward_reach(rows, n, seeds, allowed):
    """Indices that can reach `seeds` via states in `allowed` (seeds always
    included)."""
    preds = [[] for _ in range(n)]
    for i, row in enumerate(rows):
        for j in row:
            preds[j].append(i)
    reached = set(seeds)
    queue = deque(seeds)
    while queue:
        j = queue.popleft()
        for i in preds[j]:
            if i not in reached and allowed(i):
                reached.add(i)
                queue.append(i)
    return reached


def prob0(rows, n, phi, psi):
    psi_set = [i for i in range(n) if psi(i)]
    can = backward_reach(rows, n, psi_set, lambda i: phi(i) and not psi(i))
    return set(range(n)) - can


def prob1(rows, n, phi, psi):
    z = prob0(rows, n, phi, psi)
    bad = backward_reach(rows, n, list(z), lambda i: phi(i) and not psi(i))
    return set(range(n)) - bad


def solve_linear(a, b):
    """Gaussian elimination over Fractions; a is modified in place."""
    n = len(b)
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        b[col], b[piv] = b[piv], b[col]
        inv = 1 / a[col][col]
        a[col] = [v * inv for v in a[col]]
        b[col] *= inv
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [rv - f * cv for rv, cv in zip(a[r], a[col])]
                b[r] -= f * b[col]
    return b


def until_probability(rows, n, phi, psi):
    """Exact P(phi U psi) per state."""
    zero = prob0(rows, n, phi, psi)
    one = prob1(rows, n, phi, psi)
    unknown = [i for i in range(n) if i not in zero and i not in one]
    pos = {i: k for k, i in enumerate(unknown)}
    u = len(unknown)
    a = [[Fraction(0)] * u for _ in range(u)]
    b = [Fraction(0)] * u
    for i in unknown:
        k = pos[i]
        a[k][k] += 1
        for j, p in rows[i].items():
            if j in one:
                b[k] += p
            elif j in pos:
                a[k][pos[j]] -= p
    sol = solve_linear(a, b) if u else []
    x = [Fraction(0)] * n
    for i in one:
        x[i] = Fraction(1)
    for i in unknown:
        x[i] = sol[pos[i]]
    return x


def bounded_eventually(rows, n, psi, k):
    x = [Fraction(1) if psi(i) else Fraction(0) for i in range(n)]
    for _ in range(k):
        x = [
            Fraction(1) if psi(i) else
            sum((p * x[j] for j, p in rows[i].items()), Fraction(0))
            for i in range(n)
        ]
    return x


def reach_reward(rows, n, reward, psi):
    """Exact expected cumulated reward until psi; None encodes +infinity."""
    one = prob1(rows, n, lambda i: True, psi)
    unknown = [i for i in one if not psi(i)]
    pos = {i: k for k, i in enumerate(unknown)}
    u = len(unknown)
    a = [[Fraction(0)] * u for _ in range(u)]
    b = [Fraction(reward(i)) for i in unknown]
    for i in unknown:
        k = pos[i]
        a[k][k] += 1
        for j, p in rows[i].items():
            if j in pos:
                a[k][pos[j]] -= p
    sol = solve_linear(a, b) if u else []
    r = [None] * n
    for i in one:
        r[i] = Fraction(0)
    for i in unknown:
        r[i] = sol[pos[i]]
    return r


def case_study_results(c=None):
    """All 17 named case-study results, exact.  Probability/reward queries map
    to a Fraction (or None for +infinity); bound properties map to a bool."""
    c = dict(DEFAULTS, **(c or {}))
    states, index, rows = build_chain(c)
    n = len(states)
    thr = c["batt_threshold"]

    def sv(i):
        return states[i]

    loc = lambda i: sv(i)[0]
    batt = lambda i: sv(i)[1]
    rad = lambda i: sv(i)[2]
    sw = lambda i: sv(i)[3]
    vel = lambda i: sv(i)[4]
    op = lambda i: sv(i)[5]
    true = lambda i: True
    terminal = lambda i: loc(i) in (4, 5, 6)

    res = {}
    res["_state_count"] = n

    def init_until(phi, psi):
        return until_probability(rows, n, phi, psi)[0]

    res["P_succ"] = init_until(true, lambda i: loc(i) == 4)
    res["P_forb"] = init_until(true, lambda i: loc(i) == 5)
    res["P_safe"] = 1 - res["P_forb"]
    res["P_condSucc"] = init_until(lambda i: loc(i) != 5, lambda i: loc(i) == 4)
    res["P_battRisk"] = init_until(true, lambda i: batt(i) < thr)
    res["P_timeBound"] = bounded_eventually(rows, n, lambda i: loc(i) == 4, 5)[0]
    safe_energy = lambda i: loc(i) != 5 and loc(i) != 6 and batt(i) >= thr
    res["P_safeEnergy"] = 1 - init_until(true, lambda i: not safe_energy(i))

    rew_fns = {
        "R_moves": lambda i: 1 if loc(i) < 4 else 0,
        "R_dose": lambda i: 1 if rad(i) >= 1 else 0,
        "R_time_cm": lambda i: 1 if sw(i) == 1 else 0,
        "R_time_stopped": lambda i: 1 if vel(i) == 0 else 0,
    }
    for name, fn in rew_fns.items():
        res[name] = reach_reward(rows, n, fn, terminal)[0]

    p1 = lambda psi: 0 in prob1(rows, n, true, psi)
    p0 = lambda psi: 0 in prob0(rows, n, true, psi)
    res["P_warnMode"] = p1(lambda i: rad(i) == 1 and sw(i) == 1)
    res["P_critMode"] = p1(lambda i: rad(i) == 2 and sw(i) == 2)
    res["P_fullSpeed"] = p0(lambda i: sw(i) == 0 and vel(i) != 2)
    res["P_slowSpeed"] = p0(lambda i: sw(i) == 1 and vel(i) != 1)
    res["P_stopped"] = p0(lambda i: sw(i) == 2 and vel(i) != 0)
    res["P_noOpOutside"] = p0(lambda i: sw(i) != 0 and op(i))

    res["_P_term4"] = res["P_succ"]
    res["_P_term5"] = res["P_forb"]
    res["_P_term6"] = init_until(true, lambda i: loc(i) == 6)
    res["_init_in_prob1_terminal"] = 0 in prob1(rows, n, true, terminal)
    return res


def main():
    res = case_study_results()
    print(f"reachable states: {res['_state_count']}")
    for name, v in res.items():
        if name.startswith("_") and name != "_state_count":
            continue
        if name == "_state_count":
            continue
        if isinstance(v, bool):
            print(f"{name:16s} verdict={v}")
        elif v is None:
            print(f"{name:16s} +inf")
        else:
            print(f"{name:16s} {float(v):.12f}  ({v})")
    s = res["_P_term4"] + res["_P_term5"] + res["_P_term6"]
    print(f"termination sum: {float(s):.12f} ({s})")
    print(f"init in Prob1(F terminal): {res['_init_in_prob1_terminal']}")

    # Closed-form cross-checks.
    r0 = case_study_results({"p_rad_crit": Fraction(0), "p_rad_med": Fraction(0)})
    print(f"P_succ (rad probs 0): {float(r0['P_succ']):.12f} ({r0['P_succ']})")
    r00 = case_study_results({
        "p_rad_crit": Fraction(0), "p_rad_med": Fraction(0), "p_err": Fraction(0),
    })
    print(f"R_moves (rad+err 0): {r00['R_moves']}")
    print(f"P_forb (rad+err 0): {r00['P_forb']}")


if __name__ == "__main__":
    main()
