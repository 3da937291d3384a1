#!/usr/bin/env python3
"""Writes the bundled synthetic topfiles (22 countries, 45 goals, mostly positive valuations).

Usage: python3 make_fixtures.py [out_dir]
"""
import json
import random
import sys
from pathlib import Path

COUNTRIES = [
    "Argentina", "Australia", "Brazil", "Canada", "Chile", "China", "Egypt", "France",
    "Germany", "India", "Indonesia", "Japan", "Kenya", "Mexico", "Nigeria", "Norway",
    "Peru", "Saudi Arabia", "South Africa", "South Korea", "Turkey", "Vietnam",
]
VERBS = ["ratify", "fund", "phase_out", "expand", "cap", "subsidize", "ban", "share", "open", "tax"]
OBJECTS = [
    "coal_power", "methane_leaks", "deforestation", "fishing_quotas", "grain_exports",
    "patent_pool", "border_tariffs", "carbon_market", "water_treaty", "vaccine_supply",
    "rare_earths", "shipping_lanes", "data_flows", "refugee_quota", "nuclear_inspections",
]
GOAL_TOPICS = [
    "emissions", "forests", "oceans", "trade", "health", "energy", "migration", "finance",
    "security", "food", "water", "technology", "minerals", "shipping", "labour",
]


def make(seed):
    rng = random.Random(seed)
    actions = {}
    for c in COUNTRIES:
        n = rng.randint(3, 5)
        names = set()
        while len(names) < n:
            names.add(f"{rng.choice(VERBS)}_{rng.choice(OBJECTS)}")
        actions[c] = sorted(names)
    goals = []
    while len(goals) < 45:
        g = f"{rng.choice(GOAL_TOPICS)}_{len(goals) + 1:02d}"
        goals.append(g)

    satisfaction = []
    for g in goals:
        levels = rng.choice([1, 1, 2, 2, 3])
        used = set()
        for level in range(1, levels + 1):
            for _ in range(rng.randint(1, 3)):
                c = rng.choice(COUNTRIES)
                a = rng.choice(actions[c])
                if (level, c, a) in used:
                    continue
                used.add((level, c, a))
                satisfaction.append({"goal": g, "threshold": level, "country": c, "action": a})

    # Every contributor sees the goal; bystanders value it with some probability.
    contributors = {g: {t["country"] for t in satisfaction if t["goal"] == g} for g in goals}
    data = {}
    for c in COUNTRIES:
        values = {}
        for g in goals:
            if c in contributors[g]:
                # contributing costs something about a third of the time
                v = rng.randint(-8, -1) if rng.random() < 0.35 else rng.randint(1, 30)
            elif rng.random() < 0.3:
                v = rng.randint(-8, -1) if rng.random() < 0.2 else rng.randint(1, 30)
            else:
                continue
            values[g] = v
        data[c] = {"goals_value": values}

    exclusions = []
    for _ in range(rng.randint(2, 4)):
        a, b = rng.sample(COUNTRIES, 2)
        exclusions.append([
            {"country": a, "action": rng.choice(actions[a])},
            {"country": b, "action": rng.choice(actions[b])},
        ])
    return {
        "name": f"synthetic summit {seed}",
        "countries": COUNTRIES,
        "country_actions": actions,
        "goals": goals,
        "country_data": data,
        "goal_satisfaction": satisfaction,
        "mutually_exclusive_agreements": exclusions,
    }


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent
    for i in range(1, 6):
        doc = make(1000 + i)
        (out / f"summit_{i}.json").write_text(json.dumps(doc, indent=2) + "\n")


if __name__ == "__main__":
    main()
