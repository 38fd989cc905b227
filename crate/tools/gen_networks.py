#!/usr/bin/env python3
"""Regenerates the synthetic parameterizations bundled under networks/.

The sachs and child files use the standard benchmark structures; their
conditional probability tables are synthetic draws (seeded, so the files are
reproducible). Rows are Dirichlet(0.5) draws floored at 0.03 and renormalized,
which keeps every configuration informative without degenerate zeros.
"""

import numpy as np

FLOOR = 0.03


def row(rng, card):
    r = rng.dirichlet([0.5] * card)
    r = np.maximum(r, FLOOR)
    r = r / r.sum()
    return r


def fmt_row(r):
    return ", ".join(f"{p:.6f}" for p in balance(r))


def balance(r):
    # Rounded entries must still sum to one exactly when reparsed.
    vals = [round(p, 6) for p in r]
    vals[-1] = round(1.0 - sum(vals[:-1]), 6)
    return vals


def write_net(path, name, variables, parents, rng):
    lines = [f"network {name} {{", "}"]
    for var, values in variables:
        lines.append(f"variable {var} {{")
        lines.append(f"  type discrete [ {len(values)} ] {{ {', '.join(values)} }};")
        lines.append("}")
    vindex = {v: i for i, (v, _) in enumerate(variables)}
    for var, values in variables:
        ps = parents.get(var, [])
        if not ps:
            lines.append(f"probability ( {var} ) {{")
            lines.append(f"  table {fmt_row(row(rng, len(values)))};")
            lines.append("}")
            continue
        lines.append(f"probability ( {var} | {', '.join(ps)} ) {{")
        pcards = [len(variables[vindex[p]][1]) for p in ps]
        total = int(np.prod(pcards))
        for cfg in range(total):
            rem = cfg
            vals = [0] * len(ps)
            for slot in range(len(ps) - 1, -1, -1):
                vals[slot] = rem % pcards[slot]
                rem //= pcards[slot]
            names = ", ".join(
                variables[vindex[p]][1][v] for p, v in zip(ps, vals)
            )
            lines.append(f"  ({names}) {fmt_row(row(rng, len(values)))};")
        lines.append("}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def sachs():
    lvl = ["LOW", "AVG", "HIGH"]
    variables = [
        ("Akt", lvl), ("Erk", lvl), ("Jnk", lvl), ("Mek", lvl), ("P38", lvl),
        ("PIP2", lvl), ("PIP3", lvl), ("PKA", lvl), ("PKC", lvl),
        ("Plcg", lvl), ("Raf", lvl),
    ]
    parents = {
        "Akt": ["Erk", "PKA"],
        "Erk": ["Mek", "PKA"],
        "Jnk": ["PKA", "PKC"],
        "Mek": ["PKA", "PKC", "Raf"],
        "P38": ["PKA", "PKC"],
        "PIP2": ["PIP3", "Plcg"],
        "PIP3": ["Plcg"],
        "PKA": ["PKC"],
        "PKC": [],
        "Plcg": [],
        "Raf": ["PKA", "PKC"],
    }
    write_net("networks/sachs.bif", "sachs", variables, parents,
              np.random.default_rng(20240817))


def child():
    variables = [
        ("BirthAsphyxia", ["yes", "no"]),
        ("Disease", ["PFC", "TGA", "Fallot", "PAIVS", "TAPVD", "Lung"]),
        ("Age", ["0_3_days", "4_10_days", "11_30_days"]),
        ("LVH", ["yes", "no"]),
        ("DuctFlow", ["Lt_to_Rt", "None", "Rt_to_Lt"]),
        ("CardiacMixing", ["None", "Mild", "Complete", "Transp"]),
        ("LungParench", ["Normal", "Congested", "Abnormal"]),
        ("LungFlow", ["Normal", "Low", "High"]),
        ("Sick", ["yes", "no"]),
        ("HypDistrib", ["Equal", "Unequal"]),
        ("HypoxiaInO2", ["Mild", "Moderate", "Severe"]),
        ("CO2", ["Normal", "Low", "High"]),
        ("ChestXray", ["Normal", "Oligaemic", "Plethoric", "Grd_Glass", "Asy_Patchy"]),
        ("Grunting", ["yes", "no"]),
        ("LVHreport", ["yes", "no"]),
        ("LowerBodyO2", ["lt_5", "5_12", "12_plus"]),
        ("RUQO2", ["lt_5", "5_12", "12_plus"]),
        ("CO2Report", ["lt_7_5", "ge_7_5"]),
        ("XrayReport", ["Normal", "Oligaemic", "Plethoric", "Grd_Glass", "Asy_Patchy"]),
        ("GruntingReport", ["yes", "no"]),
    ]
    parents = {
        "Disease": ["BirthAsphyxia"],
        "Age": ["Disease", "Sick"],
        "LVH": ["Disease"],
        "DuctFlow": ["Disease"],
        "CardiacMixing": ["Disease"],
        "LungParench": ["Disease"],
        "LungFlow": ["Disease"],
        "Sick": ["Disease"],
        "HypDistrib": ["DuctFlow", "CardiacMixing"],
        "HypoxiaInO2": ["CardiacMixing", "LungParench"],
        "CO2": ["LungParench"],
        "ChestXray": ["LungParench", "LungFlow"],
        "Grunting": ["LungParench", "Sick"],
        "LVHreport": ["LVH"],
        "LowerBodyO2": ["HypDistrib", "HypoxiaInO2"],
        "RUQO2": ["HypoxiaInO2"],
        "CO2Report": ["CO2"],
        "XrayReport": ["ChestXray"],
        "GruntingReport": ["Grunting"],
    }
    write_net("networks/child.bif", "child", variables, parents,
              np.random.default_rng(20240818))


if __name__ == "__main__":
    sachs()
    child()
    print("wrote networks/sachs.bif and networks/child.bif")
