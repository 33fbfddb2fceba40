"""Regenerates the checked-in test fixtures.

Each fixture is a notebook plus its data, executed statement by statement
with pandas. Every dataframe variable whose content changed after a
statement, and every displayed dataframe, is written as a snapshot named
``{var}_C{exec}_L{line}``. The Rust test suite only reads the output.

    python3 tools/make_fixtures.py [out_dir]
"""

import ast
import hashlib
import json
import os
import sys

import numpy as np
import pandas as pd

STRING_NULL = "\\u0000NULL"
ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEFAULT_OUT = os.path.join(ROOT, "crates", "core", "tests", "fixtures")


def dtype_name(series):
    kind = series.dtype.kind
    if kind == "b":
        return "bool"
    if kind in "iu":
        return "int"
    if kind == "f":
        return "float"
    if kind == "M":
        return "datetime"
    return "string"


def cell_text(value, dtype):
    if dtype == "string":
        return STRING_NULL if value is None or (isinstance(value, float) and np.isnan(value)) else str(value)
    if pd.isna(value):
        return ""
    if dtype == "float":
        value = float(value)
        if np.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if dtype == "bool":
        return "true" if value else "false"
    if dtype == "datetime":
        return pd.Timestamp(value).isoformat()
    return str(int(value))


def write_csv(frame, path):
    import csv

    dtypes = [dtype_name(frame[c]) for c in frame.columns]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([str(c) for c in frame.columns])
        for row in frame.itertuples(index=False, name=None):
            w.writerow([cell_text(v, d) for v, d in zip(row, dtypes)])
    return [
        {"name": str(c), "dtype": d, "nulls": int(frame[c].isna().sum())}
        for c, d in zip(frame.columns, dtypes)
    ]


def digest(frame):
    h = hashlib.sha256()
    h.update(repr([(str(c), str(frame[c].dtype)) for c in frame.columns]).encode())
    h.update(pd.util.hash_pandas_object(frame, index=False).values.tobytes())
    return h.hexdigest()


def names_in_order(node):
    found = [n for n in ast.walk(node) if isinstance(n, ast.Name)]
    found.sort(key=lambda n: (n.lineno, n.col_offset))
    return [n.id for n in found]


def capture(workdir, cells, replay, sample_cap=10000, seed=42):
    """Runs `replay` ([(cell_index, source_or_None)]) and writes snapshots."""
    snap_dir = os.path.join(workdir, "snapshots")
    os.makedirs(snap_dir, exist_ok=True)
    ns = {}
    seen = {}
    entries = {}
    log = []
    counts = {}
    finals = {}
    cwd = os.getcwd()
    os.chdir(workdir)
    try:
        for epoch, (index, override) in enumerate(replay, start=1):
            source = override if override is not None else cells[index]
            counts[index] = epoch
            finals[index] = source
            log.append({"epoch": epoch, "cell_pos": index + 1, "exec_count": epoch, "source": source.splitlines(True)})
            tree = ast.parse(source)
            for stmt in tree.body:
                shown = None
                if isinstance(stmt, ast.Expr):
                    shown = eval(compile(ast.Expression(stmt.value), "<cell>", "eval"), ns)
                else:
                    exec(compile(ast.Module([stmt], type_ignores=[]), "<cell>", "exec"), ns)
                outputs = []
                for var, value in list(ns.items()):
                    if isinstance(value, pd.DataFrame) and seen.get(var) != digest(value):
                        seen[var] = digest(value)
                        outputs.append((var, value))
                if isinstance(shown, pd.DataFrame):
                    var = next((n for n in names_in_order(stmt) if isinstance(ns.get(n), pd.DataFrame)), None)
                    if var is not None:
                        outputs.append((var, shown))
                for var, frame in outputs:
                    node = f"{var}_C{epoch}_L{stmt.lineno}"
                    rows = len(frame)
                    sampled = rows > sample_cap
                    if sampled:
                        frame = frame.sample(n=sample_cap, random_state=seed).sort_index()
                    schema = write_csv(frame, os.path.join(snap_dir, node + ".csv"))
                    entries[node] = {"data": node + ".csv", "rows": rows, "sampled": sampled, "schema": schema}
    finally:
        os.chdir(cwd)
    with open(os.path.join(snap_dir, "manifest.json"), "w") as fh:
        json.dump({"version": 1, "entries": entries}, fh, indent=1, sort_keys=True)
    with open(os.path.join(workdir, "trace.json"), "w") as fh:
        json.dump(log, fh, indent=1)
    nb = {
        "nbformat": 4,
        "nbformat_minor": 5,
        "metadata": {},
        "cells": [
            {
                "cell_type": "code",
                "execution_count": counts.get(i),
                "metadata": {},
                "outputs": [],
                "source": finals.get(i, src).splitlines(True),
            }
            for i, src in enumerate(cells)
        ],
    }
    nb["cells"].insert(0, {"cell_type": "markdown", "metadata": {}, "source": ["# fixture\n"]})
    with open(os.path.join(workdir, "notebook.ipynb"), "w") as fh:
        json.dump(nb, fh, indent=1)


def mutate(out):
    rng = np.random.default_rng(7)
    pd.DataFrame({"A": rng.integers(0, 100, 20)}).to_csv(os.path.join(out, "data.csv"), index=False)
    cells = ["import pandas as pd\ndf = pd.read_csv('data.csv')", "df['B'] = df['A'] * 2"]
    capture(out, cells, [(0, None), (1, None)])


def groupby(out):
    rng = np.random.default_rng(11)
    n = 300
    cylinder = rng.choice([4, 6, 8], n, p=[0.5, 0.25, 0.25])
    origin = np.where(cylinder == 4, rng.choice(["japan", "europe", "usa"], n), "usa")
    horsepower = (cylinder * 18 + rng.normal(0, 12, n)).round(0)
    weight = (horsepower * 22 + rng.normal(0, 250, n)).round(0)
    mpg = (60 - weight / 110 + rng.normal(0, 2, n)).round(1)
    hp = horsepower.astype(float)
    hp[rng.choice(n, 6, replace=False)] = np.nan
    frame = pd.DataFrame(
        {
            "name": [f"car {i}" for i in range(n)],
            "mpg": mpg,
            "cylinder": cylinder,
            "horsepower": hp,
            "weight": weight,
            "origin": origin,
        }
    )
    frame.to_csv(os.path.join(out, "cars.csv"), index=False)
    cells = [
        "import pandas as pd",
        "df = pd.read_csv('cars.csv')",
        "df = df.dropna()",
        "df['power_ratio'] = df['horsepower'] / df['weight']\n"
        "df_groupby = df.groupby('cylinder').mean(numeric_only=True).reset_index()",
        "df_copy = df.copy()\ndf_copy = df_copy[df_copy['mpg'] > 20]",
    ]
    capture(out, cells, [(i, None) for i in range(len(cells))])


def rerun(out):
    rng = np.random.default_rng(3)
    pd.DataFrame({"x": rng.normal(0, 1, 40).round(3), "y": rng.integers(0, 50, 40)}).to_csv(
        os.path.join(out, "data.csv"), index=False
    )
    cells = [
        "import pandas as pd",
        "df = pd.read_csv('data.csv')",
        "df = df[df['x'] > 0]",
        "df['y2'] = df['y'] * 2",
        "df_top = df.sort_values('y2').head(10)",
    ]
    replay = [(i, None) for i in range(len(cells))] + [(3, "df['y2'] = df['y'] * 3")]
    capture(out, cells, replay)


def anomaly(out):
    rng = np.random.default_rng(5)
    n = 400
    size = np.where(rng.random(n) < 0.15, "Varies with device", [f"{s}M" for s in rng.integers(1, 90, n)])
    installs = rng.choice([1000, 10000, 100000, 1000000], n)
    rating = rng.normal(4.1, 0.4, n).clip(1, 5).round(1)
    rating[rng.choice(n, 30, replace=False)] = np.nan
    frame = pd.DataFrame(
        {
            "App": [f"app {i}" for i in range(n)],
            "Category": rng.choice(["GAME", "TOOLS", "FAMILY", "MEDICAL"], n),
            "Rating": rating,
            "Size": size,
            "Installs": [f"{v:,}+" for v in installs],
            "Type": np.where(rng.random(n) < 0.9, "Free", "Paid"),
        }
    )
    frame.to_csv(os.path.join(out, "apps.csv"), index=False)
    cells = [
        "import pandas as pd",
        "df = pd.read_csv('apps.csv')\ndf.head()",
        "df['Rating'] = df['Rating'].fillna(df['Rating'].mean())",
        "df['Installs'] = df['Installs'].str.replace(',', '').str.replace('+', '').astype(int)",
        "df.loc[df['Size'] == 'Varies with device'] = 0",
        "df_sorted = df.sort_values('Installs', ascending=False)",
    ]
    capture(out, cells, [(i, None) for i in range(len(cells))])


FIXTURES = {"mutate": mutate, "groupby": groupby, "rerun": rerun, "anomaly": anomaly}


def main():
    out_root = sys.argv[1] if len(sys.argv) > 1 else DEFAULT_OUT
    for name, build in FIXTURES.items():
        out = os.path.join(out_root, name)
        os.makedirs(out, exist_ok=True)
        build(out)
        print(f"wrote {out}")


if __name__ == "__main__":
    main()
