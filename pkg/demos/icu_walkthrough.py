"""End-to-end walkthrough of the polydawg CLI.

Generates the synthetic ICU dataset, loads it across the three embedded
engines, trains a cross-engine query, then shows how production runs,
the explain output, and the performance log respond. Everything happens
in a scratch directory; run it from anywhere:

    python3 demos/icu_walkthrough.py
"""

import os
import sys
import tempfile

from polydawg.cli import main


def step(title, argv):
    print(f"\n=== {title}\n$ polydawg {' '.join(argv)}")
    code = main(argv)
    if code != 0:
        print(f"(exit code {code})")
    return code


def run():
    workdir = tempfile.mkdtemp(prefix="polydawg-demo-")
    os.chdir(workdir)
    print(f"working in {workdir}")

    # 1. Synthesize a small ICU dataset: relational patients/meds, a
    #    key-value triple store of clinical notes, and a waveform array.
    step("generate the dataset", ["datagen", "--scale", "1", "--out", "ds"])
    step("load every object from its manifest",
         ["load", "--manifest", "ds/manifest.json"])

    # 2. A single-island query plans to one container on one engine.
    step("plain relational query",
         ["query", "relational(SELECT sex, COUNT(*), AVG(age) "
                   "FROM patients GROUP BY sex)"])

    # 3. A cross-engine query: relational meds cast into the d4m island,
    #    multiplied against its own transpose (a patient co-dosing matrix).
    doses = ("cast(relational(SELECT patient_id, SUM(dose) AS dose "
             "FROM meds GROUP BY patient_id), d4m, key=patient_id)")
    comatrix = f"d4m(matmul({doses}, transpose({doses})))"

    step("explain shows containers, the remainder, and candidate plans",
         ["explain", comatrix])
    step("training runs every candidate plan and records runtimes",
         ["query", "--training", comatrix])
    step("production now reuses the best-known plan (case = matched)",
         ["query", comatrix])

    # 4. An untrained signature takes the cold-start path: one randomly
    #    chosen plan runs now, the others queue for background training.
    step("cold start on an untrained query (case = random)",
         ["query", "relational(SELECT p.id, p.age FROM patients p JOIN "
                   "cast(text(grep(notes, 'fever')), relational) n "
                   "ON p.id = n.r ORDER BY id LIMIT 5)"])

    # 5. The append-only performance log survives across invocations.
    step("the monitor log, one escaped record per run", ["monitor", "dump"])

    print(f"\ndone; artifacts remain under {workdir}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
