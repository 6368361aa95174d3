"""End-to-end run of the oib executable on the synthetic image set.

Usage: check_cli.py <path-to-oib> <work-dir>
"""

import csv
import hashlib
import json
import shutil
import subprocess
import sys
from pathlib import Path

OIB = sys.argv[1]
WORK = Path(sys.argv[2])

CONFIG = {
    "dataset": {
        "kind": "synthetic",
        "synthetic": {"height": 8, "width": 8, "classes": 4, "train": 600, "test": 200},
    },
    "layer_sizes": [64, 32, 16, 4],
    "train": {"epochs": 5},
    "n_z_grid": [2, 4, 8],
    "hz": {"samples": 500, "projections": 5, "dims": 5},
}

failures = []


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


def run(*args, expect=0):
    proc = subprocess.run([OIB, *args], capture_output=True, text=True)
    check(proc.returncode == expect, f"{' '.join(args[:1])} exit {proc.returncode} (want {expect})")
    if proc.returncode != expect:
        sys.stdout.write(proc.stdout[-2000:])
        sys.stdout.write(proc.stderr[-2000:])
    return proc


def digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


shutil.rmtree(WORK, ignore_errors=True)
WORK.mkdir(parents=True)
cfg_path = WORK / "config.json"
cfg_path.write_text(json.dumps(CONFIG))

out = WORK / "run"
common = ["--config", str(cfg_path), "--out", str(out), "--seed", "3"]
run("train-base", *common)
check((out / "base.json").exists() and (out / "base.bin").exists(), "checkpoint written")
run("fit-oib", *common)
run("evaluate", *common)
run("evaluate", *common, "--encoding", "stochastic")
run("retrain", *common)
run("hz-test", *common)
run("macs", *common)
run("synth-check", *common)

with open(out / "evaluate.csv") as f:
    rows = list(csv.DictReader(f))
check(
    list(rows[0].keys())
    == ["kind", "n_z", "rho", "accuracy", "entropy_nats", "mi_nats", "mse", "macs_comp", "macs_class"],
    "csv columns",
)
check(len(rows) == 9, "one csv row per (kind, n_z)")
oib_h = {r["n_z"]: float(r["entropy_nats"]) for r in rows if r["kind"] == "OIB"}
cca_h = {r["n_z"]: float(r["entropy_nats"]) for r in rows if r["kind"] == "CCA"}
# At n_z = 2 both sit at the isotropic maximum log(2 pi e) and differ only by sampling noise.
check(all(oib_h[k] <= cca_h[k] + 1e-2 for k in oib_h), "OIB entropy not above CCA entropy")
check(oib_h["8"] < cca_h["8"], "OIB entropy below CCA entropy at n_z = 8")
check(json.loads((out / "synth_check.json").read_text())["all_pass"], "synth-check passes")
retrain = json.loads((out / "retrain.json").read_text())
check(len(retrain["records"]) == 3, "retrain records per n_z")

# Same seed, same bytes.
out2 = WORK / "run2"
run("train-base", "--config", str(cfg_path), "--out", str(out2), "--seed", "3")
check(digest(out / "base.bin") == digest(out2 / "base.bin"), "checkpoint reproducible")
out3 = WORK / "run3"
run("train-base", "--config", str(cfg_path), "--out", str(out3), "--seed", "4")
check(digest(out / "base.bin") != digest(out3 / "base.bin"), "seed changes checkpoint")

bad = WORK / "bad.json"
bad.write_text(json.dumps({**CONFIG, "unknown_key": 1}))
run("train-base", "--config", str(bad), "--out", str(WORK / "bad"), expect=2)
missing = WORK / "missing.json"
missing.write_text(json.dumps({"dataset": {"kind": "idx", "dir": str(WORK / "no-such-dir")}}))
run("train-base", "--config", str(missing), "--out", str(WORK / "missing"), expect=2)
run("train-base", "--encoding", "fuzzy", expect=2)
run("no-such-command", expect=2)
run("evaluate", "--config", str(cfg_path), "--out", str(WORK / "empty"), expect=2)

print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
