"""Contract checks for the command-line driver: exit codes, schemas,
determinism, configuration precedence and output locations.

usage: cli_contract.py <path-to-inducing_cli> <schema-dir>
"""

import json
import math
import os
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

CLI = str(Path(sys.argv[1]).resolve())
SCHEMAS = Path(sys.argv[2])
SMALL = ["--n-orbits", "8", "--n-iters", "20000", "--burn-in", "100"]
SMALL_BLOCK = ["--block-max", "6", "--block-orbits", "8", "--block-iters", "5000"]

failures = []


def run(args, cwd, env=None):
    full_env = dict(os.environ)
    full_env.pop("INDUCING_OUT_DIR", None)
    full_env.update(env or {})
    return subprocess.run([CLI, *args], cwd=cwd, env=full_env, capture_output=True, text=True)


def check(name, cond, detail=""):
    print(("PASS " if cond else "FAIL ") + name + (f"  ({detail})" if detail and not cond else ""))
    if not cond:
        failures.append(name)


def validate(name, path, schema):
    try:
        doc = json.loads(Path(path).read_text())
        jsonschema.validate(doc, json.loads((SCHEMAS / f"{schema}.schema.json").read_text()))
        check(f"{name}: schema", True)
        return doc
    except (OSError, ValueError, jsonschema.ValidationError) as e:
        check(f"{name}: schema", False, str(e)[:300])
        return None


with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)

    # verify doubling: both sides log 2
    r = run(["verify", "doubling", *SMALL, *SMALL_BLOCK], tmp)
    check("verify doubling exits 0", r.returncode == 0, r.stderr)
    doc = validate("verify doubling", tmp / "verify_doubling.json", "verify")
    if doc:
        check("verify doubling: rohlin is log 2", abs(doc["rohlin"]["value"] - math.log(2)) < 1e-12)
        check("verify doubling: birkhoff is log 2", abs(doc["birkhoff"]["value"] - math.log(2)) < 1e-12)
        check("verify doubling: side files listed", doc["outputs"] == ["verify_doubling.json", "verify_doubling_block.csv"])
    check("verify doubling: block csv", (tmp / "verify_doubling_block.csv").read_text().startswith("n,h_over_n"))

    # Every map produces a schema-valid report.
    for m in ["lorenz", "lsv", "singular", "skewprod"]:
        extra = ["--bins", "512"] + (["--n-max", "300"] if m in ("lsv", "skewprod") else [])
        r = run(["verify", m, *SMALL, *SMALL_BLOCK, *extra], tmp)
        check(f"verify {m} exit code in contract", r.returncode in (0, 1, 2), r.stderr)
        validate(f"verify {m}", tmp / f"verify_{m}.json", "verify")
        check(f"verify {m}: density csv", (tmp / f"verify_{m}_density.csv").exists())

    # The acceptance example at full default budgets.
    r = run(["verify", "lorenz", "--alpha", "0.25", "--seed", "7"], tmp)
    check("verify lorenz --alpha 0.25 --seed 7 exits 0", r.returncode == 0, r.stdout + r.stderr)

    # Usage errors.
    for args in (["verify", "lsv", "--alpha", "1.2"], ["skew", "--lambda", "0.6"], ["verify", "tent"],
                 [], ["verify", "doubling", "--no-such-flag"], ["counterexample", "--n-max-list", "2,20"]):
        r = run(args, tmp)
        check(f"{' '.join(args) or '(no command)'} exits 64", r.returncode == 64, f"got {r.returncode}")

    # Too little evidence for the series verdicts.
    r = run(["counterexample", "--n-max-list", "10,20", "--layout-n-max", "20", "--n-orbits", "4", "--n-iters", "2000"], tmp)
    check("counterexample --n-max-list 10,20 exits 2", r.returncode == 2, r.stderr)
    validate("counterexample small", tmp / "counterexample.json", "counterexample")

    # Default list: expected verdicts and the failure of the formula.
    r = run(["counterexample"], tmp)
    check("counterexample default exits 0", r.returncode == 0, r.stdout + r.stderr)
    doc = validate("counterexample default", tmp / "counterexample.json", "counterexample")
    if doc:
        v = doc["series"]["verdicts"]
        check("counterexample: verdicts conv, conv, conv, div",
              [v["sum_a"], v["sum_na"], v["sum_phi"], v["sum_nphi"]] == ["convergent", "convergent", "convergent", "divergent"])
        check("counterexample: formula fails", doc["formula"]["entropy_divergent"] and doc["formula"]["integral_finite"])
    check("counterexample: sequence csv", (tmp / "counterexample_sequence.csv").read_text().startswith("n,a_n"))

    # Determinism: same command and seed give identical bytes.
    r1 = run(["skew", "--lambda", "0.25", "--seed", "7"], tmp)
    first = (tmp / "skew.json").read_bytes()
    r2 = run(["skew", "--lambda", "0.25", "--seed", "7"], tmp)
    second = (tmp / "skew.json").read_bytes()
    check("skew --lambda 0.25 exits 0", r1.returncode == 0 and r2.returncode == 0, r1.stderr)
    check("skew --lambda 0.25 --seed 7 twice: identical bytes", first == second)
    validate("skew", tmp / "skew.json", "skew")
    r = run(["skew", "--lambda", "0.5", "--seed", "7", "--threads", "1"], tmp)
    check("skew --lambda 0.5 exits 0", r.returncode == 0, r.stderr)
    one_thread = (tmp / "skew.json").read_text()
    run(["skew", "--lambda", "0.5", "--seed", "7", "--threads", "4"], tmp)
    four = (tmp / "skew.json").read_text()
    strip = lambda s: {k: v for k, v in json.loads(s).items() if k != "config"}
    check("thread count does not change results", strip(one_thread) == strip(four))

    # Configuration file: read, embedded, and overridden by flags.
    cfg = tmp / "run.ini"
    cfg.write_text("seed = 11\n[skew]\nlambda = 0.25\nn-max = 500\npairs = 2000\n")
    r = run(["--config", str(cfg), "skew", "--pairs", "3000"], tmp)
    check("config file run exits 0", r.returncode == 0, r.stderr)
    doc = json.loads((tmp / "skew.json").read_text())
    c = doc["config"]
    check("config file values embedded", c["lambda"] == 0.25 and c["n_max"] == 500 and c["orbit"]["seed"] == 11)
    check("flags win over config file", c["n_pairs"] == 3000)

    # Output directory: flag, then environment, then cwd.
    envdir = tmp / "from_env"
    r = run(["skew", "--pairs", "1000", "--quiet"], tmp, {"INDUCING_OUT_DIR": str(envdir)})
    check("INDUCING_OUT_DIR respected", (envdir / "skew.json").exists())
    check("--quiet prints nothing", r.stdout == "")
    flagdir = tmp / "from_flag"
    run(["--out-dir", str(flagdir), "skew", "--pairs", "1000", "--orbit-csv", "50"], tmp, {"INDUCING_OUT_DIR": str(envdir)})
    check("--out-dir wins over environment", (flagdir / "skew.json").exists())
    orbit = (flagdir / "skew_orbit.csv").read_text().splitlines()
    check("orbit csv rows", orbit[0] == "step,x,level,y" and len(orbit) == 52)

print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
