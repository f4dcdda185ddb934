#!/usr/bin/env python3
"""Smoke test for the heavytail_py extension module.

Builds are loaded straight from the cargo target directory, so run

    cargo build -p heavytail-python
    python3 python/smoke_test.py

from the repository root. The script exits non-zero on the first failed
check.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def load_module():
    try:
        import heavytail_py  # noqa: F401  (already installed somewhere)

        return heavytail_py
    except ImportError:
        pass
    candidates = [
        REPO / "target" / profile / name
        for profile in ("debug", "release")
        for name in ("libheavytail_py.so", "heavytail_py.so", "libheavytail_py.dylib")
    ]
    built = next((c for c in candidates if c.exists()), None)
    if built is None:
        sys.exit("extension not built; run `cargo build -p heavytail-python` first")
    stage = Path(tempfile.mkdtemp(prefix="heavytail-py-"))
    shutil.copy2(built, stage / "heavytail_py.so")
    sys.path.insert(0, str(stage))
    import heavytail_py

    return heavytail_py


ht = load_module()
checks = 0


def ok(condition, label):
    global checks
    if not condition:
        sys.exit(f"FAIL: {label}")
    checks += 1


# --- samplers against the characteristic function ---------------------------
n = 20_000
for alpha, theta in [(1.5, 0.0), (1.2, 0.5), (2.0, 0.0)]:
    s = ht.sample_stable(alpha, 1.0, theta, 0.0, n, seed=7)
    for u in (-1.0, 0.5, 2.0):
        ere, eim = ht.empirical_char_fn(s, u)
        cre, cim = ht.stable_char_fn(alpha, 1.0, theta, 0.0, u)
        gap = math.hypot(ere - cre, eim - cim)
        ok(gap < 4.0 / math.sqrt(n), f"ecf gap {gap:.4f} at alpha={alpha}, u={u}")

gaussian = ht.sample_stable(2.0, 1.0, 0.0, 0.0, n, seed=8)
report = ht.normality_test(gaussian, 0.0, math.sqrt(2.0), 0.01)
ok(report["pass"], f"alpha=2 normality: {report}")

pareto = ht.sample_pareto(1.5, 1.0, n, seed=9, symmetrized=True)
hill = ht.hill_tail_index(pareto)
ok(1.25 < hill < 1.75, f"Hill estimate {hill:.3f} for tail index 1.5")

sim = ht.self_similarity_test(ht.sample_stable(1.5, 1.0, 0.0, 0.0, 2_000, seed=10), 1.5, 0.01)
ok(sim["pass"], f"self-similarity: {sim}")

two = ht.two_sample_ks_test(gaussian[: n // 2], gaussian[n // 2 :], 0.01)
ok(two["pass"], f"two-sample KS on halves: {two}")

# --- cone machinery ----------------------------------------------------------
ok(ht.signed_power([-4.0, 9.0], 0.5) == [-2.0, 3.0], "signed power")

identity = [[1.0, 0.0], [0.0, 1.0]]
m = ht.ppd_margin(identity, 1.5)
ok(m["member_pd"] and abs(m["margin"] - 1.0) < 1e-6, f"identity margin: {m}")

worked = [[1.0, 1.5], [1.5, 4.0]]
cls = ht.classify_cones(worked, [1.0, 1.5, 2.0])
by_p = {r["p"]: r for r in cls["reports"]}
ok(not by_p[1.0]["member_psd"] and abs(by_p[1.0]["margin"] + 0.5) < 1e-9, "p=1 outside")
ok(by_p[2.0]["member_pd"] and abs(by_p[2.0]["margin"] - 0.378680) < 1e-3, "p=2 member")
ok(cls["p1_cross_check"] and cls["p2_cross_check"], "endpoint cross-checks")
ok(cls["order_violation"] is None, "cone ordering")

vec = ht.check_vecexpandp([0.3, -1.2, 5.0], [2.0, 0.1, -0.7], 1.4)
ok(vec["holds"], f"vector expansion inequality: {vec}")

# --- lemma oracles -----------------------------------------------------------
T = 100_000
seq = ht.fabian_recursion(1.0, 1.0, 0.5, 0.5, 1.0, T + 1)
normalized = [(i + 1) ** 0.5 * seq[i] for i in range(T // 10, T + 1)]
osc = ht.relative_oscillation(normalized)
ok(osc is not None and osc < 0.05, f"recursion envelope oscillation {osc}")

rho_seq = ht.check_rho_exp(0.5, 0.9, 1.0, 1.0, 20_000)
ok(rho_seq[-1] < rho_seq[len(rho_seq) // 10] and rho_seq[-1] < 0.06, "rho-exp decay")

phi_seq = ht.check_phi_sum([[1.0, 0.0], [0.0, 2.0]], 0.5, 0.9, 0.9, 1_000)
ok(phi_seq[-1] < phi_seq[len(phi_seq) // 4], "phi-sum decay")

# --- experiment runner -------------------------------------------------------
CONFIG = """
[run]
t_max = 300
replications = 4
seed = 5

[analysis]
burn_in = 1
"""
with tempfile.TemporaryDirectory() as out:
    summary = ht.run_experiment(CONFIG, out)
    run_dir = Path(summary["run_dir"])
    ok(run_dir.is_dir(), "run directory created")
    ok((run_dir / "manifest.json").is_file(), "manifest written")
    ok(summary["censored"] == 0 and summary["replications"] == 4, f"summary: {summary}")
    ok(summary["curves"][0]["p"] == 1.2, "default moment order")
    traces = (run_dir / "traces.csv").read_bytes()
    with tempfile.TemporaryDirectory() as out2:
        again = ht.run_experiment(CONFIG, out2)
        ok(Path(again["run_dir"]).name == run_dir.name, "content-addressed run dir")
        ok((Path(again["run_dir"]) / "traces.csv").read_bytes() == traces, "deterministic rerun")

# --- error mapping -----------------------------------------------------------
try:
    ht.sample_stable(3.0, 1.0, 0.0, 0.0, 1, seed=1)
except ValueError:
    checks += 1
else:
    sys.exit("FAIL: alpha=3 accepted")

print(f"ok — {checks} checks passed")
