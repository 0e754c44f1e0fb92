"""Self-verification suites behind `flowgate bench`.

Each suite rechecks an algorithm against its independent oracle (brute-force
LOF, dense QP, finite differences, closed-form loss identities) or a pinned
invariant (split determinism, the nu outlier bound) and prints one PASS/FAIL
line. `--quick` shrinks sizes without weakening any invariant.
"""

from __future__ import annotations

import numpy as np

from . import cnn_detector as cd
from . import lof_detector as ld
from . import mlp_detector as md
from . import ocsvm_detector as oc
from .oracle_synth import finite_diff_grad, lof_bruteforce, ocsvm_qp_oracle
from .rng import SplitMix64
from .split_protocol import SplitConfig, plan_and_materialize
from .oracle_synth import gen_synthetic, paradigm_synth_config


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-4)))


def bench_lof_oracle(quick: bool) -> tuple[bool, str]:
    rng = np.random.default_rng(2024)
    cases = 6 if quick else 20
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(40, 120 if quick else 300))
        d = int(rng.integers(2, 9))
        k = int(rng.choice([2, 5, min(80, n - 1)]))
        X = rng.standard_normal((n, d))
        Q = rng.standard_normal((30, d))
        model = ld.fit_lof(X, ld.LofConfig(k=k))
        worst = max(worst, float(np.abs(ld.score(model, Q) - lof_bruteforce(X, Q, k)).max()))
    return worst < 1e-9, f"max |indexed - brute| = {worst:.3e} over {cases} cases"


def bench_ocsvm_oracle(quick: bool) -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    blobs = 3 if quick else 10
    worst_f, worst_sum = 0.0, 0.0
    for _ in range(blobs):
        X = rng.standard_normal((50, 4))
        gamma = oc.gamma_scale(X)
        model = oc.fit_ocsvm(X, oc.OcsvmConfig(nu=0.05, gamma=gamma, tol=1e-6))
        K = oc._rbf_rows(X, X, gamma)
        a, rho = ocsvm_qp_oracle(K, 0.05)
        probes = rng.standard_normal((20, 4))
        f_solver = oc.decision_ocsvm(model, probes)
        Kp = oc._rbf_rows(probes, X, gamma)
        f_oracle = Kp @ a - rho
        worst_f = max(worst_f, float(np.abs(f_solver - f_oracle).max()))
        worst_sum = max(worst_sum, abs(float(model.alphas.sum()) - 1.0))
    ok = worst_f < 1e-3 and worst_sum < 1e-9
    return ok, f"max |f - f_qp| = {worst_f:.3e}, max |sum(a)-1| = {worst_sum:.3e}"


def bench_nu_property(quick: bool) -> tuple[bool, str]:
    rng = np.random.default_rng(11)
    n = 400 if quick else 1000
    X = rng.standard_normal((n, 6))
    model = oc.fit_ocsvm(X, oc.OcsvmConfig(nu=0.05))
    frac = float((oc.decision_ocsvm(model, X) < 0).mean())
    if quick:
        ok = frac <= 0.05 + 2.0 / np.sqrt(n)  # nu + 2/sqrt(n) bound at reduced n
    else:
        ok = 0.02 <= frac <= 0.08
    return ok, f"training outlier fraction = {frac:.4f} (nu = 0.05, n = {n})"


def bench_gradients(quick: bool) -> tuple[bool, str]:
    seeds = range(2 if quick else 5)
    worst = 0.0
    for seed in seeds:
        rng = np.random.default_rng(100 + seed)
        X = rng.standard_normal((12, 4))
        y = rng.integers(0, 2, 12)
        model = md.init_mlp(4, (5, 3), seed)
        theta = rng.uniform(-0.7, 0.7, model.flat_params().size)
        model.set_flat_params(theta)
        _, gw, gb = md.loss_and_grads(model, X, y)
        analytic = np.concatenate([g.ravel() for g in gw + gb])

        def loss_at(t, _m=model, _X=X, _y=y):
            _m.set_flat_params(t)
            return md.bce_loss(_y, md.forward(_m, _X))

        worst = max(worst, _rel_err(analytic, finite_diff_grad(loss_at, theta)))
        model.set_flat_params(theta)

    arch = cd.CnnArch(conv_filters=(4,), kernel_size=3, dense_units=6, dropout=0.0)
    focal = cd.FocalLossConfig()
    for seed in seeds:
        rng = np.random.default_rng(200 + seed)
        X = rng.standard_normal((6, 16))
        y = rng.integers(0, 2, 6)
        model = cd.init_cnn(16, arch, seed)
        theta = rng.uniform(-0.7, 0.7, model.flat_params().size)
        model.set_flat_params(theta)
        _, grads = cd.loss_and_grads(model, X, y, focal, dropout=False)
        analytic = np.concatenate([g.ravel() for g in grads])

        def loss_at(t, _m=model, _X=X, _y=y):
            _m.set_flat_params(t)
            return cd.focal_loss(_y, cd.score(_m, _X), focal)

        worst = max(worst, _rel_err(analytic, finite_diff_grad(loss_at, theta)))
        model.set_flat_params(theta)
    return worst < 1e-4, f"max relative error = {worst:.3e}"


def bench_loss_identities(quick: bool) -> tuple[bool, str]:
    rng = np.random.default_rng(5)
    reduced = cd.FocalLossConfig(gamma=0.0, alpha=0.5, weight_benign=1.0,
                                 weight_malicious=1.0)
    worst = 0.0
    for _ in range(20 if quick else 100):
        y = rng.integers(0, 2, 16).astype(float)
        p = rng.uniform(0.01, 0.99, 16)
        worst = max(worst, abs(cd.focal_loss(y, p, reduced) - 0.5 * md.bce_loss(y, p)))
    ln2_err = abs(md.bce_loss(np.ones(1), np.full(1, 0.5)) - np.log(2.0))
    ok = worst < 1e-12 and ln2_err < 1e-12
    return ok, f"|focal - BCE/2| max = {worst:.2e}, |BCE(1,0.5) - ln 2| = {ln2_err:.2e}"


def bench_split_determinism(quick: bool) -> tuple[bool, str]:
    cfg = paradigm_synth_config(benign_count=300, known_count=100, unknown_count=40)
    ds = gen_synthetic(cfg)
    split = SplitConfig(unknown_labels=cfg.unknown_labels)
    h1 = plan_and_materialize(ds, split).bundle_hash()
    h2 = plan_and_materialize(ds, split).bundle_hash()
    rng_ok = SplitMix64(42).next_u64() == SplitMix64(42).next_u64()
    return h1 == h2 and rng_ok, f"bundle hash stable: {h1[:16]}…"


SUITES = (
    ("lof-oracle-equivalence", bench_lof_oracle),
    ("ocsvm-vs-qp-oracle", bench_ocsvm_oracle),
    ("ocsvm-nu-property", bench_nu_property),
    ("gradient-checks", bench_gradients),
    ("loss-identities", bench_loss_identities),
    ("split-determinism", bench_split_determinism),
)


def run_benches(quick: bool = False) -> int:
    failures = 0
    for name, fn in SUITES:
        try:
            ok, detail = fn(quick)
        except Exception as exc:  # a crashed suite is a failure, not an abort
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        status = "PASS" if ok else "FAIL"
        print(f"[{status}] {name}: {detail}")
        failures += 0 if ok else 1
    return failures
