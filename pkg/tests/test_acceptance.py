"""End-to-end acceptance criteria, one test per criterion.

Each test records a one-line verdict that is printed in the terminal summary,
then asserts it. Thresholds are fixed here and must not be tuned to make a
run pass.
"""

import os
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from hdadapt import hvcore
from hdadapt.data import (
    SynthSpec,
    check_layout,
    generate_synthetic,
    load_corpus,
    make_kfold_splits,
    make_lodo_splits,
)
from hdadapt.encoder import (
    HDEncoder,
    encode_sensor,
    encode_sensor_window,
    encode_values,
    fit_encoder,
    quantize_level,
)
from hdadapt.harness import ExperimentConfig, bench, evaluate_lodo, run_evaluation, sweep_delta
from hdadapt.hvcore import HvRng, bind, bundle, permute, similarity
from hdadapt.model import DomainModel, predict_domain_model, update_on_sample
from hdadapt.encoder import EncodedSample

pytestmark = pytest.mark.acceptance

D = 8192
CFG = ExperimentConfig()  # library defaults: d=8192, n=3, eta=0.05, 20 epochs, delta*=0.65
GRID = [round(0.05 + 0.1 * i, 2) for i in range(10)]


def record(n, ok, detail):
    ACCEPTANCE[n] = (ok, detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(scope="session")
def shifted():
    return generate_synthetic(SynthSpec())


@pytest.fixture(scope="session")
def unshifted():
    return generate_synthetic(SynthSpec(shift=0.0))


@pytest.fixture(scope="session")
def lodo_shifted(shifted):
    return run_evaluation(shifted, make_lodo_splits(shifted), CFG, ("adaptive", "pooled"), "lodo")


@pytest.fixture(scope="session")
def lodo_unshifted(unshifted):
    return run_evaluation(unshifted, make_lodo_splits(unshifted), CFG, ("adaptive", "pooled"), "lodo")


def kfold_pooled(corpus):
    splits = make_kfold_splits(corpus, 5, CFG.seed)
    return run_evaluation(corpus, splits, CFG, ("pooled",), "kfold").arms["pooled"].mean_accuracy


def test_c01_hypervector_algebra():
    t0 = time.perf_counter()
    rnd, bnd, per, bun = [], [], [], []
    exact = True
    for trial in range(1000):
        r = HvRng(trial, hvcore.STREAM_SYNTH)
        a, b = r.bipolar(0, D), r.bipolar(1, D)
        rnd.append(similarity(a, b))
        ab = bind(a, b)
        bnd.append(similarity(ab, a))
        per.append(similarity(permute(a, 1), a))
        bun.append(similarity(bundle([a, b]), a))
        exact &= np.array_equal(bind(ab, b), a)
    elapsed = time.perf_counter() - t0
    stats = {k: (np.max(np.abs(v)), abs(np.mean(v))) for k, v in
             (("random", rnd), ("bind", bnd), ("permute", per))}
    near_zero = all(mx < 0.06 and mn < 0.005 for mx, mn in stats.values())
    in_band = np.mean((np.array(bun) >= 0.6) & (np.array(bun) <= 0.8))
    ok = near_zero and in_band >= 0.99 and exact and elapsed < 5.0
    detail = ", ".join(f"{k} max|s|={mx:.4f} |mean|={mn:.5f}" for k, (mx, mn) in stats.items())
    record(1, ok, f"{detail}, bundle in band {in_band:.3f}, bind exact={exact}, {elapsed:.2f}s")


def test_c02_encoder_invariants():
    t0 = time.perf_counter()
    r = np.random.default_rng(0)
    X = r.normal(size=(40, 3, 32))
    a = HDEncoder(n_jobs=1).fit(X).transform(X)
    b = HDEncoder(n_jobs=1).fit(X).transform(X)
    c = HDEncoder(n_jobs=4).fit(X).transform(X)
    deterministic = np.array_equal(a, b) and np.array_equal(a, c)

    cfg = fit_encoder(list(X), d=D)
    lo, hi = cfg.ranges[0]
    ys = np.linspace(lo, hi, 25)
    to_max = [similarity(quantize_level(y, 0, cfg), cfg.anchors_max[0]) for y in ys]
    monotone = all(p < q for p, q in zip(to_max, to_max[1:]))

    hr = HvRng(1)
    worst = 0.0
    for i in range(20):
        lv = [hr.bipolar(3 * i + k, D) for k in range(3)]
        worst = max(worst, abs(similarity(encode_sensor_window(lv), encode_sensor_window(lv[::-1]))))
    order_ok = worst < 0.06

    x = X[0]
    fused = encode_values(x, cfg)
    parts = sum(cfg.signatures[i] * encode_sensor(x[i], i, cfg) for i in range(3))
    lin_err = np.max(np.abs(fused - parts))
    x2 = X[1]
    sum_err = np.max(np.abs(
        (encode_values(x, cfg) + encode_values(x2, cfg))
        - sum(cfg.signatures[i] * (encode_sensor(x[i], i, cfg) + encode_sensor(x2[i], i, cfg)) for i in range(3))
    ))
    linear = lin_err < 1e-6 and sum_err < 1e-6
    elapsed = time.perf_counter() - t0
    ok = deterministic and monotone and order_ok and linear and elapsed < 10.0
    record(2, ok, f"deterministic={deterministic}, level monotone={monotone}, reorder max|s|={worst:.4f}, "
                  f"fusion err={max(lin_err, sum_err):.1e}, {elapsed:.2f}s")


def test_c03_update_rule():
    r = np.random.default_rng(3)
    fired = violations = 0
    for case in range(1000):
        d = 256
        C = r.standard_normal((4, d)) * r.uniform(0.1, 3.0)
        if case % 10 == 0:
            C[r.integers(4)] = 0.0
        h = r.standard_normal(d)
        i, _ = predict_domain_model(DomainModel(0, C), h)
        j = int(r.integers(4))
        out = update_on_sample(DomainModel(0, C), EncodedSample(h, 0, j), eta=0.05)
        if i == j:
            violations += not np.array_equal(out.classes, C)
            continue
        fired += 1
        violations += not similarity(h, out.classes[j]) > similarity(h, C[j])
        violations += not similarity(h, out.classes[i]) < similarity(h, C[i])

    # increment size against prior similarity: same h, prototypes at controlled angles
    h = r.standard_normal(512)
    h /= np.linalg.norm(h)
    noise = r.standard_normal(512)
    noise -= noise @ h * h
    noise /= np.linalg.norm(noise)
    priors, steps = [], []
    for target in np.linspace(-0.9, 0.9, 19):
        cj = target * h + np.sqrt(1 - target**2) * noise
        ci = h.copy()  # always the (wrong) argmax
        out = update_on_sample(DomainModel(0, np.stack([ci, cj])), EncodedSample(h, 0, 1), eta=0.05)
        priors.append(similarity(h, cj))
        steps.append(np.linalg.norm(out.classes[1] - cj))
    monotone = all(a > b for a, b in zip(steps, steps[1:])) and np.all(np.diff(priors) > 0)
    ok = violations == 0 and fired >= 500 and monotone
    record(3, ok, f"{fired} fired updates, {violations} violations, step size monotone={monotone}")


def test_c04_descriptor_membership(shifted):
    enc = HDEncoder().fit(shifted.values())
    H = enc.transform(shifted.values())
    dom = shifted.domains
    U = np.stack([H[dom == k].sum(axis=0) for k in range(shifted.K)])
    S = hvcore.cosine_matrix(H, U)
    own = np.mean(np.argmax(S, axis=1) == dom)
    mask = np.eye(shifted.K, dtype=bool)[dom]
    gap = S[mask].mean() - S[~mask].mean()
    record(4, own >= 0.95 and gap >= 0.1,
           f"own-domain argmax {own:.3f} (>= 0.95), in-out similarity gap {gap:.3f} (>= 0.1)")


def test_c05_kfold_lodo_gap(shifted, unshifted, lodo_shifted, lodo_unshifted):
    t0 = time.perf_counter()
    kf2, kf0 = kfold_pooled(shifted), kfold_pooled(unshifted)
    lo2 = lodo_shifted.arms["pooled"].mean_accuracy
    lo0 = lodo_unshifted.arms["pooled"].mean_accuracy
    elapsed = time.perf_counter() - t0
    gap2, gap0 = 100 * (kf2 - lo2), 100 * abs(kf0 - lo0)
    record(5, gap2 >= 10 and gap0 <= 3 and elapsed < 120,
           f"shift 2: kfold {kf2:.3f} vs lodo {lo2:.3f} (gap {gap2:.1f} >= 10); "
           f"shift 0: gap {gap0:.1f} (<= 3); {elapsed:.0f}s")


def test_c06_adaptation_benefit(lodo_shifted):
    a = lodo_shifted.arms["adaptive"].mean_accuracy
    p = lodo_shifted.arms["pooled"].mean_accuracy
    diff = 100 * (a - p)
    record(6, diff >= 5, f"adaptive {a:.3f} vs pooled {p:.3f} at delta*=0.65: {diff:+.1f} points (>= +5)")


def test_no_shift_no_advantage(lodo_unshifted):
    a = lodo_unshifted.arms["adaptive"].mean_accuracy
    p = lodo_unshifted.arms["pooled"].mean_accuracy
    assert abs(a - p) <= 0.03


def test_c07_sweep_shape(shifted):
    sw = sweep_delta(shifted, GRID, CFG)
    acc = np.array(sw.mean_accuracy)
    best = int(np.argmax(acc))
    interior = 0 < best < len(GRID) - 1 and acc[best] > max(acc[0], acc[-1])
    curve = " ".join(f"{v:.3f}" for v in acc)
    record(7, interior, f"max at delta*={GRID[best]} ({acc[best]:.3f}); curve {curve}")


def test_c08_trace_conformance():
    from test_adapt import TRACE, test_trace_table

    boundary = any(max(c[0]) == c[1] for c in TRACE)
    all_qualify = any(not c[3] and len(c[4]) == len(c[0]) for c in TRACE)
    failures = []
    for case in TRACE:
        try:
            test_trace_table(*case)
        except AssertionError as exc:
            failures.append((case, exc))
    ok = len(TRACE) >= 20 and boundary and all_qualify and not failures
    record(8, ok, f"{len(TRACE)} cases, boundary case={boundary}, all-qualify case={all_qualify}, "
                  f"{len(failures)} failures")


def test_c09_real_data_smoke():
    path = os.environ.get("HDADAPT_DSADS_CSV")
    if not path:
        ACCEPTANCE[9] = (None, "set HDADAPT_DSADS_CSV to a DSADS-format corpus to run")
        pytest.skip("HDADAPT_DSADS_CSV not set")
    corpus = load_corpus(path)
    layout = check_layout(corpus, "dsads")
    splits = make_lodo_splits(corpus)
    sizes = [len(s.test) for s in splits]
    rep = run_evaluation(corpus, splits, CFG, ("adaptive", "pooled"), "lodo")
    a, p = rep.arms["adaptive"].mean_accuracy, rep.arms["pooled"].mean_accuracy
    record(9, not layout and sizes == [2280] * 4 and a >= p,
           f"layout problems {layout}, test splits {sizes}, adaptive {a:.3f} vs pooled {p:.3f}")


def test_c10_determinism_and_scaling():
    small = generate_synthetic(SynthSpec(samples_per_class=40))
    cfg = ExperimentConfig(dim=2048)
    first = evaluate_lodo(small, cfg, arms=("adaptive", "pooled")).accuracy_fields()
    again = evaluate_lodo(small, cfg, arms=("adaptive", "pooled")).accuracy_fields()
    threaded = evaluate_lodo(small, ExperimentConfig(dim=2048, n_jobs=2), arms=("adaptive", "pooled")).accuracy_fields()
    same = first == again == threaded

    rows = bench(generate_synthetic(SynthSpec()), [0.25, 0.5, 1.0], CFG, repeats=5)
    t = [row["train_seconds"] for row in rows]
    ratios = [t[1] / t[0], t[2] / t[1]]
    ok = same and max(ratios) <= 2.5
    record(10, ok, f"reports identical={same}; train seconds {', '.join(f'{x:.2f}' for x in t)}, "
                   f"growth per doubling {ratios[0]:.2f}x, {ratios[1]:.2f}x (<= 2.5x)")
