"""Acceptance suite for the covert semantic pipeline.

Each test prints one PASS/FAIL line. The grid settings below were
calibrated once and are then frozen; see the repository notes for the
reasoning behind the epoch counts, the covert-penalty weight, and the
reduced k lists.
"""

import time

import pytest
import torch

from semantic_dnn import (
    COVERT_TOTAL_SUM,
    TrainConfig,
    load_dataset,
    run_models,
    train_stage1,
    train_stage2,
)

torch.set_num_threads(4)

BASE = TrainConfig(covert_loss_variant=COVERT_TOTAL_SUM)

# covert penalty 30 keeps the power constraint binding at these epoch
# counts; the package default of 10 lets both block lengths partially
# buy accuracy by violating covertness, washing out the blocklength trend
SQRT_OVERRIDES = {"stage1_epochs": 15, "stage2_epochs": 40,
                  "lambda_covert": 30.0}
MODEL_SPECS = [
    {"model": "sqrt", "n": 512, "k_list": [4, 6, 7],
     "overrides": SQRT_OVERRIDES},
    {"model": "sqrt", "n": 2048, "k_list": [5, 8, 12],
     "overrides": SQRT_OVERRIDES},
    {"model": "linear", "n": 512, "k_list": [102, 409, 512],
     "overrides": {"stage1_epochs": 10, "stage2_epochs": 15,
                   "lambda_covert": 30.0}},
    # stage-2 lr 0.005 oscillates on the pure-distortion objective;
    # 0.001 converges, so the ceiling run overrides it
    {"model": "non-covert", "n": 512, "k_list": [102],
     "overrides": {"stage1_epochs": 40, "stage2_epochs": 50,
                   "stage2_lr": 0.001}},
]


def report(name, ok, detail):
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def grid_rows():
    data = load_dataset(seed=BASE.seed)
    start = time.time()
    rows = run_models(BASE, MODEL_SPECS, data)
    print(f"\ngrid wall time {time.time() - start:.0f}s")
    for r in rows:
        print(f"  {r['model']} n={r['n']} k={r['k']} "
              f"acc={r['accuracy']:.4f} star={r['k_star_flag']}")
    return rows


def _best(rows, model, n):
    return max(r["accuracy"] for r in rows
               if r["model"] == model and r["n"] == n)


def test_non_covert_ceiling(grid_rows):
    acc = _best(grid_rows, "non-covert", 512)
    report("non-covert ceiling", acc >= 0.95,
           f"n=512 k=102 accuracy {acc:.4f} (need >= 0.95)")


def test_sqrt_covert_trend(grid_rows):
    b512 = _best(grid_rows, "sqrt", 512)
    b2048 = _best(grid_rows, "sqrt", 2048)
    ok = (b2048 - b512 >= 0.10 and 0.40 < b512 < 0.95
          and 0.40 < b2048 < 0.95)
    report("sqrt covert trend", ok,
           f"best acc {b512:.4f} (n=512) -> {b2048:.4f} (n=2048), "
           f"gain {100 * (b2048 - b512):.1f} points (need >= 10, "
           f"both in (40%, 95%))")


def test_linear_covert_collapse(grid_rows):
    accs = {r["k"]: r["accuracy"] for r in grid_rows
            if r["model"] == "linear"}
    worst = max(accs.values())
    report("linear covert collapse", worst <= 0.20,
           f"accuracies {accs} (all need <= 0.20)")


def test_ste_gradient_check():
    torch.manual_seed(11)
    data = load_dataset()
    cfg = TrainConfig(k=6, stage1_epochs=1)
    s1 = train_stage1(cfg, data)
    s1.encoder.eval()
    batch = torch.from_numpy(data.train_images[:64])
    z = s1.encoder(batch).detach().requires_grad_(True)

    from semantic_dnn import binary_quantize
    u = binary_quantize(z)
    loss = s1.classifier(u).square().sum()
    grad_z, grad_u = torch.autograd.grad(loss, (z, u))
    exact = float((grad_z - grad_u).abs().max())

    # surrogate path (quantizer replaced by identity) against finite
    # differences, confirming the pass-through target is a real gradient;
    # run in float64 so the central difference is not noise-limited
    cls64 = s1.classifier.double()
    z2 = z.detach().double().requires_grad_(True)
    loss2 = cls64(z2).square().sum()
    (grad2,) = torch.autograd.grad(loss2, (z2,))
    h = 1e-5
    max_fd_err = 0.0
    with torch.no_grad():
        for (i, j) in [(0, 0), (3, 2), (17, 5), (40, 1)]:
            zp = z2.detach().clone()
            zm = z2.detach().clone()
            zp[i, j] += h
            zm[i, j] -= h
            fd = (float(cls64(zp).square().sum())
                  - float(cls64(zm).square().sum())) / (2 * h)
            max_fd_err = max(max_fd_err, abs(fd - float(grad2[i, j])))

    ok = exact == 0.0 and max_fd_err < 1e-2
    report("STE gradient check", ok,
           f"pass-through deviation {exact} (need 0), "
           f"finite-difference error {max_fd_err:.2e} (need < 1e-2)")


def test_covert_ablation_invariant():
    data = load_dataset()
    cfg = BASE.with_overrides(n=512, k=6, stage1_epochs=5, stage2_epochs=10)
    s1 = train_stage1(cfg, data)
    covert = train_stage2(cfg, s1, data)
    ablated = train_stage2(cfg.with_overrides(lambda_covert=0.0), s1, data)
    ok = ablated.final_covert_gap >= 2.0 * covert.final_covert_gap
    report("covert-loss ablation", ok,
           f"ablated gap {ablated.final_covert_gap:.3f} vs covert "
           f"{covert.final_covert_gap:.3f} (need >= 2x)")
