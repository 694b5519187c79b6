"""Acceptance suite: every criterion at its stated tolerance.

The expensive artifacts (dataset, both trained models) are built once per
session. Set RELPLACE_ACCEPTANCE_CACHE to a directory to reuse them across
pytest invocations; without it everything trains from scratch (~2-3 h on a
2-core laptop CPU).

Each criterion prints one [PASS]/[FAIL] line.
"""

import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

import relplace.diffcore as dc
import relplace.evaluation as ev
import relplace.relnet as rn
import relplace.scenes as sc
import relplace.spatial as sp
from relplace.diffcore import Tape, Tensor
from relplace.harness import main as cli_main
from relplace.labels import RELATIONS, REL_INDEX

SEED = 2024
N_SCENES = 2000


def criterion(name: str, ok: bool, detail: str = "") -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else ""))
    assert ok, f"{name}: {detail}"


# -- shared artifacts ---------------------------------------------------------

@pytest.fixture(scope="session")
def work_dir(tmp_path_factory) -> Path:
    cache = os.environ.get("RELPLACE_ACCEPTANCE_CACHE")
    if cache:
        path = Path(cache)
        path.mkdir(parents=True, exist_ok=True)
        return path
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="session")
def dataset(work_dir) -> Path:
    out = work_dir / "dataset"
    if not (out / "meta.json").exists():
        sc.dataset_build(N_SCENES, seed=SEED, out_path=out)
    return out


@pytest.fixture(scope="session")
def relnet_full(dataset, work_dir):
    ckpt = work_dir / "relnet_full.ckpt"
    stats_path = work_dir / "relnet_full_stats.json"
    if ckpt.exists() and stats_path.exists():
        return rn.load_checkpoint(ckpt), json.loads(stats_path.read_text())
    hyper = rn.RelNetHyper(epochs=20, batch=32, seed=SEED, early_stop_acc=0.965)
    t0 = time.time()
    model, log = rn.train_relnet(dataset, hyper)
    seconds = time.time() - t0
    stats = {"seconds": seconds, "epochs_run": len(log), "log": log}
    rn.save_checkpoint(model, ckpt)
    stats_path.write_text(json.dumps(stats))
    return model, stats


@pytest.fixture(scope="session")
def relnet_variant_accuracy(dataset, work_dir, relnet_full):
    """Test accuracy + per-class accuracy for the three input variants."""
    path = work_dir / "ablation_accuracy.json"
    if path.exists():
        return json.loads(path.read_text())
    results = {}
    model, _ = relnet_full
    loader = rn.SampleLoader(dataset, model)
    test_idx = loader.split_indices("test")
    results["full"] = rn.evaluate_accuracy(model, loader, test_idx)
    for variant in ("masks_only", "image_binary_masks"):
        hyper = rn.RelNetHyper(epochs=8, batch=32, seed=SEED, input_variant=variant)
        vmodel, _ = rn.train_relnet(dataset, hyper)
        vloader = rn.SampleLoader(dataset, vmodel)
        results[variant] = rn.evaluate_accuracy(vmodel, vloader, test_idx)
    path.write_text(json.dumps(results))
    return results


@pytest.fixture(scope="session")
def spatial_full(dataset, work_dir, relnet_full):
    ckpt = work_dir / "spatial_full.ckpt"
    if ckpt.exists():
        return sp.load_checkpoint(ckpt)
    model, _ = relnet_full
    catalog = sc.SubjectCatalog.load(dataset / "catalog.json")
    hyper = sp.SpatialHyper(epochs=5, seed=SEED, refs_per_scene=2, samples=20,
                            epsilon=0.1, max_scenes=700)
    spatial, _ = sp.train_spatial(model, dataset, catalog, hyper)
    sp.save_checkpoint(spatial, ckpt)
    return spatial


def test_scenes(dataset):
    return sorted({r.scene_id for r in sc.load_manifest(dataset) if r.split == "test"})


# -- criterion: gradient correctness ------------------------------------------

# Central differences are invalid within h of a relu kink (the function is
# not differentiable there), so points are resampled until every relu
# preactivation clears the worst shift a single +-h input perturbation can
# induce (~0.4h for these widths) with headroom.
def _relu_margin_for(h: float) -> float:
    return 0.65 * h


def _relu_margin(blocks, x: Tensor, pad: int) -> float:
    margin = float("inf")
    h = x
    with dc.no_tape():
        for w, b in blocks:
            pre = dc.conv2d(h, w.tensor, b.tensor, stride=2, padding=pad)
            margin = min(margin, float(np.abs(pre.data).min()))
            h = dc.relu(pre)
    return margin


def _sample_point(rng, shape, scale, margin_fn, dtype, h):
    for _ in range(600):
        point = Tensor(rng.standard_normal(shape) * scale, dtype=dtype)
        if margin_fn(point) > _relu_margin_for(h):
            return point
    raise AssertionError("could not find a kink-free evaluation point")


def _mini_relnet_loss(dtype, h):
    rng = np.random.default_rng(5)
    config = rn.RelNetConfig(channels=(4, 6), kernel=3, tap_depth=1, image_size=12)
    model = rn.RelNetModel(config, seed=3)
    for p in model.parameters():
        p.data = p.data.astype(dtype)
        if p.name.startswith("head"):
            p.data = (rng.standard_normal(p.data.shape) * 0.2).astype(dtype)
    y = np.tile(np.eye(6, dtype=np.float32)[2], (2, 1))

    def f(x):
        return dc.cross_entropy(dc.softmax(model.logits(x)), y)

    blocks = list(zip(model.block_weights, model.block_biases))
    point = _sample_point(rng, (2, 5, 12, 12), 0.5,
                          lambda p: _relu_margin(blocks, p, config.kernel // 2),
                          dtype, h)
    return f, point


def _mini_spatial_loss(dtype, h):
    rng = np.random.default_rng(6)
    config = sp.SpatialConfig(channels=(4, 6), kernel=3, image_size=16)
    model = sp.SpatialModel(config, seed=4)
    for p in model.parameters():
        p.data = p.data.astype(dtype)
        if p.name.startswith("head"):
            p.data = (rng.standard_normal(p.data.shape) * 0.2).astype(dtype)
    locations = [(int(rng.integers(16)), int(rng.integers(16))) for _ in range(8)]
    targets = rng.uniform(0.05, 0.95, size=(8, 6))
    batch = sp.SampleBatch(locations=locations, channels=[0] * 8, targets=targets)

    def f(x):
        out = model.forward(x)
        view = Tensor(out.data[0], requires_grad=out.requires_grad, dtype=out.data.dtype)
        tape = dc.active_tape()
        if tape is not None and out.requires_grad:
            tape.record(view, lambda g: [(out, g[None])])
        return sp.spatial_loss(view, batch, spread="sobel")

    def margin(point: Tensor) -> float:
        m = float("inf")
        pad = config.kernel // 2
        with dc.no_tape():
            h = point
            skips = []
            for w, b in model.enc:
                pre = dc.conv2d(h, w.tensor, b.tensor, stride=2, padding=pad)
                m = min(m, float(np.abs(pre.data).min()))
                h = dc.relu(pre)
                skips.append(h)
            for stage, (w, b) in enumerate(model.dec):
                skip = skips[len(model.enc) - 2 - stage]
                h = dc.concat_channels([dc.upsample2x(h), skip])
                pre = dc.conv2d(h, w.tensor, b.tensor, stride=1, padding=pad)
                m = min(m, float(np.abs(pre.data).min()))
                h = dc.relu(pre)
            w, b = model.final
            pre = dc.conv2d(dc.upsample2x(h), w.tensor, b.tensor, stride=1, padding=pad)
            m = min(m, float(np.abs(pre.data).min()))
        return m

    point = _sample_point(rng, (1, 4, 16, 16), 0.5, margin, dtype, h)
    return f, point


def _op_checks(dtype):
    rng = np.random.default_rng(11)
    checks = []
    k = Tensor(rng.standard_normal((2, 2, 3, 3)) * 0.5, requires_grad=True, dtype=dtype)
    b = Tensor(rng.standard_normal(2) * 0.1, requires_grad=True, dtype=dtype)
    t4 = rng.standard_normal((1, 2, 3, 3))
    checks.append(("conv2d", lambda x: dc.mse(dc.conv2d(x, k, b, 2, 1), t4),
                   Tensor(rng.standard_normal((1, 2, 5, 5)), dtype=dtype)))
    t_pool = rng.standard_normal((1, 1, 8, 8))
    checks.append(("pool_max+upsample2x",
                   lambda x: dc.mse(dc.upsample2x(dc.pool_max(x, 2, 2)), t_pool),
                   Tensor(rng.permutation(64).reshape(1, 1, 8, 8) * 0.1, dtype=dtype)))
    checks.append(("relu", lambda x: dc.mse(dc.relu(x), np.zeros((3, 3))),
                   Tensor(rng.standard_normal((3, 3)) + 0.3, dtype=dtype)))
    checks.append(("sigmoid", lambda x: dc.mse(dc.sigmoid(x), np.zeros((3, 3))),
                   Tensor(rng.standard_normal((3, 3)), dtype=dtype)))
    y6 = np.eye(6)[1]
    checks.append(("softmax+cross_entropy",
                   lambda x: dc.cross_entropy(dc.softmax(x), y6),
                   Tensor(rng.standard_normal(6), dtype=dtype)))
    t5 = rng.standard_normal(5)
    checks.append(("mse", lambda x: dc.mse(x, t5),
                   Tensor(rng.standard_normal(5), dtype=dtype)))
    w = Tensor(rng.standard_normal((4, 3)), requires_grad=True, dtype=dtype)
    bb = Tensor(rng.standard_normal(3), requires_grad=True, dtype=dtype)
    t2 = rng.standard_normal((2, 3))
    checks.append(("linear+global_avg_pool",
                   lambda x: dc.mse(dc.linear(dc.global_avg_pool(x), w, bb), t2),
                   Tensor(rng.standard_normal((2, 4, 3, 3)), dtype=dtype)))
    rows = rng.integers(0, 5, size=4)
    cols = rng.integers(0, 5, size=4)
    tg = rng.uniform(0, 1, size=(4, 2))
    wts = rng.uniform(0.5, 1.5, size=4)
    checks.append(("gather+weighted_sq_err",
                   lambda x: dc.weighted_sq_err_sum(dc.gather_pixels(x, rows, cols), tg, wts),
                   Tensor(rng.standard_normal((2, 5, 5)), dtype=dtype)))
    other = Tensor(rng.standard_normal((1, 2, 4, 4)), dtype=dtype)
    t3 = rng.standard_normal((1, 4))
    checks.append(("concat_channels",
                   lambda x: dc.mse(dc.global_avg_pool(dc.concat_channels([x, other])), t3),
                   Tensor(rng.standard_normal((1, 2, 4, 4)), dtype=dtype)))
    return checks


def test_gradient_correctness():
    t0 = time.time()
    worst32 = 0.0
    for name, f, point in _op_checks(np.float32):
        err = dc.grad_check(f, point, h=1e-3)
        worst32 = max(worst32, err)
        assert err < 1e-3, f"op {name} 32-bit: {err}"
    f, point = _mini_relnet_loss(np.float32, 1e-3)
    err = dc.grad_check(f, point, h=1e-3)
    worst32 = max(worst32, err)
    assert err < 1e-3, f"relnet-mini 32-bit: {err}"
    f, point = _mini_spatial_loss(np.float32, 1e-3)
    err = dc.grad_check(f, point, h=1e-3)
    worst32 = max(worst32, err)
    assert err < 1e-3, f"spatial-mini 32-bit: {err}"

    worst64 = 0.0
    for name, f, point in _op_checks(np.float64):
        err = dc.grad_check(f, point, h=1e-5)
        worst64 = max(worst64, err)
        assert err < 1e-5, f"op {name} 64-bit: {err}"
    f, point = _mini_relnet_loss(np.float64, 1e-5)
    err = dc.grad_check(f, point, h=1e-5)
    worst64 = max(worst64, err)
    assert err < 1e-5, f"relnet-mini 64-bit: {err}"
    f, point = _mini_spatial_loss(np.float64, 1e-5)
    err = dc.grad_check(f, point, h=1e-5)
    worst64 = max(worst64, err)
    assert err < 1e-5, f"spatial-mini 64-bit: {err}"

    elapsed = time.time() - t0
    criterion("gradient correctness",
              worst32 < 1e-3 and worst64 < 1e-5 and elapsed < 120,
              f"max rel err 32-bit {worst32:.2e} (<1e-3), 64-bit {worst64:.2e} "
              f"(<1e-5), runtime {elapsed:.0f}s (<120s)")


# -- criterion: implant fidelity ----------------------------------------------

def test_implant_fidelity(dataset, relnet_full):
    model, _ = relnet_full
    scenes = sc.load_scenes(dataset)
    records = [r for r in sc.load_manifest(dataset) if r.split == "test"][:220]
    assert len(records) >= 200
    slice_cache = {}
    agree = 0
    for rec in records:
        scene = scenes[rec.scene_id]
        sub = scene.find(rec.subject_id)
        img_full = sc.render(scene).image
        a_o = model.make_mask(rec.reference_bbox)
        a_s = model.make_mask(rec.subject_bbox)
        full_post = model.classify(img_full, a_o, a_s)
        rest = sc.SceneSpec(width=scene.width, height=scene.height,
                            table_region=scene.table_region,
                            objects=[o for o in scene.objects if o.id != rec.subject_id],
                            seed=scene.seed, depth_scale=scene.depth_scale)
        img_ref = sc.render(rest).image
        fmap = model.encode_to_depth(img_ref, a_o, a_s)
        key = (sub.shape, sub.size, sub.color)
        if key not in slice_cache:
            slice_cache[key] = rn.subject_slice(model, sub.shape, sub.size, sub.color)
        u, v = rn.feature_anchor_for_center(sub.center, sub.size, fmap.scale)
        hall = model.classify_hallucinated(rn.implant(fmap, slice_cache[key], u, v))
        agree += int(full_post.argmax() == hall.argmax())
    rate = agree / len(records)
    criterion("implant fidelity", rate >= 0.85,
              f"argmax agreement {agree}/{len(records)} = {rate:.3f} (>=0.85)")


# -- criterion: relnet accuracy + ablation ordering ----------------------------

def test_relnet_accuracy(dataset, relnet_full):
    model, stats = relnet_full
    loader = rn.SampleLoader(dataset, model)
    result = rn.evaluate_accuracy(model, loader, loader.split_indices("test"))
    acc = result["accuracy"]
    ok = acc >= 0.90 and stats["epochs_run"] <= 20 and stats["seconds"] < 1800
    criterion("relnet synthetic accuracy", ok,
              f"test acc {acc:.3f} (>=0.90) in {stats['epochs_run']} epochs "
              f"(<=20), {stats['seconds']:.0f}s (<1800s)")


def test_relnet_ablation_ordering(relnet_variant_accuracy):
    res = relnet_variant_accuracy
    masks = res["masks_only"]["accuracy"]
    binm = res["image_binary_masks"]["accuracy"]
    full = res["full"]["accuracy"]
    ordered = masks < binm < full
    hard = ("inside", "on_top")
    easy = ("left", "right", "in_front", "behind")
    gap_hard = np.mean([res["full"]["per_class"][r] - res["masks_only"]["per_class"][r]
                        for r in hard])
    gap_easy = np.mean([res["full"]["per_class"][r] - res["masks_only"]["per_class"][r]
                        for r in easy])
    criterion("relnet ablation ordering", ordered and gap_hard > gap_easy,
              f"masks_only {masks:.3f} < image+binary {binm:.3f} < full {full:.3f}; "
              f"inside/on_top gap {gap_hard:.3f} > lateral gap {gap_easy:.3f}")


# -- criterion: spatial self-consistency ---------------------------------------

def test_spatial_self_consistency(dataset, spatial_full):
    scenes = sc.load_scenes(dataset)
    test_ids = test_scenes(dataset)[:100]
    catalog = sc.SubjectCatalog.load(dataset / "catalog.json")
    result = ev.self_consistency(spatial_full, {i: scenes[i] for i in test_ids},
                                 samples_per_case=3, seed=SEED, catalog=catalog,
                                 reference_per_scene=2)
    lines = []
    ok = result.mean_rate >= 0.70
    for rel in RELATIONS:
        rate, base = result.rates[rel], result.baseline[rel]
        if math.isnan(rate):
            continue
        ratio = rate / max(base, 1e-9)
        lines.append(f"{rel} {rate:.2f}/base {base:.3f} ({ratio:.1f}x)")
        if ratio < 3.0:
            ok = False
    criterion("spatial self-consistency", ok,
              f"mean {result.mean_rate:.3f} (>=0.70); " + ", ".join(lines))


# -- criterion: Eqees equivalence ----------------------------------------------

def test_placement_loss_equivalence():
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(100):
        h = int(rng.integers(6, 20))
        w = int(rng.integers(6, 20))
        gamma = rng.uniform(0.001, 0.999, size=(6, h, w))
        n = int(rng.integers(1, 30))
        locations = [(int(rng.integers(w)), int(rng.integers(h))) for _ in range(n)]
        targets = rng.uniform(0, 1, size=(n, 6))
        batch = sp.SampleBatch(locations=locations, channels=[0] * n, targets=targets)
        loss = sp.spatial_loss(Tensor(gamma, dtype=np.float64), batch, spread="none")
        direct = 0.0
        for (u, v), tgt in zip(locations, targets):
            diff = gamma[:, v, u] - tgt
            direct += float((diff * diff).sum())
        worst = max(worst, abs(float(loss.data.reshape(())) - direct))
    criterion("placement loss equivalence", worst < 1e-7,
              f"max |loss - direct| = {worst:.2e} (<1e-7) over 100 instances")


# -- criterion: metric oracle equivalence --------------------------------------

def test_metric_oracle_equivalence():
    from tests.test_evaluation import (ref_centroid, ref_iou, ref_js, ref_kl,
                                       ref_kw_h, ref_mode)

    rng = np.random.default_rng(23)
    worst = 0.0
    for _ in range(25):
        pred = rng.uniform(0, 1, (16, 16))
        gt = rng.uniform(0, 1, (16, 16))
        for t in (0.25, 0.5, 0.75):
            worst = max(worst, abs(ev.iou_at(pred, gt, t) - ref_iou(pred, gt, t)))
        worst = max(worst, abs(ev.mode_distance(pred, gt) - ref_mode(pred, gt)))
        worst = max(worst, abs(ev.centroid_distance(pred, gt) - ref_centroid(pred, gt)))
        worst = max(worst, abs(ev.kl_divergence(pred, gt) - ref_kl(pred, gt)))
        worst = max(worst, abs(ev.js_divergence(pred, gt) - ref_js(pred, gt)))
        a = rng.integers(0, 50, size=30).astype(float)
        b = rng.integers(0, 50, size=28).astype(float)
        worst = max(worst, abs(ev.kruskal_wallis(a, b)[0] - ref_kw_h(list(a), list(b))))
    h_example, _ = ev.kruskal_wallis([1, 2, 3], [4, 5, 6])
    kw_ok = abs(h_example - 3.857) < 1e-3
    criterion("metric oracle equivalence", worst < 1e-6 and kw_ok,
              f"max deviation {worst:.2e} (<1e-6); KW worked example H={h_example:.4f} "
              f"(|H-3.857|<1e-3)")


# -- criterion: sobel exactness -------------------------------------------------

def test_sobel_exactness():
    from tests.test_spatial import sobel_oracle

    rng = np.random.default_rng(29)
    exact = True
    for _ in range(10):
        m = rng.standard_normal((rng.integers(3, 24), rng.integers(3, 24)))
        gx, gy = sp.sobel(m)
        exact &= np.array_equal(gx, sobel_oracle(m, sp.SOBEL_X))
        exact &= np.array_equal(gy, sobel_oracle(m, sp.SOBEL_Y))
    ramp = np.tile(np.arange(12, dtype=np.float64), (12, 1))
    gx, gy = sp.sobel(ramp)
    ramp_ok = np.all(gx[1:-1, 1:-1] == 8.0) and np.all(gy[1:-1, 1:-1] == 0.0)
    criterion("sobel exactness", exact and bool(ramp_ok),
              "bitwise equal to brute-force correlation; interior ramp gx == 8 exactly")


# -- criterion: determinism ------------------------------------------------------

def test_harness_determinism(tmp_path):
    assert cli_main(["gen", "--scenes", "8", "--seed", "11",
                     "--out", str(tmp_path / "d1")]) == 0
    assert cli_main(["gen", "--scenes", "8", "--seed", "11",
                     "--out", str(tmp_path / "d2")]) == 0
    gen_ok = all(
        (tmp_path / "d1" / f).read_bytes() == (tmp_path / "d2" / f).read_bytes()
        for f in ("manifest.jsonl", "scenes.jsonl", "meta.json"))

    train_args = ["train-relnet", "--data", str(tmp_path / "d1"), "--epochs", "1",
                  "--batch", "16", "--seed", "7", "--no-timestamps"]
    assert cli_main(train_args + ["--out", str(tmp_path / "r1")]) == 0
    assert cli_main(train_args + ["--out", str(tmp_path / "r2")]) == 0
    ckpt_ok = (tmp_path / "r1" / "checkpoints" / "relnet.ckpt").read_bytes() == \
        (tmp_path / "r2" / "checkpoints" / "relnet.ckpt").read_bytes()
    log_ok = (tmp_path / "r1" / "log.jsonl").read_bytes() == \
        (tmp_path / "r2" / "log.jsonl").read_bytes()

    sp_args = ["train-spatial", "--data", str(tmp_path / "d1"),
               "--relnet", str(tmp_path / "r1" / "checkpoints" / "relnet.ckpt"),
               "--epochs", "1", "--seed", "7", "--refs-per-scene", "1",
               "--max-scenes", "2", "--samples", "2", "--no-timestamps"]
    assert cli_main(sp_args + ["--out", str(tmp_path / "s1")]) == 0
    assert cli_main(sp_args + ["--out", str(tmp_path / "s2")]) == 0
    sp_ok = (tmp_path / "s1" / "checkpoints" / "spatial.ckpt").read_bytes() == \
        (tmp_path / "s2" / "checkpoints" / "spatial.ckpt").read_bytes()

    criterion("harness determinism", gen_ok and ckpt_ok and log_ok and sp_ok,
              "gen outputs, checkpoints and logs byte-identical across reruns")


# -- criterion: distribution-quality trend ---------------------------------------

def test_distribution_quality_trend(dataset, spatial_full):
    scenes = sc.load_scenes(dataset)
    test_ids = test_scenes(dataset)[:50]
    subject = sc.SubjectCatalog.load(dataset / "catalog.json").get("can")
    reports = []
    for scene_id in test_ids:
        scene = scenes[scene_id]
        ref = scene.objects[0]
        maps = spatial_full.predict(
            sc.render(scene).image,
            spatial_full.make_mask(ref.bbox, scene.width, scene.height))
        gt = {}
        for rel in RELATIONS:
            dist = ev.oracle_ground_truth(scene, ref.id, rel, subject.size)
            if dist is not None:
                gt[rel] = dist
        reports.append(ev.evaluate(maps, gt, seed=SEED + scene_id))
    agg = ev.aggregate_reports(reports)
    i25 = agg.mean["iou@0.25"]
    i50 = agg.mean["iou@0.5"]
    i75 = agg.mean["iou@0.75"]
    ok = i25 >= 0.4 and i25 >= i50 >= i75
    criterion("distribution-quality trend", ok,
              f"mean IoU@0.25 {i25:.3f} (>=0.4) >= IoU@0.5 {i50:.3f} >= IoU@0.75 {i75:.3f}")


# -- sanity: single-scene overfit -------------------------------------------------

def test_single_scene_overfit_sanity(relnet_full):
    """Training on one simple scene drives its own self-consistency >= 0.9."""
    model, _ = relnet_full
    scene = sc.generate_scene(404, sc.GenConfig(p_stack=0.0, p_contain=0.0,
                                                min_objects=2, max_objects=2))
    image = sc.render(scene).image
    catalog = sc.default_catalog()
    subject = catalog.get("can")
    sl = rn.subject_slice(model, subject.shape, subject.size, subject.color)
    ref = scene.objects[0]

    spatial = sp.SpatialModel(sp.SpatialConfig(
        image_size=96, sigma=model.config.sigma, mask_norm=model.config.mask_norm), seed=0)
    opt = dc.make_optimizer(spatial.parameters(), "adam", 1e-3)
    rng = np.random.default_rng(0)
    a_o = spatial.make_mask(ref.bbox)
    x = spatial.stack_input(image, a_o)[None]
    from relplace.spatial.train import _first

    for _ in range(300):
        with Tape() as tape:
            out = spatial.forward(Tensor(x))
        maps = sp.PlacementMaps(gamma=out.data[0].copy())
        locations, channels = [], []
        for c in range(6):
            pts = sp.sample_locations(maps, c, n=20, epsilon=0.1, rng=rng)
            locations.extend(pts)
            channels.extend([c] * len(pts))
        batch = sp.hallucination_targets(model, image, a_o, sl, locations, channels)
        with tape:
            loss = sp.spatial_loss(_first(out), batch, spread="sobel")
        opt.zero_grad()
        tape.backward(loss)
        opt.step()

    lmap = ev.oracle_label_map(scene, ref.id, subject.size)
    table_poly = sp.rect_polygon(scene.table_region)
    final = spatial.predict(image, a_o)
    hits = 0
    total = 0
    rng_eval = np.random.default_rng(1)
    for rel in RELATIONS:
        if not ev.relation_feasible(scene, ref.id, rel, subject.size):
            continue
        for _ in range(20):
            pt = sp.place(final, rel, strategy="sample", valid_region=table_poly,
                          rng=rng_eval)
            total += 1
            hits += int(pt is not None and lmap[pt[1], pt[0]] == REL_INDEX[rel])
    rate = hits / total
    criterion("single-scene overfit sanity", rate >= 0.9,
              f"self-consistency on the overfit scene {rate:.3f} (>=0.9)")
