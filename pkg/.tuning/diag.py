import time, numpy as np
from textdet.net import NetConfig, TinyTextNet
from textdet.training import build_targets, compute_batch_loss, adam_step, AdamState, save_checkpoint
from textdet.labelgen import LabelConfig
from textdet.decode import DecodeConfig, DecodeStats, decode
from textdet.nms import MergeConfig, locality_aware_nms
from textdet.metrics import evaluate
from textdet.synth import SceneConfig, generate_scene
from textdet.losses import LossConfig

cfg = SceneConfig(image_size=128, seed=42)
train_ds = [generate_scene(cfg, i) for i in range(256)]
test_ds = [generate_scene(cfg, 256 + i) for i in range(32)]
label_cfg = LabelConfig(image_height=128, image_width=128)
net_cfg = NetConfig(head='rbox', input_size=128)
net = TinyTextNet(net_cfg, seed=42)
targets = [build_targets(q, label_cfg, 'rbox') for _, q in train_ds]
images = [img for img, _ in train_ds]
rng = np.random.default_rng(42)
adam = AdamState()
lc = LossConfig()
t0=time.time()
for step in range(1, 2001):
    idx = rng.integers(0, 256, size=8)
    x = np.stack([images[i] for i in idx]).astype(np.float32)
    score, geo = net.forward(x)
    total, sl, gl, ds_, dg_ = compute_batch_loss(net, score, geo, [targets[i] for i in idx], lc)
    grads = net.backward(ds_, dg_)
    adam_step(net.params, grads, adam)
    if step % 500 == 0: print(f"step {step} loss {total:.4f} s {sl:.4f} g {gl:.4f} {time.time()-t0:.0f}s", flush=True)
save_checkpoint('/root/pkg/.tuning/diag.ckpt', net)

# diagnostics on first 5 test images
dc, mc = DecodeConfig(), MergeConfig()
for k in range(5):
    img, gts = test_ds[k]
    s, g = net.forward(img[None].astype(np.float32))
    out = net.dense_outputs(s, g)
    st = DecodeStats()
    cands = decode(out, dc, st)
    kept, ms = locality_aware_nms(cands, mc)
    r = evaluate(kept, list(gts), 0.5)
    # compare score map with target
    tgt_score, tmaps = build_targets(list(gts), label_cfg, 'rbox')
    pos_pred = (out.score >= 0.8).sum(); pos_gt = (tgt_score > 0.5).sum()
    ious = [max((evaluate([d], [q], 0.0).matches[0][2] if evaluate([d],[q],0.0).matches else 0.0) for q in gts) for d in kept]
    print(f"img{k}: gt={len(gts)} cand={len(cands)} kept={len(kept)} matches={len(r.matches)} "
          f"pos_pred={pos_pred} pos_gt={pos_gt} skipped={st.skipped_malformed} kept_ious={[f'{i:.2f}' for i in ious]}")
