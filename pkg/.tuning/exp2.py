import sys, time, numpy as np
from textdet.net import NetConfig, TinyTextNet
from textdet.training import build_targets, compute_batch_loss, adam_step, AdamState, save_checkpoint
from textdet.labelgen import LabelConfig
from textdet.decode import DecodeConfig, decode
from textdet.nms import MergeConfig, locality_aware_nms
from textdet.metrics import evaluate
from textdet.synth import SceneConfig, generate_scene
from textdet.losses import LossConfig

stem = tuple(int(v) for v in sys.argv[1].split(','))
merge = tuple(int(v) for v in sys.argv[2].split(','))
steps = int(sys.argv[3]); decay = int(sys.argv[4])
head = sys.argv[5] if len(sys.argv)>5 else 'rbox'
cfg = SceneConfig(image_size=128, seed=42)
train_ds = [generate_scene(cfg, i) for i in range(256)]
test_ds = [generate_scene(cfg, 256+i) for i in range(32)]
label_cfg = LabelConfig(image_height=128, image_width=128)
net = TinyTextNet(NetConfig(head=head, input_size=128, stem_channels=stem, merge_channels=merge), seed=42)
if head == 'rbox':
    net.params['head_g.b'][:4] = -1.0
orig_forward = net.forward
def forward(x):
    return orig_forward(np.asarray(x, dtype=np.float32) - 0.5)
net.forward = forward
targets = [build_targets(q, label_cfg, head) for _, q in train_ds]
images = [img for img, _ in train_ds]
rng = np.random.default_rng(42)
adam = AdamState(decay_every=decay); lc = LossConfig()
t0=time.time()
for step in range(1, steps+1):
    idx = rng.integers(0, 256, size=8)
    x = np.stack([images[i] for i in idx]).astype(np.float32)
    score, geo = net.forward(x)
    total, sl, gl, ds_, dg_ = compute_batch_loss(net, score, geo, [targets[i] for i in idx], lc)
    grads = net.backward(ds_, dg_)
    adam_step(net.params, grads, adam)
    if step % 500 == 0: print(f"step {step} loss {total:.4f} s {sl:.4f} g {gl:.4f} {time.time()-t0:.0f}s", flush=True)
train_time = time.time()-t0
save_checkpoint('/root/pkg/.tuning/last2.ckpt', net)
dc, mc = DecodeConfig(), MergeConfig()
tp=fp=fn=0
for img,gts in test_ds:
    s,g = net.forward(img[None].astype(np.float32))
    dets = decode(net.dense_outputs(s,g), dc)
    kept,_ = locality_aware_nms(dets, mc)
    r = evaluate(kept, list(gts), 0.5)
    tp+=len(r.matches); fp+=len(kept)-len(r.matches); fn+=len(gts)-len(r.matches)
p=tp/max(1,tp+fp); rcl=tp/max(1,tp+fn)
f = 2*p*rcl/(p+rcl) if p+rcl else 0.0
print(f"stem={stem} merge={merge} steps={steps} decay={decay} head={head}: F={f:.4f} P={p:.4f} R={rcl:.4f} train_s={train_time:.0f}")
