"""Monte-Carlo flowpipes from a masked AR model, and choosing a mask schema.

The trace is synthetic: the deviation of a pollutant reading from its seasonal
baseline, modelled as a mean-reverting AR(1) series around zero.  Masks scale
the AR weights, so a series centred on its baseline keeps the perturbed
rollouts on a sensible scale.  Each window of history is fitted, then rolled forward under one of four mask schemas; the losses
score how well the resulting flowpipes describe what actually happened.
"""
import numpy as np

from stlu import (SRT, LabeledPair, Sample, Schema, Trace, ar_generator, eval_metrics, fit_ar,
                  loss_cf, loss_sat, mc_predict, parse, select_schema)
from stlu.predictor import stream_rng

rng = stream_rng(3)
y = [0.0]
for _ in range(299):
    y.append(0.8 * y[-1] + 3 * rng.normal())
y = np.array(y)

model = fit_ar(y[:200], order=2)
print("fitted model:", model)

history, future = y[176:200], y[200:208]
for srt in SRT:
    fp = mc_predict(model, history, 8, Schema(srt, 0.8), 200, seed=1)
    print(f"{srt.value:22s} mean[7]={fp.mean('x')[7]:6.2f}  std[7]={fp.std('x')[7]:5.2f}")

# one pair, both losses
phi = parse("always[0,7] x < 6")
fp = mc_predict(model, history, 8, Schema(SRT.GAUSSIAN_DROPCONNECT, 0.8), 200, seed=1)
pair = LabeledPair(fp, Trace({"x": future}))
print()
print("target satisfies phi:", bool(np.all(future < 6)))
print("loss_sat at eps=0.9:", round(loss_sat(pair, phi, 0.9), 4))
print("loss_cf:", round(loss_cf(pair, phi), 4))

# schema selection over windows cut from the held-out part of the series
samples = [Sample(Trace({"x": y[t - 24:t]}), Trace({"x": y[t:t + 8]}), f"w{t}")
           for t in range(200, 292, 8)]
candidates = [(srt, ar_generator(srt, 100, seed=7, order=2)) for srt in SRT]
res = select_schema(candidates, samples, phi, "cf", p_grid=(0.3, 0.5, 0.7, 0.9))
print()
print("average L_cf by schema and keep probability")
for srt, row in res.table.items():
    print(f"  {srt.value:22s}", "  ".join(f"p={p}: {v:.4f}" for p, v in row.items()))
print("selected:", res.srt.value, "p =", res.p, "loss =", round(res.loss, 4))

gen = dict(candidates)[res.srt]
pairs = [LabeledPair(gen(s.history, 8, res.p), s.target) for s in samples]
m = eval_metrics(pairs, phi, 0.9)
print("test metrics:", {k: round(v, 4) if isinstance(v, float) else v
                        for k, v in m.to_dict().items()})
