"""Strong and weak verdicts on a small AQI forecast, then the levels that guarantee them.

Run with ``python demos/01_verdicts_and_ranges.py``.
"""
import numpy as np

from stlu import (Flowpipe, confidence_interval, parse, strong_range, verdict, weak_range)

# three predicted hours of an air-quality index: mean and spread per hour,
# estimated from 20 Monte-Carlo samples
fp = Flowpipe({"aqi": [42.0, 47.5, 49.0]}, {"aqi": [3.0, 6.0, 9.0]}, sample_count=20)

print("per-hour 95% intervals")
for t in range(fp.length):
    ci = confidence_interval(fp.point("aqi", t), fp.sample_count, 0.95)
    print(f"  t={t}  [{ci.lo:6.2f}, {ci.hi:6.2f}]")

print()
for text in ("always[0,2] aqi < 55 @ 0.95",
             "always[0,2] aqi < 50 @ 0.95",
             "always[0,2] aqi < 45 @ 0.95",
             "eventually[0,2] aqi > 48 @ 0.95"):
    v = verdict(parse(text), fp)
    print(f"{text:34s} strong={v.strong!s:5s} weak={v.weak}")

# a higher level widens every interval, so a strong claim gets harder and a weak one easier
print()
phi = parse("always[0,2] aqi < 50 @ ?")
for eps in (0.5, 0.9, 0.99, 0.999):
    v = verdict(phi, fp, eps=eps)
    print(f"eps={eps:<6} strong={v.strong!s:5s} weak={v.weak}")

# the ranges answer the same question for every level at once
print()
print("strong range:", strong_range(phi, fp))
print("weak range:  ", weak_range(phi, fp))

# negation swaps the roles: not-phi holds strongly exactly where phi fails weakly
neg = parse("not (always[0,2] aqi < 50)")
print("strong range of the negation:", strong_range(neg, fp))

# nonlinear atoms go through the same machinery
band = parse("always[0,2] (aqi - 46)^2 < 100")
print("strong range, |aqi - 46| < 10:", strong_range(band, fp))
print("weak range,   |aqi - 46| < 10:", weak_range(band, fp))

# sanity: a level drawn from inside the strong range does give a strong verdict
r = strong_range(phi, fp)
if not r.is_empty:
    eps = float(np.mean([r.inf(), r.sup()]))
    print(f"check at eps={eps:.4f}:", verdict(phi, fp, eps=eps))
