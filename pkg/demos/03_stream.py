"""The sliding-window monitor on the seeded AR(1) fixture, called through the CLI.

Equivalent shell command::

    stlu stream --trace tests/data/ar1_trace.csv --spec tests/data/requirements.spec \\
        --window 24 --horizon 8 --stride 4 --srt gaussian_dropconnect --p 0.8 \\
        --n-samples 64 --order 1 --seed 7
"""
import io
import json
from contextlib import redirect_stdout
from pathlib import Path

from stlu.cli import main

data = Path(__file__).resolve().parent.parent / "tests" / "data"
print(open(data / "requirements.spec").read())

buf = io.StringIO()
with redirect_stdout(buf):
    code = main(["stream", "--trace", str(data / "ar1_trace.csv"),
                 "--spec", str(data / "requirements.spec"), "--window", "24", "--horizon", "8",
                 "--stride", "4", "--srt", "gaussian_dropconnect", "--p", "0.8",
                 "--n-samples", "64", "--order", "1", "--seed", "7"])
lines = [json.loads(l) for l in buf.getvalue().splitlines()]

ids = list(lines[0]["results"])
print("step   t  " + "  ".join(f"{i:>8s}" for i in ids))
for row in lines[:-1]:
    cells = []
    for i in ids:
        r = row["results"][i]
        if r["mode"] == "range":
            cells.append(f"{r['strong_range'][0][1]:8.3f}" if r["strong_range"] else "      []")
        else:
            cells.append(f"{'S' if r['strong'] else '-'}{'W' if r['weak'] else '-':>7s}")
    print(f"{row['step']:4d} {row['t']:3d}  " + "  ".join(cells))
print()
print("summary:", lines[-1]["summary"], "exit code", code)
