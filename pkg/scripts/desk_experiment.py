#!/usr/bin/env python3
"""Train the window regressor on synthetic walking and score it against
the strapdown and step-counting baselines on held-out tracks.

Drives the installed command-line interface end to end, so the artifacts
(manifests, weight file, loss history, track CSVs, reports) are exactly
what the pipeline produces in normal use:

    python3 scripts/desk_experiment.py --out /tmp/desk

At the defaults (30 min of training data, 8 epochs) this takes roughly
12 minutes on one CPU core. For a fast smoke run:

    python3 scripts/desk_experiment.py --out /tmp/desk --minutes 2 --epochs 2
"""

import argparse
import json
import math
import sys
from pathlib import Path

from odokit.cli import main as cli
from odokit.dataio import save_noise, save_profile
from odokit.simulate import MotionProfile, default_consumer_noise

SEGMENT_S = 300.0
HELDOUT_S = 120.0


def run(argv: list[str]) -> None:
    print("+ odokit " + " ".join(argv))
    code = cli(argv)
    if code != 0:
        sys.exit(code)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--minutes", type=float, default=30.0,
                    help="training corpus length (default 30)")
    ap.add_argument("--epochs", type=int, default=8)
    ap.add_argument("--batch-size", type=int, default=64)
    ap.add_argument("--stride", type=int, default=100,
                    help="window stride while building training data")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    segment = min(SEGMENT_S, args.minutes * 60.0)
    segments = math.ceil(args.minutes * 60.0 / segment)

    walk = MotionProfile(kind="walk", duration=segment, rate=100,
                         speed_range=(0.8, 1.8), step_freq=2.0)
    heldout_walk = MotionProfile(kind="walk", duration=HELDOUT_S, rate=100,
                                 speed_range=(0.8, 1.8), step_freq=2.0)
    trolley = MotionProfile(kind="trolley", duration=HELDOUT_S, rate=100,
                            speed_range=(0.5, 1.5))
    save_profile(out / "walk_train.json", walk)
    save_profile(out / "walk_heldout.json", heldout_walk)
    save_profile(out / "trolley_heldout.json", trolley)
    save_noise(out / "noise.json", default_consumer_noise(0))

    for k in range(segments):
        run(["simulate", "--profile", str(out / "walk_train.json"),
             "--noise", str(out / "noise.json"), "--seed", str(100 + k),
             "--out", str(out / "train" / f"g{k:02d}")])
    run(["simulate", "--profile", str(out / "walk_heldout.json"),
         "--noise", str(out / "noise.json"), "--seed", "999",
         "--out", str(out / "heldout" / "walk")])
    run(["simulate", "--profile", str(out / "trolley_heldout.json"),
         "--noise", str(out / "noise.json"), "--seed", "998",
         "--out", str(out / "heldout" / "trolley")])

    run(["train", "--data", str(out / "train"),
         "--epochs", str(args.epochs), "--batch-size", str(args.batch_size),
         "--stride", str(args.stride), "--seed", str(args.seed),
         "--out", str(out / "model")])

    for tag in ("walk", "trolley"):
        tracks = out / "tracks" / tag
        data = out / "heldout" / tag
        for tracker in ("sins", "pdr"):
            run(["track", "--data", str(data), "--tracker", tracker,
                 "--out", str(tracks)])
        run(["track", "--data", str(data), "--tracker", "ionet",
             "--weights", str(out / "model" / "weights.json"),
             "--mode", "dense", "--out", str(tracks)])
        run(["eval", "--truth", str(data / "truth.csv"),
             "--est", f"sins={tracks / 'sins_track.csv'}",
             "--est", f"pdr={tracks / 'pdr_track.csv'}",
             "--est", f"ionet={tracks / 'ionet_track.csv'}",
             "--grid-hz", "1", "--marks", "20,50,100",
             "--out", str(out / "eval" / tag)])

    print()
    print(f"{'track':<10}{'tracker':<9}{'p50 m':>10}{'p90 m':>10}"
          f"{'endpoint m':>12}")
    for tag in ("walk", "trolley"):
        report = json.loads(
            (out / "eval" / tag / "report.json").read_text())
        for name in ("sins", "pdr", "ionet"):
            entry = report["trackers"][name]
            print(f"{tag:<10}{name:<9}{entry['p50']:>10.2f}"
                  f"{entry['p90']:>10.2f}{entry['endpoint_error']:>12.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
