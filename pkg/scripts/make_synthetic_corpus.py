"""Regenerate the bundled synthetic trace corpus under traces/synthetic/.

Twenty 20-second CSV traces, all inside the corpus eligibility band
(time-weighted mean under 3 Mbps, minimum above 0.2 Mbps): ten square
waves covering different floors, ceilings, and switching periods, and
ten ramps sweeping between scarce and plentiful capacity in both
directions. Deterministic; running it twice writes identical files.
"""
from __future__ import annotations

import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from blocksched.traces import synthesize_trace, trace_passes_filter  # noqa: E402
from blocksched.units import bytes_per_s_to_mbps  # noqa: E402

DURATION_S = 20.0

SQUARE_WAVES = [
    ("sq01", 0.3, 1.9, 2.0),
    ("sq02", 0.3, 2.5, 4.0),
    ("sq03", 0.4, 2.2, 2.0),
    ("sq04", 0.4, 2.8, 4.0),
    ("sq05", 0.5, 1.9, 4.0),
    ("sq06", 0.5, 2.5, 2.0),
    ("sq07", 0.6, 2.2, 4.0),
    ("sq08", 0.6, 2.8, 2.0),
    ("sq09", 0.7, 2.0, 4.0),
    ("sq10", 0.7, 2.6, 2.0),
]

RAMPS = [
    ("ramp01", 0.3, 2.8),
    ("ramp02", 2.8, 0.3),
    ("ramp03", 0.25, 1.5),
    ("ramp04", 1.5, 0.25),
    ("ramp05", 0.4, 2.0),
    ("ramp06", 2.0, 0.4),
    ("ramp07", 0.5, 2.5),
    ("ramp08", 2.5, 0.5),
    ("ramp09", 0.6, 2.6),
    ("ramp10", 2.6, 0.6),
]


def main() -> int:
    out_dir = os.path.join(os.path.dirname(__file__), "..", "traces", "synthetic")
    os.makedirs(out_dir, exist_ok=True)
    manifest = []
    for name, low, high, period in SQUARE_WAVES:
        trace = synthesize_trace("square_wave", DURATION_S, low_mbps=low, high_mbps=high,
                                 period_s=period, source_tag=name)
        manifest.append((name, trace))
    for name, start, end in RAMPS:
        trace = synthesize_trace("ramp", DURATION_S, start_mbps=start, end_mbps=end,
                                 source_tag=name)
        manifest.append((name, trace))
    for name, trace in manifest:
        if not trace_passes_filter(trace):
            raise SystemExit("generated trace %s falls outside the eligibility band" % name)
        trace.write_csv(os.path.join(out_dir, name + ".csv"))
        print(json.dumps({
            "trace": name,
            "mean_mbps": round(bytes_per_s_to_mbps(trace.mean_throughput()), 4),
            "min_mbps": round(bytes_per_s_to_mbps(trace.min_throughput()), 4),
            "duration_s": trace.duration_s,
        }, sort_keys=True))
    print("wrote %d traces to %s" % (len(manifest), os.path.normpath(out_dir)))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
