import pandas as pd

from cciattest.cache import looped_trace, random_trace, run_trace
from cciattest.codecs import CodecId, build_lat, compress_blocks
from cciattest.config import PROFILES
from cciattest.reports import cache_frame
from cciattest.samples import sample_image

# %%
ci = sample_image("base-station")
profile = PROFILES["slow-node"]
traces = {
    "looped": looped_trace(len(ci)),
    "random": random_trace(len(ci), 20000),
}

# %%
frames = []
for trace_name, trace in traces.items():
    reports = []
    for s in (256, 512, 1024):
        img = compress_blocks(ci.data, CodecId.LZ_GENERAL, s)
        lat = build_lat(img)
        reports.extend(
            run_trace(trace, capacity, img, lat, profile)
            for capacity in (1, 2, 4, 8)
        )
    frames.append(cache_frame(reports).assign(trace=trace_name))
frame = pd.concat(frames, ignore_index=True)

# %% Misses per block size and cache capacity
print(
    frame.pivot_table(
        index=["trace", "s_h"], columns="capacity", values="misses"
    )
)
