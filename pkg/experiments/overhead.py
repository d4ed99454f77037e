import logging

import pandas as pd

from cciattest.codecs import CodecId
from cciattest.config import PROFILES
from cciattest.image import pack
from cciattest.protocol import auto_calibrate, feasibility_sweep, plan_attack
from cciattest.reports import REFERENCE_FIGURES, sweep_frame
from cciattest.samples import sample_image
from cciattest.timing import MB

logging.basicConfig(level=logging.INFO)

# %%
ci = sample_image("multi-hop-oscilloscope")
profile = PROFILES["slow-node"]
packed = pack(ci, CodecId.CANONICAL_HUFFMAN, 512)
t_em, t_pm = auto_calibrate(packed, profile)
print(f"T_em={t_em:.3f} s T_pm={t_pm:.3f} s")

# %% Strongest bundled attacker against Huffman blocks of 512 bytes
plan = plan_attack(
    ci, CodecId.CANONICAL_HUFFMAN, 512, CodecId.LZ_GENERAL, 2048, profile
)
print(plan.model_dump_json(indent=2))
print(
    f"overhead {plan.memory_overhead_bytes / MB:.1f} MB, published "
    f"{REFERENCE_FIGURES['overhead_pzip512_ppmz2048_bytes'] / MB:.1f} MB"
)

# %% Which honest block sizes leave an undetectable attack
plans = feasibility_sweep(
    ci,
    CodecId.CANONICAL_HUFFMAN,
    [64, 128, 256, 512, 1024, 2048],
    list(CodecId),
    [512, 1024, 2048],
    profile,
)
frame = sweep_frame(plans)
with pd.option_context("display.max_rows", None):
    print(frame[frame["blocks_needed"].notna()])

# %%
undetected = frame[frame["blocks_needed"].notna() & ~frame["detectable"]]
print(undetected.groupby("s_h").size())
